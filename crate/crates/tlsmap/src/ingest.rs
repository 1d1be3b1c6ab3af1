//! Domain lists, labels and AS-number enrichment.
//!
//! Input formats:
//! - domain list CSV: `domain[,ip]`, UTF-8, LF or CRLF, optional `domain,ip`
//!   header row. Rows without an IP are kept but flagged unresolved and are
//!   skipped by the fetch/scan stages. When a domain resolves to several
//!   addresses upstream, the single provided IP wins.
//! - ASN database: pyasn-style text, one `<prefix>\t<asn>` per line, lines
//!   starting with `;` or `#` are comments. IPv6 prefixes are not supported;
//!   looking up an IPv6 address yields no match.
//!
//! Domains are lowercased and punycode-normalized at ingest so identical
//! names always dedup to the same record key.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::net::{IpAddr, Ipv4Addr};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Classification label carried through the whole pipeline.
///
/// Encodes to the integers 0 (good), 1 (bad) and 3 (unknown); decoding any
/// other integer is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Good,
    Bad,
    Unknown,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Good => 0,
            Label::Bad => 1,
            Label::Unknown => 3,
        }
    }

    pub fn from_u8(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Label::Good),
            1 => Ok(Label::Bad),
            3 => Ok(Label::Unknown),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Good => "good",
            Label::Bad => "bad",
            Label::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = u8::deserialize(deserializer)?;
        Label::from_u8(value).map_err(serde::de::Error::custom)
    }
}

/// Parse a label from `good`/`bad`/`unknown` (case-insensitive) or `0`/`1`/`3`.
pub fn parse_label(text: &str) -> Result<Label> {
    match text.trim().to_ascii_lowercase().as_str() {
        "good" | "0" => Ok(Label::Good),
        "bad" | "1" => Ok(Label::Bad),
        "unknown" | "3" => Ok(Label::Unknown),
        _ => Err(Error::UnknownLabel(text.to_string())),
    }
}

/// One scanned (or to-be-scanned) domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub domain: String,
    pub ip: Option<Ipv4Addr>,
    pub source: String,
    pub label: Label,
    pub asn: Option<u32>,
}

impl DomainRecord {
    /// Records without an IP are excluded from fetch/scan stages.
    pub fn is_resolved(&self) -> bool {
        self.ip.is_some()
    }
}

/// Lowercase and punycode-normalize a domain name.
///
/// Rejects empty names and names containing whitespace.
pub fn normalize_domain(raw: &str) -> Result<String> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(Error::Invalid("domain is empty".into()));
    }
    if trimmed.chars().any(char::is_whitespace) {
        return Err(Error::Invalid(format!(
            "domain {trimmed:?} contains whitespace"
        )));
    }
    idna::domain_to_ascii(trimmed)
        .map_err(|e| Error::Invalid(format!("domain {trimmed:?} fails punycode conversion: {e}")))
}

/// IPv4 longest-prefix-match table mapping prefixes to AS numbers.
///
/// Immutable after load; lookups are deterministic, the single longest
/// matching prefix wins.
#[derive(Debug, Clone)]
pub struct AsnDatabase {
    /// One map per prefix length: masked network -> ASN.
    tables: Vec<HashMap<u32, u32>>,
    entry_count: usize,
    skipped_lines: usize,
}

impl AsnDatabase {
    fn empty() -> Self {
        AsnDatabase {
            tables: (0..=32).map(|_| HashMap::new()).collect(),
            entry_count: 0,
            skipped_lines: 0,
        }
    }

    fn insert(&mut self, net: Ipv4Addr, len: u8, asn: u32) {
        let masked = mask_ip(u32::from(net), len);
        if self.tables[len as usize].insert(masked, asn).is_none() {
            self.entry_count += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.entry_count
    }

    pub fn is_empty(&self) -> bool {
        self.entry_count == 0
    }

    /// Malformed lines skipped during load.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    /// AS number of the longest prefix containing `ip`, if any.
    pub fn lookup(&self, ip: Ipv4Addr) -> Option<u32> {
        let bits = u32::from(ip);
        for len in (0..=32u8).rev() {
            let table = &self.tables[len as usize];
            if table.is_empty() {
                continue;
            }
            if let Some(&asn) = table.get(&mask_ip(bits, len)) {
                return Some(asn);
            }
        }
        None
    }

    /// Like [`lookup`](Self::lookup) but absent for any non-IPv4 address.
    pub fn lookup_ip(&self, ip: IpAddr) -> Option<u32> {
        match ip {
            IpAddr::V4(v4) => self.lookup(v4),
            IpAddr::V6(_) => None,
        }
    }
}

fn mask_ip(bits: u32, len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        bits & (u32::MAX << (32 - len as u32))
    }
}

/// Load a pyasn-style `prefix\tasn` text file.
///
/// Comment (`;`/`#`) and blank lines are ignored, malformed data lines are
/// counted and skipped, and a file with zero valid entries is an error.
pub fn load_asn_db(path: impl AsRef<Path>) -> Result<AsnDatabase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut db = AsnDatabase::empty();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') || trimmed.starts_with('#') {
            continue;
        }
        match parse_asn_line(line) {
            Some((net, len, asn)) => db.insert(net, len, asn),
            None => db.skipped_lines += 1,
        }
    }
    if db.is_empty() {
        return Err(Error::format(
            path,
            0,
            "no valid prefix entries found".to_string(),
        ));
    }
    Ok(db)
}

fn parse_asn_line(line: &str) -> Option<(Ipv4Addr, u8, u32)> {
    let (prefix, asn) = line.split_once('\t')?;
    let asn: u32 = asn.trim().parse().ok()?;
    let (net, len) = prefix.trim().split_once('/')?;
    let net: Ipv4Addr = net.parse().ok()?;
    let len: u8 = len.parse().ok()?;
    if len > 32 {
        return None;
    }
    Some((net, len, asn))
}

/// Load a `domain[,ip]` CSV, tagging every record with `source` and `label`.
///
/// The record order is randomized under `seed` so repeated scans distribute
/// load differently while staying reproducible. An optional literal
/// `domain[,ip]` header row is skipped.
pub fn load_domains(
    path: impl AsRef<Path>,
    source: &str,
    label: Label,
    seed: u64,
) -> Result<Vec<DomainRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 1;
        let row = row.map_err(|e| Error::format(path, line, e.to_string()))?;
        if row.is_empty() || (row.len() == 1 && row[0].trim().is_empty()) {
            continue;
        }
        if row.len() > 2 {
            return Err(Error::format(
                path,
                line,
                format!("expected domain[,ip], found {} columns", row.len()),
            ));
        }
        let raw_domain = row[0].trim();
        if idx == 0 && raw_domain.eq_ignore_ascii_case("domain") {
            continue; // header row
        }
        let domain = normalize_domain(raw_domain)
            .map_err(|e| Error::format(path, line, e.to_string()))?;
        let ip = match row.get(1).map(str::trim) {
            None | Some("") => None,
            Some(text) => Some(
                text.parse::<Ipv4Addr>()
                    .map_err(|e| Error::format(path, line, format!("bad ip {text:?}: {e}")))?,
            ),
        };
        records.push(DomainRecord {
            domain,
            ip,
            source: source.to_string(),
            label,
            asn: None,
        });
    }

    SplitMix64::new(seed).shuffle(&mut records);
    Ok(records)
}

/// Attach AS numbers to every resolved record in place.
pub fn enrich_asn(records: &mut [DomainRecord], db: &AsnDatabase) {
    for record in records {
        record.asn = record.ip.and_then(|ip| db.lookup(ip));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::TempFile;

    fn tmp_file(contents: &str) -> TempFile {
        TempFile::with_contents(contents)
    }

    #[test]
    fn parse_label_accepts_names_and_codes() {
        assert_eq!(parse_label("good").unwrap(), Label::Good);
        assert_eq!(parse_label("GOOD").unwrap(), Label::Good);
        assert_eq!(parse_label("unknown").unwrap(), Label::Unknown);
        assert_eq!(parse_label("0").unwrap(), Label::Good);
        assert_eq!(parse_label("1").unwrap(), Label::Bad);
        assert_eq!(parse_label("3").unwrap(), Label::Unknown);
        assert_eq!(parse_label("good").unwrap().as_u8(), 0);
        assert_eq!(parse_label("unknown").unwrap().as_u8(), 3);
    }

    #[test]
    fn parse_label_rejects_other_codes() {
        assert!(matches!(parse_label("2"), Err(Error::UnknownLabel(_))));
        assert!(matches!(parse_label("evil"), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn label_round_trips_through_text_and_int() {
        for label in [Label::Good, Label::Bad, Label::Unknown] {
            assert_eq!(parse_label(label.as_str()).unwrap(), label);
            assert_eq!(Label::from_u8(label.as_u8()).unwrap(), label);
        }
    }

    #[test]
    fn label_serializes_as_paper_integers() {
        assert_eq!(serde_json::to_string(&Label::Unknown).unwrap(), "3");
        assert_eq!(serde_json::from_str::<Label>("1").unwrap(), Label::Bad);
        assert!(serde_json::from_str::<Label>("2").is_err());
    }

    #[test]
    fn asn_single_entry_lookup() {
        let f = tmp_file("1.0.0.0/24\t13335\n");
        let db = load_asn_db(f.path()).unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db.lookup("1.0.0.1".parse().unwrap()), Some(13335));
        assert_eq!(db.lookup("8.8.8.8".parse().unwrap()), None);
    }

    #[test]
    fn asn_longest_prefix_wins() {
        let f = tmp_file("1.0.0.0/8\t100\n1.0.0.0/24\t13335\n");
        let db = load_asn_db(f.path()).unwrap();
        assert_eq!(db.lookup("1.0.0.1".parse().unwrap()), Some(13335));
        assert_eq!(db.lookup("1.2.3.4".parse().unwrap()), Some(100));
    }

    #[test]
    fn asn_empty_file_is_format_error() {
        let f = tmp_file("");
        assert!(matches!(load_asn_db(f.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn asn_partial_parse_reports_skips() {
        let f = tmp_file("1.0.0.0/24\t13335\nnot a line\n; comment\n# comment\n");
        let db = load_asn_db(f.path()).unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db.skipped_lines(), 1);
    }

    #[test]
    fn asn_ipv6_lookup_is_absent() {
        let f = tmp_file("1.0.0.0/24\t13335\n");
        let db = load_asn_db(f.path()).unwrap();
        assert_eq!(db.lookup_ip("::1".parse().unwrap()), None);
    }

    #[test]
    fn asn_zero_length_prefix_matches_everything() {
        let f = tmp_file("0.0.0.0/0\t64496\n10.0.0.0/8\t64500\n");
        let db = load_asn_db(f.path()).unwrap();
        assert_eq!(db.lookup("10.1.1.1".parse().unwrap()), Some(64500));
        assert_eq!(db.lookup("99.99.99.99".parse().unwrap()), Some(64496));
    }

    #[test]
    fn load_domains_maps_labels() {
        let f = tmp_file("example.com,93.184.216.34\n");
        let records = load_domains(f.path(), "urlhaus", Label::Bad, 1).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].label.as_u8(), 1);
        assert_eq!(records[0].ip, Some("93.184.216.34".parse().unwrap()));
        assert!(records[0].is_resolved());
    }

    #[test]
    fn load_domains_same_seed_same_order() {
        let contents = "a.example,10.0.0.1\nb.example,10.0.0.2\nc.example,10.0.0.3\n";
        let f = tmp_file(contents);
        let first = load_domains(f.path(), "s", Label::Good, 99).unwrap();
        let second = load_domains(f.path(), "s", Label::Good, 99).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn load_domains_flags_unresolved() {
        let f = tmp_file("example.com\n");
        let records = load_domains(f.path(), "s", Label::Good, 1).unwrap();
        assert_eq!(records.len(), 1);
        assert!(!records[0].is_resolved());
    }

    #[test]
    fn load_domains_normalizes_case_and_unicode() {
        let f = tmp_file("EXAMPLE.com,1.2.3.4\nbücher.example,1.2.3.5\n");
        let mut records = load_domains(f.path(), "s", Label::Good, 1).unwrap();
        records.sort_by(|a, b| a.domain.cmp(&b.domain));
        assert_eq!(records[0].domain, "example.com");
        assert_eq!(records[1].domain, "xn--bcher-kva.example");
    }

    #[test]
    fn shuffle_preserves_multiset() {
        let contents: String = (0..50).map(|i| format!("d{i}.example,10.0.0.{i}\n")).collect();
        let f = tmp_file(&contents);
        for seed in [0u64, 1, 2, 12345] {
            let records = load_domains(f.path(), "s", Label::Good, seed).unwrap();
            let mut names: Vec<_> = records.iter().map(|r| r.domain.clone()).collect();
            names.sort();
            let expected: Vec<_> = {
                let mut v: Vec<_> = (0..50).map(|i| format!("d{i}.example")).collect();
                v.sort();
                v
            };
            assert_eq!(names, expected);
        }
    }

    #[test]
    fn enrich_asn_fills_resolved_records() {
        let f = tmp_file("10.0.0.0/8\t64500\n");
        let db = load_asn_db(f.path()).unwrap();
        let mut records = vec![
            DomainRecord {
                domain: "a.example".into(),
                ip: Some("10.1.2.3".parse().unwrap()),
                source: "s".into(),
                label: Label::Good,
                asn: None,
            },
            DomainRecord {
                domain: "b.example".into(),
                ip: None,
                source: "s".into(),
                label: Label::Good,
                asn: None,
            },
        ];
        enrich_asn(&mut records, &db);
        assert_eq!(records[0].asn, Some(64500));
        assert_eq!(records[1].asn, None);
    }

    #[test]
    fn lpm_matches_linear_scan_on_random_fixture() {
        // Oracle: scan every entry, keep the longest matching prefix.
        let mut rng = SplitMix64::new(0xA5);
        let mut lines = String::new();
        let mut entries: Vec<(u32, u8, u32)> = Vec::new();
        for i in 0..10_000u32 {
            let net = rng.next_u64() as u32;
            let len = (rng.next_below(33)) as u8;
            let masked = mask_ip(net, len);
            let ip = Ipv4Addr::from(masked);
            lines.push_str(&format!("{ip}/{len}\t{i}\n"));
            entries.push((masked, len, i));
        }
        let f = tmp_file(&lines);
        let db = load_asn_db(f.path()).unwrap();
        for _ in 0..2_000 {
            let probe = rng.next_u64() as u32;
            let expected = entries
                .iter()
                .filter(|(net, len, _)| mask_ip(probe, *len) == *net)
                .max_by_key(|(net, len, asn)| (*len, std::cmp::Reverse((*net, *asn))))
                .map(|(_, _, asn)| *asn);
            let got = db.lookup(Ipv4Addr::from(probe));
            // Duplicate (net, len) pairs keep the last insert; compare presence
            // and prefix length instead of raw ASN when duplicates collide.
            match (expected, got) {
                (None, None) => {}
                (Some(_), Some(got_asn)) => {
                    let got_entry = entries
                        .iter()
                        .find(|(net, len, asn)| {
                            *asn == got_asn && mask_ip(probe, *len) == *net
                        })
                        .expect("returned ASN must come from a matching entry");
                    let max_len = entries
                        .iter()
                        .filter(|(net, len, _)| mask_ip(probe, *len) == *net)
                        .map(|(_, len, _)| *len)
                        .max()
                        .unwrap();
                    assert_eq!(got_entry.1, max_len, "must match the longest prefix");
                }
                (e, g) => panic!("lookup mismatch: expected {e:?}, got {g:?}"),
            }
        }
    }

    #[test]
    fn rejects_whitespace_domains() {
        assert!(normalize_domain("bad domain.example").is_err());
        assert!(normalize_domain("").is_err());
    }

    #[test]
    fn load_domains_rejects_three_columns() {
        let f = tmp_file("a.example,1.2.3.4,extra\n");
        assert!(matches!(
            load_domains(f.path(), "s", Label::Good, 1),
            Err(Error::Format { .. })
        ));
    }
}
