//! Raw active-scan fingerprint parsing.
//!
//! Grammar of a raw fingerprint, as produced by a ten-ClientHello active scan:
//!
//! ```text
//! fingerprint = segment ("|" segment)*
//! segment     = field ("_" field)*
//! alert field = "<" code            (only valid as the final field)
//! ```
//!
//! Splitting on `|` yields one segment per ClientHello sent. Within a
//! segment, fields are split on `_`; empty fields are preserved so parsing is
//! lossless and [`TlsFingerprint::to_raw`] reproduces the input byte for
//! byte. Sub-token separators `.` and `-` are *not* interpreted: each
//! `_`-delimited field is one opaque feature token.
//!
//! Category assignment is positional and is an assumption of this format
//! (the scan output does not label its columns): field 0 is the version,
//! field 1 the cipher, field 2 feeds the extensions set, field 3 the
//! encrypted-extensions set, field 4 the certificate-extensions set, and any
//! further fields feed the extensions set again. Alert codes (`<NN`) are
//! collected into their own set so an alert-only server still yields a
//! distinguishable fingerprint.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Standard SHA-256 digest, lowercase hex.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    let digest = Sha256::digest(bytes.as_ref());
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// One ClientHello response, kept verbatim for lossless re-serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelloSegment {
    fields: Vec<String>,
}

impl HelloSegment {
    fn parse(text: &str, index: usize) -> Result<Self> {
        if !text.chars().all(|c| (' '..='~').contains(&c)) {
            return Err(Error::MalformedSegment {
                index,
                message: "segment contains non-printable or non-ASCII bytes".into(),
            });
        }
        let fields: Vec<String> = text.split('_').map(str::to_string).collect();
        for (pos, field) in fields.iter().enumerate() {
            if field.starts_with('<') && pos + 1 != fields.len() {
                return Err(Error::MalformedSegment {
                    index,
                    message: format!("alert token {field:?} in non-final field {pos}"),
                });
            }
        }
        Ok(HelloSegment { fields })
    }

    /// All fields in wire order, alert token included.
    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    /// Alert code (digits after `<`) when the final field is an alert token.
    pub fn alert(&self) -> Option<&str> {
        self.fields
            .last()
            .and_then(|f| f.strip_prefix('<'))
    }

    fn feature_field(&self, position: usize) -> Option<&str> {
        let field = self.fields.get(position)?;
        if field.starts_with('<') {
            return None; // final alert slot
        }
        Some(field)
    }

    /// Version token, empty for alert-only segments.
    pub fn version(&self) -> &str {
        self.feature_field(0).unwrap_or("")
    }

    /// Cipher token, empty for alert-only segments.
    pub fn cipher(&self) -> &str {
        self.feature_field(1).unwrap_or("")
    }

    /// Feature fields after version and cipher, excluding any alert token.
    pub fn extension_groups(&self) -> impl Iterator<Item = (usize, &str)> {
        (2..self.fields.len()).filter_map(|pos| self.feature_field(pos).map(|f| (pos - 2, f)))
    }

    /// A handshake segment carries a version token; an alert segment carries
    /// only an alert code.
    pub fn is_handshake(&self) -> bool {
        !self.version().is_empty()
    }

    pub fn is_alert(&self) -> bool {
        !self.is_handshake() && self.alert().is_some()
    }

    pub fn to_raw(&self) -> String {
        self.fields.join("_")
    }
}

/// Deduplicated feature sets across all segments, first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupFeatures {
    pub versions: Vec<String>,
    pub ciphers: Vec<String>,
    pub extensions: Vec<String>,
    pub encrypted_extensions: Vec<String>,
    pub certificate_extensions: Vec<String>,
    pub alerts: Vec<String>,
}

impl DedupFeatures {
    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
            && self.ciphers.is_empty()
            && self.extensions.is_empty()
            && self.encrypted_extensions.is_empty()
            && self.certificate_extensions.is_empty()
            && self.alerts.is_empty()
    }
}

fn push_unique(set: &mut Vec<String>, token: &str) {
    if token.is_empty() {
        return;
    }
    if !set.iter().any(|t| t == token) {
        set.push(token.to_string());
    }
}

/// Union per category across segments, first-seen order preserved.
pub fn dedup_features(segments: &[HelloSegment]) -> DedupFeatures {
    let mut dedup = DedupFeatures::default();
    for segment in segments {
        push_unique(&mut dedup.versions, segment.version());
        push_unique(&mut dedup.ciphers, segment.cipher());
        for (group_index, token) in segment.extension_groups() {
            let set = match group_index {
                0 => &mut dedup.extensions,
                1 => &mut dedup.encrypted_extensions,
                2 => &mut dedup.certificate_extensions,
                _ => &mut dedup.extensions,
            };
            push_unique(set, token);
        }
        if let Some(code) = segment.alert() {
            push_unique(&mut dedup.alerts, code);
        }
    }
    dedup
}

/// Parsed fingerprint: segments, deduplicated feature sets, SHA-256 identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlsFingerprint {
    pub segments: Vec<HelloSegment>,
    pub dedup: DedupFeatures,
    pub sha256_id: String,
}

impl TlsFingerprint {
    /// Byte-exact inverse of [`parse_raw`].
    pub fn to_raw(&self) -> String {
        self.segments
            .iter()
            .map(HelloSegment::to_raw)
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Parse a raw pipe-delimited fingerprint string.
///
/// Parsing is lenient: unknown token shapes are kept verbatim. The SHA-256
/// identity is computed over the exact input bytes.
pub fn parse_raw(text: &str) -> Result<TlsFingerprint> {
    if text.is_empty() {
        return Err(Error::EmptyFingerprint);
    }
    let segments = text
        .split('|')
        .enumerate()
        .map(|(index, segment)| HelloSegment::parse(segment, index))
        .collect::<Result<Vec<_>>>()?;
    let dedup = dedup_features(&segments);
    Ok(TlsFingerprint {
        dedup,
        sha256_id: sha256_hex(text.as_bytes()),
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The ten-probe fingerprint from the scan documentation.
    pub const SAMPLE_RAW: &str = concat!(
        "771_1302_43.AwQ-51.23_0.-16.AAMCaDI__43.AwQ-51.23_-",
        "|771_c030_0.-1.AQ-16.AAkIaHR0cC8xLjE____",
        "|771_c02f_65281.-0.-11.AwABAg-35.-16.AAMCaDI____",
        "|771_1301_43.AwQ-51.29_0.-10.AAQAFwAd___-",
        "|______<40",
        "|771_1302_43.AwQ-51.23_0.-16.AAMCaDI__43.AwQ-51.23_-",
        "|______<70",
        "|771_c02c_0.-1.AQ-35.-16.AAMCaDI____",
        "|______<40",
        "|771_cca8_0.-16.AAMCaDI____",
    );

    #[test]
    fn sample_parses_to_ten_segments() {
        let fp = parse_raw(SAMPLE_RAW).unwrap();
        assert_eq!(fp.segments.len(), 10);
        let alerts: Vec<_> = fp
            .segments
            .iter()
            .filter(|s| s.is_alert())
            .map(|s| s.alert().unwrap().to_string())
            .collect();
        assert_eq!(alerts, vec!["40", "70", "40"]);
        assert_eq!(fp.dedup.alerts, vec!["40", "70"]);
    }

    #[test]
    fn sample_round_trips_byte_for_byte() {
        let fp = parse_raw(SAMPLE_RAW).unwrap();
        assert_eq!(fp.to_raw(), SAMPLE_RAW);
    }

    #[test]
    fn lone_alert_segment() {
        let fp = parse_raw("______<40").unwrap();
        assert_eq!(fp.segments.len(), 1);
        let seg = &fp.segments[0];
        assert!(seg.is_alert());
        assert_eq!(seg.alert(), Some("40"));
        assert_eq!(seg.version(), "");
        assert_eq!(seg.cipher(), "");
        assert!(fp.dedup.versions.is_empty());
        assert_eq!(fp.dedup.alerts, vec!["40"]);
        assert_eq!(fp.to_raw(), "______<40");
    }

    #[test]
    fn identical_text_identical_id() {
        let a = parse_raw(SAMPLE_RAW).unwrap();
        let b = parse_raw(SAMPLE_RAW).unwrap();
        assert_eq!(a.sha256_id, b.sha256_id);
        assert_eq!(a.sha256_id.len(), 64);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(parse_raw(""), Err(Error::EmptyFingerprint)));
    }

    #[test]
    fn non_ascii_is_malformed() {
        let err = parse_raw("771_1302|télé").unwrap_err();
        match err {
            Error::MalformedSegment { index, .. } => assert_eq!(index, 1),
            other => panic!("expected MalformedSegment, got {other:?}"),
        }
    }

    #[test]
    fn alert_in_middle_is_malformed() {
        assert!(matches!(
            parse_raw("771_<40_1302"),
            Err(Error::MalformedSegment { index: 0, .. })
        ));
    }

    #[test]
    fn segment_count_is_pipes_plus_one() {
        for text in ["771", "771|771", "a_b|c_d|e", SAMPLE_RAW] {
            let pipes = text.matches('|').count();
            let fp = parse_raw(text).unwrap();
            assert_eq!(fp.segments.len(), pipes + 1);
        }
    }

    #[test]
    fn dedup_collapses_equal_tokens() {
        let fp = parse_raw("771_1302_x__|771_1302_y__").unwrap();
        assert_eq!(fp.dedup.versions, vec!["771"]);
        assert_eq!(fp.dedup.ciphers, vec!["1302"]);
        assert_eq!(fp.dedup.extensions, vec!["x", "y"]);
    }

    #[test]
    fn dedup_preserves_first_seen_order() {
        let fp = parse_raw("771_1302|771_c030").unwrap();
        assert_eq!(fp.dedup.ciphers, vec!["1302", "c030"]);
    }

    #[test]
    fn dedup_categories_are_positional() {
        let fp = parse_raw("771_1302_ext0_enc1_cert2_late3").unwrap();
        assert_eq!(fp.dedup.extensions, vec!["ext0", "late3"]);
        assert_eq!(fp.dedup.encrypted_extensions, vec!["enc1"]);
        assert_eq!(fp.dedup.certificate_extensions, vec!["cert2"]);
    }

    #[test]
    fn all_alert_fingerprint_has_empty_feature_sets() {
        let fp = parse_raw("______<40|______<70").unwrap();
        assert!(fp.dedup.versions.is_empty());
        assert!(fp.dedup.ciphers.is_empty());
        assert!(fp.dedup.extensions.is_empty());
        assert!(fp.dedup.encrypted_extensions.is_empty());
        assert!(fp.dedup.certificate_extensions.is_empty());
        assert_eq!(fp.dedup.alerts, vec!["40", "70"]);
    }

    #[test]
    fn dedup_is_idempotent() {
        let fp = parse_raw(SAMPLE_RAW).unwrap();
        let again = dedup_features(&fp.segments);
        assert_eq!(fp.dedup, again);
    }

    #[test]
    fn sha256_reference_vectors() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        /// Tokens never contain `|`, `_` or a leading `<`.
        fn token_strategy() -> impl Strategy<Value = String> {
            proptest::string::string_regex("[0-9a-zA-Z.\\-]{0,12}").unwrap()
        }

        fn segment_strategy() -> impl Strategy<Value = String> {
            (
                proptest::collection::vec(token_strategy(), 1..8),
                proptest::option::of(0u8..=255),
            )
                .prop_map(|(mut fields, alert)| {
                    if let Some(code) = alert {
                        fields.push(format!("<{code}"));
                    }
                    fields.join("_")
                })
        }

        proptest! {
            #[test]
            fn parse_is_lossless(segments in proptest::collection::vec(segment_strategy(), 1..12)) {
                let raw = segments.join("|");
                prop_assume!(!raw.is_empty());
                let fp = parse_raw(&raw).unwrap();
                prop_assert_eq!(fp.to_raw(), raw.clone());
                prop_assert_eq!(fp.segments.len(), raw.matches('|').count() + 1);
            }

            #[test]
            fn dedup_sets_contain_no_duplicates(segments in proptest::collection::vec(segment_strategy(), 1..12)) {
                let raw = segments.join("|");
                prop_assume!(!raw.is_empty());
                let fp = parse_raw(&raw).unwrap();
                for set in [
                    &fp.dedup.versions,
                    &fp.dedup.ciphers,
                    &fp.dedup.extensions,
                    &fp.dedup.encrypted_extensions,
                    &fp.dedup.certificate_extensions,
                    &fp.dedup.alerts,
                ] {
                    let mut sorted = set.clone();
                    sorted.sort();
                    sorted.dedup();
                    prop_assert_eq!(sorted.len(), set.len());
                }
            }
        }
    }
}
