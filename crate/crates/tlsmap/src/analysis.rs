//! Evaluation computations over built artifacts: granularity comparison,
//! k-NN distance-stability sampling and neighborhood label audits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{vectorize, HeaderMode, Vocabulary};
use crate::forest::LshForest;
use crate::ingest::{parse_label, Label};
use crate::layout::LayoutResult;
use crate::record::EnrichedRecord;
use crate::rng::SplitMix64;

/// Distinct-fingerprint counts for one (source, label) group under both
/// encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct GranularityGroup {
    pub source: String,
    pub label: Label,
    pub records: usize,
    pub tls_only: usize,
    pub enriched: usize,
    /// `(enriched - tls_only) / tls_only * 100`; `None` when tls_only is 0.
    pub percent_increase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranularityReport {
    pub groups: Vec<GranularityGroup>,
    pub total_records: usize,
    pub total_tls_only: usize,
    pub total_enriched: usize,
}

impl GranularityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,label,records,tls_only,enriched,percent_increase\n");
        for g in &self.groups {
            let pct = g
                .percent_increase
                .map_or("N/A".to_string(), |p| format!("{p:.1}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                g.source,
                g.label.as_u8(),
                g.records,
                g.tls_only,
                g.enriched,
                pct
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>8} {:>9} {:>9} {:>10}",
            "source", "label", "records", "tls-only", "enriched", "increase"
        );
        for g in &self.groups {
            let pct = g
                .percent_increase
                .map_or("N/A".to_string(), |p| format!("{p:.1}%"));
            let _ = writeln!(
                out,
                "{:<20} {:>8} {:>8} {:>9} {:>9} {:>10}",
                g.source,
                g.label.as_str(),
                g.records,
                g.tls_only,
                g.enriched,
                pct
            );
        }
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>8} {:>9} {:>9}",
            "total", "-", self.total_records, self.total_tls_only, self.total_enriched
        );
        out
    }
}

/// Count distinct fingerprint classes per (source, label) group under the
/// TLS-only and enriched encodings. Class equality is equality of set_bits.
pub fn granularity_report(
    records: &[EnrichedRecord],
    vocab_tls: &Vocabulary,
    vocab_enriched: &Vocabulary,
    enriched_mode: HeaderMode,
) -> Result<GranularityReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    // record count, distinct tls classes, distinct enriched classes
    type GroupTally = (usize, HashSet<Vec<usize>>, HashSet<Vec<usize>>);
    let mut groups: BTreeMap<(String, Label), GroupTally> = BTreeMap::new();
    let mut total_tls: HashSet<Vec<usize>> = HashSet::new();
    let mut total_enriched: HashSet<Vec<usize>> = HashSet::new();

    for record in records {
        let tls_bits = vectorize(record, vocab_tls, HeaderMode::None)?.set_bits;
        let enriched_bits = vectorize(record, vocab_enriched, enriched_mode)?.set_bits;
        let entry = groups
            .entry((record.source.clone(), record.label))
            .or_insert_with(|| (0, HashSet::new(), HashSet::new()));
        entry.0 += 1;
        entry.1.insert(tls_bits.clone());
        entry.2.insert(enriched_bits.clone());
        total_tls.insert(tls_bits);
        total_enriched.insert(enriched_bits);
    }

    let groups: Vec<GranularityGroup> = groups
        .into_iter()
        .map(|((source, label), (records, tls, enriched))| {
            let percent_increase = if tls.is_empty() {
                None
            } else {
                Some((enriched.len() as f64 - tls.len() as f64) / tls.len() as f64 * 100.0)
            };
            GranularityGroup {
                source,
                label,
                records,
                tls_only: tls.len(),
                enriched: enriched.len(),
                percent_increase,
            }
        })
        .collect();

    Ok(GranularityReport {
        total_records: records.len(),
        total_tls_only: total_tls.len(),
        total_enriched: total_enriched.len(),
        groups,
    })
}

/// Per-queried-id ascending distance list.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub id: usize,
    pub distances: Vec<f64>,
}

/// Query `sample_size` seeded-random ids for their `k` nearest neighbors and
/// record the distance curves (the protocol behind distance-stability plots).
pub fn stability_sample(
    forest: &LshForest,
    sample_size: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<StabilityRow>> {
    if forest.is_empty() {
        return Err(Error::EmptyIndex);
    }
    if sample_size > forest.len() {
        return Err(Error::Invalid(format!(
            "sample_size {sample_size} exceeds indexed nodes {}",
            forest.len()
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut ids = rng.sample_indices(forest.len(), sample_size);
    ids.sort_unstable();
    ids.iter()
        .map(|&id| {
            let distances = forest
                .query_knn(id, k)?
                .into_iter()
                .map(|n| n.distance)
                .collect();
            Ok(StabilityRow { id, distances })
        })
        .collect()
}

/// CSV rows `id,rank,distance`, rank starting at 1.
pub fn stability_csv(rows: &[StabilityRow]) -> String {
    let mut out = String::from("id,rank,distance\n");
    for row in rows {
        for (rank, distance) in row.distances.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", row.id, rank + 1, distance);
        }
    }
    out
}

/// How a node subset was chosen.
#[derive(Debug, Clone)]
pub enum Selection {
    /// Explicit node ids.
    Ids(Vec<usize>),
    /// Rectangle in layout coordinates, inclusive.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

/// Label composition of a selected area of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodAudit {
    pub node_ids: Vec<usize>,
    pub total: usize,
    pub good: usize,
    pub bad: usize,
    pub unknown: usize,
    pub percent_bad: f64,
    /// Distinct SHA-256 fingerprint identities inside the selection.
    pub distinct_fingerprints: usize,
    /// Good or unknown nodes carrying an external bad verdict.
    pub reclassified_bad: usize,
}

impl NeighborhoodAudit {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Total nodes:            {}", self.total);
        let _ = writeln!(out, "Known good:             {}", self.good);
        let _ = writeln!(out, "Known bad:              {}", self.bad);
        let _ = writeln!(out, "Unknown:                {}", self.unknown);
        let _ = writeln!(out, "Percent bad:            {:.2}%", self.percent_bad);
        let _ = writeln!(out, "Distinct fingerprints:  {}", self.distinct_fingerprints);
        let _ = writeln!(out, "Reclassified to bad:    {}", self.reclassified_bad);
        out
    }
}

/// Audit the labels, fingerprint diversity and external verdicts of a
/// selection. `verdicts` maps domain to an externally sourced label.
pub fn neighborhood_audit(
    records: &[EnrichedRecord],
    layout: &LayoutResult,
    selection: &Selection,
    verdicts: Option<&HashMap<String, Label>>,
) -> Result<NeighborhoodAudit> {
    let mut node_ids: Vec<usize> = match selection {
        Selection::Ids(ids) => {
            let mut ids = ids.clone();
            ids.sort_unstable();
            ids.dedup();
            for &id in &ids {
                if id >= records.len() {
                    return Err(Error::UnknownId(id));
                }
            }
            ids
        }
        Selection::Rect { x0, y0, x1, y1 } => {
            let (lo_x, hi_x) = (x0.min(*x1), x0.max(*x1));
            let (lo_y, hi_y) = (y0.min(*y1), y0.max(*y1));
            (0..records.len().min(layout.node_count()))
                .filter(|&id| {
                    let (x, y) = (layout.x[id], layout.y[id]);
                    (lo_x..=hi_x).contains(&x) && (lo_y..=hi_y).contains(&y)
                })
                .collect()
        }
    };
    node_ids.sort_unstable();
    if node_ids.is_empty() {
        return Err(Error::EmptySelection);
    }

    let mut good = 0;
    let mut bad = 0;
    let mut unknown = 0;
    let mut fingerprints = HashSet::new();
    let mut reclassified_bad = 0;
    for &id in &node_ids {
        let record = &records[id];
        match record.label {
            Label::Good => good += 1,
            Label::Bad => bad += 1,
            Label::Unknown => unknown += 1,
        }
        fingerprints.insert(record.sha256_id.as_str());
        if record.label != Label::Bad {
            if let Some(verdicts) = verdicts {
                if verdicts.get(&record.domain) == Some(&Label::Bad) {
                    reclassified_bad += 1;
                }
            }
        }
    }
    let total = node_ids.len();
    Ok(NeighborhoodAudit {
        total,
        good,
        bad,
        unknown,
        percent_bad: bad as f64 / total as f64 * 100.0,
        distinct_fingerprints: fingerprints.len(),
        reclassified_bad,
        node_ids,
    })
}

/// Load a `domain,verdict` CSV of external verdicts.
pub fn load_verdicts(path: impl AsRef<Path>) -> Result<HashMap<String, Label>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut verdicts = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if idx == 0 && line.eq_ignore_ascii_case("domain,verdict") {
            continue;
        }
        let (domain, verdict) = line
            .split_once(',')
            .ok_or_else(|| Error::format(path, idx + 1, "expected domain,verdict"))?;
        let label = parse_label(verdict)
            .map_err(|e| Error::format(path, idx + 1, e.to_string()))?;
        verdicts.insert(domain.trim().to_ascii_lowercase(), label);
    }
    Ok(verdicts)
}
