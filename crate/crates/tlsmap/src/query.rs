//! Ad hoc queries over built artifacts: nearest neighbors of a domain,
//! fingerprint lookup and outlier listing.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forest::LshForest;
use crate::graph::SimilarityGraph;
use crate::pipeline::{self, PipelineConfig};
use crate::record::EnrichedRecord;

/// Everything loaded from a run directory that queries need.
pub struct Artifacts {
    pub records: Vec<EnrichedRecord>,
    pub forest: LshForest,
    pub graph: SimilarityGraph,
}

/// Load records, signatures and the edge list from a pipeline output
/// directory, rebuilding the forest with the parameters recorded in the
/// run manifest.
pub fn load_artifacts(out_dir: impl AsRef<Path>) -> Result<Artifacts> {
    let out_dir = out_dir.as_ref();
    let manifest = pipeline::load_manifest(out_dir)?;
    let config = PipelineConfig {
        hash_functions: manifest.params.hash_functions,
        prefix_trees: manifest.params.prefix_trees,
        neighbors: manifest.params.neighbors,
        widening: manifest.params.widening,
        header_mode: manifest.params.header_mode.parse()?,
        seed: manifest.params.seed,
        ..PipelineConfig::default()
    };
    Ok(Artifacts {
        records: pipeline::load_enriched_records(out_dir)?,
        forest: pipeline::rebuild_forest(&config, out_dir)?,
        graph: pipeline::read_graph(out_dir)?,
    })
}

/// One neighbor-table row.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRow {
    pub rank: usize,
    pub id: usize,
    pub domain: String,
    pub label: String,
    pub distance: f64,
    pub sha256_id: String,
    pub hdrhash: Option<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    pub query_domain: String,
    pub query_id: usize,
    pub rows: Vec<NeighborRow>,
    pub warnings: Vec<String>,
}

impl NeighborTable {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for warning in &self.warnings {
            let _ = writeln!(out, "warning: {warning}");
        }
        let _ = writeln!(
            out,
            "{:<5} {:<28} {:<8} {:<10} {:<16} hdrhash",
            "rank", "domain", "label", "distance", "sha256"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<5} {:<28} {:<8} {:<10.4} {:<16} {}",
                row.rank,
                row.domain,
                row.label,
                row.distance,
                &row.sha256_id[..16.min(row.sha256_id.len())],
                row.hdrhash.map_or("-".to_string(), |h| h.to_string()),
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,id,domain,label,distance,sha256_id,hdrhash\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.rank,
                row.id,
                row.domain,
                row.label,
                row.distance,
                row.sha256_id,
                row.hdrhash.map_or(String::new(), |h| h.to_string()),
            );
        }
        out
    }
}

/// Nearest neighbors of a domain already in the record store.
///
/// A domain scanned more than once resolves to its lowest record id, with a
/// warning naming the duplicates.
pub fn query_domain(artifacts: &Artifacts, domain: &str, k: usize) -> Result<NeighborTable> {
    let needle = domain.trim().to_ascii_lowercase();
    let matches: Vec<usize> = artifacts
        .records
        .iter()
        .filter(|r| r.domain == needle)
        .map(|r| r.id)
        .collect();
    let &id = matches.first().ok_or_else(|| Error::UnknownDomain(domain.to_string()))?;

    let mut table = NeighborTable {
        query_domain: needle,
        query_id: id,
        ..NeighborTable::default()
    };
    if matches.len() > 1 {
        table.warnings.push(format!(
            "domain appears {} times (record ids {:?}); using id {id}",
            matches.len(),
            matches
        ));
    }
    for (index, neighbor) in artifacts.forest.query_knn(id, k)?.into_iter().enumerate() {
        let record = &artifacts.records[neighbor.id];
        table.rows.push(NeighborRow {
            rank: index + 1,
            id: neighbor.id,
            domain: record.domain.clone(),
            label: record.label.to_string(),
            distance: neighbor.distance,
            sha256_id: record.sha256_id.clone(),
            hdrhash: record.header.as_ref().map(|h| h.hash),
        });
    }
    Ok(table)
}

/// All nodes with graph degree zero, ascending by id.
pub fn list_outliers(graph: &SimilarityGraph) -> Vec<usize> {
    graph.isolated_nodes()
}
