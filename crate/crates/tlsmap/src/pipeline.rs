//! Stage orchestration with a reproducible run manifest.
//!
//! A run executes ingest -> parse -> headers -> vectorize -> index -> graph
//! -> layout -> render -> stats. Every stage consumes and produces only
//! declared files under the output directory, and the manifest records the
//! SHA-256 digest of each stage's inputs and outputs: re-running skips any
//! stage whose recorded digests still match (resume-by-digest), and deleting
//! a downstream output just regenerates it, byte-identically, because every
//! stage is a pure function of its input files and the seeded parameters.
//!
//! Configuration is a flat key = value file with one section per stage
//! group; see [`PipelineConfig`]. Relative paths are resolved against the
//! config file's directory. CLI flags override config values.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::features::{self, HeaderMode, Vocabulary};
use crate::forest::{build_forest, ForestConfig, LshForest};
use crate::graph::{build_knn_graph, kruskal_msf, GraphEdge, SimilarityGraph, SpanningForest};
use crate::headers::{self, FetchConfig, FetchStatus, FetchTarget};
use crate::ingest::{self, parse_label, AsnDatabase, Label};
use crate::layout::{layout_tree, LayoutResult};
use crate::minhash::{minhash_batch, MinHashConfig, MinHashSignature, SignatureRow};
use crate::record::{EnrichedRecord, HeaderInfo};
use crate::render::{self, RenderSpec};
use crate::store;
use crate::tls;

/// Output file names, fixed per run directory.
pub mod files {
    pub const RECORDS: &str = "records.jsonl";
    pub const TLS: &str = "tls.jsonl";
    pub const HEADERS: &str = "headers.jsonl";
    pub const CAPTURES: &str = "captures.jsonl";
    pub const VOCAB_TLS: &str = "vocab_tls.json";
    pub const VECTORS_TLS: &str = "vectors_tls.jsonl";
    pub const VOCAB: &str = "vocab.json";
    pub const VECTORS: &str = "vectors.jsonl";
    pub const SIGNATURES: &str = "signatures.jsonl";
    pub const EDGES: &str = "edges.csv";
    pub const MSF: &str = "msf.csv";
    pub const LAYOUT: &str = "layout.csv";
    pub const GRANULARITY_CSV: &str = "granularity.csv";
    pub const GRANULARITY_TXT: &str = "granularity.txt";
    pub const STABILITY: &str = "stability.csv";
    pub const MANIFEST: &str = "manifest.json";
}

/// CSV header-name mapping for scan input files.
#[derive(Debug, Clone)]
pub struct ScanColumns {
    pub domain: String,
    pub ip: String,
    pub source: String,
    pub label: String,
    pub fingerprint: String,
}

impl Default for ScanColumns {
    fn default() -> Self {
        ScanColumns {
            domain: "domain".into(),
            ip: "ip".into(),
            source: "source".into(),
            label: "label".into(),
            fingerprint: "raw_fingerprint".into(),
        }
    }
}

/// Everything a run needs. Defaults carry the standard parameters:
/// 1024 hash functions, 128 prefix trees, 100 nearest neighbors.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    // [input]
    pub scan: PathBuf,
    pub headers: Option<PathBuf>,
    pub asn: Option<PathBuf>,
    pub verdicts: Option<PathBuf>,
    pub default_source: String,
    pub default_label: Label,
    pub scan_columns: ScanColumns,
    // [params]
    pub hash_functions: usize,
    pub prefix_trees: usize,
    pub neighbors: usize,
    pub widening: usize,
    pub header_mode: HeaderMode,
    pub seed: u64,
    // [fetch]
    pub network: bool,
    pub timeout_secs: u64,
    pub concurrency: usize,
    pub user_agent: Option<String>,
    pub allow_http_fallback: bool,
    // [output]
    pub name: String,
    // [stats]
    pub stability_sample: usize,
    pub stability_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scan: PathBuf::new(),
            headers: None,
            asn: None,
            verdicts: None,
            default_source: "unspecified".into(),
            default_label: Label::Unknown,
            scan_columns: ScanColumns::default(),
            hash_functions: 1024,
            prefix_trees: 128,
            neighbors: 100,
            widening: 10,
            header_mode: HeaderMode::HashOnly,
            seed: 1,
            network: false,
            timeout_secs: 10,
            concurrency: 32,
            user_agent: None,
            allow_http_fallback: false,
            name: "map".into(),
            stability_sample: 20,
            stability_k: 10,
        }
    }
}

impl PipelineConfig {
    pub fn fetch_config(&self) -> FetchConfig {
        let mut fetch = FetchConfig {
            timeout: std::time::Duration::from_secs(self.timeout_secs),
            concurrency: self.concurrency,
            allow_http_fallback: self.allow_http_fallback,
            ..FetchConfig::default()
        };
        if let Some(agent) = &self.user_agent {
            fetch.user_agent = agent.clone();
        }
        fetch
    }
}

/// Parse the sectioned key = value config format.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    let mut section = String::new();
    let resolve = |value: &str| -> PathBuf {
        let path = PathBuf::from(value);
        if path.is_absolute() {
            path
        } else {
            base_dir.join(path)
        }
    };

    for (line_no, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value", line_no + 1))
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("line {}: bad integer {v:?}", line_no + 1)))
        };
        let parse_bool = |v: &str| -> Result<bool> {
            match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!(
                    "line {}: bad boolean {v:?}",
                    line_no + 1
                ))),
            }
        };

        match (section.as_str(), key.as_str()) {
            ("input", "scan") => config.scan = resolve(value),
            ("input", "headers") => config.headers = Some(resolve(value)),
            ("input", "asn") => config.asn = Some(resolve(value)),
            ("input", "verdicts") => config.verdicts = Some(resolve(value)),
            ("input", "source") => config.default_source = value.to_string(),
            ("input", "label") => config.default_label = parse_label(value)?,
            ("input", "scan_domain") => config.scan_columns.domain = value.to_string(),
            ("input", "scan_ip") => config.scan_columns.ip = value.to_string(),
            ("input", "scan_source") => config.scan_columns.source = value.to_string(),
            ("input", "scan_label") => config.scan_columns.label = value.to_string(),
            ("input", "scan_fingerprint") => config.scan_columns.fingerprint = value.to_string(),
            ("params", "hash_functions") | ("params", "d") => {
                config.hash_functions = parse_usize(value)?
            }
            ("params", "prefix_trees") | ("params", "l") => {
                config.prefix_trees = parse_usize(value)?
            }
            ("params", "neighbors") | ("params", "k") => config.neighbors = parse_usize(value)?,
            ("params", "widening") | ("params", "c") => config.widening = parse_usize(value)?,
            ("params", "header_mode") => config.header_mode = value.parse()?,
            ("params", "seed") => {
                config.seed = value.parse().map_err(|_| {
                    Error::Config(format!("line {}: bad seed {value:?}", line_no + 1))
                })?
            }
            ("fetch", "network") => config.network = parse_bool(value)?,
            ("fetch", "timeout_secs") => config.timeout_secs = parse_usize(value)? as u64,
            ("fetch", "concurrency") => config.concurrency = parse_usize(value)?,
            ("fetch", "user_agent") => config.user_agent = Some(value.to_string()),
            ("fetch", "allow_http_fallback") => config.allow_http_fallback = parse_bool(value)?,
            ("output", "name") => config.name = value.to_string(),
            ("stats", "sample") => config.stability_sample = parse_usize(value)?,
            ("stats", "k") => config.stability_k = parse_usize(value)?,
            (section, key) => {
                return Err(Error::Config(format!(
                    "line {}: unknown key {key:?} in section [{section}]",
                    line_no + 1
                )))
            }
        }
    }
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestParams {
    pub hash_functions: usize,
    pub prefix_trees: usize,
    pub neighbors: usize,
    pub widening: usize,
    pub header_mode: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub created_unix: u64,
    pub params: ManifestParams,
    pub inputs: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    fn new(config: &PipelineConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: now_unix(),
            params: ManifestParams {
                hash_functions: config.hash_functions,
                prefix_trees: config.prefix_trees,
                neighbors: config.neighbors,
                widening: config.widening,
                header_mode: config.header_mode.to_string(),
                seed: config.seed,
            },
            inputs: BTreeMap::new(),
            stages: BTreeMap::new(),
        }
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(files::MANIFEST);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text.as_bytes()).map_err(|e| Error::io(&path, e))
    }
}

pub fn load_manifest(out_dir: impl AsRef<Path>) -> Result<RunManifest> {
    let path = out_dir.as_ref().join(files::MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn digest_map(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), store::file_digest(p)?)))
        .collect()
}

/// Run `work` unless the manifest shows matching input and output digests.
fn run_stage(
    manifest: &mut RunManifest,
    out_dir: &Path,
    stage: &str,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    work: impl FnOnce() -> Result<()>,
) -> Result<bool> {
    let input_digests = digest_map(inputs).map_err(|e| e.in_stage(stage))?;

    if let Some(record) = manifest.stages.get(stage) {
        let outputs_intact = record.inputs == input_digests
            && outputs.iter().all(|p| p.exists())
            && digest_map(outputs).is_ok_and(|d| d == record.outputs);
        if outputs_intact {
            return Ok(false);
        }
    }

    work().map_err(|e| e.in_stage(stage))?;

    let output_digests = digest_map(outputs).map_err(|e| e.in_stage(stage))?;
    manifest.stages.insert(
        stage.to_string(),
        StageRecord {
            inputs: input_digests,
            outputs: output_digests,
            finished_unix: now_unix(),
        },
    );
    manifest.save(out_dir)?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// Scan input
// ---------------------------------------------------------------------------

/// One row of scan output, however it was stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub domain: String,
    #[serde(default)]
    pub ip: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
    pub raw_fingerprint: String,
}

/// Read scan rows from JSON-lines or CSV (sniffed from the first byte, with
/// the CSV column mapping taken from the config).
pub fn read_scan_rows(path: &Path, columns: &ScanColumns) -> Result<Vec<ScanRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.trim_start().chars().next().unwrap_or('{');
    if first == '{' {
        return store::read_jsonl(path);
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, 1, e.to_string()))?
        .clone();
    let position = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let domain_col = position(&columns.domain)
        .ok_or_else(|| Error::format(path, 1, format!("missing column {:?}", columns.domain)))?;
    let fingerprint_col = position(&columns.fingerprint).ok_or_else(|| {
        Error::format(path, 1, format!("missing column {:?}", columns.fingerprint))
    })?;
    let ip_col = position(&columns.ip);
    let source_col = position(&columns.source);
    let label_col = position(&columns.label);

    let mut rows = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::format(path, idx + 2, e.to_string()))?;
        let field = |col: Option<usize>| -> Option<String> {
            col.and_then(|c| row.get(c))
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_string)
        };
        rows.push(ScanRow {
            domain: field(Some(domain_col))
                .ok_or_else(|| Error::format(path, idx + 2, "empty domain"))?,
            ip: field(ip_col),
            source: field(source_col),
            label: field(label_col),
            raw_fingerprint: field(Some(fingerprint_col))
                .ok_or_else(|| Error::format(path, idx + 2, "empty raw_fingerprint"))?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Stage payload rows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TlsRow {
    pub id: usize,
    pub domain: String,
    pub sha256_id: String,
    pub raw: String,
    pub dedup: tls::DedupFeatures,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeaderRow {
    pub id: usize,
    pub domain: String,
    #[serde(default)]
    pub status: Option<FetchStatus>,
    #[serde(default)]
    pub keys: Vec<String>,
    #[serde(default)]
    pub server_value: Option<String>,
    #[serde(default)]
    pub hash: Option<u32>,
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

fn scan_to_domain_record(
    row: &ScanRow,
    config: &PipelineConfig,
    path: &Path,
    line: usize,
) -> Result<ingest::DomainRecord> {
    let domain = ingest::normalize_domain(&row.domain)
        .map_err(|e| Error::format(path, line, e.to_string()))?;
    let ip: Option<Ipv4Addr> = match &row.ip {
        None => None,
        Some(text) => Some(
            text.parse()
                .map_err(|e| Error::format(path, line, format!("bad ip {text:?}: {e}")))?,
        ),
    };
    let label = match &row.label {
        None => config.default_label,
        Some(text) => parse_label(text).map_err(|e| Error::format(path, line, e.to_string()))?,
    };
    Ok(ingest::DomainRecord {
        domain,
        ip,
        source: row
            .source
            .clone()
            .unwrap_or_else(|| config.default_source.clone()),
        label,
        asn: None,
    })
}

/// ingest: scan rows -> canonical record store (with ASN enrichment).
pub fn stage_ingest(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let rows = read_scan_rows(&config.scan, &config.scan_columns)?;
    let mut records = rows
        .iter()
        .enumerate()
        .map(|(idx, row)| scan_to_domain_record(row, config, &config.scan, idx + 1))
        .collect::<Result<Vec<_>>>()?;
    if let Some(asn_path) = &config.asn {
        let db = ingest::load_asn_db(asn_path)?;
        ingest::enrich_asn(&mut records, &db);
    }
    store::write_jsonl(out_dir.join(files::RECORDS), &records)
}

/// parse: scan rows -> per-record TLS fingerprints.
pub fn stage_parse(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let rows = read_scan_rows(&config.scan, &config.scan_columns)?;
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(id, row)| {
            let fingerprint = tls::parse_raw(&row.raw_fingerprint).map_err(|e| {
                Error::format(
                    &config.scan,
                    id + 1,
                    format!("domain {}: {e}", row.domain),
                )
            })?;
            let domain = ingest::normalize_domain(&row.domain)
                .map_err(|e| Error::format(&config.scan, id + 1, e.to_string()))?;
            Ok(TlsRow {
                id,
                domain,
                sha256_id: fingerprint.sha256_id.clone(),
                raw: row.raw_fingerprint.clone(),
                dedup: fingerprint.dedup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    store::write_jsonl(out_dir.join(files::TLS), &parsed)
}

/// headers: offline capture store (or live fetch) -> per-record header facts.
pub fn stage_headers(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let records: Vec<ingest::DomainRecord> = store::read_jsonl(out_dir.join(files::RECORDS))?;

    let captures_by_domain: BTreeMap<String, headers::HeaderCapture> = if config.network {
        let targets: Vec<FetchTarget> = records
            .iter()
            .filter(|r| r.is_resolved())
            .map(|r| FetchTarget {
                domain: r.domain.clone(),
                ip: r.ip.map(IpAddr::V4),
            })
            .collect();
        let captures = headers::fetch_many(&targets, &config.fetch_config());
        headers::write_captures(out_dir.join(files::CAPTURES), &captures)?;
        captures
            .into_iter()
            .map(|c| (c.domain.clone(), c))
            .collect()
    } else if let Some(path) = &config.headers {
        headers::read_captures(path)?
            .into_iter()
            .map(|c| (c.domain.clone(), c))
            .collect()
    } else {
        BTreeMap::new()
    };

    let rows: Vec<HeaderRow> = records
        .iter()
        .enumerate()
        .map(|(id, record)| {
            let capture = captures_by_domain.get(&record.domain);
            let fingerprint = capture.filter(|c| c.status.has_response()).and_then(|c| {
                headers::header_fingerprint(c).ok()
            });
            HeaderRow {
                id,
                domain: record.domain.clone(),
                status: capture.map(|c| c.status.clone()),
                keys: capture.map(|c| c.keys.clone()).unwrap_or_default(),
                server_value: capture.and_then(|c| c.server_value.clone()),
                hash: fingerprint.map(|f| f.hash),
            }
        })
        .collect();
    store::write_jsonl(out_dir.join(files::HEADERS), &rows)
}

/// Join the per-stage stores back into enriched records.
pub fn load_enriched_records(out_dir: &Path) -> Result<Vec<EnrichedRecord>> {
    let records: Vec<ingest::DomainRecord> = store::read_jsonl(out_dir.join(files::RECORDS))?;
    let tls_rows: Vec<TlsRow> = store::read_jsonl(out_dir.join(files::TLS))?;
    let header_rows: Vec<HeaderRow> = store::read_jsonl(out_dir.join(files::HEADERS))?;
    if records.len() != tls_rows.len() || records.len() != header_rows.len() {
        return Err(Error::Alignment(format!(
            "row counts diverge: {} records, {} tls, {} headers",
            records.len(),
            tls_rows.len(),
            header_rows.len()
        )));
    }
    for (index, record) in records.iter().enumerate() {
        if tls_rows[index].domain != record.domain || header_rows[index].domain != record.domain {
            return Err(Error::Alignment(format!(
                "row {index}: stores disagree on the domain ({} / {} / {})",
                record.domain, tls_rows[index].domain, header_rows[index].domain
            )));
        }
    }
    Ok(records
        .into_iter()
        .zip(tls_rows)
        .zip(header_rows)
        .enumerate()
        .map(|(id, ((record, tls_row), header_row))| EnrichedRecord {
            id,
            domain: record.domain,
            ip: record.ip,
            source: record.source,
            label: record.label,
            asn: record.asn,
            sha256_id: tls_row.sha256_id,
            tls: tls_row.dedup,
            header: header_row.hash.map(|hash| HeaderInfo {
                hash,
                server_value: header_row.server_value,
                keys: header_row.keys,
            }),
        })
        .collect())
}

/// vectorize: enriched records -> vocabularies and sparse vectors, both
/// TLS-only and enriched.
pub fn stage_vectorize(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let records = load_enriched_records(out_dir)?;
    let vocab_tls = features::build_vocabulary(&records, HeaderMode::None)?;
    let vocab_enriched = features::build_vocabulary(&records, config.header_mode)?;

    let vector_rows = |vocab: &Vocabulary, mode: HeaderMode| -> Result<Vec<features::VectorRow>> {
        records
            .iter()
            .map(|record| {
                Ok(features::VectorRow {
                    id: record.id,
                    set_bits: features::vectorize(record, vocab, mode)?.set_bits,
                })
            })
            .collect()
    };

    vocab_tls.write_json(out_dir.join(files::VOCAB_TLS))?;
    store::write_jsonl(
        out_dir.join(files::VECTORS_TLS),
        &vector_rows(&vocab_tls, HeaderMode::None)?,
    )?;
    vocab_enriched.write_json(out_dir.join(files::VOCAB))?;
    store::write_jsonl(
        out_dir.join(files::VECTORS),
        &vector_rows(&vocab_enriched, config.header_mode)?,
    )
}

fn read_vectors(path: &Path) -> Result<Vec<features::FeatureVector>> {
    let rows: Vec<features::VectorRow> = store::read_jsonl(path)?;
    let columns = rows
        .iter()
        .flat_map(|r| r.set_bits.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    Ok(rows
        .into_iter()
        .map(|r| features::FeatureVector {
            columns,
            set_bits: r.set_bits,
        })
        .collect())
}

/// index: vectors -> MinHash signatures.
pub fn stage_index(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let vectors = read_vectors(&out_dir.join(files::VECTORS))?;
    let minhash_config = MinHashConfig::new(config.hash_functions, config.seed)?;
    let signatures = minhash_batch(&vectors, &minhash_config);
    let rows: Vec<SignatureRow> = signatures
        .into_iter()
        .enumerate()
        .map(|(id, s)| SignatureRow { id, values: s.values })
        .collect();
    store::write_jsonl(out_dir.join(files::SIGNATURES), &rows)
}

pub fn read_signatures(out_dir: &Path) -> Result<Vec<MinHashSignature>> {
    let rows: Vec<SignatureRow> = store::read_jsonl(out_dir.join(files::SIGNATURES))?;
    Ok(rows
        .into_iter()
        .map(|r| MinHashSignature { values: r.values })
        .collect())
}

/// Rebuild the LSH forest from the signature store.
pub fn rebuild_forest(config: &PipelineConfig, out_dir: &Path) -> Result<LshForest> {
    build_forest(
        read_signatures(out_dir)?,
        ForestConfig {
            trees: config.prefix_trees,
            widening: config.widening,
        },
    )
}

/// graph: signatures -> c-k-NN edge list.
pub fn stage_graph(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let forest = rebuild_forest(config, out_dir)?;
    let graph = build_knn_graph(&forest, config.neighbors)?;
    render::write_edges_csv(&graph, out_dir.join(files::EDGES))
}

pub fn read_graph(out_dir: &Path) -> Result<SimilarityGraph> {
    let node_count = read_signatures(out_dir)?.len();
    let rows = store::read_csv_rows(out_dir.join(files::EDGES))?;
    let edges = rows
        .iter()
        .map(|row| parse_edge_row(row, out_dir))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityGraph::from_edges(node_count, edges))
}

fn parse_edge_row(row: &[String], out_dir: &Path) -> Result<GraphEdge> {
    let path = out_dir.join(files::EDGES);
    let bad = |msg: &str| Error::format(&path, 0, msg.to_string());
    if row.len() != 3 {
        return Err(bad("expected u,v,weight"));
    }
    Ok(GraphEdge {
        u: row[0].parse().map_err(|_| bad("bad u"))?,
        v: row[1].parse().map_err(|_| bad("bad v"))?,
        weight: row[2].parse().map_err(|_| bad("bad weight"))?,
    })
}

/// layout: edge list -> spanning forest and planar coordinates.
pub fn stage_layout(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let graph = read_graph(out_dir)?;
    let forest = kruskal_msf(&graph);
    let msf_rows: Vec<String> = forest
        .edges
        .iter()
        .map(|e| format!("{},{},{}", e.u, e.v, e.weight))
        .collect();
    store::write_csv(out_dir.join(files::MSF), "u,v,weight", &msf_rows)?;

    let layout = layout_tree(&forest, config.seed);
    let layout_rows: Vec<String> = (0..layout.node_count())
        .map(|id| format!("{},{},{}", id, layout.x[id], layout.y[id]))
        .collect();
    store::write_csv(out_dir.join(files::LAYOUT), "id,x,y", &layout_rows)
}

pub fn read_layout(out_dir: &Path) -> Result<LayoutResult> {
    let layout_rows = store::read_csv_rows(out_dir.join(files::LAYOUT))?;
    let layout_path = out_dir.join(files::LAYOUT);
    let mut x = Vec::with_capacity(layout_rows.len());
    let mut y = Vec::with_capacity(layout_rows.len());
    for (idx, row) in layout_rows.iter().enumerate() {
        if row.len() != 3 {
            return Err(Error::format(&layout_path, idx + 2, "expected id,x,y"));
        }
        let id: usize = row[0]
            .parse()
            .map_err(|_| Error::format(&layout_path, idx + 2, "bad id"))?;
        if id != idx {
            return Err(Error::format(&layout_path, idx + 2, "ids must be dense"));
        }
        x.push(row[1].parse().map_err(|_| Error::format(&layout_path, idx + 2, "bad x"))?);
        y.push(row[2].parse().map_err(|_| Error::format(&layout_path, idx + 2, "bad y"))?);
    }
    let msf_rows = store::read_csv_rows(out_dir.join(files::MSF))?;
    let mut s = Vec::with_capacity(msf_rows.len());
    let mut t = Vec::with_capacity(msf_rows.len());
    let msf_path = out_dir.join(files::MSF);
    for (idx, row) in msf_rows.iter().enumerate() {
        if row.len() != 3 {
            return Err(Error::format(&msf_path, idx + 2, "expected u,v,weight"));
        }
        s.push(row[0].parse().map_err(|_| Error::format(&msf_path, idx + 2, "bad u"))?);
        t.push(row[1].parse().map_err(|_| Error::format(&msf_path, idx + 2, "bad v"))?);
    }
    Ok(LayoutResult { x, y, s, t })
}

/// Read the spanning forest back from the msf/layout stores.
pub fn read_spanning_forest(out_dir: &Path) -> Result<SpanningForest> {
    let graph = read_graph(out_dir)?;
    Ok(kruskal_msf(&graph))
}

/// render: records + graph + layout -> html, graphml and csv exports.
pub fn stage_render(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let records = load_enriched_records(out_dir)?;
    let graph = read_graph(out_dir)?;
    let layout = read_layout(out_dir)?;
    let spec = RenderSpec::default();
    render::render_html(
        &layout,
        &records,
        &spec,
        &config.name,
        out_dir.join(format!("{}.html", config.name)),
    )?;
    render::export_graphml(
        &layout,
        &graph,
        &records,
        out_dir.join(format!("{}.graphml", config.name)),
    )?;
    render::write_nodes_csv(
        &layout,
        &records,
        out_dir.join(format!("{}.nodes.csv", config.name)),
    )?;
    render::write_edges_csv(&graph, out_dir.join(format!("{}.edges.csv", config.name)))
}

/// stats: granularity comparison and distance-stability sample.
pub fn stage_stats(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let records = load_enriched_records(out_dir)?;
    let vocab_tls = Vocabulary::read_json(out_dir.join(files::VOCAB_TLS))?;
    let vocab_enriched = Vocabulary::read_json(out_dir.join(files::VOCAB))?;
    let report =
        analysis::granularity_report(&records, &vocab_tls, &vocab_enriched, config.header_mode)?;
    let csv_path = out_dir.join(files::GRANULARITY_CSV);
    std::fs::write(&csv_path, report.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    let txt_path = out_dir.join(files::GRANULARITY_TXT);
    std::fs::write(&txt_path, report.to_text()).map_err(|e| Error::io(&txt_path, e))?;

    let forest = rebuild_forest(config, out_dir)?;
    let sample_size = config.stability_sample.min(forest.len());
    let rows = analysis::stability_sample(&forest, sample_size, config.stability_k, config.seed)?;
    let stability_path = out_dir.join(files::STABILITY);
    std::fs::write(&stability_path, analysis::stability_csv(&rows))
        .map_err(|e| Error::io(&stability_path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

/// Execute every stage, resuming where digests match, and write the manifest.
pub fn run_pipeline(config: &PipelineConfig, out_dir: impl AsRef<Path>) -> Result<RunManifest> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut manifest = match load_manifest(out_dir) {
        Ok(existing) if manifest_params_match(&existing, config) => existing,
        _ => RunManifest::new(config),
    };

    let mut config_inputs = vec![config.scan.clone()];
    config_inputs.extend(config.asn.iter().cloned());
    config_inputs.extend(config.headers.iter().cloned());
    config_inputs.extend(config.verdicts.iter().cloned());
    manifest.inputs = digest_map(&config_inputs)?;

    let out = |name: &str| out_dir.join(name);
    let scan = config.scan.clone();
    let mut asn_inputs = vec![scan.clone()];
    asn_inputs.extend(config.asn.iter().cloned());

    run_stage(&mut manifest, out_dir, "ingest", &asn_inputs, &[out(files::RECORDS)], || {
        stage_ingest(config, out_dir)
    })?;
    run_stage(&mut manifest, out_dir, "parse", std::slice::from_ref(&scan), &[out(files::TLS)], || {
        stage_parse(config, out_dir)
    })?;
    let mut header_inputs = vec![out(files::RECORDS)];
    header_inputs.extend(config.headers.iter().cloned());
    let mut header_outputs = vec![out(files::HEADERS)];
    if config.network {
        // Live captures are expensive; track them so resume never refetches.
        header_outputs.push(out(files::CAPTURES));
    }
    run_stage(&mut manifest, out_dir, "headers", &header_inputs, &header_outputs, || {
        stage_headers(config, out_dir)
    })?;
    run_stage(
        &mut manifest,
        out_dir,
        "vectorize",
        &[out(files::RECORDS), out(files::TLS), out(files::HEADERS)],
        &[
            out(files::VOCAB_TLS),
            out(files::VECTORS_TLS),
            out(files::VOCAB),
            out(files::VECTORS),
        ],
        || stage_vectorize(config, out_dir),
    )?;
    run_stage(
        &mut manifest,
        out_dir,
        "index",
        &[out(files::VECTORS)],
        &[out(files::SIGNATURES)],
        || stage_index(config, out_dir),
    )?;
    run_stage(
        &mut manifest,
        out_dir,
        "graph",
        &[out(files::SIGNATURES)],
        &[out(files::EDGES)],
        || stage_graph(config, out_dir),
    )?;
    run_stage(
        &mut manifest,
        out_dir,
        "layout",
        &[out(files::SIGNATURES), out(files::EDGES)],
        &[out(files::MSF), out(files::LAYOUT)],
        || stage_layout(config, out_dir),
    )?;
    run_stage(
        &mut manifest,
        out_dir,
        "render",
        &[
            out(files::RECORDS),
            out(files::TLS),
            out(files::HEADERS),
            out(files::EDGES),
            out(files::MSF),
            out(files::LAYOUT),
        ],
        &[
            out(&format!("{}.html", config.name)),
            out(&format!("{}.graphml", config.name)),
            out(&format!("{}.nodes.csv", config.name)),
            out(&format!("{}.edges.csv", config.name)),
        ],
        || stage_render(config, out_dir),
    )?;
    run_stage(
        &mut manifest,
        out_dir,
        "stats",
        &[
            out(files::RECORDS),
            out(files::TLS),
            out(files::HEADERS),
            out(files::VOCAB_TLS),
            out(files::VOCAB),
            out(files::SIGNATURES),
        ],
        &[
            out(files::GRANULARITY_CSV),
            out(files::GRANULARITY_TXT),
            out(files::STABILITY),
        ],
        || stage_stats(config, out_dir),
    )?;

    manifest.save(out_dir)?;
    Ok(manifest)
}

fn manifest_params_match(manifest: &RunManifest, config: &PipelineConfig) -> bool {
    let p = &manifest.params;
    p.hash_functions == config.hash_functions
        && p.prefix_trees == config.prefix_trees
        && p.neighbors == config.neighbors
        && p.widening == config.widening
        && p.header_mode == config.header_mode.to_string()
        && p.seed == config.seed
}

/// Prepare a records store from a plain domain list (the pre-scan flow):
/// shuffled under the seed, optionally ASN-enriched.
pub fn ingest_domain_list(
    input: &Path,
    source: &str,
    label: Label,
    asn: Option<&Path>,
    seed: u64,
    output: &Path,
) -> Result<(usize, usize)> {
    let mut records = ingest::load_domains(input, source, label, seed)?;
    if let Some(asn_path) = asn {
        let db: AsnDatabase = ingest::load_asn_db(asn_path)?;
        ingest::enrich_asn(&mut records, &db);
    }
    let unresolved = records.iter().filter(|r| !r.is_resolved()).count();
    store::write_jsonl(output, &records)?;
    Ok((records.len(), unresolved))
}
