//! Similarity mapping for enriched TLS server fingerprints.
//!
//! `tlsmap` ingests the output of an active TLS scan (one pipe-delimited
//! fingerprint per domain, covering ten ClientHello probes), enriches it with
//! ordered HTTP response-header data, and turns the result into a navigable
//! similarity map:
//!
//! 1. [`ingest`] loads domain lists, labels and scan records and attaches
//!    AS numbers via longest-prefix match over a pyasn-style database.
//! 2. [`tls`] parses raw fingerprints into per-ClientHello segments,
//!    deduplicated feature sets and a SHA-256 identity.
//! 3. [`headers`] captures response header keys in wire order, keeps only the
//!    `Server` value, and hashes the canonical string with 32-bit MurmurHash3.
//! 4. [`features`] builds a dataset-global token vocabulary and encodes every
//!    server as a sparse binary presence vector.
//! 5. [`minhash`] / [`forest`] compress the vectors into MinHash signatures
//!    and index them in an LSH forest for approximate k-NN queries.
//! 6. [`graph`] / [`layout`] build the undirected weighted k-NN graph, extract
//!    its minimum spanning forest with Kruskal's algorithm and lay the trees
//!    out on the plane.
//! 7. [`render`] emits a self-contained interactive HTML map plus GraphML and
//!    CSV exports; [`analysis`] reproduces the granularity, stability and
//!    neighborhood-audit computations.
//!
//! The [`pipeline`] module orchestrates all stages behind a reproducible run
//! manifest, and [`query`] answers ad hoc nearest-neighbor and outlier
//! questions over the built artifacts. Every stage is deterministic for a
//! fixed seed: running the same configuration twice yields byte-identical
//! signatures, edge lists, layouts and HTML.
//!
//! The `examples/` directory contains one runnable program per capability;
//! start with `examples/full_pipeline.rs`.
//!
//! # Quick start
//!
//! ```
//! use tlsmap::features::{build_vocabulary, vectorize, HeaderMode};
//! use tlsmap::forest::{build_forest, ForestConfig};
//! use tlsmap::ingest::Label;
//! use tlsmap::minhash::{minhash_batch, MinHashConfig};
//! use tlsmap::record::EnrichedRecord;
//! use tlsmap::tls::parse_raw;
//!
//! # fn main() -> tlsmap::Result<()> {
//! // Two servers that answered a two-probe scan identically, one stranger.
//! let raws = [
//!     "771_1302_43.AwQ__x_|______<40",
//!     "771_1302_43.AwQ__x_|______<40",
//!     "772_1303_9.Zz__q_|772_1303_9.Zz__q_",
//! ];
//! let records: Vec<EnrichedRecord> = raws
//!     .iter()
//!     .enumerate()
//!     .map(|(id, raw)| {
//!         let fingerprint = parse_raw(raw).expect("demo fingerprints parse");
//!         EnrichedRecord {
//!             id,
//!             domain: format!("host-{id}.example"),
//!             ip: None,
//!             source: "demo".into(),
//!             label: Label::Unknown,
//!             asn: None,
//!             sha256_id: fingerprint.sha256_id.clone(),
//!             tls: fingerprint.dedup,
//!             header: None,
//!         }
//!     })
//!     .collect();
//!
//! let vocab = build_vocabulary(&records, HeaderMode::None)?;
//! let vectors: Vec<_> = records
//!     .iter()
//!     .map(|r| vectorize(r, &vocab, HeaderMode::None))
//!     .collect::<tlsmap::Result<_>>()?;
//! let signatures = minhash_batch(&vectors, &MinHashConfig::new(256, 1)?);
//! let forest = build_forest(signatures, ForestConfig::default())?;
//!
//! let neighbors = forest.query_knn(0, 2)?;
//! assert_eq!(neighbors[0].id, 1);         // the identical twin...
//! assert_eq!(neighbors[0].distance, 0.0); // ...at distance zero
//! # Ok(())
//! # }
//! ```

pub mod analysis;
pub mod error;
pub mod features;
pub mod forest;
pub mod graph;
pub mod headers;
pub mod ingest;
pub mod layout;
pub mod minhash;
pub mod pipeline;
pub mod query;
pub mod record;
pub mod render;
pub mod rng;
pub mod store;
#[cfg(test)]
pub(crate) mod testutil;
pub mod tls;

pub use error::{Error, Result};
pub use record::EnrichedRecord;
