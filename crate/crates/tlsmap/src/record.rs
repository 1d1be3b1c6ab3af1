//! The enriched per-server record flowing between pipeline stages.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::ingest::Label;
use crate::tls::DedupFeatures;

/// Header facts a record keeps after enrichment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderInfo {
    /// MurmurHash3 of the canonical header string, unsigned decimal identity.
    pub hash: u32,
    pub server_value: Option<String>,
    /// Header keys in wire order (used by the per-key feature mode).
    pub keys: Vec<String>,
}

/// One scanned server with everything later stages need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedRecord {
    pub id: usize,
    pub domain: String,
    pub ip: Option<Ipv4Addr>,
    pub source: String,
    pub label: Label,
    pub asn: Option<u32>,
    /// SHA-256 identity of the raw fingerprint text.
    pub sha256_id: String,
    pub tls: DedupFeatures,
    pub header: Option<HeaderInfo>,
}
