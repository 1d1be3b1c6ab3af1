//! MinHash signatures over binary feature vectors, plus the exact Jaccard
//! routines the sketches approximate.
//!
//! The hash family is multiply-shift universal hashing modulo the Mersenne
//! prime 2^61 - 1: `h_i(x) = ((a_i * x + b_i) mod p) mod 2^32` with odd
//! multipliers `a_i` and offsets `b_i` derived deterministically from a
//! master seed. Component i of a signature is the minimum of `h_i` over the
//! vector's set bits, so the fraction of agreeing components between two
//! signatures estimates their sets' Jaccard similarity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::rng::SplitMix64;

pub const MERSENNE_PRIME_61: u64 = (1 << 61) - 1;

/// Sentinel filling the signature of an empty vector.
pub const EMPTY_SLOT: u32 = u32::MAX;

/// Exact Jaccard similarity of two sorted, deduplicated index sets.
///
/// Convention: J(∅, ∅) = 1.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    debug_assert!(a.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] < w[1]));
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut i = 0;
    let mut j = 0;
    let mut intersection = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                intersection += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - intersection;
    intersection as f64 / union as f64
}

/// Exact Jaccard distance, `1 - jaccard`.
pub fn jaccard_distance(a: &[usize], b: &[usize]) -> f64 {
    1.0 - jaccard(a, b)
}

/// Hash-family parameters; fully determined by `master_seed`.
#[derive(Debug, Clone)]
pub struct MinHashConfig {
    d: usize,
    master_seed: u64,
    /// (a_i, b_i) pairs: odd multiplier, offset, both below 2^61 - 1.
    params: Vec<(u64, u64)>,
}

impl MinHashConfig {
    /// `d` hash functions seeded from `master_seed`. The default `d` is 1024.
    pub fn new(d: usize, master_seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("d must be at least 1".into()));
        }
        let mut rng = SplitMix64::new(master_seed);
        let params = (0..d)
            .map(|_| {
                let a = loop {
                    let candidate = rng.next_u64() % MERSENNE_PRIME_61;
                    if candidate % 2 == 1 {
                        break candidate;
                    }
                };
                let b = rng.next_u64() % MERSENNE_PRIME_61;
                (a, b)
            })
            .collect();
        Ok(MinHashConfig {
            d,
            master_seed,
            params,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    #[inline]
    fn hash(&self, i: usize, x: u64) -> u32 {
        let (a, b) = self.params[i];
        let value = (a as u128 * x as u128 + b as u128) % MERSENNE_PRIME_61 as u128;
        (value & 0xffff_ffff) as u32
    }
}

impl Default for MinHashConfig {
    fn default() -> Self {
        MinHashConfig::new(1024, 0).expect("d > 0")
    }
}

/// Componentwise minima of the hash family over a vector's set bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u32>,
}

impl MinHashSignature {
    pub fn d(&self) -> usize {
        self.values.len()
    }

    /// True when the source vector had no set bits (every slot sentinel).
    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|&v| v == EMPTY_SLOT)
    }
}

/// Sketch one vector. An empty vector yields the all-sentinel signature.
pub fn minhash(vector: &FeatureVector, config: &MinHashConfig) -> MinHashSignature {
    let mut values = vec![EMPTY_SLOT; config.d];
    for &bit in &vector.set_bits {
        let x = bit as u64;
        for (i, slot) in values.iter_mut().enumerate() {
            let h = config.hash(i, x);
            if h < *slot {
                *slot = h;
            }
        }
    }
    MinHashSignature { values }
}

/// Sketch a batch in parallel, preserving order.
pub fn minhash_batch(vectors: &[FeatureVector], config: &MinHashConfig) -> Vec<MinHashSignature> {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(vectors.len().max(1));
    if threads <= 1 || vectors.len() < 32 {
        return vectors.iter().map(|v| minhash(v, config)).collect();
    }
    let chunk_size = vectors.len().div_ceil(threads);
    let mut out: Vec<MinHashSignature> = Vec::with_capacity(vectors.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = vectors
            .chunks(chunk_size)
            .map(|chunk| scope.spawn(move || chunk.iter().map(|v| minhash(v, config)).collect::<Vec<_>>()))
            .collect();
        for handle in handles {
            out.extend(handle.join().expect("minhash worker panicked"));
        }
    });
    out
}

/// Estimated Jaccard distance: 1 minus the fraction of equal components.
pub fn estimate_distance(s1: &MinHashSignature, s2: &MinHashSignature) -> Result<f64> {
    if s1.d() != s2.d() {
        return Err(Error::LengthMismatch {
            left: s1.d(),
            right: s2.d(),
        });
    }
    let matching = s1
        .values
        .iter()
        .zip(&s2.values)
        .filter(|(a, b)| a == b)
        .count();
    Ok(1.0 - matching as f64 / s1.d() as f64)
}

/// JSON-lines row for the signature store.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignatureRow {
    pub id: usize,
    pub values: Vec<u32>,
}
