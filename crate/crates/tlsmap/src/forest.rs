//! LSH forest over MinHash signatures for approximate k-NN retrieval.
//!
//! Each of the `l` prefix trees owns a fixed run of `d / l` signature
//! components, folded to one byte each. A tree is a sorted array of
//! (byte-key, id) pairs, which supports the same descend-then-widen walk as
//! a pointer trie: a query starts at the deepest prefix of its own key and
//! widens one level at a time, pooling candidates from every tree, until at
//! least `widening * k` candidates are gathered (or the prefix is exhausted,
//! at which point the pool is the whole index and the walk degenerates into
//! a linear scan). Candidates are then ranked exactly by estimated distance
//! over the full signatures.
//!
//! The index is append-then-build: inserts are rejected after [`LshForest::index`]
//! and queries are rejected before it.

use crate::error::{Error, Result};
use crate::minhash::{estimate_distance, MinHashSignature};

/// Forest shape: number of prefix trees and the candidate-widening factor.
#[derive(Debug, Clone)]
pub struct ForestConfig {
    /// Number of prefix trees (`l`). Default 128.
    pub trees: usize,
    /// Gather at least `widening * k` candidates before ranking. Default 10.
    pub widening: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 128,
            widening: 10,
        }
    }
}

/// A retrieved neighbor: estimated Jaccard distance in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

/// One prefix tree: ids sorted by their byte key.
struct PrefixTree {
    /// (key, id), sorted lexicographically by key then id.
    entries: Vec<(Vec<u8>, usize)>,
}

pub struct LshForest {
    config: ForestConfig,
    d: usize,
    depth: usize,
    signatures: Vec<MinHashSignature>,
    trees: Vec<PrefixTree>,
    built: bool,
}

/// Fold one 32-bit signature component to a key byte.
#[inline]
fn fold_byte(value: u32) -> u8 {
    let b = value ^ (value >> 8) ^ (value >> 16) ^ (value >> 24);
    b as u8
}

impl LshForest {
    pub fn new(config: ForestConfig) -> Self {
        LshForest {
            config,
            d: 0,
            depth: 0,
            signatures: Vec::new(),
            trees: Vec::new(),
            built: false,
        }
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn is_built(&self) -> bool {
        self.built
    }

    pub fn signature(&self, id: usize) -> Option<&MinHashSignature> {
        self.signatures.get(id)
    }

    /// Append a signature; its id is its insertion position.
    pub fn insert(&mut self, signature: MinHashSignature) -> Result<usize> {
        if self.built {
            return Err(Error::Invalid("forest already built".into()));
        }
        if self.signatures.is_empty() {
            self.d = signature.d();
        } else if signature.d() != self.d {
            return Err(Error::LengthMismatch {
                left: self.d,
                right: signature.d(),
            });
        }
        let id = self.signatures.len();
        self.signatures.push(signature);
        Ok(id)
    }

    /// Key of `signature` in tree `tree`: `depth` folded components starting
    /// at the tree's component offset (wrapping so every tree has a full key
    /// even when `trees` does not divide `d`).
    fn key_for(&self, tree: usize, signature: &MinHashSignature) -> Vec<u8> {
        (0..self.depth)
            .map(|level| {
                let component = (tree * self.depth + level) % self.d;
                fold_byte(signature.values[component])
            })
            .collect()
    }

    /// Build the prefix trees. The index is immutable afterward.
    pub fn index(&mut self) -> Result<()> {
        if self.signatures.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let trees = self.config.trees.max(1);
        self.depth = (self.d / trees).max(1);
        self.trees = (0..trees)
            .map(|tree| {
                let mut entries: Vec<(Vec<u8>, usize)> = self
                    .signatures
                    .iter()
                    .enumerate()
                    .map(|(id, sig)| (self.key_for(tree, sig), id))
                    .collect();
                entries.sort();
                PrefixTree { entries }
            })
            .collect();
        self.built = true;
        Ok(())
    }

    /// Up to `k` nearest neighbors of an indexed id, ascending estimated
    /// distance, ties broken by ascending id. Neighbors with no signature
    /// agreement at all (distance exactly 1.0) are not neighbors; a node at
    /// distance 1.0 from everything therefore comes back with no results and
    /// surfaces as a graph outlier.
    pub fn query_knn(&self, id: usize, k: usize) -> Result<Vec<Neighbor>> {
        if !self.built {
            return Err(Error::IndexNotBuilt);
        }
        if id >= self.signatures.len() {
            return Err(Error::UnknownId(id));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let query = &self.signatures[id];
        let keys: Vec<Vec<u8>> = (0..self.trees.len())
            .map(|tree| self.key_for(tree, query))
            .collect();

        let target = self.config.widening.max(1) * k;
        let mut candidates = vec![false; self.signatures.len()];
        let mut candidate_count = 0usize;

        // Descend to the full prefix, then widen one level per round.
        for level in (0..=self.depth).rev() {
            for (tree, key) in self.trees.iter().zip(&keys) {
                let prefix = &key[..level];
                let start = tree
                    .entries
                    .partition_point(|(entry, _)| entry[..level] < *prefix);
                for (entry, entry_id) in &tree.entries[start..] {
                    if entry[..level] != *prefix {
                        break;
                    }
                    if *entry_id != id && !candidates[*entry_id] {
                        candidates[*entry_id] = true;
                        candidate_count += 1;
                    }
                }
            }
            if candidate_count >= target {
                break;
            }
        }

        let mut neighbors: Vec<Neighbor> = candidates
            .iter()
            .enumerate()
            .filter(|(_, &hit)| hit)
            .map(|(candidate, _)| {
                let distance = estimate_distance(query, &self.signatures[candidate])
                    .expect("index enforces equal d");
                Neighbor {
                    id: candidate,
                    distance,
                }
            })
            .filter(|n| n.distance < 1.0)
            .collect();
        neighbors.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .expect("distances are finite")
                .then(a.id.cmp(&b.id))
        });
        neighbors.truncate(k);
        Ok(neighbors)
    }
}

/// Insert every signature and build in one step.
pub fn build_forest(
    signatures: Vec<MinHashSignature>,
    config: ForestConfig,
) -> Result<LshForest> {
    if signatures.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let mut forest = LshForest::new(config);
    for signature in signatures {
        forest.insert(signature)?;
    }
    forest.index()?;
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::minhash::{jaccard_distance, minhash, MinHashConfig};
    use crate::rng::SplitMix64;

    fn vector(bits: &[usize]) -> FeatureVector {
        FeatureVector {
            columns: 4096,
            set_bits: bits.to_vec(),
        }
    }

    fn signatures_for(sets: &[Vec<usize>], d: usize, seed: u64) -> Vec<MinHashSignature> {
        let config = MinHashConfig::new(d, seed).unwrap();
        sets.iter().map(|s| minhash(&vector(s), &config)).collect()
    }

    #[test]
    fn smoke_build_and_query() {
        let sets = vec![vec![1, 2, 3], vec![1, 2, 4], vec![100, 200, 300]];
        let forest = build_forest(signatures_for(&sets, 128, 1), ForestConfig::default()).unwrap();
        assert_eq!(forest.len(), 3);
        for id in 0..3 {
            let result = forest.query_knn(id, 2).unwrap();
            assert!(result.iter().all(|n| n.id != id && n.id < 3));
        }
    }

    #[test]
    fn duplicates_are_found_at_distance_zero() {
        let sets = vec![vec![9, 10], vec![1, 2, 3], vec![1, 2, 3]];
        let forest = build_forest(signatures_for(&sets, 128, 2), ForestConfig::default()).unwrap();
        let result = forest.query_knn(1, 1).unwrap();
        assert_eq!(result.len(), 1);
        assert_eq!(result[0].id, 2);
        assert_eq!(result[0].distance, 0.0);
    }

    #[test]
    fn deterministic_across_builds() {
        let mut rng = SplitMix64::new(55);
        let sets: Vec<Vec<usize>> = (0..50)
            .map(|_| {
                let mut bits: Vec<usize> =
                    (0..12).map(|_| rng.next_below(400) as usize).collect();
                bits.sort_unstable();
                bits.dedup();
                bits
            })
            .collect();
        let a = build_forest(signatures_for(&sets, 256, 7), ForestConfig::default()).unwrap();
        let b = build_forest(signatures_for(&sets, 256, 7), ForestConfig::default()).unwrap();
        for id in 0..sets.len() {
            assert_eq!(a.query_knn(id, 5).unwrap(), b.query_knn(id, 5).unwrap());
        }
    }

    #[test]
    fn empty_index_is_error() {
        assert!(matches!(
            build_forest(Vec::new(), ForestConfig::default()),
            Err(Error::EmptyIndex)
        ));
    }

    #[test]
    fn query_before_index_is_rejected() {
        let mut forest = LshForest::new(ForestConfig::default());
        forest
            .insert(signatures_for(&[vec![1, 2]], 64, 0).pop().unwrap())
            .unwrap();
        assert!(matches!(forest.query_knn(0, 1), Err(Error::IndexNotBuilt)));
        forest.index().unwrap();
        assert!(forest.query_knn(0, 1).is_ok());
    }

    #[test]
    fn insert_after_build_is_rejected() {
        let mut forest = LshForest::new(ForestConfig::default());
        let sigs = signatures_for(&[vec![1], vec![2]], 64, 0);
        for s in sigs {
            forest.insert(s).unwrap();
        }
        forest.index().unwrap();
        let extra = signatures_for(&[vec![3]], 64, 0).pop().unwrap();
        assert!(forest.insert(extra).is_err());
    }

    #[test]
    fn unknown_id_is_error() {
        let forest = build_forest(
            signatures_for(&[vec![1], vec![2]], 64, 0),
            ForestConfig::default(),
        )
        .unwrap();
        assert!(matches!(forest.query_knn(5, 1), Err(Error::UnknownId(5))));
    }

    #[test]
    fn k_zero_returns_nothing() {
        let forest = build_forest(
            signatures_for(&[vec![1], vec![1]], 64, 0),
            ForestConfig::default(),
        )
        .unwrap();
        assert!(forest.query_knn(0, 0).unwrap().is_empty());
    }

    #[test]
    fn saturation_returns_all_related_points() {
        // k far beyond n: every point with any agreement comes back.
        let sets = vec![vec![1, 2, 3], vec![1, 2, 4], vec![1, 3, 4], vec![2, 3, 4]];
        let forest = build_forest(signatures_for(&sets, 256, 3), ForestConfig::default()).unwrap();
        let result = forest.query_knn(0, 100).unwrap();
        assert_eq!(result.len(), 3);
        let mut ids: Vec<usize> = result.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn results_sorted_by_distance_then_id() {
        let sets = vec![
            vec![1, 2, 3, 4, 5],
            vec![1, 2, 3, 4, 5],
            vec![1, 2, 3, 4, 6],
            vec![1, 2, 9, 10, 11],
        ];
        let forest = build_forest(signatures_for(&sets, 512, 4), ForestConfig::default()).unwrap();
        let result = forest.query_knn(0, 3).unwrap();
        assert_eq!(result[0].id, 1);
        assert_eq!(result[0].distance, 0.0);
        for pair in result.windows(2) {
            assert!(pair[0].distance <= pair[1].distance);
        }
    }

    #[test]
    fn isolated_point_has_no_neighbors() {
        let sets = vec![vec![1, 2, 3], vec![1, 2, 4], vec![3000, 3001, 3002]];
        let forest = build_forest(signatures_for(&sets, 1024, 5), ForestConfig::default()).unwrap();
        let result = forest.query_knn(2, 10).unwrap();
        // Overwhelmingly the disjoint point shares no component minima.
        assert!(result.is_empty(), "expected no neighbors, got {result:?}");
    }

    #[test]
    fn recall_against_exact_oracle() {
        // 300 points in 3 planted families; recall@5 vs exact Jaccard top-5.
        let mut rng = SplitMix64::new(77);
        let mut sets = Vec::new();
        let mut centers = Vec::new();
        for _ in 0..3 {
            let mut center: Vec<usize> = Vec::new();
            while center.len() < 30 {
                let bit = rng.next_below(2000) as usize;
                if !center.contains(&bit) {
                    center.push(bit);
                }
            }
            centers.push(center);
        }
        for i in 0..300 {
            let center = &centers[i % 3];
            let mut member = center.clone();
            let flips = rng.next_below(4) as usize;
            for _ in 0..flips {
                let at = rng.next_below(30) as usize;
                member[at] = rng.next_below(2000) as usize;
            }
            member.sort_unstable();
            member.dedup();
            sets.push(member);
        }
        let forest = build_forest(signatures_for(&sets, 1024, 9), ForestConfig::default()).unwrap();

        let mut total_recall = 0.0;
        let queries = 20;
        for q in 0..queries {
            let id = q * 13 % sets.len();
            let mut exact: Vec<(f64, usize)> = (0..sets.len())
                .filter(|&other| other != id)
                .map(|other| (jaccard_distance(&sets[id], &sets[other]), other))
                .collect();
            exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // Tie-aware: any neighbor within the true 5th distance is a hit.
            let threshold = exact[4].0 + 1e-12;
            let got = forest.query_knn(id, 5).unwrap();
            let hits = got
                .iter()
                .filter(|n| jaccard_distance(&sets[id], &sets[n.id]) <= threshold)
                .count()
                .min(5);
            total_recall += hits as f64 / 5.0;
        }
        let recall = total_recall / queries as f64;
        assert!(recall >= 0.8, "recall {recall} below 0.8");
    }
}
