//! Index MinHash signatures in the LSH forest and run approximate k-NN
//! queries with a planted near-duplicate.
//!
//!     cargo run --example knn_forest

use tlsmap::features::FeatureVector;
use tlsmap::forest::{build_forest, ForestConfig};
use tlsmap::minhash::{minhash, MinHashConfig};
use tlsmap::rng::SplitMix64;

fn main() -> Result<(), tlsmap::Error> {
    let columns = 1000usize;
    let mut rng = SplitMix64::new(3);

    // 200 random 25-bit vectors, then a deliberate near-duplicate of id 0.
    let mut sets: Vec<Vec<usize>> = (0..200)
        .map(|_| {
            let mut bits: Vec<usize> = (0..25)
                .map(|_| rng.next_below(columns as u64) as usize)
                .collect();
            bits.sort_unstable();
            bits.dedup();
            bits
        })
        .collect();
    let mut clone = sets[0].clone();
    clone.pop(); // drop one bit: very close, not identical
    sets.push(clone);
    let clone_id = sets.len() - 1;

    let config = MinHashConfig::new(1024, 11)?;
    let signatures = sets
        .iter()
        .map(|bits| {
            minhash(
                &FeatureVector {
                    columns,
                    set_bits: bits.clone(),
                },
                &config,
            )
        })
        .collect();
    let forest = build_forest(signatures, ForestConfig::default())?;
    println!("indexed {} signatures in {} prefix trees", forest.len(), 128);

    println!("\n5 nearest neighbors of id 0:");
    for neighbor in forest.query_knn(0, 5)? {
        let marker = if neighbor.id == clone_id { "  <- planted near-duplicate" } else { "" };
        println!("  id {:>3}  distance {:.4}{marker}", neighbor.id, neighbor.distance);
    }

    println!("\n5 nearest neighbors of the near-duplicate:");
    for neighbor in forest.query_knn(clone_id, 5)? {
        println!("  id {:>3}  distance {:.4}", neighbor.id, neighbor.distance);
    }
    Ok(())
}
