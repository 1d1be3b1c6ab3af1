//! MinHash sketches versus exact Jaccard: compress two feature sets to 1024
//! component minima and compare the estimated distance with the brute-force
//! value.
//!
//!     cargo run --example minhash_similarity

use tlsmap::features::FeatureVector;
use tlsmap::minhash::{estimate_distance, jaccard, minhash, MinHashConfig};
use tlsmap::rng::SplitMix64;

fn vector(bits: Vec<usize>) -> FeatureVector {
    FeatureVector {
        columns: 2000,
        set_bits: bits,
    }
}

fn main() -> Result<(), tlsmap::Error> {
    let config = MinHashConfig::new(1024, 7)?;
    let mut rng = SplitMix64::new(99);

    println!("{:>6} {:>10} {:>10} {:>10}", "pair", "exact", "estimate", "error");
    for pair in 0..8 {
        // Two sets sharing a controlled pool of bits.
        let shared = (rng.next_below(100) + 20) as usize;
        let extra = (rng.next_below(60) + 5) as usize;
        let mut pool: Vec<usize> = (0..2000).collect();
        rng.shuffle(&mut pool);
        let mut a = pool[..shared + extra].to_vec();
        let mut b = pool[..shared].to_vec();
        b.extend_from_slice(&pool[shared + extra..shared + 2 * extra]);
        a.sort_unstable();
        b.sort_unstable();

        let exact = 1.0 - jaccard(&a, &b);
        let sig_a = minhash(&vector(a), &config);
        let sig_b = minhash(&vector(b), &config);
        let estimate = estimate_distance(&sig_a, &sig_b)?;
        println!(
            "{pair:>6} {exact:>10.4} {estimate:>10.4} {:>10.4}",
            (estimate - exact).abs()
        );
    }

    println!("\nsignature of an identical pair always estimates 0:");
    let same = vector(vec![1, 5, 9, 42]);
    let s1 = minhash(&same, &config);
    let s2 = minhash(&same, &config);
    println!("  estimate_distance = {}", estimate_distance(&s1, &s2)?);
    Ok(())
}
