//! Ask the built artifacts who a domain's nearest neighbors are. On the
//! bundled corpus, every unknown-labeled clone resolves straight into the
//! bad family at distance 0 -- the detection mechanism in miniature.
//!
//!     cargo run --example query_neighbors

use std::path::Path;

use tlsmap::pipeline::{load_config, run_pipeline};
use tlsmap::query::{list_outliers, load_artifacts, query_domain};

fn main() -> Result<(), tlsmap::Error> {
    let manifest_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let config = load_config(manifest_dir.join("fixtures/corpus60/pipeline.conf"))?;
    let out_dir = manifest_dir
        .ancestors()
        .nth(2)
        .unwrap_or(manifest_dir)
        .join("target/tlsmap-examples/corpus60-run");
    run_pipeline(&config, &out_dir)?; // resumes if already built

    let artifacts = load_artifacts(&out_dir)?;

    let table = query_domain(&artifacts, "unkfam-07.example", 5)?;
    println!("nearest neighbors of unkfam-07.example:");
    print!("{}", table.to_text());

    let table = query_domain(&artifacts, "goodfam-02.example", 5)?;
    println!("\nnearest neighbors of goodfam-02.example:");
    print!("{}", table.to_text());

    let outliers = list_outliers(&artifacts.graph);
    println!("\noutliers (degree-zero nodes): {}", outliers.len());
    for id in outliers {
        println!("  {id} {}", artifacts.records[id].domain);
    }
    Ok(())
}
