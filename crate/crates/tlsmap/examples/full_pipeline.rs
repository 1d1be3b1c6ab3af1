//! Run the whole pipeline on the bundled 60-domain corpus: ingest, parse,
//! header enrichment (offline capture store), vectorize, MinHash, LSH
//! forest, k-NN graph, spanning forest, layout, render and reports.
//!
//!     cargo run --example full_pipeline
//!
//! Outputs land in target/tlsmap-examples/corpus60-run/; open the HTML map
//! in a browser. Re-running resumes instantly from the manifest digests.

use std::path::Path;

use tlsmap::pipeline::{load_config, run_pipeline};

fn main() -> Result<(), tlsmap::Error> {
    let manifest_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let config = load_config(manifest_dir.join("fixtures/corpus60/pipeline.conf"))?;
    let out_dir = manifest_dir
        .ancestors()
        .nth(2)
        .unwrap_or(manifest_dir)
        .join("target/tlsmap-examples/corpus60-run");

    println!(
        "running pipeline: d={} l={} k={} widening={} header_mode={} seed={}",
        config.hash_functions,
        config.prefix_trees,
        config.neighbors,
        config.widening,
        config.header_mode,
        config.seed
    );
    let manifest = run_pipeline(&config, &out_dir)?;

    println!("\nstages completed ({} total):", manifest.stages.len());
    for (stage, record) in &manifest.stages {
        println!("  {stage:<10} {} output file(s)", record.outputs.len());
    }
    println!("\nmap:      {}", out_dir.join("corpus60.html").display());
    println!("graphml:  {}", out_dir.join("corpus60.graphml").display());
    println!("reports:  {}", out_dir.join("granularity.txt").display());
    println!("manifest: {}", out_dir.join("manifest.json").display());

    let granularity = std::fs::read_to_string(out_dir.join("granularity.txt"))
        .unwrap_or_default();
    println!("\n{granularity}");
    Ok(())
}
