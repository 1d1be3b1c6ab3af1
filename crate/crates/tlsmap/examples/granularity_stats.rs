//! Evaluation machinery on the bundled corpus: granularity comparison
//! (TLS-only versus header-enriched encodings), the 20x10 distance-stability
//! sample, and a neighborhood audit with external verdicts.
//!
//!     cargo run --example granularity_stats

use std::path::Path;

use tlsmap::analysis::{
    granularity_report, load_verdicts, neighborhood_audit, stability_sample, Selection,
};
use tlsmap::features::Vocabulary;
use tlsmap::ingest::Label;
use tlsmap::pipeline::{self, load_config, run_pipeline};

fn main() -> Result<(), tlsmap::Error> {
    let manifest_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let fixtures = manifest_dir.join("fixtures/corpus60");
    let config = load_config(fixtures.join("pipeline.conf"))?;
    let out_dir = manifest_dir
        .ancestors()
        .nth(2)
        .unwrap_or(manifest_dir)
        .join("target/tlsmap-examples/corpus60-run");
    run_pipeline(&config, &out_dir)?;

    let records = pipeline::load_enriched_records(&out_dir)?;
    let vocab_tls = Vocabulary::read_json(out_dir.join("vocab_tls.json"))?;
    let vocab_enriched = Vocabulary::read_json(out_dir.join("vocab.json"))?;

    let report = granularity_report(&records, &vocab_tls, &vocab_enriched, config.header_mode)?;
    println!("granularity (distinct fingerprint classes per source/label group):\n");
    print!("{}", report.to_text());
    println!(
        "vector widths: {} tls-only columns vs {} enriched columns\n",
        vocab_tls.len(),
        vocab_enriched.len()
    );

    let forest = pipeline::rebuild_forest(&config, &out_dir)?;
    let rows = stability_sample(&forest, 20, 10, config.seed)?;
    println!("distance stability: 20 random ids x 10 nearest neighbors");
    for row in rows.iter().take(5) {
        let rendered: Vec<String> = row.distances.iter().map(|d| format!("{d:.3}")).collect();
        println!("  id {:>2}: {}", row.id, rendered.join(" "));
    }
    println!("  ... ({} more rows in stability.csv)\n", rows.len() - 5);

    // Audit the bad/unknown blend with the bundled external verdicts.
    let layout = pipeline::read_layout(&out_dir)?;
    let verdicts = load_verdicts(fixtures.join("verdicts.csv"))?;
    let selection: Vec<usize> = records
        .iter()
        .filter(|r| r.label != Label::Good)
        .map(|r| r.id)
        .collect();
    let audit = neighborhood_audit(&records, &layout, &Selection::Ids(selection), Some(&verdicts))?;
    println!("audit of the bad + unknown blend:");
    print!("{}", audit.to_text());
    Ok(())
}
