//! Render a similarity map by hand from library pieces (no pipeline): build
//! vectors for a handful of synthetic servers, index, graph, lay out, and
//! emit the self-contained HTML plus GraphML.
//!
//!     cargo run --example render_map

use std::path::Path;

use tlsmap::features::{build_vocabulary, vectorize, HeaderMode};
use tlsmap::forest::{build_forest, ForestConfig};
use tlsmap::graph::{build_knn_graph, kruskal_msf};
use tlsmap::ingest::Label;
use tlsmap::layout::layout_tree;
use tlsmap::minhash::{minhash_batch, MinHashConfig};
use tlsmap::record::{EnrichedRecord, HeaderInfo};
use tlsmap::render::{export_graphml, render_html, RenderSpec};
use tlsmap::tls::parse_raw;

fn server(id: usize, label: Label, raw: &str, hash: u32, server: &str) -> EnrichedRecord {
    let fingerprint = parse_raw(raw).expect("fixture fingerprint parses");
    EnrichedRecord {
        id,
        domain: format!("host-{id:02}.example"),
        ip: None,
        source: "handmade".into(),
        label,
        asn: None,
        sha256_id: fingerprint.sha256_id.clone(),
        tls: fingerprint.dedup,
        header: Some(HeaderInfo {
            hash,
            server_value: Some(server.into()),
            keys: vec!["Server".into(), "Date".into()],
        }),
    }
}

fn main() -> Result<(), tlsmap::Error> {
    // A bad pair, a near-clone labeled unknown, and two unrelated good hosts.
    let records = vec![
        server(0, Label::Bad, "771_1302_43.AwQ_0.-16.AAMCaDI__x_-|______<40", 11, "Apache"),
        server(1, Label::Bad, "771_1302_43.AwQ_0.-16.AAMCaDI__y_-|______<40", 12, "Apache"),
        server(2, Label::Unknown, "771_1302_43.AwQ_0.-16.AAMCaDI__x_-|______<40", 11, "Apache"),
        server(3, Label::Good, "772_1303_43.BwQ_0.-13.AgQD___|772_1303_43.BwQ_0.-13.AgQD___", 21, "nginx"),
        server(4, Label::Good, "772_1303_43.BwQ_0.-13.AgQD-51.Zz___|772_1303_43.BwQ_0.-13.AgQD___", 22, "nginx"),
    ];

    let vocab = build_vocabulary(&records, HeaderMode::HashOnly)?;
    let vectors = records
        .iter()
        .map(|r| vectorize(r, &vocab, HeaderMode::HashOnly))
        .collect::<Result<Vec<_>, _>>()?;
    let signatures = minhash_batch(&vectors, &MinHashConfig::new(1024, 5)?);
    let forest = build_forest(signatures, ForestConfig::default())?;
    let graph = build_knn_graph(&forest, 3)?;
    let spanning = kruskal_msf(&graph);
    let layout = layout_tree(&spanning, 5);

    let out_dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .unwrap_or_else(|| Path::new("."))
        .join("target/tlsmap-examples");
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let html = out_dir.join("handmade.html");
    let graphml = out_dir.join("handmade.graphml");
    render_html(&layout, &records, &RenderSpec::default(), "handmade", &html)?;
    export_graphml(&layout, &graph, &records, &graphml)?;

    println!("nodes: {}, knn edges: {}, tree edges: {}", records.len(), graph.edges.len(), spanning.edges.len());
    println!("unknown host-02 sits on top of the bad pair; the good pair forms its own component");
    println!("wrote {}", html.display());
    println!("wrote {}", graphml.display());
    Ok(())
}
