//! From a weighted similarity graph to a spanning forest and planar
//! coordinates: Kruskal plus the seeded spring layout.
//!
//!     cargo run --example mst_layout

use tlsmap::graph::{kruskal_msf, GraphEdge, SimilarityGraph};
use tlsmap::layout::layout_tree;
use tlsmap::rng::SplitMix64;

fn main() {
    // Two dense blobs joined by nothing, plus one isolated node.
    let mut rng = SplitMix64::new(8);
    let mut edges = Vec::new();
    for u in 0..8 {
        for v in (u + 1)..8 {
            edges.push(GraphEdge { u, v, weight: 0.05 + rng.next_f64() * 0.2 });
        }
    }
    for u in 8..14 {
        for v in (u + 1)..14 {
            edges.push(GraphEdge { u, v, weight: 0.05 + rng.next_f64() * 0.2 });
        }
    }
    let graph = SimilarityGraph::from_edges(15, edges);
    println!(
        "graph: {} nodes, {} edges, isolated: {:?}",
        graph.node_count,
        graph.edges.len(),
        graph.isolated_nodes()
    );

    let forest = kruskal_msf(&graph);
    println!(
        "spanning forest: {} edges across {} components, total weight {:.3}",
        forest.edges.len(),
        forest.component_count(),
        forest.total_weight()
    );
    for (component, weight) in &forest.component_weights {
        println!("  component rooted at node {component}: weight {weight:.3}");
    }

    let layout = layout_tree(&forest, 42);
    println!("\ncoordinates:");
    for id in 0..layout.node_count() {
        println!("  node {id:>2}: ({:>7.2}, {:>7.2})", layout.x[id], layout.y[id]);
    }

    // Tree neighbors land closer together than arbitrary pairs.
    let dist = |a: usize, b: usize| {
        ((layout.x[a] - layout.x[b]).powi(2) + (layout.y[a] - layout.y[b]).powi(2)).sqrt()
    };
    let edge_mean: f64 =
        forest.edges.iter().map(|e| dist(e.u, e.v)).sum::<f64>() / forest.edges.len() as f64;
    let far = dist(0, 8); // across components
    println!("\nmean tree-edge length {edge_mean:.2}; cross-component example {far:.2}");
}
