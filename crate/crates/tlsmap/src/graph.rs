//! The undirected weighted k-NN graph and its minimum spanning forest.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forest::LshForest;

/// An undirected edge, canonical form `u < v`, weight = estimated distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Union of all per-node k-NN results, symmetrized and deduplicated.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    pub node_count: usize,
    /// Sorted by (u, v); no self-loops, no duplicate pairs.
    pub edges: Vec<GraphEdge>,
}

impl SimilarityGraph {
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = GraphEdge>) -> Self {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for edge in edges {
            let (u, v) = if edge.u <= edge.v {
                (edge.u, edge.v)
            } else {
                (edge.v, edge.u)
            };
            if u == v {
                continue;
            }
            map.entry((u, v))
                .and_modify(|w| *w = w.min(edge.weight))
                .or_insert(edge.weight);
        }
        SimilarityGraph {
            node_count,
            edges: map
                .into_iter()
                .map(|((u, v), weight)| GraphEdge { u, v, weight })
                .collect(),
        }
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.u == node || e.v == node)
            .count()
    }

    /// Component label per node (labels are the smallest node id inside).
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.node_count);
        for edge in &self.edges {
            uf.union(edge.u, edge.v);
        }
        let mut labels = vec![0usize; self.node_count];
        let mut smallest: BTreeMap<usize, usize> = BTreeMap::new();
        for node in 0..self.node_count {
            let root = uf.find(node);
            smallest.entry(root).or_insert(node);
        }
        for node in 0..self.node_count {
            labels[node] = smallest[&uf.find(node)];
        }
        labels
    }

    /// Nodes with no incident edges, ascending. These are the outliers: their
    /// estimated distance to everything else is 1.0.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        let mut connected = vec![false; self.node_count];
        for edge in &self.edges {
            connected[edge.u] = true;
            connected[edge.v] = true;
        }
        (0..self.node_count).filter(|&n| !connected[n]).collect()
    }
}

/// Query every indexed node for its `k` nearest neighbors and pool the edges.
/// Both directions of a pair keep the minimum reported weight.
pub fn build_knn_graph(forest: &LshForest, k: usize) -> Result<SimilarityGraph> {
    if forest.is_empty() {
        return Err(Error::EmptyIndex);
    }
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let node_count = forest.len();
    let mut edges = Vec::new();
    for id in 0..node_count {
        for neighbor in forest.query_knn(id, k)? {
            edges.push(GraphEdge {
                u: id,
                v: neighbor.id,
                weight: neighbor.distance,
            });
        }
    }
    Ok(SimilarityGraph::from_edges(node_count, edges))
}

/// Disjoint-set with path compression and union by rank.
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            self.parent[x] = self.find(self.parent[x]);
        }
        self.parent[x]
    }

    /// Returns false when x and y were already connected.
    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let rx = self.find(x);
        let ry = self.find(y);
        if rx == ry {
            return false;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
        true
    }
}

/// Minimum spanning forest of the graph.
#[derive(Debug, Clone)]
pub struct SpanningForest {
    pub node_count: usize,
    /// Chosen edges, in the order Kruskal accepted them.
    pub edges: Vec<GraphEdge>,
    /// Component label per node (smallest node id inside the component).
    pub components: Vec<usize>,
    /// Total edge weight per component, keyed by component label.
    pub component_weights: BTreeMap<usize, f64>,
}

impl SpanningForest {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn component_count(&self) -> usize {
        self.component_weights.len()
    }
}

/// Kruskal with deterministic tie-breaking: ascending (weight, u, v).
///
/// An empty graph yields an empty forest; isolated nodes stay their own
/// single-node components, so `edges.len() == node_count - component_count`.
pub fn kruskal_msf(graph: &SimilarityGraph) -> SpanningForest {
    let mut sorted: Vec<&GraphEdge> = graph.edges.iter().collect();
    sorted.sort_by(|a, b| {
        a.weight
            .partial_cmp(&b.weight)
            .expect("weights are finite")
            .then(a.u.cmp(&b.u))
            .then(a.v.cmp(&b.v))
    });

    let mut uf = UnionFind::new(graph.node_count);
    let mut edges = Vec::new();
    for edge in sorted {
        if uf.union(edge.u, edge.v) {
            edges.push(*edge);
        }
    }

    let mut smallest: BTreeMap<usize, usize> = BTreeMap::new();
    for node in 0..graph.node_count {
        let root = uf.find(node);
        smallest.entry(root).or_insert(node);
    }
    let components: Vec<usize> = (0..graph.node_count)
        .map(|node| smallest[&uf.find(node)])
        .collect();

    let mut component_weights: BTreeMap<usize, f64> = BTreeMap::new();
    for &label in components.iter() {
        component_weights.entry(label).or_insert(0.0);
    }
    for edge in &edges {
        *component_weights.get_mut(&components[edge.u]).unwrap() += edge.weight;
    }

    SpanningForest {
        node_count: graph.node_count,
        edges,
        components,
        component_weights,
    }
}
