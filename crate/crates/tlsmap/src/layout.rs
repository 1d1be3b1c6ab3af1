//! Seeded spring layout of the spanning forest on the Euclidean plane.
//!
//! Forces act per connected component: repulsion between every node pair in
//! the component, spring attraction along tree edges only, a fixed 300
//! iterations with a linearly cooling displacement cap. Components are then
//! packed onto a grid (ascending component label, row-major) with
//! non-overlapping bounding boxes. The layout is a pure function of the
//! forest and the seed.

use std::collections::BTreeMap;

use crate::graph::SpanningForest;
use crate::rng::SplitMix64;

const ITERATIONS: usize = 300;

/// Coordinates per node plus the drawn tree edges (`s[i]`, `t[i]`).
#[derive(Debug, Clone)]
pub struct LayoutResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Edge source ids, aligned with `t`.
    pub s: Vec<usize>,
    /// Edge target ids, aligned with `s`.
    pub t: Vec<usize>,
}

impl LayoutResult {
    pub fn node_count(&self) -> usize {
        self.x.len()
    }

    pub fn edge_count(&self) -> usize {
        self.s.len()
    }
}

/// Lay out every component of the forest; see the module doc.
pub fn layout_tree(forest: &SpanningForest, seed: u64) -> LayoutResult {
    let n = forest.node_count;
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];

    // Component label -> member nodes, ascending.
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in 0..n {
        members.entry(forest.components[node]).or_default().push(node);
    }

    // Lay each component out locally around the origin.
    let mut boxes: BTreeMap<usize, (f64, f64, f64, f64)> = BTreeMap::new();
    for (&label, nodes) in &members {
        let local = layout_component(forest, nodes, seed ^ (label as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for (slot, &node) in nodes.iter().enumerate() {
            let (px, py) = local[slot];
            x[node] = px;
            y[node] = py;
            min_x = min_x.min(px);
            max_x = max_x.max(px);
            min_y = min_y.min(py);
            max_y = max_y.max(py);
        }
        boxes.insert(label, (min_x, max_x, min_y, max_y));
    }

    // Pack on a uniform grid: every cell fits the largest bounding box.
    let count = members.len().max(1);
    let columns = (count as f64).sqrt().ceil() as usize;
    let mut cell = 0.0f64;
    for &(min_x, max_x, min_y, max_y) in boxes.values() {
        cell = cell.max(max_x - min_x).max(max_y - min_y);
    }
    let pitch = cell + cell.max(1.0) * 0.25 + 1.0;
    for (slot, (&label, nodes)) in members.iter().enumerate() {
        let (min_x, max_x, min_y, max_y) = boxes[&label];
        let center_x = (min_x + max_x) / 2.0;
        let center_y = (min_y + max_y) / 2.0;
        let col = slot % columns;
        let row = slot / columns;
        let dx = col as f64 * pitch - center_x;
        let dy = row as f64 * pitch - center_y;
        for &node in nodes {
            x[node] += dx;
            y[node] += dy;
        }
    }

    LayoutResult {
        x,
        y,
        s: forest.edges.iter().map(|e| e.u).collect(),
        t: forest.edges.iter().map(|e| e.v).collect(),
    }
}

/// Fruchterman-Reingold restricted to the component's tree edges.
fn layout_component(forest: &SpanningForest, nodes: &[usize], seed: u64) -> Vec<(f64, f64)> {
    let n = nodes.len();
    if n == 1 {
        return vec![(0.0, 0.0)];
    }
    let slot_of: BTreeMap<usize, usize> = nodes
        .iter()
        .enumerate()
        .map(|(slot, &node)| (node, slot))
        .collect();
    let edges: Vec<(usize, usize)> = forest
        .edges
        .iter()
        .filter_map(|e| Some((*slot_of.get(&e.u)?, *slot_of.get(&e.v)?)))
        .collect();

    let span = (n as f64).sqrt();
    let ideal = 1.0; // k = sqrt(area / n) with area = n
    let mut rng = SplitMix64::new(seed);
    let mut pos: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                (rng.next_f64() - 0.5) * span,
                (rng.next_f64() - 0.5) * span,
            )
        })
        .collect();

    let mut disp = vec![(0.0f64, 0.0f64); n];
    for iteration in 0..ITERATIONS {
        for d in disp.iter_mut() {
            *d = (0.0, 0.0);
        }
        // Repulsion between all pairs in the component.
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = separation(pos[i], pos[j], i, j);
                let dist = (dx * dx + dy * dy).sqrt();
                let force = ideal * ideal / dist;
                let (fx, fy) = (dx / dist * force, dy / dist * force);
                disp[i].0 += fx;
                disp[i].1 += fy;
                disp[j].0 -= fx;
                disp[j].1 -= fy;
            }
        }
        // Spring attraction along tree edges only.
        for &(a, b) in &edges {
            let (dx, dy) = separation(pos[a], pos[b], a, b);
            let dist = (dx * dx + dy * dy).sqrt();
            let force = dist * dist / ideal;
            let (fx, fy) = (dx / dist * force, dy / dist * force);
            disp[a].0 -= fx;
            disp[a].1 -= fy;
            disp[b].0 += fx;
            disp[b].1 += fy;
        }
        // Cooling displacement cap.
        let temperature = span * 0.1 * (1.0 - iteration as f64 / ITERATIONS as f64) + 1e-3;
        for i in 0..n {
            let (dx, dy) = disp[i];
            let magnitude = (dx * dx + dy * dy).sqrt();
            if magnitude > 0.0 {
                let capped = magnitude.min(temperature);
                pos[i].0 += dx / magnitude * capped;
                pos[i].1 += dy / magnitude * capped;
            }
        }
    }
    pos
}

/// Vector from b to a, nudged deterministically when coincident.
#[inline]
fn separation(a: (f64, f64), b: (f64, f64), ia: usize, ib: usize) -> (f64, f64) {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    if dx * dx + dy * dy < 1e-18 {
        // Coincident points: split along a direction derived from the ids.
        let angle = ((ia * 31 + ib * 17) % 628) as f64 / 100.0;
        (angle.cos() * 1e-3, angle.sin() * 1e-3)
    } else {
        (dx, dy)
    }
}
