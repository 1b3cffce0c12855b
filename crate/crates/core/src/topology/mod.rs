//! Connectivity: mobility models, contact traces and graph statistics.

mod generate;
mod graph;
mod mobility;
mod trace;

pub use generate::{generate_trace, TraceModel, PRESETS};
pub use graph::{components, graph_stats, GraphStats};
pub use mobility::{rwp_next_leg, GroupMobility, GroupMobilityParams, Leg, RandomWaypoint, RwpParams};
pub use trace::{load_trace, parse_trace, trace_from_snapshots, write_trace, ContactEvent, ContactKind, TraceError};

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSize {
    pub width: f64,
    pub height: f64,
}

impl WorldSize {
    pub fn contains(&self, p: &Position) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    pub fn clamp(&self, p: Position) -> Position {
        Position::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }
}

/// Undirected connectivity graph at one instant; edges stored as `(low, high)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdjacencySnapshot {
    pub time: SimTime,
    pub nodes: usize,
    edges: Vec<(NodeId, NodeId)>,
}

impl AdjacencySnapshot {
    pub fn empty(time: SimTime, nodes: usize) -> Self {
        AdjacencySnapshot { time, nodes, edges: Vec::new() }
    }

    /// Builds from arbitrary pairs, dropping self-loops and duplicates.
    pub fn from_edges(time: SimTime, nodes: usize, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut edges: Vec<(NodeId, NodeId)> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        AdjacencySnapshot { time, nodes, edges }
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn neighbors(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        adj
    }

    /// Edges present here but not in `prev`, and edges of `prev` that vanished.
    pub fn diff(&self, prev: &AdjacencySnapshot) -> (Vec<(NodeId, NodeId)>, Vec<(NodeId, NodeId)>) {
        let (mut up, mut down) = (Vec::new(), Vec::new());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.edges, &prev.edges);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                up.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                down.push(b[j]);
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        (up, down)
    }
}

/// Unit-disk connectivity with an inclusive range threshold.
pub fn contacts_from_positions(time: SimTime, positions: &[Position], range: f64) -> AdjacencySnapshot {
    let r2 = range * range;
    let mut edges = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        for (j, q) in positions.iter().enumerate().skip(i + 1) {
            let (dx, dy) = (p.x - q.x, p.y - q.y);
            if dx * dx + dy * dy <= r2 {
                edges.push((i as NodeId, j as NodeId));
            }
        }
    }
    AdjacencySnapshot { time, nodes: positions.len(), edges }
}
