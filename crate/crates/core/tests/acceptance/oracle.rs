//! Independent graph oracles and random instances.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use hymad::NodeId;

pub type Edges = BTreeSet<(NodeId, NodeId)>;

pub fn edge_set(edges: &[(NodeId, NodeId)]) -> Edges {
    edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect()
}

/// Hop distances from `s` inside the subgraph induced by `within`.
pub fn bfs(s: NodeId, within: &BTreeSet<NodeId>, edges: &Edges) -> BTreeMap<NodeId, u32> {
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(a, b) in edges {
        if within.contains(&a) && within.contains(&b) {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
    }
    let mut dist = BTreeMap::from([(s, 0)]);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in adj.get(&u).into_iter().flatten() {
            if !dist.contains_key(&v) {
                dist.insert(v, dist[&u] + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Diameter of the induced subgraph, `None` when it is disconnected.
pub fn diameter(members: &BTreeSet<NodeId>, edges: &Edges) -> Option<u32> {
    let mut d = 0;
    for &s in members {
        let dist = bfs(s, members, edges);
        if dist.len() != members.len() {
            return None;
        }
        d = d.max(dist.values().copied().max().unwrap_or(0));
    }
    Some(d)
}

/// Erdos-Renyi graph on 2..=20 nodes with a shuffled speaking order.
pub fn random_graph(rng: &mut ChaCha8Rng) -> (Vec<NodeId>, Vec<(NodeId, NodeId)>) {
    let n = rng.gen_range(2..=20u32);
    let p: f64 = rng.gen_range(0.05..0.5);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    let mut order: Vec<NodeId> = (0..n).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    (order, edges)
}

/// Random tree on `n` nodes plus a few chords, so it is connected.
pub fn connected_graph(rng: &mut ChaCha8Rng, n: u32) -> Vec<(NodeId, NodeId)> {
    let mut edges: Vec<(NodeId, NodeId)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..rng.gen_range(0..=n / 3) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort();
    edges.dedup();
    edges
}
