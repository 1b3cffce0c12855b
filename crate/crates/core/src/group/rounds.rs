use std::collections::{BTreeMap, BTreeSet};

use super::{GroupAlgorithmMessage, GroupConfig, GroupNode};
use crate::time::SimTime;
use crate::topology::NodeId;

/// Drives the group service over a static graph in lock-step rounds.
///
/// In round `r` the nodes speak in `order`; speaker `i` broadcasts at
/// `r * period + i` ms and its vector is delivered to every radio neighbor
/// before the next speaker goes.
#[derive(Clone, Debug)]
pub struct SyncHarness {
    nodes: BTreeMap<NodeId, GroupNode>,
    edges: BTreeSet<(NodeId, NodeId)>,
    order: Vec<NodeId>,
    round: u64,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

impl SyncHarness {
    pub fn new(cfg: GroupConfig, order: &[NodeId], edges: &[(NodeId, NodeId)]) -> Self {
        let mut nodes: BTreeMap<NodeId, GroupNode> =
            order.iter().map(|&n| (n, GroupNode::new(n, cfg, SimTime::ZERO))).collect();
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a != b {
                set.insert(key(a, b));
                nodes.get_mut(&a).expect("edge endpoint not in order").link_up(b);
                nodes.get_mut(&b).expect("edge endpoint not in order").link_up(a);
            }
        }
        SyncHarness { nodes, edges: set, order: order.to_vec(), round: 0 }
    }

    fn now(&self, idx: usize) -> SimTime {
        let period = self.nodes.values().next().map_or(100, |n| n.config().broadcast_period.0);
        SimTime(self.round * period + idx as u64)
    }

    /// Runs one round and returns the broadcasts in speaking order.
    pub fn round(&mut self) -> Vec<GroupAlgorithmMessage> {
        self.round += 1;
        let mut out = Vec::with_capacity(self.order.len());
        for idx in 0..self.order.len() {
            let now = self.now(idx);
            let speaker = self.order[idx];
            let node = self.nodes.get_mut(&speaker).expect("speaker exists");
            node.tick(now);
            let msg = node.build_group_message(now);
            node.note_broadcast();
            let neighbors: Vec<NodeId> = node.neighbors().iter().copied().collect();
            for n in neighbors {
                self.nodes.get_mut(&n).expect("neighbor exists").on_group_message(now, &msg, speaker);
            }
            out.push(msg);
        }
        out
    }

    pub fn run(&mut self, rounds: usize) {
        for _ in 0..rounds {
            self.round();
        }
    }

    pub fn remove_link(&mut self, a: NodeId, b: NodeId) {
        if self.edges.remove(&key(a, b)) {
            let now = self.now(self.order.len());
            self.nodes.get_mut(&a).expect("node").link_down(b, now);
            self.nodes.get_mut(&b).expect("node").link_down(a, now);
        }
    }

    pub fn add_link(&mut self, a: NodeId, b: NodeId) {
        if a != b && self.edges.insert(key(a, b)) {
            self.nodes.get_mut(&a).expect("node").link_up(b);
            self.nodes.get_mut(&b).expect("node").link_up(a);
        }
    }

    pub fn node(&self, id: NodeId) -> &GroupNode {
        &self.nodes[&id]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GroupNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    /// Each node's member set, keyed by node.
    pub fn views(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        self.nodes.iter().map(|(id, n)| (*id, n.group_members())).collect()
    }

    /// Distinct member sets, smallest member first.
    pub fn groups(&self) -> Vec<BTreeSet<NodeId>> {
        let set: BTreeSet<BTreeSet<NodeId>> = self.views().into_values().collect();
        set.into_iter().collect()
    }

    /// True when every member of every view holds the identical view.
    pub fn consistent(&self) -> bool {
        let views = self.views();
        views.values().all(|v| v.iter().all(|m| views.get(m) == Some(v)))
    }
}
