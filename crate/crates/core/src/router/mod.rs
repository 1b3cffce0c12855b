//! Routing protocols and the interface the simulator drives them through.

pub mod epidemic;
pub mod hymad;
pub mod snw;

use std::collections::BTreeSet;
use std::fmt::Debug;

use crate::message::{MessageId, MessageTable};
use crate::metrics::OverheadLedger;
use crate::net::{LinkScheduler, Transfer};
use crate::rng::RandomStream;
use crate::time::SimTime;
use crate::topology::NodeId;

pub use epidemic::Epidemic;
pub use hymad::{copies_to_forward, Hymad, HymadConfig};
pub use snw::{SnwMode, SprayAndWait};

/// Current radio neighbors of every node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Links {
    neighbors: Vec<BTreeSet<NodeId>>,
    count: usize,
}

impl Links {
    pub fn new(nodes: usize) -> Self {
        Links { neighbors: vec![BTreeSet::new(); nodes], count: 0 }
    }

    pub fn nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_up(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors[a as usize].contains(&b)
    }

    pub fn neighbors(&self, n: NodeId) -> &BTreeSet<NodeId> {
        &self.neighbors[n as usize]
    }

    pub fn up(&mut self, a: NodeId, b: NodeId) -> bool {
        if a == b || self.is_up(a, b) {
            return false;
        }
        self.neighbors[a as usize].insert(b);
        self.neighbors[b as usize].insert(a);
        self.count += 1;
        true
    }

    pub fn down(&mut self, a: NodeId, b: NodeId) -> bool {
        if !self.is_up(a, b) {
            return false;
        }
        self.neighbors[a as usize].remove(&b);
        self.neighbors[b as usize].remove(&a);
        self.count -= 1;
        true
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.count);
        for (a, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|b| **b > a as NodeId).map(|b| (a as NodeId, *b)));
        }
        out
    }
}

/// Per-run outcome counters that routers write into.
#[derive(Clone, Debug, Default)]
pub struct Recorder {
    pub delivered_at: Vec<Option<SimTime>>,
    pub hops: Vec<Option<u32>>,
    pub ledger: OverheadLedger,
    pub dropped_buffer_full: u64,
    pub duplicate_deliveries: u64,
    pub data_transfers: u64,
    pub aborted_transfers: u64,
}

impl Recorder {
    pub fn register(&mut self, msg: MessageId) {
        let i = msg as usize;
        if self.delivered_at.len() <= i {
            self.delivered_at.resize(i + 1, None);
            self.hops.resize(i + 1, None);
        }
    }

    /// Records an arrival at the destination; true on the first one.
    pub fn deliver(&mut self, msg: MessageId, now: SimTime, hops: u32) -> bool {
        self.register(msg);
        let i = msg as usize;
        if self.delivered_at[i].is_some() {
            self.duplicate_deliveries += 1;
            return false;
        }
        self.delivered_at[i] = Some(now);
        self.hops[i] = Some(hops);
        true
    }

    pub fn is_delivered(&self, msg: MessageId) -> bool {
        self.delivered_at.get(msg as usize).is_some_and(|d| d.is_some())
    }
}

/// What a router can see and touch while handling one event.
pub struct Ctx<'a, P> {
    pub now: SimTime,
    pub links: &'a Links,
    pub sched: &'a mut LinkScheduler<P>,
    pub messages: &'a MessageTable,
    pub rec: &'a mut Recorder,
    /// Custodian-choice stream.
    pub rng: &'a mut RandomStream,
    /// Timers requested by the router: (fire time, node, router-defined kind).
    pub timers: &'a mut Vec<(SimTime, NodeId, u8)>,
}

impl<P> Ctx<'_, P> {
    pub fn set_timer(&mut self, at: SimTime, node: NodeId, kind: u8) {
        self.timers.push((at, node, kind));
    }
}

pub trait Router {
    type Payload: Clone + Debug;

    fn name(&self) -> &'static str;

    fn init(&mut self, _ctx: &mut Ctx<'_, Self::Payload>) {}

    fn on_timer(&mut self, _ctx: &mut Ctx<'_, Self::Payload>, _node: NodeId, _kind: u8) {}

    fn on_link_up(&mut self, ctx: &mut Ctx<'_, Self::Payload>, a: NodeId, b: NodeId);

    /// Called after the scheduler has aborted the link's transfers.
    fn on_link_down(&mut self, ctx: &mut Ctx<'_, Self::Payload>, a: NodeId, b: NodeId);

    /// A new message at its source; false if it had to be dropped.
    fn on_created(&mut self, ctx: &mut Ctx<'_, Self::Payload>, msg: MessageId) -> bool;

    /// Last chance to revise or cancel a transfer about to occupy the link.
    /// On `false` the transfer is discarded and the router must have settled its copies.
    fn on_transfer_start(&mut self, ctx: &mut Ctx<'_, Self::Payload>, t: &mut Transfer<Self::Payload>) -> bool;

    fn on_transfer_done(&mut self, ctx: &mut Ctx<'_, Self::Payload>, t: Transfer<Self::Payload>);

    /// The link went down while the transfer was queued or running.
    fn on_transfer_aborted(&mut self, ctx: &mut Ctx<'_, Self::Payload>, t: Transfer<Self::Payload>);

    /// Adds copies held in custody (excluding transfers) to `totals[msg]`.
    fn add_held_copies(&self, totals: &mut [u64]);

    /// True if the router conserves a copy budget per message.
    fn counts_copies(&self) -> bool {
        true
    }

    /// Bumped whenever custody or the transfer queues change.
    fn data_epoch(&self) -> u64;

    /// Each node's group view, for routers that form groups.
    fn group_views(&self) -> Option<Vec<BTreeSet<NodeId>>> {
        None
    }

    fn malformed_entries(&self) -> u64 {
        0
    }

    /// Drops every trace of an expired message.
    fn purge(&mut self, ctx: &mut Ctx<'_, Self::Payload>, msg: MessageId);
}
