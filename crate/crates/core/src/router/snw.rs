//! Spray-and-Wait with binary or source spraying.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Ctx, Router};
use crate::message::MessageId;
use crate::net::Transfer;
use crate::topology::NodeId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnwMode {
    /// Hand over half of the copies (rounded down) to every node met.
    #[default]
    Binary,
    /// Only the source hands out copies, one at a time.
    Source,
}

impl FromStr for SnwMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(SnwMode::Binary),
            "source" => Ok(SnwMode::Source),
            _ => Err(format!("unknown spray mode {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Holding {
    pub copies: u32,
    pub hops: u32,
}

/// Copies handed to a non-destination node by a holder of `copies`.
pub fn snw_handover(mode: SnwMode, copies: u32, is_source: bool) -> u32 {
    if copies <= 1 {
        return 0;
    }
    match mode {
        SnwMode::Binary => copies / 2,
        SnwMode::Source if is_source => 1,
        SnwMode::Source => 0,
    }
}

#[derive(Clone, Debug)]
pub struct SprayAndWait {
    mode: SnwMode,
    holdings: Vec<BTreeMap<MessageId, Holding>>,
    used: Vec<u64>,
    delivered: Vec<BTreeSet<MessageId>>,
    capacity: u64,
    epoch: u64,
}

impl SprayAndWait {
    pub fn new(nodes: usize, buffer_bytes: u64, mode: SnwMode) -> Self {
        SprayAndWait {
            mode,
            holdings: vec![BTreeMap::new(); nodes],
            used: vec![0; nodes],
            delivered: vec![BTreeSet::new(); nodes],
            capacity: buffer_bytes,
            epoch: 0,
        }
    }

    pub fn holding(&self, node: NodeId, msg: MessageId) -> Option<Holding> {
        self.holdings[node as usize].get(&msg).copied()
    }

    fn lacks(&self, node: NodeId, msg: MessageId) -> bool {
        !self.holdings[node as usize].contains_key(&msg) && !self.delivered[node as usize].contains(&msg)
    }

    fn wants(&self, ctx: &Ctx<'_, u32>, from: NodeId, to: NodeId, msg: MessageId) -> bool {
        let Some(h) = self.holding(from, msg) else { return false };
        let m = ctx.messages.get(msg);
        if !self.lacks(to, msg) {
            return false;
        }
        to == m.dst || snw_handover(self.mode, h.copies, from == m.src) > 0
    }

    fn consider(&mut self, ctx: &mut Ctx<'_, u32>, from: NodeId, to: NodeId, msg: MessageId) {
        if self.wants(ctx, from, to, msg) && !ctx.sched.is_pending(from, to, msg) {
            let m = ctx.messages.get(msg);
            ctx.sched.enqueue(from, to, msg, 0, m.size, to == m.dst, 0);
            self.epoch += 1;
        }
    }

    fn consider_all(&mut self, ctx: &mut Ctx<'_, u32>, from: NodeId, to: NodeId) {
        let msgs: Vec<MessageId> = self.holdings[from as usize].keys().copied().collect();
        for m in msgs {
            self.consider(ctx, from, to, m);
        }
    }

    fn consider_neighbors(&mut self, ctx: &mut Ctx<'_, u32>, node: NodeId, msg: MessageId) {
        let ns: Vec<NodeId> = ctx.links.neighbors(node).iter().copied().collect();
        for n in ns {
            self.consider(ctx, node, n, msg);
        }
    }

    fn add(&mut self, ctx: &Ctx<'_, u32>, node: NodeId, msg: MessageId, copies: u32, hops: u32) {
        let size = ctx.messages.get(msg).size;
        let e = self.holdings[node as usize].entry(msg).or_insert_with(|| {
            self.used[node as usize] += size;
            Holding { copies: 0, hops }
        });
        e.copies += copies;
        e.hops = e.hops.min(hops);
        self.epoch += 1;
    }

    fn take(&mut self, ctx: &Ctx<'_, u32>, node: NodeId, msg: MessageId, copies: u32) -> u32 {
        let map = &mut self.holdings[node as usize];
        let Some(h) = map.get_mut(&msg) else { return 0 };
        let got = copies.min(h.copies);
        h.copies -= got;
        if h.copies == 0 {
            map.remove(&msg);
            self.used[node as usize] -= ctx.messages.get(msg).size;
        }
        self.epoch += 1;
        got
    }
}

impl Router for SprayAndWait {
    type Payload = u32;

    fn name(&self) -> &'static str {
        "spray_and_wait"
    }

    fn on_link_up(&mut self, ctx: &mut Ctx<'_, u32>, a: NodeId, b: NodeId) {
        self.consider_all(ctx, a, b);
        self.consider_all(ctx, b, a);
    }

    fn on_link_down(&mut self, _ctx: &mut Ctx<'_, u32>, _a: NodeId, _b: NodeId) {}

    fn on_created(&mut self, ctx: &mut Ctx<'_, u32>, msg: MessageId) -> bool {
        let m = *ctx.messages.get(msg);
        if self.used[m.src as usize] + m.size > self.capacity {
            ctx.rec.dropped_buffer_full += 1;
            return false;
        }
        self.add(ctx, m.src, msg, m.copies, 0);
        self.consider_neighbors(ctx, m.src, msg);
        true
    }

    fn on_transfer_start(&mut self, ctx: &mut Ctx<'_, u32>, t: &mut Transfer<u32>) -> bool {
        if !self.wants(ctx, t.from, t.to, t.msg) {
            return false;
        }
        let m = *ctx.messages.get(t.msg);
        let h = self.holding(t.from, t.msg).expect("wants implies a holding");
        let n = if t.to == m.dst {
            h.copies
        } else {
            if self.used[t.to as usize] + m.size > self.capacity {
                ctx.rec.dropped_buffer_full += 1;
                return false;
            }
            snw_handover(self.mode, h.copies, t.from == m.src)
        };
        t.payload = h.hops;
        t.copies = self.take(ctx, t.from, t.msg, n);
        true
    }

    fn on_transfer_done(&mut self, ctx: &mut Ctx<'_, u32>, t: Transfer<u32>) {
        ctx.rec.data_transfers += 1;
        let m = *ctx.messages.get(t.msg);
        let hops = t.payload + 1;
        if t.to == m.dst {
            self.delivered[t.to as usize].insert(t.msg);
            ctx.rec.deliver(t.msg, ctx.now, hops);
            self.epoch += 1;
            return;
        }
        self.add(ctx, t.to, t.msg, t.copies, hops);
        self.consider_neighbors(ctx, t.to, t.msg);
    }

    fn on_transfer_aborted(&mut self, ctx: &mut Ctx<'_, u32>, t: Transfer<u32>) {
        ctx.rec.aborted_transfers += 1;
        if t.copies > 0 {
            self.add(ctx, t.from, t.msg, t.copies, t.payload);
        }
    }

    fn add_held_copies(&self, totals: &mut [u64]) {
        for map in &self.holdings {
            for (m, h) in map {
                totals[*m as usize] += h.copies as u64;
            }
        }
    }

    fn data_epoch(&self) -> u64 {
        self.epoch
    }

    fn purge(&mut self, ctx: &mut Ctx<'_, u32>, msg: MessageId) {
        for i in 0..self.holdings.len() {
            if let Some(h) = self.holdings[i].get(&msg).copied() {
                self.take(ctx, i as NodeId, msg, h.copies);
            }
            ctx.sched.drain_queued(i as NodeId, |t| t.msg == msg);
        }
        self.epoch += 1;
    }
}
