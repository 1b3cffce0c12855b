//! Epidemic flooding: on every contact each side pulls whatever it lacks.

use std::collections::{BTreeMap, BTreeSet};

use super::{Ctx, Router};
use crate::message::MessageId;
use crate::net::Transfer;
use crate::topology::NodeId;

#[derive(Clone, Debug)]
pub struct Epidemic {
    /// Buffered messages with the hop count they arrived with.
    buffers: Vec<BTreeMap<MessageId, u32>>,
    used: Vec<u64>,
    delivered: Vec<BTreeSet<MessageId>>,
    capacity: u64,
    epoch: u64,
}

impl Epidemic {
    pub fn new(nodes: usize, buffer_bytes: u64) -> Self {
        Epidemic {
            buffers: vec![BTreeMap::new(); nodes],
            used: vec![0; nodes],
            delivered: vec![BTreeSet::new(); nodes],
            capacity: buffer_bytes,
            epoch: 0,
        }
    }

    pub fn holds(&self, node: NodeId, msg: MessageId) -> bool {
        self.buffers[node as usize].contains_key(&msg)
    }

    /// The summary vector a node would advertise.
    pub fn summary(&self, node: NodeId) -> BTreeSet<MessageId> {
        let mut s: BTreeSet<MessageId> = self.buffers[node as usize].keys().copied().collect();
        s.extend(self.delivered[node as usize].iter().copied());
        s
    }

    fn lacks(&self, node: NodeId, msg: MessageId) -> bool {
        !self.holds(node, msg) && !self.delivered[node as usize].contains(&msg)
    }

    fn offer(&mut self, ctx: &mut Ctx<'_, ()>, from: NodeId, to: NodeId, msg: MessageId) {
        if !self.lacks(to, msg) || ctx.sched.is_pending(from, to, msg) {
            return;
        }
        let m = ctx.messages.get(msg);
        ctx.sched.enqueue(from, to, msg, 0, m.size, to == m.dst, ());
        self.epoch += 1;
    }

    fn offer_all(&mut self, ctx: &mut Ctx<'_, ()>, from: NodeId, to: NodeId) {
        let msgs: Vec<MessageId> = self.buffers[from as usize].keys().copied().collect();
        for m in msgs {
            self.offer(ctx, from, to, m);
        }
    }

    fn spread(&mut self, ctx: &mut Ctx<'_, ()>, node: NodeId, msg: MessageId) {
        let ns: Vec<NodeId> = ctx.links.neighbors(node).iter().copied().collect();
        for n in ns {
            self.offer(ctx, node, n, msg);
        }
    }
}

impl Router for Epidemic {
    type Payload = ();

    fn name(&self) -> &'static str {
        "epidemic"
    }

    fn on_link_up(&mut self, ctx: &mut Ctx<'_, ()>, a: NodeId, b: NodeId) {
        self.offer_all(ctx, a, b);
        self.offer_all(ctx, b, a);
    }

    fn on_link_down(&mut self, _ctx: &mut Ctx<'_, ()>, _a: NodeId, _b: NodeId) {}

    fn on_created(&mut self, ctx: &mut Ctx<'_, ()>, msg: MessageId) -> bool {
        let m = *ctx.messages.get(msg);
        let src = m.src as usize;
        if self.used[src] + m.size > self.capacity {
            ctx.rec.dropped_buffer_full += 1;
            return false;
        }
        self.used[src] += m.size;
        self.buffers[src].insert(msg, 0);
        self.epoch += 1;
        self.spread(ctx, m.src, msg);
        true
    }

    fn on_transfer_start(&mut self, ctx: &mut Ctx<'_, ()>, t: &mut Transfer<()>) -> bool {
        if !self.holds(t.from, t.msg) || !self.lacks(t.to, t.msg) {
            return false;
        }
        let m = ctx.messages.get(t.msg);
        if t.to != m.dst && self.used[t.to as usize] + m.size > self.capacity {
            ctx.rec.dropped_buffer_full += 1;
            return false;
        }
        true
    }

    fn on_transfer_done(&mut self, ctx: &mut Ctx<'_, ()>, t: Transfer<()>) {
        ctx.rec.data_transfers += 1;
        let Some(&hops) = self.buffers[t.from as usize].get(&t.msg) else { return };
        let m = *ctx.messages.get(t.msg);
        self.epoch += 1;
        if t.to == m.dst {
            self.delivered[t.to as usize].insert(t.msg);
            ctx.rec.deliver(t.msg, ctx.now, hops + 1);
            return;
        }
        if !self.lacks(t.to, t.msg) {
            return;
        }
        if self.used[t.to as usize] + m.size > self.capacity {
            ctx.rec.dropped_buffer_full += 1;
            return;
        }
        self.used[t.to as usize] += m.size;
        self.buffers[t.to as usize].insert(t.msg, hops + 1);
        self.spread(ctx, t.to, t.msg);
    }

    fn on_transfer_aborted(&mut self, ctx: &mut Ctx<'_, ()>, _t: Transfer<()>) {
        ctx.rec.aborted_transfers += 1;
    }

    fn add_held_copies(&self, _totals: &mut [u64]) {}

    fn counts_copies(&self) -> bool {
        false
    }

    fn data_epoch(&self) -> u64 {
        self.epoch
    }

    fn purge(&mut self, ctx: &mut Ctx<'_, ()>, msg: MessageId) {
        let size = ctx.messages.get(msg).size;
        for (i, b) in self.buffers.iter_mut().enumerate() {
            if b.remove(&msg).is_some() {
                self.used[i] -= size;
            }
            ctx.sched.drain_queued(i as NodeId, |t| t.msg == msg);
        }
        self.epoch += 1;
    }
}
