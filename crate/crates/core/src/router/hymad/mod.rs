//! HYMAD: MANET routing inside groups, spray-and-wait style DTN forwarding between them.
//!
//! Every node runs the group service and periodically broadcasts a
//! Messages-in-group list. A border node that hears a foreign neighbor's list
//! compares it with its own group's and pushes copies across when the other
//! group lacks a message.

mod list;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;

use super::{Ctx, Router};
use crate::group::{GroupConfig, GroupNode};
use crate::message::{MessageId, MessageTable};
use crate::net::Transfer;
use crate::rng::RandomStream;
use crate::time::SimTime;
use crate::topology::NodeId;

/// How many copies each custodian gives up to gather `need` more: largest holders
/// first, smaller id on ties, nobody below zero.
pub fn plan_reduction(held: &[(NodeId, u32)], mut need: u32) -> Vec<(NodeId, u32)> {
    let mut order: Vec<(NodeId, u32)> = held.iter().copied().filter(|&(_, k)| k > 0).collect();
    order.sort_by_key(|&(c, k)| (Reverse(k), c));
    let mut out = Vec::new();
    for (c, k) in order {
        if need == 0 {
            break;
        }
        let give = k.min(need);
        out.push((c, give));
        need -= give;
    }
    out
}

pub use list::{copies_to_forward, ListEntry, MessageSummary, MessagesList, LIST_ENTRY_BITS};

const GROUP_TIMER: u8 = 0;
const LIST_TIMER: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HymadConfig {
    pub group: GroupConfig,
    pub list_period: SimTime,
    /// Lists older than this many list periods are ignored.
    pub list_staleness: u32,
    /// Bytes.
    pub buffer: u64,
}

impl Default for HymadConfig {
    fn default() -> Self {
        HymadConfig {
            group: GroupConfig::default(),
            list_period: SimTime::from_secs(2),
            list_staleness: 3,
            buffer: 100_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// Toward a custodian picked inside the group.
    Custody { target: NodeId },
    /// Toward the destination, a member of the current group.
    Deliver,
    /// One copy fetched by a border node that will spray it to `toward`.
    Pickup { border: NodeId, toward: NodeId },
    /// Across a group boundary.
    Cross,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Payload {
    pub purpose: Purpose,
    /// Transfers the copies went through so far.
    pub hops: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HymadStats {
    pub sprays: u64,
    pub cancelled_sprays: u64,
    pub copy_requests: u64,
    pub reduce_requests: u64,
    pub custody_fallbacks: u64,
    pub crossings: u64,
    pub crossed_copies: u64,
}

/// A completed data transfer, kept when logging is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransferRecord {
    pub at: SimTime,
    pub from: NodeId,
    pub to: NodeId,
    pub msg: MessageId,
    pub copies: u32,
    pub purpose: Purpose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Holding {
    copies: u32,
    hops: u32,
}

#[derive(Clone, Debug)]
struct Node {
    group: GroupNode,
    holdings: BTreeMap<MessageId, Holding>,
    used: u64,
    delivered: BTreeSet<MessageId>,
    /// Latest list from each radio neighbor and when it arrived.
    lists: BTreeMap<NodeId, (Arc<MessagesList>, SimTime)>,
    /// Sprays waiting for a fetched copy: message to foreign neighbor.
    pending: BTreeMap<MessageId, NodeId>,
    /// Messages already pushed (or being pushed) to a foreign neighbor.
    guard: BTreeSet<(MessageId, NodeId)>,
}

#[derive(Clone, Debug)]
pub struct Hymad {
    cfg: HymadConfig,
    nodes: Vec<Node>,
    offsets: Vec<(SimTime, SimTime)>,
    epoch: u64,
    stats: HymadStats,
    log: Option<Vec<TransferRecord>>,
}

impl Hymad {
    /// Broadcast phases are drawn from `tie_break`.
    pub fn new(nodes: usize, cfg: HymadConfig, tie_break: &mut RandomStream) -> Self {
        let offsets = (0..nodes)
            .map(|_| {
                let g = tie_break.gen_range(0..cfg.group.broadcast_period.as_millis().max(1));
                let l = tie_break.gen_range(0..cfg.list_period.as_millis().max(1));
                (SimTime::from_millis(g), SimTime::from_millis(l))
            })
            .collect();
        let nodes = (0..nodes)
            .map(|i| Node {
                group: GroupNode::new(i as NodeId, cfg.group, SimTime::ZERO),
                holdings: BTreeMap::new(),
                used: 0,
                delivered: BTreeSet::new(),
                lists: BTreeMap::new(),
                pending: BTreeMap::new(),
                guard: BTreeSet::new(),
            })
            .collect();
        Hymad { cfg, nodes, offsets, epoch: 0, stats: HymadStats::default(), log: None }
    }

    pub fn config(&self) -> &HymadConfig {
        &self.cfg
    }

    pub fn stats(&self) -> HymadStats {
        self.stats
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> &[TransferRecord] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn group(&self, node: NodeId) -> &GroupNode {
        &self.nodes[node as usize].group
    }

    /// Copies of `msg` in custody at `node`.
    pub fn copies_held(&self, node: NodeId, msg: MessageId) -> u32 {
        self.nodes[node as usize].holdings.get(&msg).map_or(0, |h| h.copies)
    }

    fn fresh(&self, now: SimTime, heard: SimTime) -> bool {
        now.saturating_sub(heard).0 <= self.cfg.list_period.0 * self.cfg.list_staleness as u64
    }

    /// The list `node` would broadcast now: its own holdings, plus each other
    /// member's holdings as relayed by the next hop toward that member.
    pub fn messages_list(&self, messages: &MessageTable, now: SimTime, node: NodeId) -> MessagesList {
        let me = &self.nodes[node as usize];
        let mut entries: Vec<ListEntry> = Vec::new();
        for e in me.group.table().entries() {
            if e.member == node {
                continue;
            }
            if let Some((l, heard)) = me.lists.get(&e.via) {
                if self.fresh(now, *heard) {
                    entries.extend(l.by_custodian(e.member).copied());
                }
            }
        }
        for (&msg, h) in &me.holdings {
            entries.push(ListEntry { msg, dst: messages.get(msg).dst, custodian: node, copies: h.copies });
        }
        entries.sort();
        MessagesList { sender: node, entries }
    }

    fn hold(&mut self, ctx: &Ctx<'_, Payload>, node: NodeId, msg: MessageId, copies: u32, hops: u32) {
        if copies == 0 {
            return;
        }
        let size = ctx.messages.get(msg).size;
        let n = &mut self.nodes[node as usize];
        match n.holdings.get_mut(&msg) {
            Some(h) => {
                h.copies += copies;
                h.hops = h.hops.min(hops);
            }
            None => {
                n.used += size;
                n.holdings.insert(msg, Holding { copies, hops });
            }
        }
        self.epoch += 1;
    }

    /// Removes up to `copies` from `node`'s custody; returns how many and their hop count.
    fn take(&mut self, ctx: &Ctx<'_, Payload>, node: NodeId, msg: MessageId, copies: u32) -> (u32, u32) {
        let size = ctx.messages.get(msg).size;
        let n = &mut self.nodes[node as usize];
        let Some(h) = n.holdings.get_mut(&msg) else { return (0, 0) };
        let got = copies.min(h.copies);
        let hops = h.hops;
        h.copies -= got;
        if h.copies == 0 {
            n.holdings.remove(&msg);
            n.used -= size;
        }
        self.epoch += 1;
        (got, hops)
    }

    fn target(&self, ctx: &Ctx<'_, Payload>, msg: MessageId, p: Purpose) -> NodeId {
        match p {
            Purpose::Custody { target } => target,
            Purpose::Deliver => ctx.messages.get(msg).dst,
            Purpose::Pickup { border, .. } => border,
            Purpose::Cross => unreachable!("crossings are not routed"),
        }
    }

    /// Moves copies one intra-group hop toward their target, or settles them at `at`.
    fn route(&mut self, ctx: &mut Ctx<'_, Payload>, at: NodeId, msg: MessageId, copies: u32, p: Payload) {
        let target = self.target(ctx, msg, p.purpose);
        if at == target {
            self.arrive(ctx, at, msg, copies, p);
            return;
        }
        match self.nodes[at as usize].group.intra_next_hop(target) {
            Ok(next) => {
                let m = ctx.messages.get(msg);
                ctx.sched.enqueue(at, next, msg, copies, m.size, next == m.dst, p);
                self.epoch += 1;
            }
            Err(_) => {
                self.stats.custody_fallbacks += 1;
                self.settle(ctx, at, msg, copies, p);
            }
        }
    }

    /// Copies that cannot go on stay with `at` as custodian.
    fn settle(&mut self, ctx: &mut Ctx<'_, Payload>, at: NodeId, msg: MessageId, copies: u32, p: Payload) {
        if let Purpose::Pickup { border, toward } = p.purpose {
            let b = &mut self.nodes[border as usize];
            if b.pending.get(&msg) == Some(&toward) {
                b.pending.remove(&msg);
            }
        }
        self.hold(ctx, at, msg, copies, p.hops);
    }

    fn arrive(&mut self, ctx: &mut Ctx<'_, Payload>, at: NodeId, msg: MessageId, copies: u32, p: Payload) {
        match p.purpose {
            Purpose::Deliver => self.deliver(ctx, at, msg, p.hops),
            Purpose::Custody { .. } => {
                self.hold(ctx, at, msg, copies, p.hops);
                self.custodian_duty(ctx, at, msg);
            }
            Purpose::Pickup { border, toward } => {
                let b = &mut self.nodes[border as usize];
                if b.pending.get(&msg) == Some(&toward) {
                    b.pending.remove(&msg);
                    if ctx.links.is_up(border, toward) && !b.group.is_member(toward) {
                        let m = ctx.messages.get(msg);
                        let payload = Payload { purpose: Purpose::Cross, hops: p.hops };
                        ctx.sched.enqueue(border, toward, msg, copies, m.size, toward == m.dst, payload);
                        self.epoch += 1;
                        return;
                    }
                }
                self.hold(ctx, at, msg, copies, p.hops);
                self.custodian_duty(ctx, at, msg);
            }
            Purpose::Cross => unreachable!("crossings end in receive_crossing"),
        }
    }

    fn deliver(&mut self, ctx: &mut Ctx<'_, Payload>, at: NodeId, msg: MessageId, hops: u32) {
        self.nodes[at as usize].delivered.insert(msg);
        ctx.rec.deliver(msg, ctx.now, hops);
        self.epoch += 1;
    }

    /// A custodian whose group contains the destination sends it everything.
    fn custodian_duty(&mut self, ctx: &mut Ctx<'_, Payload>, node: NodeId, msg: MessageId) {
        let dst = ctx.messages.get(msg).dst;
        if dst == node || !self.nodes[node as usize].group.is_member(dst) {
            return;
        }
        let (copies, hops) = self.take(ctx, node, msg, u32::MAX);
        if copies > 0 {
            self.route(ctx, node, msg, copies, Payload { purpose: Purpose::Deliver, hops });
        }
    }

    fn custodian_duty_all(&mut self, ctx: &mut Ctx<'_, Payload>, node: NodeId) {
        let msgs: Vec<MessageId> = self.nodes[node as usize].holdings.keys().copied().collect();
        for msg in msgs {
            self.custodian_duty(ctx, node, msg);
        }
    }

    fn receive_crossing(&mut self, ctx: &mut Ctx<'_, Payload>, v: NodeId, from: NodeId, msg: MessageId, copies: u32, hops: u32) {
        self.nodes[v as usize].guard.insert((msg, from));
        let m = *ctx.messages.get(msg);
        if v == m.dst {
            self.deliver(ctx, v, msg, hops);
            return;
        }
        if self.nodes[v as usize].group.is_member(m.dst) {
            self.route(ctx, v, msg, copies, Payload { purpose: Purpose::Deliver, hops });
            return;
        }
        let members: Vec<NodeId> = self.nodes[v as usize].group.table().members().collect();
        let mut c = members[ctx.rng.gen_range(0..members.len())];
        if c != v && self.nodes[c as usize].used + m.size > self.cfg.buffer {
            c = v;
        }
        if c == v {
            self.hold(ctx, v, msg, copies, hops);
        } else {
            self.route(ctx, v, msg, copies, Payload { purpose: Purpose::Custody { target: c }, hops });
        }
    }

    fn on_view_change(&mut self, ctx: &mut Ctx<'_, Payload>, node: NodeId) {
        self.custodian_duty_all(ctx, node);
    }

    fn group_tick(&mut self, ctx: &mut Ctx<'_, Payload>, node: NodeId) {
        let now = ctx.now;
        if !self.nodes[node as usize].group.tick(now).is_empty() {
            self.on_view_change(ctx, node);
        }
        let vector = self.nodes[node as usize].group.build_group_message(now);
        self.nodes[node as usize].group.note_broadcast();
        ctx.rec.ledger.charge_group_message(vector.entries.len());
        let neighbors: Vec<NodeId> = ctx.links.neighbors(node).iter().copied().collect();
        for n in neighbors {
            if !self.nodes[n as usize].group.on_group_message(now, &vector, node).is_empty() {
                self.on_view_change(ctx, n);
            }
        }
    }

    fn list_tick(&mut self, ctx: &mut Ctx<'_, Payload>, node: NodeId) {
        let now = ctx.now;
        let list = Arc::new(self.messages_list(ctx.messages, now, node));
        ctx.rec.ledger.charge_messages_list(list.entries.len());
        let neighbors: Vec<NodeId> = ctx.links.neighbors(node).iter().copied().collect();
        for n in neighbors {
            self.nodes[n as usize].lists.insert(node, (list.clone(), now));
            if !self.nodes[n as usize].group.is_member(node) {
                self.border_scan(ctx, n, node);
            }
        }
        self.custodian_duty_all(ctx, node);
    }

    /// Border node `n` compares its group's messages with foreign neighbor `v`'s list.
    fn border_scan(&mut self, ctx: &mut Ctx<'_, Payload>, n: NodeId, v: NodeId) {
        let now = ctx.now;
        let me = &self.nodes[n as usize];
        let Some((theirs, _)) = me.lists.get(&v) else { return };
        let theirs = theirs.clone();
        let mut foreign: BTreeSet<NodeId> = me.group.neighbor_vector(v).map(|m| m.members().collect()).unwrap_or_default();
        foreign.insert(v);
        let mine = self.messages_list(ctx.messages, now, n).summary();
        for (msg, s) in mine {
            let me = &self.nodes[n as usize];
            let dst = ctx.messages.get(msg).dst;
            if theirs.has(msg) || me.guard.contains(&(msg, v)) || me.pending.contains_key(&msg) || me.group.is_member(dst) {
                continue;
            }
            if foreign.contains(&dst) || s.total > 1 {
                self.spray(ctx, n, v, msg, &s);
            }
        }
    }

    /// Starts pushing copies of `msg` from border `n` to foreign neighbor `v`.
    fn spray(&mut self, ctx: &mut Ctx<'_, Payload>, n: NodeId, v: NodeId, msg: MessageId, s: &MessageSummary) {
        self.nodes[n as usize].guard.insert((msg, v));
        self.stats.sprays += 1;
        let (got, hops) = self.take(ctx, n, msg, 1);
        if got == 1 {
            let m = ctx.messages.get(msg);
            ctx.sched.enqueue(n, v, msg, 1, m.size, v == m.dst, Payload { purpose: Purpose::Cross, hops });
            self.epoch += 1;
            return;
        }
        let g = &self.nodes[n as usize].group;
        let mut custodians: Vec<(u32, NodeId)> = s
            .custodians
            .iter()
            .filter(|(c, _)| *c != n && g.intra_next_hop(*c).is_ok())
            .filter_map(|(c, _)| g.distance_to(*c).map(|d| (d, *c)))
            .collect();
        custodians.sort();
        custodians.dedup();
        for (_, c) in custodians {
            ctx.rec.ledger.charge_copy_request();
            self.stats.copy_requests += 1;
            let (got, hops) = self.take(ctx, c, msg, 1);
            if got == 1 {
                self.nodes[n as usize].pending.insert(msg, v);
                let purpose = Purpose::Pickup { border: n, toward: v };
                self.route(ctx, c, msg, 1, Payload { purpose, hops });
                return;
            }
        }
    }

    /// Pulls the rest of the crossing's copies out of the group's custodians.
    fn reduce_for_crossing(&mut self, ctx: &mut Ctx<'_, Payload>, n: NodeId, msg: MessageId, in_hand: u32) -> u32 {
        let list = self.messages_list(ctx.messages, ctx.now, n);
        let g = &self.nodes[n as usize].group;
        let mut custodians: Vec<NodeId> = list
            .entries
            .iter()
            .filter(|e| e.msg == msg && (e.custodian == n || g.intra_next_hop(e.custodian).is_ok()))
            .map(|e| e.custodian)
            .collect();
        custodians.sort();
        custodians.dedup();
        let held: Vec<(NodeId, u32)> = custodians.iter().map(|&c| (c, self.copies_held(c, msg))).collect();
        let n_c = in_hand + held.iter().map(|(_, k)| k).sum::<u32>();
        let n_b = g.border_count().max(1) as u32;
        let need = copies_to_forward(n_c, n_b).saturating_sub(in_hand);
        let mut extra = 0;
        for (c, k) in plan_reduction(&held, need) {
            if c != n {
                // request and acknowledgement
                ctx.rec.ledger.charge_reduce();
                ctx.rec.ledger.charge_reduce();
                self.stats.reduce_requests += 1;
            }
            extra += self.take(ctx, c, msg, k).0;
        }
        extra
    }
}

impl Router for Hymad {
    type Payload = Payload;

    fn name(&self) -> &'static str {
        "hymad"
    }

    fn init(&mut self, ctx: &mut Ctx<'_, Payload>) {
        for (i, &(g, l)) in self.offsets.iter().enumerate() {
            ctx.set_timer(ctx.now + g, i as NodeId, GROUP_TIMER);
            ctx.set_timer(ctx.now + l, i as NodeId, LIST_TIMER);
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_, Payload>, node: NodeId, kind: u8) {
        match kind {
            GROUP_TIMER => {
                self.group_tick(ctx, node);
                ctx.set_timer(ctx.now + self.cfg.group.broadcast_period, node, GROUP_TIMER);
            }
            LIST_TIMER => {
                self.list_tick(ctx, node);
                ctx.set_timer(ctx.now + self.cfg.list_period, node, LIST_TIMER);
            }
            _ => {}
        }
    }

    fn on_link_up(&mut self, _ctx: &mut Ctx<'_, Payload>, a: NodeId, b: NodeId) {
        self.nodes[a as usize].group.link_up(b);
        self.nodes[b as usize].group.link_up(a);
    }

    fn on_link_down(&mut self, ctx: &mut Ctx<'_, Payload>, a: NodeId, b: NodeId) {
        for (x, y) in [(a, b), (b, a)] {
            let n = &mut self.nodes[x as usize];
            n.lists.remove(&y);
            n.guard.retain(|&(_, w)| w != y);
            if !n.group.link_down(y, ctx.now).is_empty() {
                self.on_view_change(ctx, x);
            }
        }
    }

    fn on_created(&mut self, ctx: &mut Ctx<'_, Payload>, msg: MessageId) -> bool {
        let m = *ctx.messages.get(msg);
        if self.nodes[m.src as usize].used + m.size > self.cfg.buffer {
            ctx.rec.dropped_buffer_full += 1;
            return false;
        }
        self.hold(ctx, m.src, msg, m.copies, 0);
        self.custodian_duty(ctx, m.src, msg);
        true
    }

    fn on_transfer_start(&mut self, ctx: &mut Ctx<'_, Payload>, t: &mut Transfer<Payload>) -> bool {
        if t.payload.purpose == Purpose::Cross {
            let me = &self.nodes[t.from as usize];
            let still_needed = !me.group.is_member(t.to) && !me.lists.get(&t.to).is_some_and(|(l, _)| l.has(t.msg));
            if !still_needed {
                self.stats.cancelled_sprays += 1;
                self.hold(ctx, t.from, t.msg, t.copies, t.payload.hops);
                return false;
            }
            t.copies += self.reduce_for_crossing(ctx, t.from, t.msg, t.copies);
            return true;
        }
        let target = self.target(ctx, t.msg, t.payload.purpose);
        if self.nodes[t.from as usize].group.intra_next_hop(target) == Ok(t.to) {
            return true;
        }
        self.route(ctx, t.from, t.msg, t.copies, t.payload);
        false
    }

    fn on_transfer_done(&mut self, ctx: &mut Ctx<'_, Payload>, t: Transfer<Payload>) {
        ctx.rec.data_transfers += 1;
        self.epoch += 1;
        if ctx.messages.get(t.msg).expired(ctx.now) {
            return;
        }
        if let Some(log) = &mut self.log {
            log.push(TransferRecord { at: ctx.now, from: t.from, to: t.to, msg: t.msg, copies: t.copies, purpose: t.payload.purpose });
        }
        let p = Payload { hops: t.payload.hops + 1, ..t.payload };
        if p.purpose == Purpose::Cross {
            self.stats.crossings += 1;
            self.stats.crossed_copies += t.copies as u64;
            self.receive_crossing(ctx, t.to, t.from, t.msg, t.copies, p.hops);
        } else {
            self.route(ctx, t.to, t.msg, t.copies, p);
        }
    }

    fn on_transfer_aborted(&mut self, ctx: &mut Ctx<'_, Payload>, t: Transfer<Payload>) {
        ctx.rec.aborted_transfers += 1;
        self.settle(ctx, t.from, t.msg, t.copies, t.payload);
    }

    fn add_held_copies(&self, totals: &mut [u64]) {
        for n in &self.nodes {
            for (m, h) in &n.holdings {
                totals[*m as usize] += h.copies as u64;
            }
        }
    }

    fn data_epoch(&self) -> u64 {
        self.epoch
    }

    fn group_views(&self) -> Option<Vec<BTreeSet<NodeId>>> {
        Some(self.nodes.iter().map(|n| n.group.group_members()).collect())
    }

    fn malformed_entries(&self) -> u64 {
        self.nodes.iter().map(|n| n.group.malformed_entries()).sum()
    }

    fn purge(&mut self, ctx: &mut Ctx<'_, Payload>, msg: MessageId) {
        for i in 0..self.nodes.len() {
            self.take(ctx, i as NodeId, msg, u32::MAX);
            self.nodes[i].pending.remove(&msg);
            ctx.sched.drain_queued(i as NodeId, |t| t.msg == msg);
        }
        self.epoch += 1;
    }
}
