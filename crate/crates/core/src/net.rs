//! Half-duplex link scheduler shared by every router.
//!
//! A node takes part in at most one data transfer at a time, sending or
//! receiving. Each sender keeps a FIFO of pending transfers; transfers to the
//! message destination jump ahead of the rest.

use std::collections::{BTreeMap, VecDeque};

use crate::message::MessageId;
use crate::time::SimTime;
use crate::topology::NodeId;

pub type TransferId = u64;

/// Lowest effective capacity, as a fraction of the nominal link speed.
pub const CAPACITY_FLOOR: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Transfer<P> {
    pub id: TransferId,
    pub from: NodeId,
    pub to: NodeId,
    pub msg: MessageId,
    /// Copies carried; 0 for routers without copy accounting.
    pub copies: u32,
    /// Bytes.
    pub size: u64,
    pub urgent: bool,
    pub payload: P,
}

#[derive(Clone, Debug)]
pub struct LinkScheduler<P> {
    queues: Vec<VecDeque<Transfer<P>>>,
    busy: Vec<Option<TransferId>>,
    active: BTreeMap<TransferId, Transfer<P>>,
    next_id: TransferId,
    nominal: f64,
    overhead: f64,
}

impl<P> LinkScheduler<P> {
    /// `nominal` is the link speed in bytes per second.
    pub fn new(nodes: usize, nominal: f64) -> Self {
        assert!(nominal > 0.0, "link speed must be positive");
        LinkScheduler {
            queues: (0..nodes).map(|_| VecDeque::new()).collect(),
            busy: vec![None; nodes],
            active: BTreeMap::new(),
            next_id: 0,
            nominal,
            overhead: 0.0,
        }
    }

    pub fn nodes(&self) -> usize {
        self.queues.len()
    }

    /// Control traffic per link, bits per second, taken off the data capacity.
    pub fn set_overhead_rate(&mut self, bits_per_s: f64) {
        self.overhead = bits_per_s.max(0.0) / 8.0;
    }

    /// Bytes per second available to data.
    pub fn effective_speed(&self) -> f64 {
        (self.nominal - self.overhead).max(self.nominal * CAPACITY_FLOOR)
    }

    pub fn duration(&self, size: u64) -> SimTime {
        let ms = (size as f64 * 1000.0 / self.effective_speed()).ceil() as u64;
        SimTime::from_millis(ms.max(1))
    }

    pub fn enqueue(&mut self, from: NodeId, to: NodeId, msg: MessageId, copies: u32, size: u64, urgent: bool, payload: P) -> TransferId {
        let id = self.next_id;
        self.next_id += 1;
        let t = Transfer { id, from, to, msg, copies, size, urgent, payload };
        let q = &mut self.queues[from as usize];
        if urgent {
            let pos = q.iter().position(|x| !x.urgent).unwrap_or(q.len());
            q.insert(pos, t);
        } else {
            q.push_back(t);
        }
        id
    }

    pub fn is_idle(&self, node: NodeId) -> bool {
        self.busy[node as usize].is_none()
    }

    pub fn has_queued(&self, node: NodeId) -> bool {
        !self.queues[node as usize].is_empty()
    }

    pub fn queued(&self, node: NodeId) -> impl Iterator<Item = &Transfer<P>> {
        self.queues[node as usize].iter()
    }

    pub fn active(&self) -> impl Iterator<Item = &Transfer<P>> {
        self.active.values()
    }

    /// Every transfer not yet completed: queued first, then active.
    pub fn in_flight(&self) -> impl Iterator<Item = &Transfer<P>> {
        self.queues.iter().flatten().chain(self.active.values())
    }

    pub fn is_pending(&self, from: NodeId, to: NodeId, msg: MessageId) -> bool {
        self.queues[from as usize].iter().any(|t| t.to == to && t.msg == msg)
            || self.active.values().any(|t| t.from == from && t.to == to && t.msg == msg)
    }

    /// Removes the first queued transfer of an idle `sender` whose receiver is idle and linked.
    pub fn take_startable(&mut self, sender: NodeId, linked: impl Fn(NodeId, NodeId) -> bool) -> Option<Transfer<P>> {
        if !self.is_idle(sender) {
            return None;
        }
        let busy = &self.busy;
        let q = &mut self.queues[sender as usize];
        let pos = q.iter().position(|t| busy[t.to as usize].is_none() && t.to != sender && linked(sender, t.to))?;
        q.remove(pos)
    }

    /// Starts a transfer taken with [`take_startable`](Self::take_startable); returns its completion time.
    pub fn start(&mut self, t: Transfer<P>, now: SimTime) -> SimTime {
        debug_assert!(self.is_idle(t.from) && self.is_idle(t.to));
        self.busy[t.from as usize] = Some(t.id);
        self.busy[t.to as usize] = Some(t.id);
        let done = now + self.duration(t.size);
        self.active.insert(t.id, t);
        done
    }

    /// Finishes an active transfer; `None` if it was aborted meanwhile.
    pub fn complete(&mut self, id: TransferId) -> Option<Transfer<P>> {
        let t = self.active.remove(&id)?;
        self.busy[t.from as usize] = None;
        self.busy[t.to as usize] = None;
        Some(t)
    }

    /// Aborts everything, active or queued, on the link between `a` and `b`.
    pub fn link_down(&mut self, a: NodeId, b: NodeId) -> Vec<Transfer<P>> {
        let on_link = |t: &Transfer<P>| (t.from == a && t.to == b) || (t.from == b && t.to == a);
        let mut out = Vec::new();
        let ids: Vec<TransferId> = self.active.values().filter(|t| on_link(t)).map(|t| t.id).collect();
        for id in ids {
            out.extend(self.complete(id));
        }
        for s in [a, b] {
            let q = &mut self.queues[s as usize];
            let (gone, kept): (Vec<_>, Vec<_>) = q.drain(..).partition(|t| on_link(t));
            *q = kept.into();
            out.extend(gone);
        }
        out
    }

    /// Drops queued transfers matching `pred` and returns them.
    pub fn drain_queued(&mut self, node: NodeId, pred: impl Fn(&Transfer<P>) -> bool) -> Vec<Transfer<P>> {
        let q = &mut self.queues[node as usize];
        let (gone, kept): (Vec<_>, Vec<_>) = q.drain(..).partition(|t| pred(t));
        *q = kept.into();
        gone
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> LinkScheduler<()> {
        LinkScheduler::new(4, 100_000.0)
    }

    #[test]
    fn duration_from_speed() {
        let mut s = sched();
        assert_eq!(s.duration(10_000), SimTime::from_millis(100));
        s.set_overhead_rate(8.0 * 50_000.0);
        assert_eq!(s.duration(10_000), SimTime::from_millis(200));
        s.set_overhead_rate(8.0 * 1e9);
        assert_eq!(s.effective_speed(), 10_000.0);
        assert_eq!(s.duration(10_000), SimTime::from_secs(1));
    }

    #[test]
    fn half_duplex_one_transfer_per_node() {
        let mut s = sched();
        s.enqueue(0, 1, 0, 0, 10, false, ());
        s.enqueue(2, 1, 1, 0, 10, false, ());
        s.enqueue(2, 3, 2, 0, 10, false, ());
        let all = |_, _| true;
        let t = s.take_startable(0, all).unwrap();
        s.start(t, SimTime::ZERO);
        // 1 is busy receiving, so 2 skips ahead to 3
        let t = s.take_startable(2, all).unwrap();
        assert_eq!(t.to, 3);
        s.start(t, SimTime::ZERO);
        assert!(s.take_startable(2, all).is_none());
        assert!(s.take_startable(1, all).is_none());
    }

    #[test]
    fn deliveries_go_first_but_stay_fifo() {
        let mut s = sched();
        s.enqueue(0, 1, 0, 0, 10, false, ());
        s.enqueue(0, 1, 1, 0, 10, true, ());
        s.enqueue(0, 1, 2, 0, 10, true, ());
        let order: Vec<MessageId> = s.queued(0).map(|t| t.msg).collect();
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn link_down_aborts_both_directions() {
        let mut s = sched();
        s.enqueue(0, 1, 0, 2, 10, false, ());
        s.enqueue(1, 0, 1, 3, 10, false, ());
        s.enqueue(0, 2, 2, 1, 10, false, ());
        let t = s.take_startable(0, |_, _| true).unwrap();
        let id = t.id;
        s.start(t, SimTime::ZERO);
        let gone = s.link_down(1, 0);
        assert_eq!(gone.len(), 2);
        assert!(s.complete(id).is_none());
        assert!(s.is_idle(0) && s.is_idle(1));
        assert_eq!(s.in_flight().map(|t| t.copies).sum::<u32>(), 1);
    }

    #[test]
    fn unlinked_receivers_are_skipped() {
        let mut s = sched();
        s.enqueue(0, 1, 0, 0, 10, false, ());
        assert!(s.take_startable(0, |_, _| false).is_none());
        assert!(s.has_queued(0));
        assert!(s.is_pending(0, 1, 0));
    }
}
