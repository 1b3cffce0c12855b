//! Discrete-event queue ordered by `(fire_at, seq)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("event scheduled at {at} but clock is already at {now}")]
    ScheduledInPast { at: SimTime, now: SimTime },
    #[error("run horizon {end} is before current time {now}")]
    HorizonInPast { end: SimTime, now: SimTime },
}

#[derive(Debug)]
struct Scheduled<E> {
    fire_at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    next_seq: u64,
    now: SimTime,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues `event` and returns its sequence number.
    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> Result<u64, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::ScheduledInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { fire_at, seq, event });
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|s| s.fire_at)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let s = self.heap.pop()?;
        debug_assert!(s.fire_at >= self.now);
        self.now = s.fire_at;
        Some((s.fire_at, s.event))
    }

    /// Pops the next event only if it fires at or before `limit`.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        match self.peek_time() {
            Some(t) if t <= limit => self.pop(),
            _ => None,
        }
    }

    pub fn advance_to(&mut self, t: SimTime) -> Result<(), EngineError> {
        if t < self.now {
            return Err(EngineError::HorizonInPast { end: t, now: self.now });
        }
        self.now = t;
        Ok(())
    }
}

/// Something that reacts to events and may schedule more of them.
pub trait Handler {
    type Event;
    fn handle(&mut self, now: SimTime, event: Self::Event, queue: &mut EventQueue<Self::Event>);
}

/// Executes every event with `fire_at <= t_end` in order, then parks the clock at `t_end`.
pub fn run_until<H: Handler>(
    queue: &mut EventQueue<H::Event>,
    handler: &mut H,
    t_end: SimTime,
) -> Result<u64, EngineError> {
    if t_end < queue.now() {
        return Err(EngineError::HorizonInPast {
            end: t_end,
            now: queue.now(),
        });
    }
    let mut executed = 0;
    while let Some((t, ev)) = queue.pop_until(t_end) {
        handler.handle(t, ev, queue);
        executed += 1;
    }
    queue.advance_to(t_end)?;
    Ok(executed)
}
