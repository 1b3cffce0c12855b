//! One simulation run: mobility or trace replay, message generation, the link
//! scheduler and a router, glued together by the event queue.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use thiserror::Error;

use crate::engine::{EngineError, EventQueue};
use crate::message::{Message, MessageId, MessageTable};
use crate::metrics::{group_churn, DynamicsSample, MessageRecord, RunMetrics};
use crate::net::{LinkScheduler, TransferId};
use crate::rng::{split_rng, RandomStream, RunSeed, StreamLabel};
use crate::router::{Ctx, Epidemic, Hymad, Links, Recorder, Router, SprayAndWait};
use crate::scenario::{MobilityModel, OverheadMode, Protocol, ScenarioConfig};
use crate::time::SimTime;
use crate::topology::{
    components, contacts_from_positions, AdjacencySnapshot, ContactEvent, ContactKind, GroupMobility, NodeId,
    RandomWaypoint,
};

/// Trailing window for the online overhead estimate.
pub const OVERHEAD_WINDOW: SimTime = SimTime::from_secs(10);

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("trace mentions node {node} but the scenario has {nodes} nodes")]
    TraceNode { node: NodeId, nodes: usize },
    #[error("trace events are not sorted by time")]
    UnsortedTrace,
    #[error("scenario uses trace mobility but no trace was supplied")]
    MissingTrace,
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

/// Where messages come from.
#[derive(Clone, Debug, PartialEq)]
pub enum MessagePlan {
    /// One message every `message_interval` until `duration`, uniform source and destination.
    Periodic,
    /// Exactly these `(time, src, dst)` messages.
    Scripted(Vec<(SimTime, NodeId, NodeId)>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Fixed control overhead in bits per link per second; overrides the scenario's mode.
    pub fixed_overhead: Option<f64>,
    /// Keep every node's group view at each sample.
    pub record_groups: bool,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Move,
    Contact(usize),
    Create(u32),
    Expire(MessageId),
    TransferDone(TransferId),
    Timer(NodeId, u8),
    Sample,
}

enum Motion {
    Rwp(RandomWaypoint),
    Group(GroupMobility),
    Trace,
}

pub struct RunOutput<R> {
    pub metrics: RunMetrics,
    pub router: R,
    /// `(time, view per node)` at each sample when requested.
    pub groups: Vec<(SimTime, Vec<BTreeSet<NodeId>>)>,
}

fn mix(h: u64, x: u64) -> u64 {
    (h ^ x).wrapping_mul(0x0100_0000_01b3)
}

pub struct Simulation<'t, R: Router> {
    cfg: ScenarioConfig,
    seed: u64,
    opts: RunOptions,
    router: R,
    queue: EventQueue<Event>,
    links: Links,
    sched: LinkScheduler<R::Payload>,
    messages: MessageTable,
    rec: Recorder,
    custody_rng: RandomStream,
    mobility_rng: RandomStream,
    generation_rng: RandomStream,
    timers: Vec<(SimTime, NodeId, u8)>,
    motion: Motion,
    trace: &'t [ContactEvent],
    plan: MessagePlan,
    last_time: SimTime,
    last_epoch: u64,
    /// A node may have been freed: try to start transfers even if the router did nothing.
    freed: bool,
    link_churn: u32,
    prev_views: Option<Vec<BTreeSet<NodeId>>>,
    window: VecDeque<(SimTime, u64, f64)>,
    dynamics: Vec<DynamicsSample>,
    groups: Vec<(SimTime, Vec<BTreeSet<NodeId>>)>,
    audits: u64,
    violations: u64,
    checksums: (u64, u64),
}

impl<'t, R: Router> Simulation<'t, R> {
    pub fn new(
        cfg: &ScenarioConfig,
        seed: u64,
        router: R,
        trace: &'t [ContactEvent],
        plan: MessagePlan,
        opts: RunOptions,
    ) -> Result<Self, SimError> {
        let n = cfg.nodes;
        let run_seed = RunSeed::new(seed);
        let mut mobility_rng = split_rng(run_seed, StreamLabel::Mobility);
        let motion = match cfg.mobility {
            MobilityModel::RandomWaypoint => {
                Motion::Rwp(RandomWaypoint::new(n, cfg.world(), cfg.rwp_params(), &mut mobility_rng))
            }
            MobilityModel::Group => Motion::Group(GroupMobility::new(cfg.group_params()?, &mut mobility_rng)),
            MobilityModel::Trace => Motion::Trace,
        };
        if let Some(e) = trace.iter().find(|e| e.a as usize >= n || e.b as usize >= n) {
            return Err(SimError::TraceNode { node: e.a.max(e.b), nodes: n });
        }
        if trace.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(SimError::UnsortedTrace);
        }
        let mut sched = LinkScheduler::new(n, cfg.link_speed);
        let fixed = match (opts.fixed_overhead, cfg.overhead) {
            (Some(r), _) => Some(r),
            (None, OverheadMode::Off) => Some(0.0),
            _ => None,
        };
        sched.set_overhead_rate(fixed.unwrap_or(0.0));
        Ok(Simulation {
            cfg: cfg.clone(),
            seed,
            opts,
            router,
            queue: EventQueue::new(),
            links: Links::new(n),
            sched,
            messages: MessageTable::new(),
            rec: Recorder::default(),
            custody_rng: split_rng(run_seed, StreamLabel::CustodianChoice),
            mobility_rng,
            generation_rng: split_rng(run_seed, StreamLabel::MessageGeneration),
            timers: Vec::new(),
            motion,
            trace,
            plan,
            last_time: SimTime::ZERO,
            last_epoch: u64::MAX,
            freed: false,
            link_churn: 0,
            prev_views: None,
            window: VecDeque::new(),
            dynamics: Vec::new(),
            groups: Vec::new(),
            audits: 0,
            violations: 0,
            checksums: (0xcbf2_9ce4_8422_2325, 0xcbf2_9ce4_8422_2325),
        })
    }

    pub fn router(&self) -> &R {
        &self.router
    }

    pub fn recorder(&self) -> &Recorder {
        &self.rec
    }

    pub fn links(&self) -> &Links {
        &self.links
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn scheduler(&self) -> &LinkScheduler<R::Payload> {
        &self.sched
    }

    fn online_overhead(&self) -> bool {
        self.opts.fixed_overhead.is_none() && self.cfg.overhead != OverheadMode::Off
    }

    fn with_router(&mut self, f: impl FnOnce(&mut R, &mut Ctx<'_, R::Payload>)) {
        let mut ctx = Ctx {
            now: self.queue.now(),
            links: &self.links,
            sched: &mut self.sched,
            messages: &self.messages,
            rec: &mut self.rec,
            rng: &mut self.custody_rng,
            timers: &mut self.timers,
        };
        f(&mut self.router, &mut ctx);
        for (at, node, kind) in self.timers.drain(..) {
            self.queue.schedule(at, Event::Timer(node, kind)).expect("router timers are never in the past");
        }
    }

    fn schedule(&mut self, at: SimTime, e: Event) {
        self.queue.schedule(at, e).expect("simulator events are never in the past");
    }

    fn start(&mut self) {
        self.with_router(|r, ctx| r.init(ctx));
        match self.motion {
            Motion::Trace => {
                if !self.trace.is_empty() {
                    self.schedule(self.trace[0].time, Event::Contact(0));
                }
            }
            _ => {
                self.apply_positions();
                self.schedule(SimTime::from_secs_f64(self.cfg.mobility_tick), Event::Move);
            }
        }
        match &self.plan {
            MessagePlan::Periodic => {
                let first = SimTime::from_secs_f64(self.cfg.message_interval);
                if first <= self.cfg.horizon() {
                    self.schedule(first, Event::Create(1));
                }
            }
            MessagePlan::Scripted(list) => {
                for (i, (t, _, _)) in list.clone().into_iter().enumerate() {
                    self.schedule(t, Event::Create(i as u32));
                }
            }
        }
        self.schedule(SimTime::from_secs_f64(self.cfg.sample_interval), Event::Sample);
        self.pump();
    }

    fn positions(&mut self) -> Vec<crate::topology::Position> {
        let dt = self.cfg.mobility_tick;
        match &mut self.motion {
            Motion::Rwp(m) => {
                if self.queue.now() > SimTime::ZERO {
                    m.step(dt, &mut self.mobility_rng);
                }
                m.positions()
            }
            Motion::Group(m) => {
                if self.queue.now() > SimTime::ZERO {
                    m.step(dt, &mut self.mobility_rng)
                } else {
                    m.positions()
                }
            }
            Motion::Trace => unreachable!("trace runs have no positions"),
        }
    }

    fn apply_positions(&mut self) {
        let now = self.queue.now();
        let pos = self.positions();
        let next = contacts_from_positions(now, &pos, self.cfg.range);
        let current = AdjacencySnapshot::from_edges(now, self.cfg.nodes, self.links.edges());
        let (ups, downs) = next.diff(&current);
        for (a, b) in downs {
            self.link_down(a, b);
        }
        for (a, b) in ups {
            self.link_up(a, b);
        }
    }

    fn link_up(&mut self, a: NodeId, b: NodeId) {
        if !self.links.up(a, b) {
            return;
        }
        self.link_churn += 1;
        self.checksums.0 = mix(mix(mix(self.checksums.0, self.queue.now().as_millis()), a as u64), b as u64 | 1 << 32);
        self.with_router(|r, ctx| r.on_link_up(ctx, a, b));
    }

    fn link_down(&mut self, a: NodeId, b: NodeId) {
        if !self.links.down(a, b) {
            return;
        }
        self.link_churn += 1;
        self.freed = true;
        self.checksums.0 = mix(mix(mix(self.checksums.0, self.queue.now().as_millis()), a as u64), b as u64);
        let aborted = self.sched.link_down(a, b);
        self.with_router(|r, ctx| {
            for t in aborted {
                r.on_transfer_aborted(ctx, t);
            }
            r.on_link_down(ctx, a, b);
        });
    }

    fn create(&mut self, k: u32) {
        let now = self.queue.now();
        let (src, dst) = match &self.plan {
            MessagePlan::Periodic => {
                let n = self.cfg.nodes as NodeId;
                let src = self.generation_rng.gen_range(0..n);
                let mut dst = self.generation_rng.gen_range(0..n - 1);
                if dst >= src {
                    dst += 1;
                }
                let next = SimTime::from_secs_f64(self.cfg.message_interval * (k + 1) as f64);
                if next <= self.cfg.horizon() {
                    self.schedule(next, Event::Create(k + 1));
                }
                (src, dst)
            }
            MessagePlan::Scripted(list) => {
                let (_, s, d) = list[k as usize];
                (s, d)
            }
        };
        self.checksums.1 = mix(mix(mix(self.checksums.1, now.as_millis()), src as u64), dst as u64);
        let id = self.messages.next_id();
        let ttl = self.cfg.ttl.map(SimTime::from_secs_f64);
        let m = Message::new(id, src, dst, self.cfg.message_size, now, ttl, self.cfg.copies)
            .expect("generated messages are valid");
        self.messages.insert(m);
        self.rec.register(id);
        if let Some(ttl) = ttl {
            self.schedule(now + ttl, Event::Expire(id));
        }
        self.with_router(|r, ctx| {
            r.on_created(ctx, id);
        });
    }

    fn sample(&mut self) {
        let now = self.queue.now();
        let n = self.cfg.nodes;
        let snap = AdjacencySnapshot::from_edges(now, n, self.links.edges());
        let views = self.router.group_views();
        let group_churn = match (&self.prev_views, &views) {
            (Some(before), Some(after)) => group_churn(before, after),
            _ => 0,
        };
        self.dynamics.push(DynamicsSample {
            t: now,
            avg_degree: 2.0 * self.links.count() as f64 / n as f64,
            components: components(&snap).len(),
            link_churn: self.link_churn,
            group_churn,
        });
        self.link_churn = 0;
        if self.opts.record_groups {
            if let Some(v) = &views {
                self.groups.push((now, v.clone()));
            }
        }
        self.prev_views = views;
        if self.online_overhead() {
            let ledger = &self.rec.ledger;
            self.window.push_back((now, ledger.total_bits(), ledger.link_seconds()));
            while self.window.front().is_some_and(|w| now.saturating_sub(w.0) > OVERHEAD_WINDOW) {
                self.window.pop_front();
            }
            let (_, b0, l0) = *self.window.front().expect("just pushed");
            let (db, dl) = (ledger.total_bits() - b0, ledger.link_seconds() - l0);
            self.sched.set_overhead_rate(if dl > 0.0 { db as f64 / dl } else { 0.0 });
        }
        self.schedule(now + SimTime::from_secs_f64(self.cfg.sample_interval), Event::Sample);
    }

    fn handle(&mut self, e: Event) {
        let now = self.queue.now();
        match e {
            Event::Move => {
                self.apply_positions();
                self.schedule(now + SimTime::from_secs_f64(self.cfg.mobility_tick), Event::Move);
            }
            Event::Contact(i) => {
                let c = self.trace[i];
                match c.kind {
                    ContactKind::Up => self.link_up(c.a, c.b),
                    ContactKind::Down => self.link_down(c.a, c.b),
                }
                if let Some(next) = self.trace.get(i + 1) {
                    self.schedule(next.time, Event::Contact(i + 1));
                }
            }
            Event::Create(k) => self.create(k),
            Event::Expire(m) => self.with_router(|r, ctx| r.purge(ctx, m)),
            Event::TransferDone(id) => {
                if let Some(t) = self.sched.complete(id) {
                    self.freed = true;
                    self.with_router(|r, ctx| r.on_transfer_done(ctx, t));
                }
            }
            Event::Timer(node, kind) => self.with_router(|r, ctx| r.on_timer(ctx, node, kind)),
            Event::Sample => self.sample(),
        }
    }

    /// Starts every transfer that can start now.
    fn pump(&mut self) {
        let now = self.queue.now();
        loop {
            let mut progress = false;
            for i in 0..self.cfg.nodes as NodeId {
                loop {
                    let links = &self.links;
                    let Some(mut t) = self.sched.take_startable(i, |a, b| links.is_up(a, b)) else { break };
                    progress = true;
                    let mut go = false;
                    self.with_router(|r, ctx| go = r.on_transfer_start(ctx, &mut t));
                    if go {
                        let id = t.id;
                        let done = self.sched.start(t, now);
                        self.schedule(done, Event::TransferDone(id));
                        break;
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    fn audit(&mut self) {
        if !self.cfg.audit || !self.router.counts_copies() {
            return;
        }
        let totals = self.copy_totals();
        let now = self.queue.now();
        self.audits += 1;
        for m in self.messages.iter() {
            if m.expired(now) {
                continue;
            }
            let total = totals[m.id as usize];
            let ok = if self.rec.is_delivered(m.id) { total <= m.copies as u64 } else { total == m.copies as u64 };
            if !ok {
                self.violations += 1;
            }
        }
    }

    /// Copies per message: custody plus everything queued or on the air.
    pub fn copy_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.messages.len()];
        self.router.add_held_copies(&mut totals);
        for t in self.sched.in_flight() {
            totals[t.msg as usize] += t.copies as u64;
        }
        totals
    }

    /// Executes every event up to and including `t`.
    pub fn run_until(&mut self, t: SimTime) {
        if self.last_epoch == u64::MAX {
            self.last_epoch = 0;
            self.start();
            self.after_event();
        }
        while let Some((at, e)) = self.queue.pop_until(t) {
            self.rec.ledger.add_link_time(self.links.count(), at.saturating_sub(self.last_time));
            self.last_time = at;
            self.handle(e);
            self.after_event();
        }
        if t > self.last_time {
            self.rec.ledger.add_link_time(self.links.count(), t - self.last_time);
            self.last_time = t;
        }
        self.queue.advance_to(t).expect("run_until moves forward");
    }

    fn after_event(&mut self) {
        let epoch = self.router.data_epoch();
        if epoch != self.last_epoch || std::mem::take(&mut self.freed) {
            self.pump();
            self.last_epoch = self.router.data_epoch();
            self.audit();
        }
    }

    pub fn finish(mut self) -> RunOutput<R> {
        let end = self.cfg.end();
        self.run_until(end);
        let counts = self.router.counts_copies();
        let totals = self.copy_totals();
        let messages = self
            .messages
            .iter()
            .map(|m| MessageRecord {
                id: m.id,
                src: m.src,
                dst: m.dst,
                created_at: m.created_at,
                delivered_at: self.rec.delivered_at.get(m.id as usize).copied().flatten(),
                hops: self.rec.hops.get(m.id as usize).copied().flatten(),
                copies_at_end: if counts { totals[m.id as usize] as u32 } else { 0 },
            })
            .collect();
        let metrics = RunMetrics {
            protocol: self.router.name().to_string(),
            seed: self.seed,
            messages,
            ledger: self.rec.ledger.clone(),
            dynamics: std::mem::take(&mut self.dynamics),
            dropped_buffer_full: self.rec.dropped_buffer_full,
            duplicate_deliveries: self.rec.duplicate_deliveries,
            malformed_entries: self.router.malformed_entries(),
            data_transfers: self.rec.data_transfers,
            aborted_transfers: self.rec.aborted_transfers,
            audits: self.audits,
            conservation_violations: self.violations,
            stream_checksums: self.checksums,
        };
        RunOutput { metrics, router: self.router, groups: self.groups }
    }
}

/// Runs `router` through the whole scenario.
pub fn simulate<R: Router>(
    cfg: &ScenarioConfig,
    seed: u64,
    router: R,
    trace: &[ContactEvent],
    plan: MessagePlan,
    opts: RunOptions,
) -> Result<RunOutput<R>, SimError> {
    Ok(Simulation::new(cfg, seed, router, trace, plan, opts)?.finish())
}

/// Metrics and group snapshots of one protocol run, router state dropped.
pub struct ProtocolRun {
    pub metrics: RunMetrics,
    pub groups: Vec<(SimTime, Vec<BTreeSet<NodeId>>)>,
}

fn run_once(
    cfg: &ScenarioConfig,
    protocol: Protocol,
    seed: u64,
    trace: &[ContactEvent],
    opts: RunOptions,
) -> Result<ProtocolRun, SimError> {
    if cfg.mobility == MobilityModel::Trace && trace.is_empty() && cfg.trace.is_none() {
        return Err(SimError::MissingTrace);
    }
    let plan = MessagePlan::Periodic;
    let n = cfg.nodes;
    macro_rules! go {
        ($r:expr) => {{
            let out = simulate(cfg, seed, $r, trace, plan, opts)?;
            ProtocolRun { metrics: out.metrics, groups: out.groups }
        }};
    }
    Ok(match protocol {
        Protocol::Epidemic => go!(Epidemic::new(n, cfg.buffer)),
        Protocol::SprayAndWait => go!(SprayAndWait::new(n, cfg.buffer, cfg.snw_mode)),
        Protocol::Hymad => {
            let mut tie = split_rng(RunSeed::new(seed), StreamLabel::TieBreak);
            go!(Hymad::new(n, cfg.hymad_config(), &mut tie))
        }
    })
}

/// Runs one (protocol, seed) pair, honoring the scenario's overhead mode.
pub fn run_protocol(
    cfg: &ScenarioConfig,
    protocol: Protocol,
    seed: u64,
    trace: &[ContactEvent],
    record_groups: bool,
) -> Result<ProtocolRun, SimError> {
    let mut opts = RunOptions { fixed_overhead: None, record_groups };
    if cfg.overhead == OverheadMode::TwoPass {
        let first = run_once(cfg, protocol, seed, trace, RunOptions { fixed_overhead: Some(0.0), record_groups: false })?;
        opts.fixed_overhead = Some(first.metrics.ledger.total_per_link_per_s());
    }
    run_once(cfg, protocol, seed, trace, opts)
}
