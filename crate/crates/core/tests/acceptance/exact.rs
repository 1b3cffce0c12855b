use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hymad::group::{GroupConfig, SyncHarness};
use hymad::metrics::OverheadKind;
use hymad::rng::{split_rng, RunSeed, StreamLabel};
use hymad::router::hymad::Purpose;
use hymad::router::{Hymad, SnwMode, SprayAndWait};
use hymad::scenario::ScenarioConfig;
use hymad::sim::{simulate, MessagePlan, RunOptions};
use hymad::topology::{ContactEvent, ContactKind};
use hymad::{NodeId, SimTime};

use crate::oracle::{bfs, connected_graph, diameter, edge_set, random_graph};
use crate::Verdict;

fn gcfg(d_max: u32) -> GroupConfig {
    GroupConfig { d_max, ..GroupConfig::default() }
}

fn set(xs: &[NodeId]) -> BTreeSet<NodeId> {
    xs.iter().copied().collect()
}

fn up(ms: u64, a: NodeId, b: NodeId) -> ContactEvent {
    ContactEvent { time: SimTime::from_millis(ms), kind: ContactKind::Up, a, b }
}

fn down(ms: u64, a: NodeId, b: NodeId) -> ContactEvent {
    ContactEvent { time: SimTime::from_millis(ms), kind: ContactKind::Down, a, b }
}

fn hymad_for(cfg: &ScenarioConfig, seed: u64) -> Hymad {
    Hymad::new(cfg.nodes, cfg.hymad_config(), &mut split_rng(RunSeed::new(seed), StreamLabel::TieBreak))
}

pub fn five_node_groups() -> Verdict {
    let (a, b, c, d, e) = (0, 1, 2, 3, 4);
    let mut h = SyncHarness::new(gcfg(2), &[a, b, d, c, e], &[(a, b), (a, c), (a, d), (c, d), (c, e), (d, e)]);
    h.run(2);
    let formed = [a, b, c, d].iter().all(|&n| h.node(n).group_members() == set(&[a, b, c, d]))
        && h.node(e).group_members() == set(&[e]);
    h.run(3);
    h.remove_link(a, c);
    h.run(4);
    let ejected = h.node(a).group_members() == set(&[a, b, d]) && !h.node(c).is_member(a);
    Verdict::new(
        formed && ejected,
        format!("after 2 rounds {{a,b,c,d}} + {{e}}: {formed}; a-c removed ejects c: {ejected} (groups now {:?})", h.groups()),
    )
}

pub fn two_group_crossing() -> Verdict {
    let [a, b, c, d, e, f, g] = [0, 1, 2, 3, 4, 5, 6];
    let mut trace: Vec<ContactEvent> = [(a, b), (a, c), (a, d), (f, e), (f, g)].iter().map(|&(x, y)| up(0, x, y)).collect();
    trace.push(up(5_000, d, e));
    let cfg = ScenarioConfig::for_trace(7, 20.0, 30.0);
    let mut r = hymad_for(&cfg, 3);
    r.enable_log();
    let plan = MessagePlan::Scripted(vec![(SimTime::from_secs(10), f, c)]);
    let out = simulate(&cfg, 3, r, &trace, plan, RunOptions::default()).expect("fixture runs");
    let r = &out.router;
    let s = r.stats();
    let ledger = &out.metrics.ledger;
    let steps: Vec<(NodeId, NodeId, u32)> = r.log().iter().map(|t| (t.from, t.to, t.copies)).collect();
    let m = &out.metrics.messages[0];
    let checks = [
        ("one copy request", s.copy_requests == 1 && ledger.bits(OverheadKind::CopyRequest) == 128),
        ("one reduction with ack", s.reduce_requests == 1 && ledger.bits(OverheadKind::ReduceCopies) == 256),
        ("3 copies cross", s.crossings == 1 && s.crossed_copies == 3),
        ("path F-E-D-A-C", steps == vec![(f, e, 1), (e, d, 3), (d, a, 3), (a, c, 3)]),
        ("D receives a crossing", r.log().get(1).is_some_and(|t| t.purpose == Purpose::Cross)),
        ("delivered in 4 hops", m.delivered_at.is_some() && m.hops == Some(4)),
        ("F keeps 2", r.copies_held(f, 0) == 2),
    ];
    let bad: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Verdict::new(bad.is_empty(), if bad.is_empty() { format!("transfers {steps:?}") } else { format!("mismatch: {bad:?}, transfers {steps:?}") })
}

pub fn diameter_safety() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let graphs: Vec<_> = (0..500).map(|_| random_graph(&mut rng)).collect();
    let mut violations = 0;
    let mut views = 0;
    for d_max in [1, 2, 4] {
        for (order, edges) in &graphs {
            let mut h = SyncHarness::new(gcfg(d_max), order, edges);
            h.run(4 * (d_max as usize + 2));
            let es = edge_set(edges);
            for (_, view) in h.views() {
                views += 1;
                if !diameter(&view, &es).is_some_and(|x| x <= d_max) {
                    violations += 1;
                }
            }
        }
    }
    Verdict::new(violations == 0, format!("{violations} violations over {views} views of 500 graphs x d_max {{1,2,4}}"))
}

pub fn degenerate() -> Verdict {
    let singletons = d_max_zero_singletons();
    let pairs = isolated_pairs_match_binary_spray();
    let intra = intra_group_delay_is_shortest_path();
    Verdict::new(singletons.ok && pairs.ok && intra.ok, format!("{}; {}; {}", singletons.detail, pairs.detail, intra.detail))
}

fn d_max_zero_singletons() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for _ in 0..300 {
        let (order, edges) = random_graph(&mut rng);
        let mut h = SyncHarness::new(gcfg(0), &order, &edges);
        h.run(6);
        bad += h.groups().iter().filter(|g| g.len() != 1).count();
    }
    Verdict::new(bad == 0, format!("d_max=0: {bad} non-singleton groups in 300 graphs"))
}

/// Random pairwise contacts among 7 nodes, never more than one link up at a time.
fn pair_script(rng: &mut ChaCha8Rng, nodes: u32, contacts: usize) -> (Vec<ContactEvent>, Vec<(NodeId, NodeId, u64)>) {
    let mut trace = Vec::new();
    let mut meetings = Vec::new();
    for i in 0..contacts {
        let a = rng.gen_range(0..nodes);
        let mut b = rng.gen_range(0..nodes - 1);
        if b >= a {
            b += 1;
        }
        let t = 2_000 + 10_000 * i as u64;
        trace.push(up(t, a, b));
        trace.push(down(t + 5_000, a, b));
        meetings.push((a, b, t));
    }
    (trace, meetings)
}

fn isolated_pairs_match_binary_spray() -> Verdict {
    // with singleton groups every contact is a border crossing with one border node,
    // so HYMAD hands over ceil(n/2); binary spray hands over floor(n/2): equal for L = 4
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let nodes = 7u32;
    let dst = nodes;
    let mut mismatches = 0;
    let runs = 80;
    for run in 0..runs {
        let (mut trace, _) = pair_script(&mut rng, nodes, 12);
        // half the scripts end with someone meeting the destination
        let finale = (run % 2 == 1).then(|| rng.gen_range(0..nodes));
        if let Some(x) = finale {
            trace.push(up(130_000, x, dst));
            trace.push(down(135_000, x, dst));
        }
        let mut cfg = ScenarioConfig::for_trace(nodes as usize + 1, 200.0, 10.0);
        cfg.copies = 4;
        cfg.d_max = 0;
        let plan = MessagePlan::Scripted(vec![(SimTime::from_secs(1), 0, dst)]);
        let snw = SprayAndWait::new(cfg.nodes, cfg.buffer, SnwMode::Binary);
        let s = simulate(&cfg, 1, snw, &trace, plan.clone(), RunOptions::default()).expect("snw run");
        let h = simulate(&cfg, 1, hymad_for(&cfg, 1), &trace, plan, RunOptions::default()).expect("hymad run");
        let sm = &s.metrics.messages[0];
        let hm = &h.metrics.messages[0];
        let same_delivery = sm.delivered_at.is_some() == hm.delivered_at.is_some()
            && hm.delivered_at.map_or(true, |t| t >= SimTime::from_secs(130) && t <= SimTime::from_secs(135));
        let same_holdings = match sm.delivered_at {
            // after delivery the two disagree on what the last holder keeps
            Some(_) => true,
            None => (0..nodes).all(|n| s.router.holding(n, 0).map_or(0, |x| x.copies) == h.router.copies_held(n, 0)),
        };
        let relay_transfers = |t: u64, delivered: bool| if delivered { t - 1 } else { t };
        let same_count = relay_transfers(s.metrics.data_transfers, sm.delivered_at.is_some())
            == relay_transfers(h.metrics.data_transfers, hm.delivered_at.is_some());
        if !(same_delivery && same_holdings && same_count) {
            mismatches += 1;
        }
    }
    Verdict::new(mismatches == 0, format!("isolated pairs: {mismatches}/{runs} scripts differ from binary spray"))
}

fn intra_group_delay_is_shortest_path() -> Verdict {
    // 10 kB at 100 kB/s: 100 ms per hop; one tick is the 100 ms group period
    let per_hop = SimTime::from_millis(100);
    let tick = SimTime::from_millis(100);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut bad = Vec::new();
    let mut total = 0;
    for g in 0..40 {
        let n = rng.gen_range(3..=10u32);
        let edges = connected_graph(&mut rng, n);
        let es = edge_set(&edges);
        let all: BTreeSet<NodeId> = (0..n).collect();
        let diam = diameter(&all, &es).expect("connected by construction");
        let mut cfg = ScenarioConfig::for_trace(n as usize, 40.0, 10.0);
        cfg.d_max = diam;
        let trace: Vec<ContactEvent> = edges.iter().map(|&(a, b)| up(0, a, b)).collect();
        let script: Vec<(SimTime, NodeId, NodeId)> = (0..8)
            .map(|i| {
                let s = rng.gen_range(0..n);
                let d = (s + rng.gen_range(1..n)) % n;
                (SimTime::from_secs(5 + 3 * i), s, d)
            })
            .collect();
        let out = simulate(&cfg, g, hymad_for(&cfg, g), &trace, MessagePlan::Scripted(script.clone()), RunOptions::default())
            .expect("static run");
        for (m, &(_, s, d)) in out.metrics.messages.iter().zip(&script) {
            total += 1;
            let hops = bfs(s, &all, &es)[&d];
            let ideal = SimTime::from_millis(per_hop.as_millis() * hops as u64);
            let ok = m.hops == Some(hops) && m.delay().is_some_and(|x| x >= ideal && x <= ideal + tick);
            if !ok {
                bad.push((g, s, d, hops, m.delay(), m.hops));
            }
        }
    }
    Verdict::new(bad.is_empty(), format!("static graphs: {}/{total} messages off the shortest-path schedule {:?}", bad.len(), bad.first()))
}
