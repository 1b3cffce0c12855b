use std::path::PathBuf;
use std::sync::OnceLock;

use hymad::batch::{run_batch, Batch};
use hymad::group::{GroupConfig, SyncHarness};
use hymad::metrics::{OverheadKind, OverheadLedger, RunMetrics};
use hymad::scenario::{parse_scenario, Protocol, ScenarioConfig};
use hymad::sim::run_protocol;
use hymad::SimTime;

use crate::Verdict;

const WORKERS: usize = 4;

fn scenario(name: &str) -> ScenarioConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    parse_scenario(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn batch(name: &str, protocols: &[Protocol], audit: bool) -> Batch {
    let mut cfg = scenario(name);
    cfg.audit = audit;
    assert_eq!(cfg.seeds.len(), 20, "{name} should carry 20 seeds");
    let b = run_batch(&cfg, protocols, WORKERS).expect("batch runs");
    assert!(b.failed.is_empty(), "{name}: failed runs {:?}", b.failed);
    b
}

/// The medium-density batch, shared by the conservation and ordering checks.
fn default_batch() -> &'static (Batch, f64) {
    static B: OnceLock<(Batch, f64)> = OnceLock::new();
    B.get_or_init(|| {
        let t0 = std::time::Instant::now();
        let b = batch("default_rwp", &Protocol::ALL, true);
        (b, t0.elapsed().as_secs_f64())
    })
}

pub fn conservation() -> Verdict {
    let (b, secs) = default_batch();
    let mut audits = 0;
    let mut violations = 0;
    for p in [Protocol::SprayAndWait, Protocol::Hymad] {
        for r in b.runs_of(p) {
            audits += r.audits;
            violations += r.conservation_violations;
        }
    }
    let runs = b.runs_of(Protocol::SprayAndWait).count() + b.runs_of(Protocol::Hymad).count();
    Verdict::new(
        violations == 0 && audits > 0 && runs == 40 && *secs < 300.0,
        format!("{violations} violations in {audits} audits over {runs} copy-counting runs; batch took {secs:.0} s (limit 300 s)"),
    )
}

pub fn overhead() -> Verdict {
    // per-message costs
    let mut h = SyncHarness::new(GroupConfig::default(), &[0, 1, 2, 3, 4], &[(0, 1), (0, 2), (0, 3), (0, 4)]);
    h.run(3);
    let vector_bits = h.node(0).build_group_message(SimTime::from_secs(1)).size_bits();
    let mut l = OverheadLedger::new();
    l.charge_group_message(5);
    l.charge_messages_list(12);
    l.charge_copy_request();
    // request and acknowledgement
    l.charge_reduce();
    l.charge_reduce();
    let exact = vector_bits == 640
        && l.bits(OverheadKind::GroupAlgorithm) == 640
        && l.bits(OverheadKind::MessagesList) == 12 * 128
        && l.bits(OverheadKind::CopyRequest) == 128
        && l.bits(OverheadKind::ReduceCopies) == 256;

    // sweep the message rate with 100 ms group and 2 s list periods
    let mut cfg = scenario("overhead_100ms");
    cfg.seeds = vec![1, 2, 3];
    let intervals = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mut rows = Vec::new();
    for &iv in &intervals {
        cfg.message_interval = iv;
        let runs: Vec<RunMetrics> = cfg
            .seeds
            .iter()
            .map(|&s| run_protocol(&cfg, Protocol::Hymad, s, &[], false).expect("sweep run").metrics)
            .collect();
        let group: Vec<u64> = runs.iter().map(|r| r.ledger.bits(OverheadKind::GroupAlgorithm)).collect();
        let group_rate = mean(runs.iter().map(|r| r.ledger.per_link_per_s(OverheadKind::GroupAlgorithm)));
        let total_rate = mean(runs.iter().map(|r| r.ledger.total_per_link_per_s()));
        rows.push((iv, group, group_rate, total_rate));
    }
    let floor_flat = rows.windows(2).all(|w| w[0].1 == w[1].1);
    let totals_fall = rows.windows(2).all(|w| w[1].3 <= w[0].3);
    let floor_below = rows.iter().all(|r| r.2 <= r.3);
    let share = |r: &(f64, Vec<u64>, f64, f64)| r.2 / r.3;
    let approaches = share(&rows[rows.len() - 1]) > share(&rows[0]);

    // the 2 s / 2 s pair puts the floor lower
    let mut slow = scenario("overhead_2s");
    slow.seeds = vec![1];
    let slow_rate = run_protocol(&slow, Protocol::Hymad, 1, &[], false)
        .expect("slow run")
        .metrics
        .ledger
        .per_link_per_s(OverheadKind::GroupAlgorithm);
    let fast_rate = rows[1].2;
    let lower = slow_rate < fast_rate;

    let curve: Vec<String> = rows.iter().map(|r| format!("{}s: {:.0}/{:.0}", r.0, r.2, r.3)).collect();
    Verdict::new(
        exact && floor_flat && totals_fall && floor_below && approaches && lower,
        format!(
            "5-member vector {vector_bits} bits; group/total bit/link/s by interval [{}]; floor identical across rates: {floor_flat}, totals fall: {totals_fall}; 2 s group period floor {slow_rate:.0} < {fast_rate:.0}",
            curve.join(", ")
        ),
    )
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn medium_ordering() -> Verdict {
    let (b, _) = default_batch();
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [100, 300, 500] {
        let at = SimTime::from_secs(t);
        let (e, h, s) = (
            b.mean_ratio_at(Protocol::Epidemic, at),
            b.mean_ratio_at(Protocol::Hymad, at),
            b.mean_ratio_at(Protocol::SprayAndWait, at),
        );
        ok &= e >= h && h >= s;
        if t == 500 {
            ok &= h - s >= 0.03;
        }
        parts.push(format!("{t}s epidemic {e:.3} hymad {h:.3} snw {s:.3}"));
    }
    let at = SimTime::from_secs(500);
    let gap = b.mean_ratio_at(Protocol::Hymad, at) - b.mean_ratio_at(Protocol::SprayAndWait, at);
    Verdict::new(ok, format!("{}; hymad-snw gap at 500 s {:.1} pp (need >= 3)", parts.join("; "), 100.0 * gap))
}

pub fn sparse_inversion() -> Verdict {
    let b = batch("sparse_rwp", &[Protocol::SprayAndWait, Protocol::Hymad], false);
    let s = b.mean_delivery_ratio(Protocol::SprayAndWait);
    let h = b.mean_delivery_ratio(Protocol::Hymad);
    Verdict::new(s >= h, format!("400 m range: snw {s:.3} vs hymad {h:.3}"))
}

pub fn congestion_collapse() -> Verdict {
    let b = batch("speed_1k", &[Protocol::Epidemic, Protocol::SprayAndWait], false);
    let e = b.mean_delivery_ratio(Protocol::Epidemic);
    let s = b.mean_delivery_ratio(Protocol::SprayAndWait);
    Verdict::new(e < s, format!("1 kB/s links: epidemic {e:.3} vs snw {s:.3}"))
}

/// Coefficient of variation of per-window sums.
fn windowed_cv(series: &[f64], window: usize) -> f64 {
    let sums: Vec<f64> = series.chunks_exact(window).map(|c| c.iter().sum()).collect();
    let m = sums.iter().sum::<f64>() / sums.len() as f64;
    let var = sums.iter().map(|x| (x - m).powi(2)).sum::<f64>() / sums.len() as f64;
    var.sqrt() / m
}

pub fn accordion() -> Verdict {
    let b = batch("accordion62", &[Protocol::SprayAndWait, Protocol::Hymad], false);
    let s = b.summary(Protocol::SprayAndWait);
    let h = b.summary(Protocol::Hymad);
    let (Some(sm), Some(sw), Some(hm), Some(hw)) = (s.mean_delay_s, s.ci_halfwidth_s, h.mean_delay_s, h.ci_halfwidth_s) else {
        return Verdict::new(false, "a protocol delivered nothing");
    };
    let delays_ok = hm < sm && hm + hw < sm - sw;

    // mobility is shared by all seeds of a trace replay, so one run gives the churn series
    let run = b.runs_of(Protocol::Hymad).next().expect("hymad runs");
    // contacts change every 15 s in the trace; rates are taken over 60 s windows
    let window = (60.0 / b.scenario.sample_interval).round() as usize;
    let link: Vec<f64> = run.dynamics.iter().map(|d| d.link_churn as f64).collect();
    let group: Vec<f64> = run.dynamics.iter().map(|d| d.group_churn as f64).collect();
    let (lcv, gcv) = (windowed_cv(&link, window), windowed_cv(&group, window));
    let churn_ok = gcv < lcv;
    Verdict::new(
        delays_ok && churn_ok,
        format!(
            "mean delay hymad {hm:.1} ± {hw:.1} s vs snw {sm:.1} ± {sw:.1} s over {} seeds; churn CV group {gcv:.2} vs link {lcv:.2}",
            h.seeds
        ),
    )
}
