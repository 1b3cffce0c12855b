//! Seed batches: every (protocol, seed) pair of a scenario, summaries and CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::metrics::{mean, mean_ci, mean_delay_ci, OverheadKind, RunMetrics};
use crate::scenario::{MobilityModel, Protocol, ScenarioConfig};
use crate::sim::{run_protocol, SimError};
use crate::time::SimTime;
use crate::topology::{load_trace, ContactEvent, TraceError};

/// Bucket width of the delivery CDF written to `cdf.csv`.
pub const CDF_BUCKET: SimTime = SimTime::from_secs(10);

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("trace {path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct FailedRun {
    pub protocol: Protocol,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub scenario: ScenarioConfig,
    pub protocols: Vec<Protocol>,
    /// Sorted by (protocol, seed).
    pub runs: Vec<RunMetrics>,
    pub failed: Vec<FailedRun>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSummary {
    pub protocol: Protocol,
    pub delivery_ratio: f64,
    pub mean_delay_s: Option<f64>,
    pub ci_halfwidth_s: Option<f64>,
    pub seeds: usize,
    /// Seeds whose runs delivered nothing and were left out of the delay mean.
    pub skipped_seeds: Vec<u64>,
}

pub fn scenario_trace(cfg: &ScenarioConfig) -> Result<Vec<ContactEvent>, BatchError> {
    match (&cfg.mobility, &cfg.trace) {
        (MobilityModel::Trace, Some(p)) => load_trace(p).map_err(|source| BatchError::Trace { path: p.clone(), source }),
        _ => Ok(Vec::new()),
    }
}

/// Runs every protocol on every seed; streams depend only on the seed, so runs pair up.
pub fn run_batch(cfg: &ScenarioConfig, protocols: &[Protocol], workers: usize) -> Result<Batch, BatchError> {
    let trace = scenario_trace(cfg)?;
    let jobs: Vec<(Protocol, u64)> =
        protocols.iter().flat_map(|&p| cfg.seeds.iter().map(move |&s| (p, s))).collect();
    let next = Mutex::new(0usize);
    let done: Mutex<Vec<(Protocol, u64, Result<RunMetrics, SimError>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().unwrap();
                    *n += 1;
                    *n - 1
                };
                let Some(&(p, s)) = jobs.get(i) else { break };
                let r = run_protocol(cfg, p, s, &trace, false).map(|r| r.metrics);
                done.lock().unwrap().push((p, s, r));
            });
        }
    });
    let mut done = done.into_inner().unwrap();
    done.sort_by_key(|(p, s, _)| (*p, *s));
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for (protocol, seed, r) in done {
        match r {
            Ok(m) => runs.push(m),
            Err(e) => failed.push(FailedRun { protocol, seed, error: e.to_string() }),
        }
    }
    let mut protocols = protocols.to_vec();
    protocols.sort();
    protocols.dedup();
    Ok(Batch { scenario: cfg.clone(), protocols, runs, failed })
}

impl Batch {
    pub fn runs_of(&self, p: Protocol) -> impl Iterator<Item = &RunMetrics> {
        self.runs.iter().filter(move |r| r.protocol == p.as_str())
    }

    /// Paired-seed mean of the cumulative delivery ratio at `t`.
    pub fn mean_ratio_at(&self, p: Protocol, t: SimTime) -> f64 {
        mean(&self.runs_of(p).map(|r| r.ratio_at(t)).collect::<Vec<_>>())
    }

    pub fn mean_delivery_ratio(&self, p: Protocol) -> f64 {
        mean(&self.runs_of(p).map(|r| r.delivery_ratio()).collect::<Vec<_>>())
    }

    pub fn summary(&self, p: Protocol) -> ProtocolSummary {
        let runs: Vec<&RunMetrics> = self.runs_of(p).collect();
        let delays: Vec<Vec<SimTime>> = runs.iter().map(|r| r.delivered_delays()).collect();
        let (ci, skipped) = mean_delay_ci(&delays);
        let single = (runs.len() == 1).then(|| runs[0].mean_delay()).flatten();
        ProtocolSummary {
            protocol: p,
            delivery_ratio: self.mean_delivery_ratio(p),
            mean_delay_s: ci.map(|c| c.0).or(single),
            ci_halfwidth_s: ci.map(|c| c.1),
            seeds: runs.len(),
            skipped_seeds: skipped.into_iter().map(|i| runs[i].seed).collect(),
        }
    }

    /// Mean bits and per-link rate of each overhead kind.
    pub fn overhead(&self, p: Protocol) -> Vec<(OverheadKind, f64, f64)> {
        let runs: Vec<&RunMetrics> = self.runs_of(p).collect();
        OverheadKind::ALL
            .iter()
            .map(|&k| {
                let bits = mean(&runs.iter().map(|r| r.ledger.bits(k) as f64).collect::<Vec<_>>());
                let rate = mean(&runs.iter().map(|r| r.ledger.per_link_per_s(k)).collect::<Vec<_>>());
                (k, bits, rate)
            })
            .collect()
    }

    /// Mean delivery ratio and its 95% half-width, when there are two or more seeds.
    pub fn delivery_ci(&self, p: Protocol) -> Option<(f64, f64)> {
        mean_ci(&self.runs_of(p).map(|r| r.delivery_ratio()).collect::<Vec<_>>(), 0.95)
    }

    /// Writes `cdf.csv`, `overhead.csv`, `dynamics.csv`, `summary.csv` and per-run message ledgers.
    pub fn write_csvs(&self, dir: &Path) -> Result<(), BatchError> {
        fs::create_dir_all(dir)?;
        let end = self.scenario.end();

        let mut w = csv::Writer::from_path(dir.join("cdf.csv"))?;
        let mut header = vec!["bucket_s".to_string()];
        header.extend(self.protocols.iter().map(|p| p.to_string()));
        w.write_record(&header)?;
        let mut t = CDF_BUCKET;
        while t <= end {
            let mut row = vec![fmt_secs(t)];
            row.extend(self.protocols.iter().map(|&p| format!("{:.6}", self.mean_ratio_at(p, t))));
            w.write_record(&row)?;
            t += CDF_BUCKET;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("overhead.csv"))?;
        w.write_record(["protocol", "kind", "bits", "bits_per_link_per_s"])?;
        for &p in &self.protocols {
            for (k, bits, rate) in self.overhead(p) {
                w.write_record([p.as_str(), k.as_str(), &format!("{bits:.1}"), &format!("{rate:.3}")])?;
            }
        }
        w.flush()?;

        // mobility is the same for every protocol; prefer the run that also has group churn
        let first = self.scenario.seeds.first().copied();
        let dyn_run = self
            .runs
            .iter()
            .filter(|r| Some(r.seed) == first)
            .max_by_key(|r| r.protocol == Protocol::Hymad.as_str());
        let mut w = csv::Writer::from_path(dir.join("dynamics.csv"))?;
        w.write_record(["t", "avg_degree", "components", "link_churn", "group_churn"])?;
        for s in dyn_run.map(|r| r.dynamics.as_slice()).unwrap_or(&[]) {
            w.write_record([
                fmt_secs(s.t),
                format!("{:.4}", s.avg_degree),
                s.components.to_string(),
                s.link_churn.to_string(),
                s.group_churn.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record(["protocol", "delivery_ratio", "mean_delay_s", "ci_halfwidth_s", "seeds"])?;
        for &p in &self.protocols {
            let s = self.summary(p);
            let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
            w.write_record([
                p.to_string(),
                format!("{:.6}", s.delivery_ratio),
                opt(s.mean_delay_s),
                opt(s.ci_halfwidth_s),
                s.seeds.to_string(),
            ])?;
        }
        w.flush()?;

        let mdir = dir.join("messages");
        fs::create_dir_all(&mdir)?;
        for r in &self.runs {
            write_messages(&mdir.join(format!("{}_seed{}.csv", r.protocol, r.seed)), r)?;
        }

        if !self.failed.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("failed.csv"))?;
            w.write_record(["protocol", "seed", "error"])?;
            for f in &self.failed {
                w.write_record([f.protocol.to_string(), f.seed.to_string(), f.error.clone()])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn fmt_secs(t: SimTime) -> String {
    let ms = t.as_millis();
    if ms % 1000 == 0 {
        (ms / 1000).to_string()
    } else {
        format!("{:.3}", t.as_secs_f64())
    }
}

/// One run's message ledger: `msg_id,src,dst,created_at,delivered_at_or_-,copies_at_end,hops_at_delivery`.
pub fn write_messages(path: &Path, run: &RunMetrics) -> Result<(), BatchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["msg_id", "src", "dst", "created_at", "delivered_at_or_-", "copies_at_end", "hops_at_delivery"])?;
    for m in &run.messages {
        w.write_record([
            m.id.to_string(),
            m.src.to_string(),
            m.dst.to_string(),
            format!("{:.3}", m.created_at.as_secs_f64()),
            m.delivered_at.map_or("-".into(), |t| format!("{:.3}", t.as_secs_f64())),
            m.copies_at_end.to_string(),
            m.hops.map_or("-".into(), |h| h.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
