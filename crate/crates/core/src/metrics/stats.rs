use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::time::SimTime;

/// Cumulative delivery ratio at `bucket, 2*bucket, ...` up to `horizon` inclusive.
///
/// `delays` holds the delay of every created message, `None` if undelivered.
pub fn delivery_cdf(delays: &[Option<SimTime>], bucket: SimTime, horizon: SimTime) -> Vec<(SimTime, f64)> {
    assert!(bucket.as_millis() > 0, "bucket must be positive");
    let mut sorted: Vec<u64> = delays.iter().flatten().map(|d| d.as_millis()).collect();
    sorted.sort_unstable();
    let n = delays.len();
    let mut out = Vec::new();
    let mut t = bucket.as_millis();
    while t <= horizon.as_millis() {
        let hit = sorted.partition_point(|&d| d <= t);
        let ratio = if n == 0 { 0.0 } else { hit as f64 / n as f64 };
        out.push((SimTime(t), ratio));
        t += bucket.as_millis();
    }
    out
}

/// Ratio delivered within `t`.
pub fn ratio_at(delays: &[Option<SimTime>], t: SimTime) -> f64 {
    if delays.is_empty() {
        return 0.0;
    }
    delays.iter().flatten().filter(|d| **d <= t).count() as f64 / delays.len() as f64
}

/// Mean and Student-t half-width at confidence `level`; needs at least two samples.
pub fn mean_ci(samples: &[f64], level: f64) -> Option<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?.inverse_cdf(0.5 + level / 2.0);
    Some((mean, t * var.sqrt() / (n as f64).sqrt()))
}

/// Mean of per-run average delays (seconds) with a 95% interval.
///
/// Runs without deliveries are excluded; their indices are returned.
pub fn mean_delay_ci(per_run_delays: &[Vec<SimTime>]) -> (Option<(f64, f64)>, Vec<usize>) {
    let mut means = Vec::new();
    let mut skipped = Vec::new();
    for (i, run) in per_run_delays.iter().enumerate() {
        if run.is_empty() {
            skipped.push(i);
        } else {
            means.push(run.iter().map(|d| d.as_secs_f64()).sum::<f64>() / run.len() as f64);
        }
    }
    (mean_ci(&means, 0.95), skipped)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population coefficient of variation; 0 for an all-zero series.
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    if m == 0.0 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    var.sqrt() / m
}
