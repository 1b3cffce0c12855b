use std::collections::BTreeSet;

use crate::topology::NodeId;

/// Joins plus leaves between two membership snapshots (each node's own view, indexed by node).
///
/// A node stays put when its new group still holds at least half of its old
/// group mates. Otherwise leaving a non-singleton group counts one event and
/// landing in a non-singleton group counts another.
pub fn group_churn(before: &[BTreeSet<NodeId>], after: &[BTreeSet<NodeId>]) -> u32 {
    assert_eq!(before.len(), after.len(), "snapshots must cover the same nodes");
    let mut events = 0;
    for (node, (old, new)) in before.iter().zip(after).enumerate() {
        let me = node as NodeId;
        let old_mates = old.iter().filter(|m| **m != me).count();
        let new_mates = new.iter().filter(|m| **m != me).count();
        let kept = old.iter().filter(|m| **m != me && new.contains(m)).count();
        let stayed = old_mates > 0 && kept * 2 >= old_mates;
        if stayed {
            continue;
        }
        if old_mates > 0 {
            events += 1;
        }
        if new_mates > 0 {
            events += 1;
        }
    }
    events
}

/// Per-interval churn over a series of snapshots taken at a fixed cadence.
pub fn churn_series(snapshots: &[Vec<BTreeSet<NodeId>>]) -> Vec<u32> {
    snapshots.windows(2).map(|w| group_churn(&w[0], &w[1])).collect()
}

/// Trailing moving average over `window` samples (shorter at the start).
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= w {
            sum -= series[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}
