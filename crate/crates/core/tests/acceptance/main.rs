//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary so the verdict lines always show up in `cargo test` output.
//! Pass criterion numbers as arguments to run a subset.

mod exact;
mod oracle;
mod trends;

use std::time::Instant;

pub struct Verdict {
    pub ok: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(ok: bool, detail: impl Into<String>) -> Self {
        Verdict { ok, detail: detail.into() }
    }
}

type Check = fn() -> Verdict;

const CRITERIA: [(u32, &str, Check); 10] = [
    (1, "copy conservation", trends::conservation),
    (2, "group formation walk-through", exact::five_node_groups),
    (3, "two-group crossing walk-through", exact::two_group_crossing),
    (4, "diameter safety", exact::diameter_safety),
    (5, "overhead accounting", trends::overhead),
    (6, "ordering at medium density", trends::medium_ordering),
    (7, "sparse inversion", trends::sparse_inversion),
    (8, "congestion collapse", trends::congestion_collapse),
    (9, "accordion trace", trends::accordion),
    (10, "degenerate equivalences", exact::degenerate),
];

fn main() {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, check) in CRITERIA {
        if !picked.is_empty() && !picked.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let v = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Verdict::new(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let tag = if v.ok { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag} {name}: {} ({:.1} s)", v.detail, t0.elapsed().as_secs_f64());
        if !v.ok {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
