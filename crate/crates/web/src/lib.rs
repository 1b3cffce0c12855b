//! Browser bindings: group formation on a random snapshot, the crossing copy split,
//! and a small protocol comparison.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use hymad::group::{GroupConfig, SyncHarness};
use hymad::rng::{split_rng, RunSeed, StreamLabel};
use hymad::router::copies_to_forward;
use hymad::scenario::{Protocol, ScenarioConfig};
use hymad::sim::run_protocol;
use hymad::topology::{contacts_from_positions, RandomWaypoint, RwpParams, WorldSize};
use hymad::{NodeId, SimTime};

#[derive(Serialize)]
struct GroupsView {
    positions: Vec<(f64, f64)>,
    edges: Vec<(NodeId, NodeId)>,
    groups: Vec<Vec<NodeId>>,
    consistent: bool,
}

/// Scatters `nodes` nodes over a `side` square, runs the group service to a fixed point
/// and returns positions, links and groups as JSON.
#[wasm_bindgen]
pub fn form_groups(nodes: u32, side: f64, range: f64, d_max: u32, seed: u64) -> Result<String, JsError> {
    if nodes == 0 || nodes > 400 || !(side > 0.0) || !(range > 0.0) {
        return Err(JsError::new("need 1..=400 nodes and a positive side and range"));
    }
    let mut rng = split_rng(RunSeed::new(seed), StreamLabel::Mobility);
    let world = WorldSize { width: side, height: side };
    let still = RwpParams { min_speed: 0.0, max_speed: 0.0, wait_time: 0.0 };
    let positions = RandomWaypoint::new(nodes as usize, world, still, &mut rng).positions();
    let snap = contacts_from_positions(SimTime::ZERO, &positions, range);
    let order: Vec<NodeId> = (0..nodes).collect();
    let cfg = GroupConfig { d_max, ..GroupConfig::default() };
    let mut h = SyncHarness::new(cfg, &order, snap.edges());
    h.run(4 * (d_max as usize + 2) + 8);
    let view = GroupsView {
        positions: positions.iter().map(|p| (p.x, p.y)).collect(),
        edges: snap.edges().to_vec(),
        groups: h.groups().into_iter().map(|g| g.into_iter().collect()).collect(),
        consistent: h.consistent(),
    };
    Ok(serde_json::to_string(&view)?)
}

/// Copies handed to a neighboring group: `n_c` copies in our group, `n_b` border nodes.
#[wasm_bindgen]
pub fn crossing_copies(n_c: u32, n_b: u32) -> u32 {
    copies_to_forward(n_c, n_b)
}

#[derive(Serialize)]
struct Comparison {
    protocol: String,
    delivery_ratio: f64,
    mean_delay_s: Option<f64>,
    data_transfers: u64,
}

/// Runs each protocol once on the same Random Waypoint scenario; JSON list of results.
#[wasm_bindgen]
pub fn compare(nodes: u32, side: f64, range: f64, duration: f64, copies: u32, seed: u64) -> Result<String, JsError> {
    let mut cfg = ScenarioConfig::rwp(nodes as usize, side, side, range, duration);
    cfg.copies = copies;
    cfg.cooldown = duration;
    cfg.validate().map_err(|e| JsError::new(&e.to_string()))?;
    let mut out = Vec::new();
    for p in Protocol::ALL {
        let run = run_protocol(&cfg, p, seed, &[], false).map_err(|e| JsError::new(&e.to_string()))?;
        let m = run.metrics;
        out.push(Comparison {
            protocol: p.to_string(),
            delivery_ratio: m.delivery_ratio(),
            mean_delay_s: m.mean_delay(),
            data_transfers: m.data_transfers,
        });
    }
    Ok(serde_json::to_string(&out)?)
}
