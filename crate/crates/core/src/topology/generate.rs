//! Synthetic contact traces sampled from a mobility model.

use serde::{Deserialize, Serialize};

use super::{contacts_from_positions, trace_from_snapshots, ContactEvent, GroupMobility, GroupMobilityParams, RandomWaypoint, RwpParams, WorldSize};
use crate::rng::{split_rng, RunSeed, StreamLabel};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TraceModel {
    Rwp { nodes: usize, world: WorldSize, params: RwpParams, range: f64 },
    Group { params: GroupMobilityParams, range: f64 },
}

impl TraceModel {
    pub fn nodes(&self) -> usize {
        match self {
            TraceModel::Rwp { nodes, .. } => *nodes,
            TraceModel::Group { params, .. } => params.node_count(),
        }
    }

    /// 62 skaters: six groups of ten plus two staff riders on a 5 m/s loop, with the
    /// pack stretching and contracting every ten minutes.
    pub fn accordion62() -> Self {
        TraceModel::Group {
            params: GroupMobilityParams {
                groups: 6,
                group_size: 10,
                staff: 2,
                spread: 60.0,
                track_radius: 2000.0,
                tour_speed: 5.0,
                spacing: 150.0,
                accordion_depth: 0.9,
                accordion_period: 600.0,
                jitter_speed: 1.5,
            },
            range: 40.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "accordion62" => Some(Self::accordion62()),
            _ => None,
        }
    }
}

pub const PRESETS: &[&str] = &["accordion62"];

/// Steps the model every `sample` and records link changes between snapshots.
pub fn generate_trace(model: &TraceModel, seed: u64, duration: SimTime, sample: SimTime) -> Vec<ContactEvent> {
    let mut rng = split_rng(RunSeed::new(seed), StreamLabel::Mobility);
    let dt = sample.as_secs_f64();
    let steps = duration.as_millis() / sample.as_millis().max(1);
    let mut snaps = Vec::with_capacity(steps as usize + 1);
    match model {
        TraceModel::Rwp { nodes, world, params, range } => {
            let mut m = RandomWaypoint::new(*nodes, *world, *params, &mut rng);
            snaps.push(contacts_from_positions(SimTime::ZERO, &m.positions(), *range));
            for k in 1..=steps {
                m.step(dt, &mut rng);
                snaps.push(contacts_from_positions(SimTime::from_millis(sample.as_millis() * k), &m.positions(), *range));
            }
        }
        TraceModel::Group { params, range } => {
            let mut m = GroupMobility::new(*params, &mut rng);
            snaps.push(contacts_from_positions(SimTime::ZERO, &m.positions(), *range));
            for k in 1..=steps {
                let pos = m.step(dt, &mut rng);
                snaps.push(contacts_from_positions(SimTime::from_millis(sample.as_millis() * k), &pos, *range));
            }
        }
    }
    trace_from_snapshots(&snaps)
}
