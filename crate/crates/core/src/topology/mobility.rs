use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Position, WorldSize};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwpParams {
    pub min_speed: f64,
    pub max_speed: f64,
    pub wait_time: f64,
}

impl Default for RwpParams {
    fn default() -> Self {
        RwpParams { min_speed: 0.5, max_speed: 1.5, wait_time: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg {
    pub waypoint: Position,
    pub speed: f64,
    pub pause: f64,
}

pub fn rwp_next_leg(world: &WorldSize, params: &RwpParams, rng: &mut RandomStream) -> Leg {
    let waypoint = Position::new(rng.gen_range(0.0..=world.width), rng.gen_range(0.0..=world.height));
    let speed = if params.max_speed > params.min_speed {
        rng.gen_range(params.min_speed..=params.max_speed)
    } else {
        params.min_speed
    };
    Leg { waypoint, speed, pause: params.wait_time }
}

#[derive(Clone, Debug)]
struct RwpNode {
    pos: Position,
    leg: Leg,
    paused_for: f64,
}

/// Random Waypoint over all nodes, advanced in fixed steps.
#[derive(Clone, Debug)]
pub struct RandomWaypoint {
    world: WorldSize,
    params: RwpParams,
    nodes: Vec<RwpNode>,
}

impl RandomWaypoint {
    pub fn new(n: usize, world: WorldSize, params: RwpParams, rng: &mut RandomStream) -> Self {
        let nodes = (0..n)
            .map(|_| {
                let pos = Position::new(rng.gen_range(0.0..=world.width), rng.gen_range(0.0..=world.height));
                let leg = rwp_next_leg(&world, &params, rng);
                RwpNode { pos, leg, paused_for: 0.0 }
            })
            .collect();
        RandomWaypoint { world, params, nodes }
    }

    pub fn positions(&self) -> Vec<Position> {
        self.nodes.iter().map(|n| n.pos).collect()
    }

    pub fn step(&mut self, dt: f64, rng: &mut RandomStream) {
        for node in &mut self.nodes {
            let mut remaining = dt;
            while remaining > 0.0 {
                if node.paused_for > 0.0 {
                    let w = node.paused_for.min(remaining);
                    node.paused_for -= w;
                    remaining -= w;
                    if node.paused_for <= 0.0 {
                        node.leg = rwp_next_leg(&self.world, &self.params, rng);
                    }
                    continue;
                }
                let dist = node.pos.distance(&node.leg.waypoint);
                let travel = node.leg.speed * remaining;
                if travel < dist {
                    let f = travel / dist;
                    node.pos.x += (node.leg.waypoint.x - node.pos.x) * f;
                    node.pos.y += (node.leg.waypoint.y - node.pos.y) * f;
                    remaining = 0.0;
                } else {
                    remaining -= dist / node.leg.speed;
                    node.pos = node.leg.waypoint;
                    node.paused_for = node.leg.pause;
                    if node.paused_for <= 0.0 {
                        node.leg = rwp_next_leg(&self.world, &self.params, rng);
                    }
                }
            }
            node.pos = self.world.clamp(node.pos);
        }
    }
}

/// Social-group mobility along a circular tour with an accordion phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMobilityParams {
    pub groups: usize,
    pub group_size: usize,
    /// Extra nodes riding ahead of the first group and behind the last.
    pub staff: usize,
    pub spread: f64,
    pub track_radius: f64,
    pub tour_speed: f64,
    /// Along-track gap between consecutive group reference points at full expansion.
    pub spacing: f64,
    /// 0 keeps spacing constant; 1 collapses all groups together at the contraction peak.
    pub accordion_depth: f64,
    pub accordion_period: f64,
    pub jitter_speed: f64,
}

impl GroupMobilityParams {
    pub fn node_count(&self) -> usize {
        self.groups * self.group_size + self.staff
    }

    pub fn world(&self) -> WorldSize {
        let side = 2.0 * (self.track_radius + self.spread) + 200.0;
        WorldSize { width: side, height: side }
    }
}

#[derive(Clone, Debug)]
pub struct GroupMobility {
    params: GroupMobilityParams,
    time: f64,
    phase: Vec<f64>,
    offsets: Vec<(f64, f64)>,
}

impl GroupMobility {
    pub fn new(params: GroupMobilityParams, rng: &mut RandomStream) -> Self {
        let n = params.node_count();
        let offsets = (0..n).map(|_| random_in_disc(params.spread, rng)).collect();
        let phase = (0..params.groups).map(|_| rng.gen_range(-0.3..0.3)).collect();
        GroupMobility { params, time: 0.0, phase, offsets }
    }

    pub fn params(&self) -> &GroupMobilityParams {
        &self.params
    }

    fn group_of(&self, node: usize) -> Option<usize> {
        let p = &self.params;
        (node < p.groups * p.group_size).then(|| node / p.group_size)
    }

    /// Along-track offset of reference point `g` (fractional index allowed for staff).
    fn track_offset(&self, g: f64, jitter: f64) -> f64 {
        let p = &self.params;
        let centre = (p.groups as f64 - 1.0) / 2.0;
        let squeeze = if p.accordion_period > 0.0 {
            let s = (TAU * self.time / p.accordion_period + jitter).sin();
            1.0 - p.accordion_depth * 0.5 * (1.0 + s)
        } else {
            1.0
        };
        (g - centre) * p.spacing * squeeze
    }

    fn track_point(&self, arc: f64, lateral: f64) -> Position {
        let p = &self.params;
        let c = p.track_radius + p.spread + 100.0;
        let angle = arc / p.track_radius;
        let r = p.track_radius + lateral;
        Position::new(c + r * angle.cos(), c + r * angle.sin())
    }

    pub fn positions(&self) -> Vec<Position> {
        let p = &self.params;
        let head = p.tour_speed * self.time;
        let world = p.world();
        (0..p.node_count())
            .map(|i| {
                let (ox, oy) = self.offsets[i];
                let arc = match self.group_of(i) {
                    Some(g) => head + self.track_offset(g as f64, self.phase[g]),
                    None => {
                        let k = i - p.groups * p.group_size;
                        // alternate tail / head riders
                        let g = if k % 2 == 0 { -1.0 } else { p.groups as f64 };
                        head + self.track_offset(g, 0.0)
                    }
                };
                world.clamp(self.track_point(arc + ox, oy))
            })
            .collect()
    }

    /// Advances by `dt` seconds and returns the new positions.
    pub fn step(&mut self, dt: f64, rng: &mut RandomStream) -> Vec<Position> {
        self.time += dt;
        let (spread, js) = (self.params.spread, self.params.jitter_speed);
        if spread > 0.0 {
            for o in &mut self.offsets {
                let a = rng.gen_range(0.0..TAU);
                let d = js * dt;
                let (nx, ny) = (o.0 + d * a.cos(), o.1 + d * a.sin());
                let r = nx.hypot(ny);
                *o = if r > spread { (nx * spread / r, ny * spread / r) } else { (nx, ny) };
            }
        }
        self.positions()
    }
}

fn random_in_disc(radius: f64, rng: &mut RandomStream) -> (f64, f64) {
    if radius <= 0.0 {
        return (0.0, 0.0);
    }
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(0.0..TAU);
    (r * a.cos(), r * a.sin())
}
