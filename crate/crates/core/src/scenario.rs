//! Scenario files: flat TOML, one key per parameter, unknown keys rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::GroupConfig;
use crate::router::{HymadConfig, SnwMode};
use crate::time::SimTime;
use crate::topology::{GroupMobilityParams, RwpParams, WorldSize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Epidemic,
    SprayAndWait,
    Hymad,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Epidemic, Protocol::SprayAndWait, Protocol::Hymad];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Epidemic => "epidemic",
            Protocol::SprayAndWait => "spray_and_wait",
            Protocol::Hymad => "hymad",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epidemic" => Ok(Protocol::Epidemic),
            "spray_and_wait" | "snw" => Ok(Protocol::SprayAndWait),
            "hymad" => Ok(Protocol::Hymad),
            _ => Err(format!("unknown router {s:?} (expected epidemic, spray_and_wait or hymad)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityModel {
    #[default]
    RandomWaypoint,
    Group,
    Trace,
}

/// How control overhead eats into data capacity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverheadMode {
    /// Rate measured over the trailing window, applied as the run goes.
    #[default]
    Online,
    /// A first run measures the mean rate; the second run applies it throughout.
    TwoPass,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(Protocol),
    Many(Vec<Protocol>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<Protocol> {
        match self {
            OneOrMany::One(p) => vec![*p],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_name() -> String {
    "scenario".into()
}
fn default_routers() -> OneOrMany {
    OneOrMany::Many(Protocol::ALL.to_vec())
}
fn default_seeds() -> Vec<u64> {
    (1..=20).collect()
}

/// One experiment. Times are in seconds, distances in meters, sizes in bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub nodes: usize,
    #[serde(default)]
    pub world_width: f64,
    #[serde(default)]
    pub world_height: f64,
    #[serde(default)]
    pub mobility: MobilityModel,
    #[serde(default = "d::min_speed")]
    pub min_speed: f64,
    #[serde(default = "d::max_speed")]
    pub max_speed: f64,
    #[serde(default = "d::wait_time")]
    pub wait_time: f64,
    /// Contact trace, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_staff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tour_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accordion_depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accordion_period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_speed: Option<f64>,
    #[serde(default)]
    pub range: f64,
    #[serde(default = "d::link_speed")]
    pub link_speed: f64,
    #[serde(default = "d::buffer")]
    pub buffer: u64,
    #[serde(default = "d::message_size")]
    pub message_size: u64,
    #[serde(default = "d::message_interval")]
    pub message_interval: f64,
    /// Messages are created during the first `duration` seconds.
    pub duration: f64,
    #[serde(default = "d::cooldown")]
    pub cooldown: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttl: Option<f64>,
    #[serde(default = "default_routers")]
    pub router: OneOrMany,
    #[serde(default = "d::copies")]
    pub copies: u32,
    #[serde(default = "d::d_max")]
    pub d_max: u32,
    #[serde(default = "d::group_period")]
    pub group_period: f64,
    #[serde(default = "d::list_period")]
    pub list_period: f64,
    #[serde(default = "d::staleness")]
    pub staleness: u32,
    #[serde(default)]
    pub snw_mode: SnwMode,
    #[serde(default)]
    pub overhead: OverheadMode,
    #[serde(default = "d::mobility_tick")]
    pub mobility_tick: f64,
    #[serde(default = "d::sample_interval")]
    pub sample_interval: f64,
    /// Check copy conservation after every event (slow).
    #[serde(default)]
    pub audit: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

mod d {
    pub fn min_speed() -> f64 {
        0.5
    }
    pub fn max_speed() -> f64 {
        1.5
    }
    pub fn wait_time() -> f64 {
        2.0
    }
    pub fn link_speed() -> f64 {
        100_000.0
    }
    pub fn buffer() -> u64 {
        100_000_000
    }
    pub fn message_size() -> u64 {
        10_000
    }
    pub fn message_interval() -> f64 {
        1.0
    }
    pub fn cooldown() -> f64 {
        1000.0
    }
    pub fn copies() -> u32 {
        5
    }
    pub fn d_max() -> u32 {
        2
    }
    pub fn group_period() -> f64 {
        0.1
    }
    pub fn list_period() -> f64 {
        2.0
    }
    pub fn staleness() -> u32 {
        3
    }
    pub fn mobility_tick() -> f64 {
        0.1
    }
    pub fn sample_interval() -> f64 {
        1.0
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { key, reason: reason.into() }
}

impl ScenarioConfig {
    /// A minimal RWP scenario with every optional key at its default.
    pub fn rwp(nodes: usize, width: f64, height: f64, range: f64, duration: f64) -> Self {
        let mut s: ScenarioConfig =
            toml::from_str(&format!("nodes = {nodes}\nduration = {duration:?}")).expect("defaults parse");
        s.world_width = width;
        s.world_height = height;
        s.range = range;
        s
    }

    /// A trace-replay scenario with overhead accounting switched off, for scripted runs.
    pub fn for_trace(nodes: usize, duration: f64, cooldown: f64) -> Self {
        let mut s = Self::rwp(nodes, 1.0, 1.0, 1.0, duration);
        s.mobility = MobilityModel::Trace;
        s.cooldown = cooldown;
        s.overhead = OverheadMode::Off;
        s
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: ScenarioConfig = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn protocols(&self) -> Vec<Protocol> {
        self.router.to_vec()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        fn positive(key: &'static str, v: f64) -> Result<(), ScenarioError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {v}")))
            }
        }
        fn non_negative(key: &'static str, v: f64) -> Result<(), ScenarioError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be non-negative, got {v}")))
            }
        }
        if self.nodes < 2 {
            return Err(invalid("nodes", "need at least two nodes"));
        }
        match self.mobility {
            MobilityModel::RandomWaypoint => {
                positive("world_width", self.world_width)?;
                positive("world_height", self.world_height)?;
                positive("min_speed", self.min_speed)?;
                positive("max_speed", self.max_speed)?;
                if self.min_speed > self.max_speed {
                    return Err(invalid("max_speed", "must be at least min_speed"));
                }
                non_negative("wait_time", self.wait_time)?;
                positive("range", self.range)?;
            }
            MobilityModel::Group => {
                let p = self.group_params()?;
                if p.node_count() != self.nodes {
                    return Err(invalid(
                        "nodes",
                        format!("group mobility places {} nodes", p.node_count()),
                    ));
                }
                positive("range", self.range)?;
            }
            MobilityModel::Trace => {
                if self.trace.is_none() {
                    return Err(invalid("trace", "required when mobility = \"trace\""));
                }
            }
        }
        positive("link_speed", self.link_speed)?;
        if self.buffer == 0 {
            return Err(invalid("buffer", "must be positive"));
        }
        if self.message_size == 0 {
            return Err(invalid("message_size", "must be positive"));
        }
        if self.message_size > self.buffer {
            return Err(invalid("message_size", "larger than the buffer"));
        }
        positive("message_interval", self.message_interval)?;
        positive("duration", self.duration)?;
        non_negative("cooldown", self.cooldown)?;
        if let Some(ttl) = self.ttl {
            positive("ttl", ttl)?;
        }
        if self.protocols().is_empty() {
            return Err(invalid("router", "no routers listed"));
        }
        if self.copies == 0 {
            return Err(invalid("copies", "must be positive"));
        }
        positive("group_period", self.group_period)?;
        positive("list_period", self.list_period)?;
        if self.staleness == 0 {
            return Err(invalid("staleness", "must be positive"));
        }
        positive("mobility_tick", self.mobility_tick)?;
        positive("sample_interval", self.sample_interval)?;
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must not be empty"));
        }
        Ok(())
    }

    pub fn world(&self) -> WorldSize {
        match self.mobility {
            MobilityModel::Group => self.group_params().map(|p| p.world()).unwrap_or(WorldSize { width: 0.0, height: 0.0 }),
            _ => WorldSize { width: self.world_width, height: self.world_height },
        }
    }

    pub fn rwp_params(&self) -> RwpParams {
        RwpParams { min_speed: self.min_speed, max_speed: self.max_speed, wait_time: self.wait_time }
    }

    pub fn group_params(&self) -> Result<GroupMobilityParams, ScenarioError> {
        fn need<T: Copy>(key: &'static str, v: Option<T>) -> Result<T, ScenarioError> {
            v.ok_or_else(|| invalid(key, "required when mobility = \"group\""))
        }
        let p = GroupMobilityParams {
            groups: need("group_count", self.group_count)?,
            group_size: need("group_size", self.group_size)?,
            staff: self.group_staff.unwrap_or(0),
            spread: need("group_spread", self.group_spread)?,
            track_radius: need("track_radius", self.track_radius)?,
            tour_speed: need("tour_speed", self.tour_speed)?,
            spacing: need("group_spacing", self.group_spacing)?,
            accordion_depth: self.accordion_depth.unwrap_or(0.0),
            accordion_period: self.accordion_period.unwrap_or(0.0),
            jitter_speed: self.jitter_speed.unwrap_or(0.0),
        };
        if p.groups == 0 || p.group_size == 0 {
            return Err(invalid("group_count", "groups must be non-empty"));
        }
        if !(0.0..=1.0).contains(&p.accordion_depth) {
            return Err(invalid("accordion_depth", "must lie in [0, 1]"));
        }
        if p.spread < 0.0 || p.track_radius <= 0.0 || p.tour_speed < 0.0 || p.spacing < 0.0 {
            return Err(invalid("group_spread", "group geometry must be non-negative"));
        }
        Ok(p)
    }

    pub fn group_config(&self) -> GroupConfig {
        GroupConfig {
            d_max: self.d_max,
            broadcast_period: SimTime::from_secs_f64(self.group_period),
            staleness_horizon: self.staleness,
        }
    }

    pub fn hymad_config(&self) -> HymadConfig {
        HymadConfig {
            group: self.group_config(),
            list_period: SimTime::from_secs_f64(self.list_period),
            list_staleness: self.staleness,
            buffer: self.buffer,
        }
    }

    pub fn horizon(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration)
    }

    pub fn end(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration + self.cooldown)
    }
}

/// Reads and validates a scenario; a relative `trace` is resolved against the file's directory.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    let mut s = ScenarioConfig::from_toml(&text)?;
    if let Some(t) = &s.trace {
        if t.is_relative() {
            s.trace = Some(path.parent().unwrap_or(Path::new(".")).join(t));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULT: &str = "
name = \"default\"
nodes = 30
world_width = 4000.0
world_height = 4000.0
range = 700.0
duration = 1000.0
";

    #[test]
    fn defaults_fill_in() {
        let s = ScenarioConfig::from_toml(DEFAULT).unwrap();
        assert_eq!(s.cooldown, 1000.0);
        assert_eq!((s.copies, s.d_max), (5, 2));
        assert_eq!(s.message_size, 10_000);
        assert_eq!(s.link_speed, 100_000.0);
        assert_eq!(s.seeds.len(), 20);
        assert_eq!(s.protocols(), Protocol::ALL.to_vec());
        assert_eq!(s.end(), SimTime::from_secs(2000));
        assert_eq!(s.hymad_config().group.broadcast_period, SimTime::from_millis(100));
    }

    #[test]
    fn errors_name_the_key() {
        let e = ScenarioConfig::from_toml(&format!("{DEFAULT}min_speed = -1.0")).unwrap_err();
        assert!(e.to_string().contains("min_speed"), "{e}");
        let e = ScenarioConfig::from_toml(&format!("{DEFAULT}colour = 3")).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = ScenarioConfig::from_toml("nodes = 30").unwrap_err();
        assert!(e.to_string().contains("duration"), "{e}");
        let e = ScenarioConfig::from_toml(&format!("{DEFAULT}copies = \"five\"")).unwrap_err();
        assert!(e.to_string().contains("copies"), "{e}");
        let e = ScenarioConfig::from_toml(&format!("{DEFAULT}seeds = []")).unwrap_err();
        assert!(e.to_string().contains("seeds"), "{e}");
    }

    #[test]
    fn single_router_or_list() {
        let s = ScenarioConfig::from_toml(&format!("{DEFAULT}router = \"hymad\"")).unwrap();
        assert_eq!(s.protocols(), vec![Protocol::Hymad]);
        let s = ScenarioConfig::from_toml(&format!("{DEFAULT}router = [\"epidemic\", \"spray_and_wait\"]")).unwrap();
        assert_eq!(s.protocols(), vec![Protocol::Epidemic, Protocol::SprayAndWait]);
    }

    #[test]
    fn round_trip() {
        let s = ScenarioConfig::from_toml(&format!("{DEFAULT}ttl = 300.0\nsnw_mode = \"source\"")).unwrap();
        let again = ScenarioConfig::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn group_mobility_needs_its_keys() {
        let text = "nodes = 62\nduration = 100.0\nmobility = \"group\"\nrange = 50.0\ngroup_count = 6\ngroup_size = 10";
        let e = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(e.to_string().contains("group_spread"), "{e}");
    }
}
