//! Diameter-constrained self-stabilizing groups.
//!
//! Every node periodically broadcasts an enhanced distance vector listing its
//! group members with hop distance, priority, border flag, next hop and a
//! freshness stamp. A node's group view is recomputed from the latest vectors
//! of the neighbors that list it. Two checks keep the group diameter bounded:
//!
//! * own distance: a member farther than `d_max` hops conflicts with us;
//! * admission: a newly seen member `x` conflicts with an existing member `m`
//!   when the best available estimate of `dist(m, x)` exceeds `d_max`. The
//!   estimate is the through-me bound `d(m) + d(x)`, tightened by any
//!   neighbor vector that lists both.
//!
//! Conflicts are resolved by dropping the lowest-priority node involved, one
//! at a time. Dropping ourselves resets us to a singleton.

mod rounds;

pub use rounds::SyncHarness;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;
use crate::topology::NodeId;

/// Bits charged per vector entry.
pub const ENTRY_BITS: u64 = 128;

/// Smaller is higher priority: earlier join time, then smaller node id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Priority {
    pub joined_at: SimTime,
    pub node: NodeId,
}

impl Priority {
    pub fn outranks(&self, other: &Priority) -> bool {
        self < other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub d_max: u32,
    pub broadcast_period: SimTime,
    /// In broadcast periods.
    pub staleness_horizon: u32,
}

impl Default for GroupConfig {
    fn default() -> Self {
        GroupConfig {
            d_max: 2,
            broadcast_period: SimTime::from_millis(100),
            staleness_horizon: 3,
        }
    }
}

impl GroupConfig {
    /// How long an admission rejection is upheld while the rest of the group keeps offering the node.
    fn admission_grace(&self) -> SimTime {
        SimTime(self.broadcast_period.0 * (self.d_max + 2) as u64)
    }

    fn neighbor_horizon(&self) -> SimTime {
        SimTime(self.broadcast_period.0 * self.staleness_horizon as u64)
    }

    /// Relayed entries may legitimately lag by one period per hop.
    fn entry_horizon(&self) -> SimTime {
        SimTime(self.broadcast_period.0 * (self.staleness_horizon + self.d_max) as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub member: NodeId,
    pub distance: u32,
    pub priority: Priority,
    pub border: bool,
    pub next_hop: NodeId,
    pub stamp: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAlgorithmMessage {
    pub sender: NodeId,
    pub entries: Vec<VectorEntry>,
}

impl GroupAlgorithmMessage {
    pub fn size_bits(&self) -> u64 {
        ENTRY_BITS * self.entries.len() as u64
    }

    pub fn lists(&self, node: NodeId) -> bool {
        self.entry(node).is_some()
    }

    pub fn entry(&self, node: NodeId) -> Option<&VectorEntry> {
        self.entries.iter().find(|e| e.member == node)
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|e| e.member)
    }

    /// `(member, distance)` pairs, the compact form used in traces and tests.
    pub fn distances(&self) -> Vec<(NodeId, u32)> {
        self.entries.iter().map(|e| (e.member, e.distance)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupEntry {
    pub member: NodeId,
    pub distance: u32,
    pub via: NodeId,
    pub priority: Priority,
    pub border: bool,
    pub last_heard: SimTime,
}

/// A node's view of its group, always containing itself at distance 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupTable {
    owner: NodeId,
    entries: BTreeMap<NodeId, GroupEntry>,
}

impl GroupTable {
    pub fn singleton(owner: NodeId, priority: Priority, now: SimTime) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            owner,
            GroupEntry { member: owner, distance: 0, via: owner, priority, border: false, last_heard: now },
        );
        GroupTable { owner, entries }
    }

    /// Builds a table from `(member, distance)` pairs; convenience for tests and tools.
    pub fn from_distances(owner: NodeId, members: &[(NodeId, u32)]) -> Self {
        let mut t = GroupTable::singleton(owner, Priority { joined_at: SimTime::ZERO, node: owner }, SimTime::ZERO);
        for &(m, d) in members {
            if m != owner {
                t.entries.insert(
                    m,
                    GroupEntry {
                        member: m,
                        distance: d,
                        via: m,
                        priority: Priority { joined_at: SimTime::ZERO, node: m },
                        border: false,
                        last_heard: SimTime::ZERO,
                    },
                );
            }
        }
        t
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn get(&self, member: NodeId) -> Option<&GroupEntry> {
        self.entries.get(&member)
    }

    pub fn contains(&self, member: NodeId) -> bool {
        self.entries.contains_key(&member)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &GroupEntry> {
        self.entries.values()
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    /// Through-me upper bound on the diameter if a member at `candidate_distance` joined.
    pub fn diameter_bound(&self, candidate_distance: u32) -> u32 {
        self.entries.values().map(|e| e.distance + candidate_distance).max().unwrap_or(candidate_distance)
    }
}

pub fn diameter_bound(table: &GroupTable, candidate_distance: u32) -> u32 {
    table.diameter_bound(candidate_distance)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableDelta {
    pub joined: Vec<NodeId>,
    pub left: Vec<NodeId>,
    pub self_excluded: bool,
}

impl TableDelta {
    pub fn is_empty(&self) -> bool {
        self.joined.is_empty() && self.left.is_empty() && !self.self_excluded
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RouteError {
    #[error("node {0} is not in the group")]
    NotMember(NodeId),
    #[error("next hop {0} is no longer a radio neighbor")]
    NoNextHop(NodeId),
}

#[derive(Clone, Debug)]
struct Cached {
    msg: Arc<GroupAlgorithmMessage>,
    received_at: SimTime,
}

#[derive(Clone, Copy, Debug)]
struct PendingJoin {
    via: NodeId,
    broadcasts_since: u32,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    distance: u32,
    via: NodeId,
    priority: Priority,
    border: bool,
    stamp: SimTime,
}

/// Per-node state of the group service.
#[derive(Clone, Debug)]
pub struct GroupNode {
    id: NodeId,
    cfg: GroupConfig,
    joined_at: SimTime,
    table: GroupTable,
    neighbors: BTreeSet<NodeId>,
    cache: BTreeMap<NodeId, Cached>,
    pending: Option<PendingJoin>,
    /// Foreign neighbors we adopt while fusing with their group, with our broadcasts since.
    merging: BTreeMap<NodeId, u32>,
    border: bool,
    malformed: u64,
    /// First time each candidate was turned away by an admission check.
    rejected_since: BTreeMap<NodeId, SimTime>,
}

impl GroupNode {
    pub fn new(id: NodeId, cfg: GroupConfig, now: SimTime) -> Self {
        GroupNode {
            id,
            cfg,
            joined_at: now,
            table: GroupTable::singleton(id, Priority { joined_at: now, node: id }, now),
            neighbors: BTreeSet::new(),
            cache: BTreeMap::new(),
            pending: None,
            merging: BTreeMap::new(),
            border: false,
            malformed: 0,
            rejected_since: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &GroupConfig {
        &self.cfg
    }

    pub fn table(&self) -> &GroupTable {
        &self.table
    }

    pub fn is_singleton(&self) -> bool {
        self.table.len() == 1
    }

    pub fn malformed_entries(&self) -> u64 {
        self.malformed
    }

    pub fn priority(&self, now: SimTime) -> Priority {
        let joined_at = if self.is_singleton() && self.pending.is_none() { now } else { self.joined_at };
        Priority { joined_at, node: self.id }
    }

    pub fn neighbors(&self) -> &BTreeSet<NodeId> {
        &self.neighbors
    }

    pub fn group_members(&self) -> BTreeSet<NodeId> {
        self.table.members().collect()
    }

    pub fn is_member(&self, node: NodeId) -> bool {
        self.table.contains(node)
    }

    pub fn distance_to(&self, node: NodeId) -> Option<u32> {
        self.table.get(node).map(|e| e.distance)
    }

    /// True iff some radio neighbor is outside our group.
    pub fn border_status(&self) -> bool {
        self.border
    }

    /// Members currently flagged as border nodes, ourselves included.
    pub fn border_count(&self) -> usize {
        self.table
            .entries()
            .filter(|e| if e.member == self.id { self.border } else { e.border })
            .count()
    }

    /// Latest group vector heard from a radio neighbor.
    pub fn neighbor_vector(&self, neighbor: NodeId) -> Option<&GroupAlgorithmMessage> {
        self.cache.get(&neighbor).map(|c| c.msg.as_ref())
    }

    pub fn intra_next_hop(&self, target: NodeId) -> Result<NodeId, RouteError> {
        let e = self.table.get(target).ok_or(RouteError::NotMember(target))?;
        if target == self.id {
            return Ok(self.id);
        }
        if self.neighbors.contains(&e.via) {
            Ok(e.via)
        } else {
            Err(RouteError::NoNextHop(e.via))
        }
    }

    pub fn build_group_message(&self, now: SimTime) -> GroupAlgorithmMessage {
        let mut entries: Vec<VectorEntry> = self
            .table
            .entries()
            .map(|e| {
                if e.member == self.id {
                    VectorEntry {
                        member: self.id,
                        distance: 0,
                        priority: self.priority(now),
                        border: self.border,
                        next_hop: self.id,
                        stamp: now,
                    }
                } else {
                    VectorEntry {
                        member: e.member,
                        distance: e.distance,
                        priority: e.priority,
                        border: e.border,
                        next_hop: e.via,
                        stamp: e.last_heard,
                    }
                }
            })
            .collect();
        entries.sort_by_key(|e| (e.distance, e.member));
        GroupAlgorithmMessage { sender: self.id, entries }
    }

    /// Called right after our own broadcast went out.
    pub fn note_broadcast(&mut self) {
        if let Some(p) = &mut self.pending {
            p.broadcasts_since += 1;
        }
        for n in self.merging.values_mut() {
            *n += 1;
        }
    }

    pub fn link_up(&mut self, neighbor: NodeId) {
        if neighbor != self.id {
            self.neighbors.insert(neighbor);
            self.refresh_border();
        }
    }

    pub fn link_down(&mut self, neighbor: NodeId, now: SimTime) -> TableDelta {
        self.neighbors.remove(&neighbor);
        self.cache.remove(&neighbor);
        if self.pending.is_some_and(|p| p.via == neighbor) {
            self.pending = None;
        }
        self.merging.remove(&neighbor);
        self.recompute(now)
    }

    /// Periodic housekeeping before a broadcast: expires stale vectors and recomputes.
    pub fn tick(&mut self, now: SimTime) -> TableDelta {
        let horizon = self.cfg.neighbor_horizon();
        self.cache.retain(|_, c| now.saturating_sub(c.received_at) <= horizon);
        if let Some(p) = self.pending {
            if !self.cache.contains_key(&p.via) && !self.neighbors.contains(&p.via) {
                self.pending = None;
            }
        }
        let (cache, neighbors) = (&self.cache, &self.neighbors);
        self.merging.retain(|v, _| cache.contains_key(v) && neighbors.contains(v));
        self.recompute(now)
    }

    fn sanitize(&mut self, msg: &GroupAlgorithmMessage) -> Option<GroupAlgorithmMessage> {
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(msg.entries.len());
        let mut has_sender = false;
        for e in &msg.entries {
            let ok = seen.insert(e.member)
                && ((e.member == msg.sender) == (e.distance == 0))
                && e.distance <= self.cfg.d_max;
            if ok {
                has_sender |= e.member == msg.sender;
                entries.push(*e);
            } else {
                self.malformed += 1;
            }
        }
        if !has_sender {
            return None;
        }
        Some(GroupAlgorithmMessage { sender: msg.sender, entries })
    }

    pub fn on_group_message(&mut self, now: SimTime, msg: &GroupAlgorithmMessage, from: NodeId) -> TableDelta {
        if from == self.id || !self.neighbors.contains(&from) || msg.sender != from {
            return TableDelta::default();
        }
        let Some(clean) = self.sanitize(msg) else {
            return TableDelta::default();
        };
        let lists_me = clean.lists(self.id);
        self.cache.insert(from, Cached { msg: Arc::new(clean), received_at: now });

        if let Some(p) = self.pending {
            if p.via == from {
                if lists_me || p.broadcasts_since >= 1 {
                    self.pending = None;
                }
            }
        }
        if self.merging.get(&from).is_some_and(|&n| lists_me || n >= 1) {
            self.merging.remove(&from);
        }
        let delta = self.recompute(now);
        if self.is_singleton() && self.pending.is_none() && !lists_me && self.can_join(now, from) {
            self.pending = Some(PendingJoin { via: from, broadcasts_since: 0 });
            self.joined_at = now;
            let mut d2 = self.recompute(now);
            d2.self_excluded |= delta.self_excluded;
            d2.left.extend(delta.left);
            return d2;
        }
        if !self.is_singleton() && self.pending.is_none() && self.merging.is_empty() && !lists_me && !self.table.contains(from) {
            let vias = self.merge_vias(now, from);
            if !vias.is_empty() {
                // keep our join time: the merge must not outrank the members we already have
                self.merging = vias.into_iter().map(|v| (v, 0)).collect();
                let mut d2 = self.recompute(now);
                d2.self_excluded |= delta.self_excluded;
                d2.left.extend(delta.left);
                d2.joined.extend(delta.joined);
                return d2;
            }
        }
        delta
    }

    /// Neighbors through which our group can fuse with the group of `via`.
    ///
    /// Every cross pair must stay within `d_max` on some path through one of those
    /// links; empty when it might not.
    fn merge_vias(&self, now: SimTime, via: NodeId) -> Vec<NodeId> {
        let Some(first) = self.cache.get(&via) else { return Vec::new() };
        let fresh = |m: &GroupAlgorithmMessage| -> Vec<VectorEntry> {
            m.entries.iter().filter(|e| self.entry_fresh(now, e)).copied().collect()
        };
        let theirs = fresh(&first.msg);
        if theirs.len() < 2 {
            return Vec::new();
        }
        let group: BTreeSet<NodeId> = theirs.iter().map(|e| e.member).collect();
        let mut vias = Vec::new();
        let mut reach: BTreeMap<NodeId, u32> = BTreeMap::new();
        for (&w, c) in &self.cache {
            if !self.neighbors.contains(&w) || self.table.contains(w) || c.msg.lists(self.id) || !group.contains(&w) {
                continue;
            }
            let entries = fresh(&c.msg);
            if entries.iter().any(|e| self.table.contains(e.member)) {
                return Vec::new();
            }
            for e in entries.iter().filter(|e| group.contains(&e.member)) {
                let d = reach.entry(e.member).or_insert(u32::MAX);
                *d = (*d).min(e.distance);
            }
            vias.push(w);
        }
        let their_ecc = reach.values().copied().max().unwrap_or(0);
        let my_ecc = self.table.entries().map(|e| e.distance).max().unwrap_or(0);
        if my_ecc + 1 + their_ecc <= self.cfg.d_max {
            vias
        } else {
            Vec::new()
        }
    }

    fn entry_fresh(&self, now: SimTime, e: &VectorEntry) -> bool {
        now.saturating_sub(e.stamp) <= self.cfg.entry_horizon()
    }

    fn can_join(&self, now: SimTime, via: NodeId) -> bool {
        let Some(c) = self.cache.get(&via) else { return false };
        c.msg
            .entries
            .iter()
            .filter(|e| e.next_hop != self.id && self.entry_fresh(now, e))
            .all(|e| e.distance + 1 <= self.cfg.d_max)
    }

    fn refresh_border(&mut self) {
        self.border = self.neighbors.iter().any(|n| !self.table.contains(*n));
    }

    fn become_singleton(&mut self, now: SimTime) {
        self.joined_at = now;
        self.pending = None;
        self.merging.clear();
        self.table = GroupTable::singleton(self.id, Priority { joined_at: now, node: self.id }, now);
    }

    fn recompute(&mut self, now: SimTime) -> TableDelta {
        let before: BTreeSet<NodeId> = self.table.members().collect();
        let was_singleton = before.len() == 1;
        let neighbor_horizon = self.cfg.neighbor_horizon();
        let d_max = self.cfg.d_max;
        let me = self.id;
        let mut excluded: BTreeSet<NodeId> = BTreeSet::new();
        let mut self_excluded = false;
        let mut offered: BTreeSet<NodeId> = BTreeSet::new();
        let mut turned_away: BTreeSet<NodeId> = BTreeSet::new();
        let grace = self.cfg.admission_grace();
        let settled = |x: &NodeId| self.rejected_since.get(x).is_some_and(|t| now.saturating_sub(*t) >= grace);

        let fresh: Vec<(NodeId, Arc<GroupAlgorithmMessage>)> = self
            .cache
            .iter()
            .filter(|(v, c)| self.neighbors.contains(v) && now.saturating_sub(c.received_at) <= neighbor_horizon)
            .map(|(v, c)| (*v, Arc::clone(&c.msg)))
            .collect();

        let result: Option<BTreeMap<NodeId, Candidate>> = loop {
            let pending_via = self.pending.map(|p| p.via);
            let direct: BTreeSet<NodeId> = fresh
                .iter()
                .filter(|(v, m)| !excluded.contains(v) && (m.lists(me) || pending_via == Some(*v) || self.merging.contains_key(v)))
                .map(|(v, _)| *v)
                .collect();
            // once confirmed, a neighbor adjacent to one of our group neighbors counts as one too
            let group_neighbors: Vec<&(NodeId, Arc<GroupAlgorithmMessage>)> = fresh
                .iter()
                .filter(|(v, m)| {
                    direct.contains(v)
                        || (pending_via.is_none()
                            && !excluded.contains(v)
                            && m.entries.iter().any(|e| e.distance == 1 && direct.contains(&e.member)))
                })
                .collect();
            if group_neighbors.is_empty() {
                break None;
            }
            let mut cand: BTreeMap<NodeId, Candidate> = BTreeMap::new();
            for (v, m) in &group_neighbors {
                let own = m.entry(*v).expect("sanitized vectors contain their sender");
                cand.insert(
                    *v,
                    Candidate { distance: 1, via: *v, priority: own.priority, border: own.border, stamp: own.stamp },
                );
            }
            for (v, m) in &group_neighbors {
                for e in &m.entries {
                    if e.member == me || e.member == *v || excluded.contains(&e.member) || e.next_hop == me {
                        continue;
                    }
                    if !self.entry_fresh(now, e) {
                        continue;
                    }
                    let d = e.distance + 1;
                    let better = match cand.get(&e.member) {
                        None => true,
                        Some(c) => d < c.distance || (d == c.distance && *v < c.via),
                    };
                    if better {
                        cand.insert(
                            e.member,
                            Candidate { distance: d, via: *v, priority: e.priority, border: e.border, stamp: e.stamp },
                        );
                    }
                }
            }

            if offered.is_empty() {
                offered.extend(cand.keys().copied());
            }
            // each pair is (member, member, newcomer when the conflict came from an admission)
            type Pair = ((Priority, NodeId), (Priority, NodeId), Option<NodeId>);
            let my_prio = self.priority(now);
            let mut pairs: Vec<Pair> = Vec::new();
            for (x, c) in &cand {
                if c.distance > d_max {
                    pairs.push(((my_prio, me), (c.priority, *x), None));
                }
            }
            let width = cand.keys().next_back().map_or(0, |&x| x as usize + 1);
            let dist: Vec<Vec<u32>> = group_neighbors
                .iter()
                .map(|(_, w)| {
                    let mut d = vec![u32::MAX / 2; width];
                    for e in w.entries.iter().filter(|e| (e.member as usize) < width) {
                        d[e.member as usize] = e.distance;
                    }
                    d
                })
                .collect();
            for (x, cx) in cand.iter().filter(|(x, c)| !before.contains(x) && c.distance <= d_max && !settled(x)) {
                for (m, cm) in cand.iter().filter(|(m, _)| before.contains(m) && *m != x) {
                    let est = dist
                        .iter()
                        .map(|d| d[*m as usize] + d[*x as usize])
                        .fold(cm.distance + cx.distance, u32::min);
                    if est > d_max {
                        pairs.push(((cm.priority, *m), (cx.priority, *x), Some(*x)));
                    }
                }
            }
            // lowest priority = greatest Priority value; dropping a non-neighbor only removes its own entry
            let fresh_neighbor = |v: NodeId| fresh.iter().any(|(n, _)| *n == v);
            let restart = loop {
                let Some((_, victim)) = pairs.iter().flat_map(|(a, b, _)| [*a, *b]).max() else {
                    break false;
                };
                if victim == me {
                    self_excluded = true;
                    break true;
                }
                if pairs.iter().any(|p| p.2 == Some(victim)) {
                    turned_away.insert(victim);
                }
                excluded.insert(victim);
                if fresh_neighbor(victim) {
                    break true;
                }
                cand.remove(&victim);
                pairs.retain(|(a, b, _)| a.1 != victim && b.1 != victim);
            };
            if self_excluded {
                break None;
            }
            if !restart {
                break Some(cand);
            }
        };

        match result {
            None => {
                if self_excluded || !was_singleton {
                    self.become_singleton(now);
                } else if self.pending.is_none() {
                    // still alone: priority tracks the clock
                    self.joined_at = now;
                    self.table = GroupTable::singleton(me, Priority { joined_at: now, node: me }, now);
                }
            }
            Some(cand) => {
                if was_singleton && self.pending.is_none() {
                    self.joined_at = now;
                }
                let mut t = GroupTable::singleton(me, Priority { joined_at: self.joined_at, node: me }, now);
                for (x, c) in cand {
                    t.entries.insert(
                        x,
                        GroupEntry {
                            member: x,
                            distance: c.distance,
                            via: c.via,
                            priority: c.priority,
                            border: c.border,
                            last_heard: c.stamp,
                        },
                    );
                }
                self.table = t;
            }
        }
        self.refresh_border();
        let table = &self.table;
        self.rejected_since.retain(|x, _| offered.contains(x) && !table.contains(*x));
        for x in turned_away {
            self.rejected_since.entry(x).or_insert(now);
        }

        let after: BTreeSet<NodeId> = self.table.members().collect();
        TableDelta {
            joined: after.difference(&before).copied().collect(),
            left: before.difference(&after).copied().collect(),
            self_excluded,
        }
    }
}
