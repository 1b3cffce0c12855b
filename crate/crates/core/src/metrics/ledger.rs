use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Every control record is rounded up to this many bits.
pub const RECORD_BITS: u64 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OverheadKind {
    GroupAlgorithm,
    MessagesList,
    CopyRequest,
    ReduceCopies,
}

impl OverheadKind {
    pub const ALL: [OverheadKind; 4] =
        [OverheadKind::GroupAlgorithm, OverheadKind::MessagesList, OverheadKind::CopyRequest, OverheadKind::ReduceCopies];

    pub fn as_str(self) -> &'static str {
        match self {
            OverheadKind::GroupAlgorithm => "group_algorithm",
            OverheadKind::MessagesList => "messages_list",
            OverheadKind::CopyRequest => "copy_request",
            OverheadKind::ReduceCopies => "reduce_copies",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OverheadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OverheadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OverheadKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown overhead kind {s:?}"))
    }
}

/// Cumulative control-traffic bits, normalized by integrated live-link time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadLedger {
    bits: [u64; 4],
    emissions: [u64; 4],
    link_ms: u128,
}

impl OverheadLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges one emission carrying `records` 128-bit records.
    pub fn charge(&mut self, kind: OverheadKind, records: u64) {
        self.bits[kind.index()] += RECORD_BITS * records;
        self.emissions[kind.index()] += 1;
    }

    pub fn charge_group_message(&mut self, members: usize) {
        self.charge(OverheadKind::GroupAlgorithm, members as u64);
    }

    pub fn charge_messages_list(&mut self, entries: usize) {
        self.charge(OverheadKind::MessagesList, entries as u64);
    }

    pub fn charge_copy_request(&mut self) {
        self.charge(OverheadKind::CopyRequest, 1);
    }

    /// A reduce request and its acknowledgement are charged separately.
    pub fn charge_reduce(&mut self) {
        self.charge(OverheadKind::ReduceCopies, 1);
    }

    pub fn bits(&self, kind: OverheadKind) -> u64 {
        self.bits[kind.index()]
    }

    pub fn emissions(&self, kind: OverheadKind) -> u64 {
        self.emissions[kind.index()]
    }

    pub fn total_bits(&self) -> u64 {
        self.bits.iter().sum()
    }

    /// Accumulates `links` live links held for `dt`.
    pub fn add_link_time(&mut self, links: usize, dt: SimTime) {
        self.link_ms += links as u128 * dt.as_millis() as u128;
    }

    pub fn link_seconds(&self) -> f64 {
        self.link_ms as f64 / 1000.0
    }

    /// Bits per live link per second; 0 when no link was ever up.
    pub fn per_link_per_s(&self, kind: OverheadKind) -> f64 {
        if self.link_ms == 0 {
            0.0
        } else {
            self.bits(kind) as f64 / self.link_seconds()
        }
    }

    pub fn total_per_link_per_s(&self) -> f64 {
        OverheadKind::ALL.iter().map(|k| self.per_link_per_s(*k)).sum()
    }

    pub fn merge(&mut self, other: &OverheadLedger) {
        for i in 0..4 {
            self.bits[i] += other.bits[i];
            self.emissions[i] += other.emissions[i];
        }
        self.link_ms += other.link_ms;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_formulas() {
        let mut l = OverheadLedger::new();
        l.charge_group_message(5);
        assert_eq!(l.bits(OverheadKind::GroupAlgorithm), 640);
        l.charge_copy_request();
        assert_eq!(l.bits(OverheadKind::CopyRequest), 128);
        l.charge_messages_list(0);
        assert_eq!(l.bits(OverheadKind::MessagesList), 0);
        assert_eq!(l.emissions(OverheadKind::MessagesList), 1);
        l.charge_messages_list(12);
        assert_eq!(l.bits(OverheadKind::MessagesList), 1536);
        l.charge_reduce();
        l.charge_reduce();
        assert_eq!(l.bits(OverheadKind::ReduceCopies), 256);
        assert_eq!(l.total_bits(), 640 + 128 + 1536 + 256);
    }

    #[test]
    fn normalization_by_link_time() {
        let mut l = OverheadLedger::new();
        assert_eq!(l.per_link_per_s(OverheadKind::GroupAlgorithm), 0.0);
        l.charge_group_message(10);
        l.add_link_time(2, SimTime::from_secs(5));
        assert!((l.per_link_per_s(OverheadKind::GroupAlgorithm) - 128.0).abs() < 1e-12);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in OverheadKind::ALL {
            assert_eq!(k.as_str().parse::<OverheadKind>(), Ok(k));
        }
    }
}
