//! Delivery, delay, overhead and dynamics measurements.

mod churn;
mod ledger;
mod stats;

pub use churn::{churn_series, group_churn, smooth};
pub use ledger::{OverheadKind, OverheadLedger, RECORD_BITS};
pub use stats::{coefficient_of_variation, delivery_cdf, mean, mean_ci, mean_delay_ci, ratio_at};

use serde::{Deserialize, Serialize};

use crate::message::MessageId;
use crate::time::SimTime;
use crate::topology::NodeId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub id: MessageId,
    pub src: NodeId,
    pub dst: NodeId,
    pub created_at: SimTime,
    pub delivered_at: Option<SimTime>,
    pub hops: Option<u32>,
    pub copies_at_end: u32,
}

impl MessageRecord {
    pub fn delay(&self) -> Option<SimTime> {
        self.delivered_at.map(|t| t - self.created_at)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSample {
    pub t: SimTime,
    pub avg_degree: f64,
    pub components: usize,
    /// Link up and down events since the previous sample.
    pub link_churn: u32,
    /// Group joins and leaves since the previous sample.
    pub group_churn: u32,
}

/// Everything measured during one (protocol, seed) run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub protocol: String,
    pub seed: u64,
    pub messages: Vec<MessageRecord>,
    pub ledger: OverheadLedger,
    pub dynamics: Vec<DynamicsSample>,
    pub dropped_buffer_full: u64,
    pub duplicate_deliveries: u64,
    pub malformed_entries: u64,
    pub data_transfers: u64,
    pub aborted_transfers: u64,
    pub audits: u64,
    pub conservation_violations: u64,
    /// Checksums of the mobility and message-generation draws, for pairing runs.
    pub stream_checksums: (u64, u64),
}

impl RunMetrics {
    pub fn created(&self) -> usize {
        self.messages.len()
    }

    pub fn delivered(&self) -> usize {
        self.messages.iter().filter(|m| m.delivered_at.is_some()).count()
    }

    pub fn delivery_ratio(&self) -> f64 {
        if self.messages.is_empty() {
            0.0
        } else {
            self.delivered() as f64 / self.created() as f64
        }
    }

    pub fn delays(&self) -> Vec<Option<SimTime>> {
        self.messages.iter().map(|m| m.delay()).collect()
    }

    pub fn delivered_delays(&self) -> Vec<SimTime> {
        self.messages.iter().filter_map(|m| m.delay()).collect()
    }

    /// Mean delay of delivered messages in seconds.
    pub fn mean_delay(&self) -> Option<f64> {
        let d = self.delivered_delays();
        if d.is_empty() {
            None
        } else {
            Some(d.iter().map(|x| x.as_secs_f64()).sum::<f64>() / d.len() as f64)
        }
    }

    pub fn cdf(&self, bucket: SimTime, horizon: SimTime) -> Vec<(SimTime, f64)> {
        delivery_cdf(&self.delays(), bucket, horizon)
    }

    pub fn ratio_at(&self, t: SimTime) -> f64 {
        ratio_at(&self.delays(), t)
    }
}
