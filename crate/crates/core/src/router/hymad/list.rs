use std::collections::BTreeMap;

use crate::message::MessageId;
use crate::topology::NodeId;

/// Bits charged per Messages-in-group entry.
pub const LIST_ENTRY_BITS: u64 = 128;

/// Copies a border node sends out of a group holding `n_c` copies with `n_b` border nodes.
pub fn copies_to_forward(n_c: u32, n_b: u32) -> u32 {
    n_c.div_ceil(n_b + 1).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ListEntry {
    pub msg: MessageId,
    pub dst: NodeId,
    pub custodian: NodeId,
    pub copies: u32,
}

/// The Messages-in-group list one node broadcasts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MessagesList {
    pub sender: NodeId,
    pub entries: Vec<ListEntry>,
}

impl MessagesList {
    pub fn size_bits(&self) -> u64 {
        LIST_ENTRY_BITS * self.entries.len() as u64
    }

    pub fn has(&self, msg: MessageId) -> bool {
        self.entries.iter().any(|e| e.msg == msg)
    }

    pub fn by_custodian(&self, custodian: NodeId) -> impl Iterator<Item = &ListEntry> {
        self.entries.iter().filter(move |e| e.custodian == custodian)
    }

    /// Per-message totals and custodians.
    pub fn summary(&self) -> BTreeMap<MessageId, MessageSummary> {
        let mut out: BTreeMap<MessageId, MessageSummary> = BTreeMap::new();
        for e in &self.entries {
            let s = out.entry(e.msg).or_insert(MessageSummary { dst: e.dst, total: 0, custodians: Vec::new() });
            s.total += e.copies;
            s.custodians.push((e.custodian, e.copies));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageSummary {
    pub dst: NodeId,
    pub total: u32,
    pub custodians: Vec<(NodeId, u32)>,
}
