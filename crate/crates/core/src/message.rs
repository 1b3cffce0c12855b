use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;
use crate::topology::NodeId;

pub type MessageId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Bytes.
    pub size: u64,
    pub created_at: SimTime,
    /// `None` is an infinite lifetime.
    pub ttl: Option<SimTime>,
    pub copies: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MessageError {
    #[error("message source and destination are both {0}")]
    SelfAddressed(NodeId),
    #[error("a message needs at least one copy")]
    NoCopies,
    #[error("message size must be positive")]
    Empty,
}

impl Message {
    pub fn new(
        id: MessageId,
        src: NodeId,
        dst: NodeId,
        size: u64,
        created_at: SimTime,
        ttl: Option<SimTime>,
        copies: u32,
    ) -> Result<Self, MessageError> {
        if src == dst {
            return Err(MessageError::SelfAddressed(src));
        }
        if copies == 0 {
            return Err(MessageError::NoCopies);
        }
        if size == 0 {
            return Err(MessageError::Empty);
        }
        Ok(Message { id, src, dst, size, created_at, ttl, copies })
    }

    pub fn expired(&self, now: SimTime) -> bool {
        self.ttl.is_some_and(|ttl| now >= self.created_at + ttl)
    }
}

/// All messages created in a run, indexed by id (ids are dense from 0).
#[derive(Clone, Debug, Default)]
pub struct MessageTable {
    messages: Vec<Message>,
}

impl MessageTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&self) -> MessageId {
        self.messages.len() as MessageId
    }

    pub fn insert(&mut self, m: Message) {
        assert_eq!(m.id, self.next_id(), "message ids must be dense");
        self.messages.push(m);
    }

    pub fn get(&self, id: MessageId) -> &Message {
        &self.messages[id as usize]
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.messages.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants() {
        let t = SimTime::ZERO;
        assert_eq!(Message::new(0, 1, 1, 10, t, None, 5), Err(MessageError::SelfAddressed(1)));
        assert_eq!(Message::new(0, 1, 2, 10, t, None, 0), Err(MessageError::NoCopies));
        assert_eq!(Message::new(0, 1, 2, 0, t, None, 1), Err(MessageError::Empty));
        let m = Message::new(0, 1, 2, 10_000, t, Some(SimTime::from_secs(10)), 5).unwrap();
        assert!(!m.expired(SimTime::from_millis(9_999)));
        assert!(m.expired(SimTime::from_secs(10)));
        let inf = Message { ttl: None, ..m };
        assert!(!inf.expired(SimTime::MAX));
    }
}
