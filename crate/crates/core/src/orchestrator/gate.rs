use std::collections::{BTreeMap, VecDeque};
use std::fmt::Debug;

use thiserror::Error;

use crate::time::{SimDuration, VirtualTime};

pub const DEFAULT_GATE_CAPACITY: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GateError {
    #[error("gate capacity must be positive")]
    ZeroCapacity,
    #[error("request {0} is already admitted or waiting")]
    Duplicate(String),
    #[error("request {0} is not in flight")]
    NotInFlight(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Queued { position: usize },
}

/// A request that left the waiting queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admitted<K> {
    pub key: K,
    pub at: VirtualTime,
    pub queue_wait: SimDuration,
}

/// Bounded admission with a FIFO waiting line. Requests that cannot be
/// admitted are never rejected; they wait.
#[derive(Debug, Clone)]
pub struct ConcurrencyGate<K> {
    capacity: usize,
    waiting: VecDeque<(K, VirtualTime)>,
    in_flight: BTreeMap<K, VirtualTime>,
}

impl<K: Ord + Clone + Debug> ConcurrencyGate<K> {
    pub fn new(capacity: usize) -> Result<Self, GateError> {
        if capacity == 0 {
            return Err(GateError::ZeroCapacity);
        }
        Ok(ConcurrencyGate {
            capacity,
            waiting: VecDeque::new(),
            in_flight: BTreeMap::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }

    pub fn is_in_flight(&self, key: &K) -> bool {
        self.in_flight.contains_key(key)
    }

    pub fn acquire(&mut self, key: K, now: VirtualTime) -> Result<Admission, GateError> {
        if self.in_flight.contains_key(&key) || self.waiting.iter().any(|(k, _)| *k == key) {
            return Err(GateError::Duplicate(format!("{key:?}")));
        }
        if self.in_flight.len() < self.capacity {
            self.in_flight.insert(key, now);
            Ok(Admission::Admitted)
        } else {
            self.waiting.push_back((key, now));
            Ok(Admission::Queued {
                position: self.waiting.len() - 1,
            })
        }
    }

    /// Frees the slot held by `key` and admits the head of the queue, if any.
    pub fn release(&mut self, key: &K, now: VirtualTime) -> Result<Option<Admitted<K>>, GateError> {
        if self.in_flight.remove(key).is_none() {
            return Err(GateError::NotInFlight(format!("{key:?}")));
        }
        Ok(self.admit_next(now))
    }

    /// Removes `key` wherever it is. Returns the request admitted into a
    /// freed slot, if one was freed.
    pub fn withdraw(&mut self, key: &K, now: VirtualTime) -> Option<Admitted<K>> {
        if self.in_flight.contains_key(key) {
            return self.release(key, now).ok().flatten();
        }
        self.waiting.retain(|(k, _)| k != key);
        None
    }

    fn admit_next(&mut self, now: VirtualTime) -> Option<Admitted<K>> {
        if self.in_flight.len() >= self.capacity {
            return None;
        }
        let (key, enqueued) = self.waiting.pop_front()?;
        self.in_flight.insert(key.clone(), now);
        Some(Admitted {
            key,
            at: now,
            queue_wait: now.since(enqueued),
        })
    }
}
