//! Discrete-event scheduler on a virtual millisecond clock.
//!
//! Events are delivered in `(fire_at, seq)` order, where `seq` is the
//! insertion sequence number, so equal-time events come out FIFO and a run is
//! fully determined by the sequence of `schedule` / `cancel` calls.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{SimDuration, VirtualTime};

/// Default cap on delivered events per run.
pub const DEFAULT_EVENT_CAP: u64 = 1_000_000;

/// Identifies one conversation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        SessionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SessionId {
    fn from(s: &str) -> Self {
        SessionId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventId(u64);

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledEvent<M> {
    pub id: EventId,
    pub fire_at: VirtualTime,
    pub session: SessionId,
    pub payload: M,
    pub seq: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("livelock: more than {cap} events delivered (clock at {at})")]
    Livelock { cap: u64, at: VirtualTime },
}

struct Pending<M> {
    fire_at: VirtualTime,
    session: SessionId,
    payload: M,
}

pub struct Scheduler<M> {
    now: VirtualTime,
    queue: BinaryHeap<Reverse<(VirtualTime, u64)>>,
    pending: HashMap<u64, Pending<M>>,
    next_seq: u64,
    delivered: u64,
    cap: u64,
}

impl<M> Default for Scheduler<M> {
    fn default() -> Self {
        Self::new()
    }
}

impl<M> Scheduler<M> {
    pub fn new() -> Self {
        Self::with_cap(DEFAULT_EVENT_CAP)
    }

    pub fn with_cap(cap: u64) -> Self {
        Scheduler {
            now: VirtualTime::ZERO,
            queue: BinaryHeap::new(),
            pending: HashMap::new(),
            next_seq: 0,
            delivered: 0,
            cap,
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.now
    }

    /// Number of events delivered so far.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn is_idle(&self) -> bool {
        self.pending.is_empty()
    }

    /// Schedules `payload` to fire `delay` after the current clock value.
    pub fn schedule(&mut self, payload: M, delay: SimDuration, session: SessionId) -> EventId {
        self.schedule_at(payload, self.now + delay, session)
    }

    /// Schedules at an absolute time. Times in the past are clamped to now,
    /// which keeps the clock monotone.
    pub fn schedule_at(&mut self, payload: M, at: VirtualTime, session: SessionId) -> EventId {
        let fire_at = at.max(self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse((fire_at, seq)));
        self.pending.insert(
            seq,
            Pending {
                fire_at,
                session,
                payload,
            },
        );
        EventId(seq)
    }

    /// Returns true iff the event existed and had not yet fired.
    pub fn cancel(&mut self, id: EventId) -> bool {
        // The heap entry stays behind and is skipped on pop.
        self.pending.remove(&id.0).is_some()
    }

    /// Fire time of a still-pending event.
    pub fn fire_time(&self, id: EventId) -> Option<VirtualTime> {
        self.pending.get(&id.0).map(|p| p.fire_at)
    }

    /// Removes the next live event and advances the clock to it.
    pub fn pop(&mut self) -> Result<Option<ScheduledEvent<M>>, EventError> {
        while let Some(Reverse((fire_at, seq))) = self.queue.pop() {
            let Some(p) = self.pending.remove(&seq) else {
                continue;
            };
            if self.delivered >= self.cap {
                return Err(EventError::Livelock {
                    cap: self.cap,
                    at: self.now,
                });
            }
            debug_assert!(fire_at >= self.now);
            self.now = fire_at;
            self.delivered += 1;
            return Ok(Some(ScheduledEvent {
                id: EventId(seq),
                fire_at,
                session: p.session,
                payload: p.payload,
                seq,
            }));
        }
        Ok(None)
    }

    /// Delivers events to `handler` until the queue is empty and returns the
    /// final clock value. The handler may schedule and cancel further events.
    pub fn run_until_idle<F>(&mut self, mut handler: F) -> Result<VirtualTime, EventError>
    where
        F: FnMut(&mut Scheduler<M>, ScheduledEvent<M>),
    {
        while let Some(ev) = self.pop()? {
            handler(self, ev);
        }
        Ok(self.now)
    }
}
