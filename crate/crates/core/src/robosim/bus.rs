//! Publish-subscribe message bus with constant-delay topic interception.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    /// Noisy pose: position in millimetres, heading as a unit vector scaled by 1000.
    Odom { x_mm: i64, y_mm: i64, cos_milli: i64, sin_milli: i64 },
    /// Velocity command in mm/s and mrad/s.
    CmdVel { v_mm_s: i64, w_mrad_s: i64 },
    Goal { index: i64, x_mm: i64, y_mm: i64, count: i64 },
    GoalRequest { index: i64 },
}

impl Payload {
    pub fn type_tag(&self) -> &'static str {
        match self {
            Payload::Odom { .. } => "Odometry",
            Payload::CmdVel { .. } => "Twist",
            Payload::Goal { .. } => "Waypoint",
            Payload::GoalRequest { .. } => "WaypointRequest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub name: String,
    pub type_tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusMessage {
    pub topic: String,
    pub publish_time: SimTime,
    pub deliver_time: SimTime,
    pub payload: Payload,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("topic `{0}` is already declared")]
    DuplicateTopic(String),
    #[error("topic `{0}` is already intercepted")]
    AlreadyIntercepted(String),
    #[error("payload type {found} does not match topic `{topic}` ({expected})")]
    TypeMismatch {
        topic: String,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone)]
struct TopicEntry {
    type_tag: String,
    publishers: Vec<String>,
    subscribers: Vec<String>,
}

#[derive(Debug, Clone)]
struct Relay {
    target: String,
    delay: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Queued {
    deliver_time: SimTime,
    seq: u64,
    message: BusMessage,
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.deliver_time, self.seq).cmp(&(other.deliver_time, other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Messages are delivered in `(deliver_time, publish sequence)` order, so
/// every topic is FIFO under any constant delay.
#[derive(Debug, Clone, Default)]
pub struct Bus {
    topics: BTreeMap<String, TopicEntry>,
    /// Publisher-side renames: original topic -> intercepted topic.
    renames: BTreeMap<String, String>,
    /// Delay nodes keyed by the topic they listen on.
    relays: BTreeMap<String, Relay>,
    queue: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(
        &mut self,
        name: &str,
        type_tag: &str,
        publishers: &[&str],
        subscribers: &[&str],
    ) -> Result<(), BusError> {
        if self.topics.contains_key(name) {
            return Err(BusError::DuplicateTopic(name.to_string()));
        }
        self.topics.insert(
            name.to_string(),
            TopicEntry {
                type_tag: type_tag.to_string(),
                publishers: publishers.iter().map(|s| s.to_string()).collect(),
                subscribers: subscribers.iter().map(|s| s.to_string()).collect(),
            },
        );
        Ok(())
    }

    pub fn topics(&self) -> Vec<Topic> {
        self.topics
            .iter()
            .map(|(name, e)| Topic {
                name: name.clone(),
                type_tag: e.type_tag.clone(),
            })
            .collect()
    }

    /// Rewires the publishers of `topic` to `<topic>_intercepted` and adds a
    /// delay node that republishes every message on `topic` after `delay`.
    pub fn intercept_topic(&mut self, topic: &str, delay: SimTime) -> Result<(), BusError> {
        let entry = self
            .topics
            .get_mut(topic)
            .ok_or_else(|| BusError::UnknownTopic(topic.to_string()))?;
        if self.renames.contains_key(topic) {
            return Err(BusError::AlreadyIntercepted(topic.to_string()));
        }
        let intercepted = format!("{topic}_intercepted");
        let node = format!("delay{}", topic.replace('/', "_"));
        let publishers = std::mem::replace(&mut entry.publishers, vec![node.clone()]);
        let type_tag = entry.type_tag.clone();
        self.topics.insert(
            intercepted.clone(),
            TopicEntry {
                type_tag,
                publishers,
                subscribers: vec![node],
            },
        );
        self.renames.insert(topic.to_string(), intercepted.clone());
        self.relays.insert(
            intercepted,
            Relay {
                target: topic.to_string(),
                delay,
            },
        );
        Ok(())
    }

    /// Publishes with zero transport latency. Publishers of an intercepted
    /// topic land on its `_intercepted` twin.
    pub fn publish(&mut self, topic: &str, now: SimTime, payload: Payload) -> Result<(), BusError> {
        let physical = self.renames.get(topic).map(String::as_str).unwrap_or(topic);
        let entry = self
            .topics
            .get(physical)
            .ok_or_else(|| BusError::UnknownTopic(topic.to_string()))?;
        if entry.type_tag != payload.type_tag() {
            return Err(BusError::TypeMismatch {
                topic: topic.to_string(),
                expected: entry.type_tag.clone(),
                found: payload.type_tag().to_string(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued {
            deliver_time: now,
            seq,
            message: BusMessage {
                topic: physical.to_string(),
                publish_time: now,
                deliver_time: now,
                payload,
            },
        }));
        Ok(())
    }

    pub fn next_delivery(&self) -> Option<SimTime> {
        self.queue.peek().map(|Reverse(q)| q.deliver_time)
    }

    /// Pops the next message due at or before `now` for an ordinary
    /// subscriber. Messages reaching a delay node are republished on their
    /// original topic and keep their sequence number, so a zero delay
    /// reproduces the uninterrupted delivery order.
    pub fn pop_due(&mut self, now: SimTime) -> Option<BusMessage> {
        loop {
            if self.next_delivery()? > now {
                return None;
            }
            let Reverse(q) = self.queue.pop().expect("peeked");
            match self.relays.get(&q.message.topic) {
                Some(relay) => {
                    let deliver_time = q.deliver_time + relay.delay;
                    self.queue.push(Reverse(Queued {
                        deliver_time,
                        seq: q.seq,
                        message: BusMessage {
                            topic: relay.target.clone(),
                            publish_time: q.deliver_time,
                            deliver_time,
                            payload: q.message.payload,
                        },
                    }));
                }
                None => return Some(q.message),
            }
        }
    }

    /// `publisher -> topic -> subscribers`, one line per topic.
    pub fn topology(&self) -> String {
        let mut out = String::new();
        for (name, e) in &self.topics {
            let _ = writeln!(
                out,
                "{} -> {} -> {}",
                e.publishers.join(","),
                name,
                e.subscribers.join(",")
            );
        }
        out
    }
}
