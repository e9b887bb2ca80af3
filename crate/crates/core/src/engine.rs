//! Deterministic discrete-event kernel.
//!
//! Events fire in `(fire_time, sequence)` order, where `sequence` is the
//! insertion counter. Random numbers come from named streams derived from
//! the master seed, so adding draws to one stream never shifts another.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{self, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("cannot schedule at {fire_time} ns, clock is already at {now} ns")]
    SchedulingInPast { fire_time: Nanos, now: Nanos },
}

/// Identifier of a scheduled event; equal to its sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

/// What a payload contributes to the event log.
pub trait EventPayload {
    fn kind(&self) -> &'static str;
    fn subject(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_time: Nanos,
    pub sequence: u64,
    pub payload: P,
}

struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl<P> Eq for Queued<P> {}
impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Queued<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}
impl<P> Queued<P> {
    fn key(&self) -> (Nanos, u64) {
        (self.0.fire_time, self.0.sequence)
    }
}

/// One processed event, as written to the tab-separated event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub time: Nanos,
    pub sequence: u64,
    pub kind: &'static str,
    pub subject: String,
}

impl LogEntry {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.time, self.sequence, self.kind, self.subject)
    }
}

pub fn write_event_log<W: Write>(mut w: W, entries: &[LogEntry]) -> io::Result<()> {
    for e in entries {
        writeln!(w, "{}\t{}\t{}\t{}", e.time, e.sequence, e.kind, e.subject)?;
    }
    Ok(())
}

pub struct Engine<P> {
    now: Nanos,
    next_sequence: u64,
    queue: BinaryHeap<Reverse<Queued<P>>>,
    seed: u64,
    log: Option<Vec<LogEntry>>,
}

impl<P: EventPayload> Engine<P> {
    pub fn new(seed: u64) -> Self {
        Self { now: 0, next_sequence: 0, queue: BinaryHeap::new(), seed, log: None }
    }

    /// Record every processed event.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn now(&self) -> Nanos {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, payload: P, fire_time: Nanos) -> Result<EventId, EngineError> {
        if fire_time < self.now {
            return Err(EngineError::SchedulingInPast { fire_time, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Reverse(Queued(Event { fire_time, sequence, payload })));
        Ok(EventId(sequence))
    }

    /// Schedule `delay` after the current clock. Never fails.
    pub fn schedule_in(&mut self, payload: P, delay: Nanos) -> EventId {
        let at = self.now.saturating_add(delay);
        self.schedule(payload, at).expect("relative schedule cannot be in the past")
    }

    fn pop_due(&mut self, t_end: Nanos) -> Option<Event<P>> {
        match self.queue.peek() {
            Some(Reverse(q)) if q.0.fire_time <= t_end => {}
            _ => return None,
        }
        let Reverse(Queued(ev)) = self.queue.pop()?;
        self.now = ev.fire_time;
        if let Some(log) = self.log.as_mut() {
            log.push(LogEntry {
                time: ev.fire_time,
                sequence: ev.sequence,
                kind: ev.payload.kind(),
                subject: ev.payload.subject(),
            });
        }
        Some(ev)
    }

    /// Process every event with `fire_time <= t_end`, including events the
    /// handler schedules along the way. Returns the number processed.
    pub fn run_until<F>(&mut self, t_end: Nanos, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, Event<P>),
    {
        let mut processed = 0;
        while let Some(ev) = self.pop_due(t_end) {
            handler(self, ev);
            processed += 1;
        }
        processed
    }

    /// Like [`run_until`](Self::run_until) but stops at the first handler
    /// error.
    pub fn try_run_until<F, E>(&mut self, t_end: Nanos, mut handler: F) -> Result<u64, E>
    where
        F: FnMut(&mut Self, Event<P>) -> Result<(), E>,
    {
        let mut processed = 0;
        while let Some(ev) = self.pop_due(t_end) {
            handler(self, ev)?;
            processed += 1;
        }
        Ok(processed)
    }

    pub fn rng_stream(&self, name: &str) -> RngStream {
        RngStream::derive(self.seed, name)
    }

    pub fn event_log(&self) -> Option<&[LogEntry]> {
        self.log.as_deref()
    }

    pub fn take_event_log(&mut self) -> Option<Vec<LogEntry>> {
        self.log.take()
    }
}

/// A named random stream. The generator state is the SHA-256 of the master
/// seed (little-endian) followed by the stream name, fed to ChaCha8.
#[derive(Debug, Clone)]
pub struct RngStream {
    name: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn derive(seed: u64, name: &str) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(name.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        Self { name: name.to_string(), rng: ChaCha8Rng::from_seed(key) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`; `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Lemire's widening multiply with rejection.
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.rng.next_u64();
            let m = (x as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Exponential draw with the given mean, rounded to whole nanoseconds.
    pub fn exponential_ns(&mut self, mean_ns: f64) -> Nanos {
        let u = 1.0 - self.next_f64(); // (0, 1]
        (-u.ln() * mean_ns).round() as Nanos
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
