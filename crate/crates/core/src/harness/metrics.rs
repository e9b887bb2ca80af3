use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Nanos, ServiceClass};
use crate::radio::DropReason;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MetricsError {
    #[error("no samples")]
    EmptySamples,
    #[error("percentile fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("no packets of the requested class")]
    NoPackets,
}

/// Rank `⌈p·n⌉` with the product snapped to an integer when it is within
/// floating point noise of one, so that 0.9999 · 10⁴ gives 9999.
fn nearest_rank(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Nearest-rank percentile: the value at 1-based index ⌈p·n⌉ of the
/// ascending sort.
pub fn latency_percentile(samples: &[Nanos], p: f64) -> Result<Nanos, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mut v = samples.to_vec();
    v.sort_unstable();
    percentile_sorted(&v, p)
}

/// As [`latency_percentile`] on an already sorted slice.
pub fn percentile_sorted(sorted: &[Nanos], p: f64) -> Result<Nanos, MetricsError> {
    if sorted.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(MetricsError::BadFraction(p));
    }
    Ok(sorted[nearest_rank(p, sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    /// `value` is the packet size in bytes.
    Sent,
    /// `value` is the one-way latency.
    Delivered,
    /// `value` is the [`DropReason`] code.
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub time: Nanos,
    pub kind: ObservationKind,
    /// Packet id.
    pub subject: u64,
    pub class: ServiceClass,
    /// Slice index, or [`UNSLICED`].
    pub slice: u32,
    pub value: u64,
}

/// Slice bucket of packets that never got a slice.
pub const UNSLICED: u32 = u32::MAX;

pub fn drop_code(r: DropReason) -> u64 {
    r as u64
}

/// Append-only packet observations in time order.
#[derive(Debug, Clone, Default)]
pub struct MetricTrace {
    obs: Vec<Observation>,
}

impl MetricTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, o: Observation) {
        debug_assert!(self.obs.last().is_none_or(|l| l.time <= o.time), "trace time went backwards");
        self.obs.push(o);
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Delivered latencies of one slice bucket, ascending.
    pub fn sorted_latencies(&self, slice: u32) -> Vec<Nanos> {
        let mut v: Vec<Nanos> = self
            .obs
            .iter()
            .filter(|o| o.slice == slice && o.kind == ObservationKind::Delivered)
            .map(|o| o.value)
            .collect();
        v.sort_unstable();
        v
    }
}

/// Packets of `class` delivered within `budget`, over packets of `class`
/// sent. Drops count as failures.
pub fn deadline_reliability(trace: &MetricTrace, budget: Nanos, class: ServiceClass) -> Result<f64, MetricsError> {
    let (mut sent, mut ok) = (0u64, 0u64);
    for o in trace.observations().iter().filter(|o| o.class == class) {
        match o.kind {
            ObservationKind::Sent => sent += 1,
            ObservationKind::Delivered if o.value <= budget => ok += 1,
            _ => {}
        }
    }
    if sent == 0 {
        return Err(MetricsError::NoPackets);
    }
    Ok(ok as f64 / sent as f64)
}
