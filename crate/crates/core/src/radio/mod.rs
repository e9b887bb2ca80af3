//! Wireless link model.
//!
//! Two routes to latency live here. [`LinkModel::link_latency`] evaluates the
//! closed form for a given utilisation; [`RadioNetwork::transmit`] runs an
//! actual FIFO queue per (cell, slice) so simulated delays can be checked
//! against that closed form.

mod quality;
mod transmit;

use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::RngStream;
use crate::model::{BitsPerSecond, Nanos, NodeId, ServiceClass, SliceIdx, NS_PER_MS, NS_PER_SEC, NS_PER_US};

pub use quality::{quality_trace, ChannelSpec, LinkQualitySample, QualityConfig, QualitySampler, QualityScriptEntry};
pub use transmit::{Delivery, DeliveryOutcome, DropReason, RadioNetwork, SliceCounters};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadioError {
    #[error("link saturated at utilisation {load}")]
    Saturated { load: f64 },
    #[error("utilisation {load} is not a valid load")]
    InvalidLoad { load: f64 },
    #[error("no admitted slice for this packet in cell {cell}")]
    NoSlice { cell: String },
    #[error("node {node} has no path to a cell")]
    Detached { node: String },
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("invalid packet: {0}")]
    InvalidPacket(&'static str),
}

/// One-way base latency per service class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLatencies {
    pub urllc_ns: Nanos,
    pub embb_ns: Nanos,
    pub mmtc_ns: Nanos,
}

impl ClassLatencies {
    pub fn get(&self, class: ServiceClass) -> Nanos {
        match class {
            ServiceClass::Urllc => self.urllc_ns,
            ServiceClass::Embb => self.embb_ns,
            ServiceClass::Mmtc => self.mmtc_ns,
        }
    }
}

impl Default for ClassLatencies {
    fn default() -> Self {
        Self { urllc_ns: 200 * NS_PER_US, embb_ns: 2 * NS_PER_MS, mmtc_ns: 50 * NS_PER_MS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Jitter {
    #[default]
    None,
    /// Log-normal jitter in nanoseconds, resampled above `max_ns`.
    TruncatedLognormal { mu: f64, sigma: f64, max_ns: Nanos },
}

impl Jitter {
    pub fn draw(&self, rng: &mut RngStream) -> Nanos {
        match *self {
            Jitter::None => 0,
            Jitter::TruncatedLognormal { mu, sigma, max_ns } => {
                let Ok(dist) = LogNormal::new(mu, sigma) else { return 0 };
                for _ in 0..64 {
                    let x: f64 = dist.sample(rng);
                    if x <= max_ns as f64 {
                        return x.round() as Nanos;
                    }
                }
                max_ns
            }
        }
    }
}

/// How many concurrent senders a cell tolerates before latency stretches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContentionProfile {
    None,
    /// factor = 1 + senders / budget
    Linear { budget: u64 },
}

impl Default for ContentionProfile {
    fn default() -> Self {
        ContentionProfile::Linear { budget: 1000 }
    }
}

/// Multiplicative latency stress for `active_senders` concurrent senders in
/// a cell. 1.0 when idle and non-decreasing in the sender count.
pub fn contention_factor(profile: &ContentionProfile, active_senders: u64) -> f64 {
    match *profile {
        ContentionProfile::None => 1.0,
        ContentionProfile::Linear { budget } => 1.0 + active_senders as f64 / budget.max(1) as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    pub base_latency: ClassLatencies,
    pub jitter: Jitter,
    /// Rate used by the closed-form [`link_latency`](Self::link_latency).
    pub per_cell_capacity_bps: BitsPerSecond,
    /// Maximum packets waiting per (cell, slice) queue.
    pub buffer_limit: usize,
    pub contention: ContentionProfile,
    /// Device-to-parent hop latency (fieldbus, WiFi, BLE, AGV-local).
    pub local_link_latency_ns: Nanos,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            base_latency: ClassLatencies::default(),
            jitter: Jitter::None,
            per_cell_capacity_bps: 1_000_000_000,
            buffer_limit: 1000,
            contention: ContentionProfile::default(),
            local_link_latency_ns: 100 * NS_PER_US,
        }
    }
}

/// Serialization time of `size_bytes` at `rate`, rounded up to whole ns.
pub fn serialization_ns(size_bytes: u32, rate: BitsPerSecond) -> Nanos {
    let bits = size_bytes as u128 * 8;
    let rate = rate.max(1) as u128;
    ((bits * NS_PER_SEC as u128).div_ceil(rate)) as Nanos
}

/// Mean waiting time of a deterministic-service queue (Pollaczek–Khinchine
/// for M/D/1): `s·ρ / (2(1−ρ))`.
pub fn md1_wait_ns(service_ns: f64, load: f64) -> f64 {
    service_ns * load / (2.0 * (1.0 - load))
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.buffer_limit < 1 {
            return Err("link_model.buffer_limit must be >= 1".into());
        }
        if self.per_cell_capacity_bps == 0 {
            return Err("link_model.per_cell_capacity_bps must be > 0".into());
        }
        if let ContentionProfile::Linear { budget: 0 } = self.contention {
            return Err("link_model.contention.budget must be > 0".into());
        }
        Ok(())
    }

    /// Closed-form one-way latency: base + serialization + queueing + jitter,
    /// serializing at `per_cell_capacity_bps`.
    pub fn link_latency(&self, packet: &Packet, load: f64, jitter: Option<&mut RngStream>) -> Result<Nanos, RadioError> {
        self.link_latency_at(packet, self.per_cell_capacity_bps, load, jitter)
    }

    pub fn link_latency_at(
        &self,
        packet: &Packet,
        rate: BitsPerSecond,
        load: f64,
        jitter: Option<&mut RngStream>,
    ) -> Result<Nanos, RadioError> {
        if load.is_nan() || load < 0.0 {
            return Err(RadioError::InvalidLoad { load });
        }
        if load >= 1.0 {
            return Err(RadioError::Saturated { load });
        }
        let s = serialization_ns(packet.size_bytes, rate);
        let q = md1_wait_ns(s as f64, load).round() as Nanos;
        let j = jitter.map(|r| self.jitter.draw(r)).unwrap_or(0);
        Ok(self.base_latency.get(packet.class) + s + q + j)
    }
}

/// A unit of traffic. Node and slice references are dense indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u32,
    pub class: ServiceClass,
    pub slice: Option<SliceIdx>,
    pub created_at: Nanos,
    /// Absolute deadline.
    pub deadline: Nanos,
    /// Originating traffic flow, if any, and the emission index within it.
    pub flow: Option<u32>,
    pub seq: u32,
}

impl Packet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: u64,
        src: NodeId,
        dst: NodeId,
        size_bytes: u32,
        class: ServiceClass,
        slice: Option<SliceIdx>,
        created_at: Nanos,
        deadline: Nanos,
    ) -> Result<Self, RadioError> {
        if size_bytes == 0 {
            return Err(RadioError::InvalidPacket("size must be at least one byte"));
        }
        if deadline <= created_at {
            return Err(RadioError::InvalidPacket("deadline must be after creation"));
        }
        Ok(Self { id, src, dst, size_bytes, class, slice, created_at, deadline, flow: None, seq: 0 })
    }
}
