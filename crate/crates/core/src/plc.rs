//! Edge PLC: cyclic read, compute and write over field devices with
//! deadline accounting, inter-PLC messaging over URLLC and cloud placement.

use serde::{Deserialize, Serialize};

use crate::engine::RngStream;
use crate::model::{Attachments, Nanos, NodeId, ServiceClass, SliceTable, ValidatedTopology, NS_PER_MS, NS_PER_US};
use crate::radio::{DeliveryOutcome, Packet, RadioError, RadioNetwork};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Placement {
    #[default]
    OnDevice,
    /// Control logic in the edge cloud; each cycle adds a sensor to cloud
    /// and a cloud to actuator traversal.
    EdgeCloud,
}

/// Cycle-time presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlcProfile {
    Relaxed,
    Motion,
    Aggressive,
}

impl PlcProfile {
    pub fn cycle_time(self) -> Nanos {
        match self {
            PlcProfile::Relaxed => 10 * NS_PER_MS,
            PlcProfile::Motion => NS_PER_MS,
            PlcProfile::Aggressive => 100 * NS_PER_US,
        }
    }
}

fn default_message_size() -> u32 {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcConfig {
    /// Id of the EDGE_PLC device.
    pub id: String,
    pub cycle_time_ns: Nanos,
    /// Wired I/O latency per field device, covering its read and write.
    pub io_latency_ns: Nanos,
    pub compute_time_ns: Nanos,
    #[serde(default)]
    pub placement: Placement,
    /// Field devices read and written every cycle.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub field_devices: Vec<String>,
    /// One-way latency to the edge cloud; defaults to the URLLC base latency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_one_way_ns: Option<Nanos>,
    /// First cycle start.
    #[serde(default)]
    pub start_ns: Nanos,
    /// PLCs receiving one message from this PLC every cycle.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peers: Vec<String>,
    #[serde(default = "default_message_size")]
    pub message_size_bytes: u32,
}

impl PlcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.cycle_time_ns == 0 {
            return Err(format!("plc {}: cycle_time_ns must be > 0", self.id));
        }
        if self.message_size_bytes == 0 {
            return Err(format!("plc {}: message_size_bytes must be > 0", self.id));
        }
        Ok(())
    }

    /// Read, compute and write time of one cycle.
    pub fn cycle_duration(&self, cloud_one_way: Nanos) -> Nanos {
        let io = self.field_devices.len() as Nanos * self.io_latency_ns;
        let net = match self.placement {
            Placement::OnDevice => 0,
            Placement::EdgeCloud => 2 * self.cloud_one_way_ns.unwrap_or(cloud_one_way),
        };
        io + self.compute_time_ns + net
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CycleRecord {
    pub cycle_index: u64,
    pub started_at: Nanos,
    pub finished_at: Nanos,
    pub deadline_met: bool,
}

/// Cycle `k` of a fixed-rate schedule: it starts at `start + k·cycle_time`
/// whatever happened in earlier cycles.
pub fn cyclic_tick(cfg: &PlcConfig, cycle_index: u64, cloud_one_way: Nanos) -> CycleRecord {
    let started_at = cfg.start_ns + cycle_index * cfg.cycle_time_ns;
    let d = cfg.cycle_duration(cloud_one_way);
    CycleRecord { cycle_index, started_at, finished_at: started_at + d, deadline_met: d <= cfg.cycle_time_ns }
}

/// (miss_count, miss_ratio); an empty list gives (0, 0.0).
pub fn deadline_stats(records: &[CycleRecord]) -> (u64, f64) {
    let misses = records.iter().filter(|r| !r.deadline_met).count() as u64;
    let ratio = if records.is_empty() { 0.0 } else { misses as f64 / records.len() as f64 };
    (misses, ratio)
}

/// Sends one inter-PLC message on the URLLC slice serving `from`'s cell.
#[allow(clippy::too_many_arguments)]
pub fn interplc_send(
    radio: &mut RadioNetwork,
    topo: &ValidatedTopology,
    attach: &Attachments,
    slices: &SliceTable,
    now: Nanos,
    from: NodeId,
    to: NodeId,
    packet_id: u64,
    size_bytes: u32,
    jitter: &mut RngStream,
) -> Result<DeliveryOutcome, RadioError> {
    let cell = attach.root_cell(topo, from).ok_or_else(|| RadioError::Detached { node: topo.id(from).to_string() })?;
    let slice = slices
        .admitted_for(cell, ServiceClass::Urllc)
        .ok_or_else(|| RadioError::NoSlice { cell: topo.id(cell).to_string() })?;
    let deadline = now + slices.get(slice).deadline_ns;
    let p = Packet::new(packet_id, from, to, size_bytes, ServiceClass::Urllc, Some(slice), now, deadline)?;
    radio.transmit(topo, attach, slices, now, &p, jitter)
}
