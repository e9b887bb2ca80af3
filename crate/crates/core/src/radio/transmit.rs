use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{contention_factor, serialization_ns, LinkModel, Packet, RadioError};
use crate::engine::RngStream;
use crate::model::{Attachments, Nanos, NodeId, SliceIdx, SliceTable, ValidatedTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    BufferOverflow,
    LinkDown,
    FirewallDenied,
    Unreachable,
    NoSlice,
    Detached,
    NoRoute,
    FlowTableDrop,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::BufferOverflow => "buffer_overflow",
            DropReason::LinkDown => "link_down",
            DropReason::FirewallDenied => "firewall_denied",
            DropReason::Unreachable => "unreachable",
            DropReason::NoSlice => "no_slice",
            DropReason::Detached => "detached",
            DropReason::NoRoute => "no_route",
            DropReason::FlowTableDrop => "flow_table_drop",
        }
    }
}

/// Timing of one radio traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub delivered_at: Nanos,
    pub cell: NodeId,
    /// Class base latency after contention stretching.
    pub base_ns: Nanos,
    pub queueing_ns: Nanos,
    pub serialization_ns: Nanos,
    pub jitter_ns: Nanos,
}

impl Delivery {
    pub fn latency(&self) -> Nanos {
        self.base_ns + self.queueing_ns + self.serialization_ns + self.jitter_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOutcome {
    Delivered(Delivery),
    Dropped(DropReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SliceCounters {
    pub transmitted: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// FIFO server for one slice in one cell, serving at the slice's reserved
/// rate.
#[derive(Debug, Default)]
struct SliceServer {
    /// (service start, service end) of packets still in the system.
    in_system: VecDeque<(Nanos, Nanos)>,
    free_at: Nanos,
}

impl SliceServer {
    fn waiting(&mut self, now: Nanos) -> usize {
        while matches!(self.in_system.front(), Some(&(_, end)) if end <= now) {
            self.in_system.pop_front();
        }
        let started = self.in_system.partition_point(|&(start, _)| start <= now);
        self.in_system.len() - started
    }
}

/// Shared radio access of all cells in a run.
#[derive(Debug)]
pub struct RadioNetwork {
    model: LinkModel,
    servers: HashMap<(NodeId, SliceIdx), SliceServer>,
    /// Service end times of packets in each cell, for contention.
    cell_busy: HashMap<NodeId, BinaryHeap<Reverse<Nanos>>>,
    counters: BTreeMap<SliceIdx, SliceCounters>,
}

impl RadioNetwork {
    pub fn new(model: LinkModel) -> Self {
        Self { model, servers: HashMap::new(), cell_busy: HashMap::new(), counters: BTreeMap::new() }
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    pub fn counters(&self) -> &BTreeMap<SliceIdx, SliceCounters> {
        &self.counters
    }

    /// The node whose cell carries the radio hop: the sender when it is a
    /// device, otherwise the receiver (downlink).
    pub fn radio_endpoint(topo: &ValidatedTopology, packet: &Packet) -> NodeId {
        if topo.kind(packet.src).is_device() {
            packet.src
        } else {
            packet.dst
        }
    }

    /// Send `packet` over the air at `now`. On success the packet is either
    /// scheduled for delivery at `delivered_at` or dropped because the slice
    /// buffer is full.
    pub fn transmit(
        &mut self,
        topo: &ValidatedTopology,
        attach: &Attachments,
        slices: &SliceTable,
        now: Nanos,
        packet: &Packet,
        jitter_rng: &mut RngStream,
    ) -> Result<DeliveryOutcome, RadioError> {
        let endpoint = Self::radio_endpoint(topo, packet);
        let cell = attach
            .root_cell(topo, endpoint)
            .ok_or_else(|| RadioError::Detached { node: topo.id(endpoint).to_string() })?;
        let no_slice = || RadioError::NoSlice { cell: topo.id(cell).to_string() };
        let slice_idx = packet.slice.ok_or_else(no_slice)?;
        let slice = slices.get(slice_idx);
        if !slice.admitted || slice.service_class != packet.class || !slice.cells.contains(&cell) {
            return Err(no_slice());
        }

        let counters = self.counters.entry(slice_idx).or_default();
        counters.transmitted += 1;

        let server = self.servers.entry((cell, slice_idx)).or_default();
        if server.waiting(now) >= self.model.buffer_limit {
            counters.dropped += 1;
            return Ok(DeliveryOutcome::Dropped(DropReason::BufferOverflow));
        }
        let s = serialization_ns(packet.size_bytes, slice.reserved_rate_bps);
        let start = server.free_at.max(now);
        let end = start + s;
        server.free_at = end;
        server.in_system.push_back((start, end));

        let busy = self.cell_busy.entry(cell).or_default();
        while matches!(busy.peek(), Some(&Reverse(t)) if t <= now) {
            busy.pop();
        }
        let factor = contention_factor(&self.model.contention, busy.len() as u64);
        busy.push(Reverse(end));

        let base = (self.model.base_latency.get(packet.class) as f64 * factor).round() as Nanos;
        let jitter = self.model.jitter.draw(jitter_rng);
        let d = Delivery {
            delivered_at: 0,
            cell,
            base_ns: base,
            queueing_ns: start - now,
            serialization_ns: s,
            jitter_ns: jitter,
        };
        counters.delivered += 1;
        Ok(DeliveryOutcome::Delivered(Delivery { delivered_at: now + d.latency(), ..d }))
    }
}
