use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BitsPerSecond, Nanos, NodeId, ServiceClass};

/// Why admission control turned a slice request down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Rejection {
    /// Reserving the request would exceed the capacity of `cell`.
    Capacity { cell: String, capacity_bps: BitsPerSecond, already_reserved_bps: BitsPerSecond, requested_bps: BitsPerSecond },
    /// Claimed mMTC density exceeds the class target.
    Density { claimed_per_km2: f64, limit_per_km2: f64 },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Capacity { cell, capacity_bps, already_reserved_bps, requested_bps } => write!(
                f,
                "capacity of cell {cell}: {already_reserved_bps} + {requested_bps} > {capacity_bps} bit/s"
            ),
            Rejection::Density { claimed_per_km2, limit_per_km2 } => {
                write!(f, "density {claimed_per_km2}/km² exceeds {limit_per_km2}/km²")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub id: String,
    pub service_class: ServiceClass,
    pub reserved_rate_bps: BitsPerSecond,
    pub cell_ids: Vec<String>,
    pub admitted: bool,
    /// Per-packet delivery deadline relative to creation.
    pub deadline_ns: Nanos,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
    #[serde(skip)]
    pub cells: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SliceIdx(pub u32);

/// All slices of a run, admitted or not, in request order.
#[derive(Debug, Clone, Default)]
pub struct SliceTable {
    slices: Vec<Slice>,
}

impl SliceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, slice: Slice) -> SliceIdx {
        self.slices.push(slice);
        SliceIdx(self.slices.len() as u32 - 1)
    }

    pub fn get(&self, idx: SliceIdx) -> &Slice {
        &self.slices[idx.0 as usize]
    }

    pub fn by_id(&self, id: &str) -> Option<SliceIdx> {
        self.slices.iter().position(|s| s.id == id).map(|i| SliceIdx(i as u32))
    }

    pub fn iter(&self) -> impl Iterator<Item = (SliceIdx, &Slice)> {
        self.slices.iter().enumerate().map(|(i, s)| (SliceIdx(i as u32), s))
    }

    pub fn as_slice(&self) -> &[Slice] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// First admitted slice of `class` that covers `cell`.
    pub fn admitted_for(&self, cell: NodeId, class: ServiceClass) -> Option<SliceIdx> {
        self.iter()
            .find(|(_, s)| s.admitted && s.service_class == class && s.cells.contains(&cell))
            .map(|(i, _)| i)
    }

    /// Sum of admitted reservations in `cell`.
    pub fn reserved_in(&self, cell: NodeId) -> BitsPerSecond {
        self.slices
            .iter()
            .filter(|s| s.admitted && s.cells.contains(&cell))
            .map(|s| s.reserved_rate_bps)
            .sum()
    }
}
