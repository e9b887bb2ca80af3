//! Domain types shared across the simulator: units, service classes, KPI
//! targets, topology and slices.

mod slice;
mod topology;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use slice::{Rejection, Slice, SliceIdx, SliceTable};
pub use topology::{
    validate_topology, Attachments, BaseStation, Cell, Core, CoreKind, DeviceKind, DeviceRef,
    Network, NetworkKind, NodeId, NodeInfo, NodeKind, Topology, ValidatedTopology, ValidationError,
    Violation, WiredLink,
};

/// Simulated time and durations, in nanoseconds.
pub type Nanos = u64;
/// Data rates, in bits per second.
pub type BitsPerSecond = u64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_MS: Nanos = 1_000_000;
pub const NS_PER_SEC: Nanos = 1_000_000_000;
pub const NS_PER_HOUR: Nanos = 3_600 * NS_PER_SEC;
/// Julian year (365.25 days).
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;
pub const M2_PER_KM2: f64 = 1.0e6;

/// The three 5G traffic classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ServiceClass {
    Embb,
    Urllc,
    Mmtc,
}

impl ServiceClass {
    pub const ALL: [ServiceClass; 3] = [ServiceClass::Embb, ServiceClass::Urllc, ServiceClass::Mmtc];

    pub fn as_str(self) -> &'static str {
        match self {
            ServiceClass::Embb => "EMBB",
            ServiceClass::Urllc => "URLLC",
            ServiceClass::Mmtc => "MMTC",
        }
    }
}

impl fmt::Display for ServiceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Quantitative targets a service class is expected to meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiTarget {
    pub peak_rate_bps: BitsPerSecond,
    pub user_plane_latency_budget_ns: Nanos,
    /// Devices per km².
    pub device_density_per_km2: f64,
    pub delivery_ratio_target: f64,
}

impl KpiTarget {
    /// Density converted to devices per m².
    pub fn device_density_per_m2(&self) -> f64 {
        self.device_density_per_km2 / M2_PER_KM2
    }

    pub fn is_well_formed(&self) -> bool {
        self.peak_rate_bps > 0
            && self.user_plane_latency_budget_ns > 0
            && self.device_density_per_km2 > 0.0
            && self.delivery_ratio_target > 0.0
            && self.delivery_ratio_target <= 1.0
    }
}

/// The fixed target table for a service class.
///
/// eMBB peak rate and latency, URLLC latency and mMTC density are the
/// headline 5G capability figures. The remaining entries are defaults
/// (see [`DEFAULT_ASSUMPTIONS`]) that a scenario may override.
pub fn kpi_targets(class: ServiceClass) -> KpiTarget {
    match class {
        ServiceClass::Embb => KpiTarget {
            peak_rate_bps: 20_000_000_000,
            user_plane_latency_budget_ns: 4 * NS_PER_MS,
            device_density_per_km2: 1.0e6,
            delivery_ratio_target: 0.99,
        },
        ServiceClass::Urllc => KpiTarget {
            peak_rate_bps: 20_000_000_000,
            user_plane_latency_budget_ns: NS_PER_MS,
            device_density_per_km2: 1.0e6,
            delivery_ratio_target: 0.99999,
        },
        ServiceClass::Mmtc => KpiTarget {
            peak_rate_bps: 20_000_000_000,
            user_plane_latency_budget_ns: 10 * NS_PER_SEC,
            device_density_per_km2: 1.0e6,
            delivery_ratio_target: 0.99,
        },
    }
}

/// Values in the target table that are defaults rather than published
/// capability figures. Reports list these in their header.
pub const DEFAULT_ASSUMPTIONS: &[&str] = &[
    "URLLC delivery ratio target defaults to 0.99999",
    "mMTC message deadline defaults to 10 s",
    "eMBB and mMTC delivery ratio targets default to 0.99",
    "URLLC and mMTC peak rate default to the 20 Gbit/s system peak",
];

/// Per-class targets with scenario overrides applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embb: Option<KpiTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub urllc: Option<KpiTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmtc: Option<KpiTarget>,
}

impl TargetOverrides {
    pub fn target(&self, class: ServiceClass) -> KpiTarget {
        let o = match class {
            ServiceClass::Embb => self.embb,
            ServiceClass::Urllc => self.urllc,
            ServiceClass::Mmtc => self.mmtc,
        };
        o.unwrap_or_else(|| kpi_targets(class))
    }
}
