//! IIoT edge gateway: SDN switch and controller, radio management with
//! link migration, transmission modes, edge aggregation and gateway mesh.

mod aggregate;
mod controller;
mod flow_table;
mod mesh;
mod migration;
mod mode;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate, AggregateOutput, AggregationPolicy, Gap, UplinkRecord};
pub use controller::{install_flow, FlowMod, SdnController};
pub use flow_table::{flow_match, FlowAction, FlowHeader, FlowMatch, FlowRule, FlowTable, TABLE_MISS};
pub use mesh::{mesh_route, MeshGraph};
pub use migration::{
    migrate_link, AutoMigration, GatewayRadio, MigrationPlan, MigrationReport, MigrationStep, MigrationStrategy,
    MigrationTiming, MigrationTrigger,
};
pub use mode::{next_flush_at, transmission_schedule, Flush, GatewayMode};

use crate::model::Nanos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("unknown switch {0}")]
    UnknownSwitch(String),
    #[error("make-before-break needs a second radio interface")]
    NoSecondInterface,
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("no mesh route from {0} to any uplink")]
    NoRoute(String),
    #[error("{0}")]
    InvalidMode(&'static str),
}

fn default_radios() -> u32 {
    2
}

fn default_ops_per_record() -> u64 {
    1
}

/// Scenario configuration of one edge gateway device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub id: String,
    #[serde(default = "default_radios")]
    pub radios: u32,
    /// Radio channels usable as uplink interfaces.
    pub channels: Vec<String>,
    /// Defaults to the first channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_channel: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flow_rules: Vec<FlowRule>,
    #[serde(default)]
    pub mode: GatewayMode,
    /// Flush grid offset for INTERVAL mode.
    #[serde(default)]
    pub phase_ns: Nanos,
    #[serde(default)]
    pub aggregation: AggregationPolicy,
    #[serde(default = "default_ops_per_record")]
    pub ops_per_record: u64,
    /// Processing budget; unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute_ops_per_sec: Option<u64>,
    #[serde(default)]
    pub timing: MigrationTiming,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_migration: Option<AutoMigration>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mesh_neighbors: Vec<String>,
}

impl GatewayConfig {
    pub fn active(&self) -> &str {
        self.active_channel.as_deref().or(self.channels.first().map(String::as_str)).unwrap_or("")
    }

    pub fn radio(&self) -> GatewayRadio {
        GatewayRadio { radios: self.radios, channels: self.channels.clone(), active: self.active().to_string() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.channels.is_empty() {
            return Err(format!("gateway {}: at least one channel required", self.id));
        }
        if self.radios == 0 {
            return Err(format!("gateway {}: radios must be >= 1", self.id));
        }
        if let Some(a) = &self.active_channel {
            if !self.channels.contains(a) {
                return Err(format!("gateway {}: active_channel {a} not in channels", self.id));
            }
        }
        self.mode.validate().map_err(|e| format!("gateway {}: {e}", self.id))?;
        if let AggregationPolicy::MeanReduce { window_ns: 0 } = self.aggregation {
            return Err(format!("gateway {}: MEAN_REDUCE window must be > 0", self.id));
        }
        Ok(())
    }

    /// Processing delay for `records` records under the compute budget.
    pub fn processing_ns(&self, records: usize) -> Nanos {
        match self.compute_ops_per_sec {
            Some(rate) if rate > 0 => {
                let ops = records as u128 * self.ops_per_record as u128;
                (ops * crate::model::NS_PER_SEC as u128).div_ceil(rate as u128) as Nanos
            }
            _ => 0,
        }
    }
}
