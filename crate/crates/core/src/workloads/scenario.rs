use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corenet::{FirewallPolicy, SliceRequest};
use crate::devices::{Actuator, EnergyParams, SensorKind, WirelessSensorDevice};
use crate::gateway::{GatewayConfig, GatewayMode, MigrationStrategy};
use crate::model::{
    validate_topology, DeviceKind, Nanos, NodeKind, ServiceClass, TargetOverrides, Topology, ValidatedTopology,
    ValidationError,
};
use crate::plc::PlcConfig;
use crate::radio::{LinkModel, QualityConfig};

/// Where a sensor device sends its records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uplink {
    pub dst: String,
    #[serde(default = "mmtc")]
    pub class: ServiceClass,
    /// Slice id; bound by class at the sender's cell when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
}

fn mmtc() -> ServiceClass {
    ServiceClass::Mmtc
}

/// A wireless sensor device in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorDeviceConfig {
    pub id: String,
    pub sensors: Vec<SensorKind>,
    pub sample_period_ns: Nanos,
    /// Offset of the first sample.
    #[serde(default)]
    pub start_ns: Nanos,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alarm_threshold: Option<f64>,
    #[serde(default)]
    pub mode: GatewayMode,
    #[serde(default)]
    pub phase_ns: Nanos,
    pub uplink: Uplink,
}

impl SensorDeviceConfig {
    pub fn device(&self) -> WirelessSensorDevice {
        WirelessSensorDevice {
            sensors: self.sensors.clone(),
            energy: self.energy,
            sample_period_ns: self.sample_period_ns,
            alarm_threshold: self.alarm_threshold,
        }
    }
}

/// Periodic, scripted or Poisson packet stream between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub class: ServiceClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    pub size_bytes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_ns: Option<Nanos>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson_mean_ns: Option<Nanos>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule_ns: Vec<Nanos>,
    #[serde(default)]
    pub start_ns: Nanos,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ns: Option<Nanos>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub port_label: String,
    /// Overrides the slice deadline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_ns: Option<Nanos>,
    /// Flows in one group emit in lockstep; receivers report arrival skew
    /// per emission round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync_group: Option<String>,
}

impl Flow {
    /// Mean offered rate in bit/s for periodic and Poisson flows.
    pub fn offered_bps(&self) -> f64 {
        let mean = self.period_ns.or(self.poisson_mean_ns);
        mean.map_or(0.0, |p| self.size_bytes as f64 * 8.0 * 1e9 / p as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedMigration {
    pub time_ns: Nanos,
    pub gateway: String,
    pub channel: String,
    pub strategy: MigrationStrategy,
}

/// Re-attachment of a device to a cell or parent device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reattach {
    pub time_ns: Nanos,
    pub device: String,
    pub attach_to: String,
}

/// A gateway loses its own 5G attachment and falls back to the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UplinkOutage {
    pub time_ns: Nanos,
    pub gateway: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveCommand {
    pub time_ns: Nanos,
    pub axis: u32,
    pub units: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorConfig {
    pub id: String,
    pub actuator: Actuator,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub commands: Vec<MoveCommand>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceThreshold {
    pub slice: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_p99_ns: Option<Nanos>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_p9999_ns: Option<Nanos>,
    /// Delivered within deadline over sent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_deadline_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_throughput_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_sent: Option<u64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub require_admitted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub slices: Vec<SliceThreshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_plc_miss_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_lifetime_years: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_migration_loss: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sync_skew_ns: Option<Nanos>,
}

impl Thresholds {
    pub fn is_empty(&self) -> bool {
        *self == Thresholds::default()
    }
}

/// A complete simulation input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub duration_ns: Nanos,
    pub topology: Topology,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slices: Vec<SliceRequest>,
    #[serde(default)]
    pub link_model: LinkModel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub devices: Vec<SensorDeviceConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plcs: Vec<PlcConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gateways: Vec<GatewayConfig>,
    #[serde(default)]
    pub firewall: FirewallPolicy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traffic: Vec<Flow>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub targets: TargetOverrides,
    #[serde(default)]
    pub quality: QualityConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub migrations: Vec<ScriptedMigration>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mobility: Vec<Reattach>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_outages: Vec<UplinkOutage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actuators: Vec<ActuatorConfig>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Topology(#[from] ValidationError),
    #[error("{}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl Scenario {
    pub fn new(name: &str, duration_ns: Nanos, topology: Topology) -> Self {
        Self {
            name: name.to_string(),
            seed: 0,
            duration_ns,
            topology,
            slices: Vec::new(),
            link_model: LinkModel::default(),
            devices: Vec::new(),
            plcs: Vec::new(),
            gateways: Vec::new(),
            firewall: FirewallPolicy::default(),
            traffic: Vec::new(),
            thresholds: Thresholds::default(),
            targets: TargetOverrides::default(),
            quality: QualityConfig::default(),
            migrations: Vec::new(),
            mobility: Vec::new(),
            link_outages: Vec::new(),
            actuators: Vec::new(),
        }
    }

    /// Checks the topology and every cross reference. All problems are
    /// collected.
    pub fn validate(&self) -> Result<ValidatedTopology, ScenarioError> {
        let topo = validate_topology(self.topology.clone())?;
        let mut errs = Vec::new();
        let mut err = |m: String| errs.push(m);
        let kind_of = |id: &str| topo.lookup(id).map(|n| topo.kind(n));
        let expect_device = |err: &mut dyn FnMut(String), what: &str, id: &str, kind: DeviceKind| match kind_of(id) {
            Some(NodeKind::Device(k)) if k == kind => {}
            Some(other) => err(format!("{what} {id}: expected {kind:?} device, found {other:?}")),
            None => err(format!("{what} {id}: unknown device")),
        };
        let exists = |err: &mut dyn FnMut(String), what: &str, id: &str| {
            if topo.lookup(id).is_none() {
                err(format!("{what}: unknown node {id}"));
            }
        };

        if self.duration_ns == 0 {
            err("duration_ns must be > 0".into());
        }
        if let Err(e) = self.link_model.validate() {
            err(format!("link_model: {e}"));
        }
        let mut seen = BTreeSet::new();
        for s in &self.slices {
            if !seen.insert(s.id.as_str()) {
                err(format!("slice {}: duplicate id", s.id));
            }
        }
        let slice_ids = seen;
        let check_slice = |err: &mut dyn FnMut(String), what: &str, s: &Option<String>| {
            if let Some(s) = s {
                if !slice_ids.contains(s.as_str()) {
                    err(format!("{what}: unknown slice {s}"));
                }
            }
        };

        let mut ids = BTreeSet::new();
        for d in &self.devices {
            if !ids.insert(d.id.as_str()) {
                err(format!("device config {}: duplicate", d.id));
            }
            expect_device(&mut err, "device config", &d.id, DeviceKind::WirelessSensorDevice);
            if let Err(e) = d.device().validate() {
                err(format!("device config {}: {e}", d.id));
            }
            if let Err(e) = d.mode.validate() {
                err(format!("device config {}: {e}", d.id));
            }
            exists(&mut err, &format!("device config {} uplink", d.id), &d.uplink.dst);
            check_slice(&mut err, &format!("device config {}", d.id), &d.uplink.slice);
        }
        for p in &self.plcs {
            if !ids.insert(p.id.as_str()) {
                err(format!("plc {}: duplicate", p.id));
            }
            expect_device(&mut err, "plc", &p.id, DeviceKind::EdgePlc);
            if let Err(e) = p.validate() {
                err(e);
            }
            for f in &p.field_devices {
                exists(&mut err, &format!("plc {} field device", p.id), f);
            }
            for peer in &p.peers {
                expect_device(&mut err, &format!("plc {} peer", p.id), peer, DeviceKind::EdgePlc);
            }
        }
        let mut gw_ids = BTreeSet::new();
        for g in &self.gateways {
            if !gw_ids.insert(g.id.as_str()) {
                err(format!("gateway {}: duplicate", g.id));
            }
            expect_device(&mut err, "gateway", &g.id, DeviceKind::EdgeGateway);
            if let Err(e) = g.validate() {
                err(e);
            }
            for n in &g.mesh_neighbors {
                if !self.gateways.iter().any(|o| &o.id == n) {
                    err(format!("gateway {}: mesh neighbor {n} is not a configured gateway", g.id));
                }
            }
            if g.auto_migration.is_some() {
                for c in &g.channels {
                    if self.quality.channel(c).is_none() {
                        err(format!("gateway {}: channel {c} has no quality model", g.id));
                    }
                }
            }
        }
        let mut flow_ids = BTreeSet::new();
        for f in &self.traffic {
            if !flow_ids.insert(f.id.as_str()) {
                err(format!("flow {}: duplicate id", f.id));
            }
            exists(&mut err, &format!("flow {} src", f.id), &f.src);
            exists(&mut err, &format!("flow {} dst", f.id), &f.dst);
            check_slice(&mut err, &format!("flow {}", f.id), &f.slice);
            let kinds = f.period_ns.is_some() as u8 + f.poisson_mean_ns.is_some() as u8 + !f.schedule_ns.is_empty() as u8;
            if kinds != 1 {
                err(format!("flow {}: exactly one of period_ns, poisson_mean_ns, schedule_ns required", f.id));
            }
            if f.period_ns == Some(0) || f.poisson_mean_ns == Some(0) {
                err(format!("flow {}: period must be > 0", f.id));
            }
            if f.size_bytes == 0 {
                err(format!("flow {}: size_bytes must be > 0", f.id));
            }
            if f.src == f.dst {
                err(format!("flow {}: src equals dst", f.id));
            }
        }
        for m in &self.migrations {
            match self.gateways.iter().find(|g| g.id == m.gateway) {
                None => err(format!("migration at {}: unknown gateway {}", m.time_ns, m.gateway)),
                Some(g) if !g.channels.contains(&m.channel) => {
                    err(format!("migration at {}: gateway {} has no channel {}", m.time_ns, m.gateway, m.channel))
                }
                _ => {}
            }
        }
        for r in &self.mobility {
            match kind_of(&r.device) {
                Some(NodeKind::Device(_)) => {}
                _ => err(format!("mobility at {}: {} is not a device", r.time_ns, r.device)),
            }
            match kind_of(&r.attach_to) {
                Some(NodeKind::Cell | NodeKind::Device(_)) => {}
                _ => err(format!("mobility at {}: cannot attach to {}", r.time_ns, r.attach_to)),
            }
        }
        for o in &self.link_outages {
            if !gw_ids.contains(o.gateway.as_str()) {
                err(format!("link outage at {}: unknown gateway {}", o.time_ns, o.gateway));
            }
        }
        for a in &self.actuators {
            expect_device(&mut err, "actuator", &a.id, DeviceKind::Actuator);
            if let Err(e) = a.actuator.validate() {
                err(format!("actuator {}: {e}", a.id));
            }
        }
        for t in &self.thresholds.slices {
            if !slice_ids.contains(t.slice.as_str()) {
                err(format!("threshold: unknown slice {}", t.slice));
            }
        }
        for c in ServiceClass::ALL {
            if !self.targets.target(c).is_well_formed() {
                err(format!("targets: {} target is not well formed", c.as_str()));
            }
        }
        if errs.is_empty() {
            Ok(topo)
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }
}
