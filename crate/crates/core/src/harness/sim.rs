use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use log::warn;

use super::metrics::{drop_code, percentile_sorted, MetricTrace, Observation, ObservationKind, UNSLICED};
use super::report::{
    evaluate_thresholds, ActuatorReport, CellReport, DeviceReport, GatewayReport, KpiReport, LatencyStats, PlcReport,
    SliceReport, SyncReport,
};
use super::HarnessError;
use crate::corenet::{admit_slice, firewall_check, Boundary, PacketHeader, Router};
use crate::devices::{lifetime_estimate, sample_all, Battery, EnergyOp, SensorRecord};
use crate::engine::{Engine, EventPayload, LogEntry, RngStream};
use crate::gateway::{
    aggregate, flow_match, mesh_route, migrate_link, FlowAction, FlowHeader, FlowMatch, FlowRule, FlowTable,
    GatewayMode, MeshGraph, MigrationPlan, MigrationReport, MigrationStep, MigrationStrategy, MigrationTrigger,
    SdnController,
};
use crate::model::{
    Attachments, Nanos, NodeId, NodeKind, ServiceClass, SliceIdx, SliceTable, ValidatedTopology,
    DEFAULT_ASSUMPTIONS, NS_PER_HOUR, NS_PER_SEC,
};
use crate::plc::{cyclic_tick, Placement};
use crate::radio::{DeliveryOutcome, DropReason, Packet, QualitySampler, RadioError, RadioNetwork};
use crate::workloads::Scenario;

/// Bytes added to every packet on top of its payload records.
pub const PACKET_HEADER_BYTES: u32 = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub event_log: bool,
    /// Keep the hop list of every delivered packet.
    pub record_paths: bool,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: KpiReport,
    pub trace: MetricTrace,
    pub event_log: Option<Vec<LogEntry>>,
    /// Packet id and node ids of each delivered packet, when requested.
    pub paths: Vec<(u64, Vec<String>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    FlowEmit { flow: u32 },
    PacketSend { pid: u64, bucket: u32 },
    PacketHop { pid: u64, bucket: u32, hop: u16 },
    PacketArrive { pid: u64, bucket: u32 },
    PacketDrop { pid: u64, bucket: u32, reason: DropReason },
    ControllerInstall { gw: u32, pid: u64, hop: u16 },
    SensorSample { dev: u32 },
    DeviceFlush { dev: u32 },
    RecordHop { gw: u32, batch: u64 },
    GatewayFlush { gw: u32 },
    MigrationStart { idx: u32 },
    MigrationStep { gw: u32 },
    QualitySample { gw: u32 },
    PlcCycle { plc: u32 },
    Mobility { idx: u32 },
    LinkOutage { idx: u32 },
    Actuation { act: u32, cmd: u32 },
}

fn bucket_str(b: u32) -> String {
    if b == UNSLICED {
        "-".into()
    } else {
        b.to_string()
    }
}

impl EventPayload for Ev {
    fn kind(&self) -> &'static str {
        match self {
            Ev::FlowEmit { .. } => "flow_emit",
            Ev::PacketSend { .. } => "packet_send",
            Ev::PacketHop { .. } => "packet_hop",
            Ev::PacketArrive { .. } => "packet_arrival",
            Ev::PacketDrop { .. } => "packet_drop",
            Ev::ControllerInstall { .. } => "controller",
            Ev::SensorSample { .. } => "sensor_sample",
            Ev::DeviceFlush { .. } => "device_flush",
            Ev::RecordHop { .. } => "record_hop",
            Ev::GatewayFlush { .. } => "gateway_flush",
            Ev::MigrationStart { .. } => "migration_start",
            Ev::MigrationStep { .. } => "migration_step",
            Ev::QualitySample { .. } => "quality_sample",
            Ev::PlcCycle { .. } => "plc_cycle",
            Ev::Mobility { .. } => "mobility",
            Ev::LinkOutage { .. } => "link_outage",
            Ev::Actuation { .. } => "actuation",
        }
    }

    fn subject(&self) -> String {
        match *self {
            Ev::PacketSend { pid, bucket } | Ev::PacketArrive { pid, bucket } => format!("{}/{pid}", bucket_str(bucket)),
            Ev::PacketHop { pid, bucket, hop } => format!("{}/{pid}/{hop}", bucket_str(bucket)),
            Ev::PacketDrop { pid, bucket, reason } => format!("{}/{pid}/{}", bucket_str(bucket), reason.as_str()),
            Ev::ControllerInstall { gw, pid, .. } => format!("{gw}/{pid}"),
            Ev::RecordHop { gw, batch } => format!("{gw}/{batch}"),
            Ev::Actuation { act, cmd } => format!("{act}/{cmd}"),
            Ev::FlowEmit { flow: i }
            | Ev::SensorSample { dev: i }
            | Ev::DeviceFlush { dev: i }
            | Ev::GatewayFlush { gw: i }
            | Ev::MigrationStart { idx: i }
            | Ev::MigrationStep { gw: i }
            | Ev::QualitySample { gw: i }
            | Ev::PlcCycle { plc: i }
            | Ev::Mobility { idx: i }
            | Ev::LinkOutage { idx: i } => i.to_string(),
        }
    }
}

/// A route with per-edge latencies and the hops that need a stop.
#[derive(Debug)]
struct CachedPath {
    hops: Vec<NodeId>,
    edge_lat: Vec<Nanos>,
    boundaries: Vec<Boundary>,
    /// Configured gateway on a non-terminal hop.
    gateway_at: Vec<Option<u32>>,
    /// First edge between a device and a cell.
    radio_edge: Option<usize>,
}

#[derive(Debug)]
struct InFlight {
    packet: Packet,
    bucket: u32,
    port: Rc<str>,
    path: Option<Rc<CachedPath>>,
    radio_done: bool,
    early_drop: Option<DropReason>,
    sync: Option<(u32, u32)>,
}

#[derive(Debug, Default, Clone, Copy)]
struct Bucket {
    sent: u64,
    delivered: u64,
    dropped: u64,
    within: u64,
    sent_bytes: u64,
    delivered_bytes: u64,
}

#[derive(Debug)]
struct FlowState {
    src: NodeId,
    dst: NodeId,
    slice: Option<SliceIdx>,
    port: Rc<str>,
    sync: Option<u32>,
    rng: RngStream,
    seq: u32,
    end: Nanos,
}

#[derive(Debug)]
struct DeviceRt {
    node: NodeId,
    dst: NodeId,
    slice: Option<SliceIdx>,
    battery: Battery,
    charged_to: Nanos,
    dead_at: Option<Nanos>,
    buffer: Vec<SensorRecord>,
    flush_pending: bool,
    transmissions: u64,
    records: u64,
    lost: u64,
}

#[derive(Debug)]
struct ActiveMigration {
    plan: MigrationPlan,
    next: usize,
    lost: u64,
}

#[derive(Debug)]
struct GatewayRt {
    node: NodeId,
    active: String,
    up: BTreeSet<String>,
    table: FlowTable,
    buffer: Vec<SensorRecord>,
    flush_pending: bool,
    records_in: u64,
    records_out: u64,
    packets: u64,
    gaps: u64,
    packet_ins: u64,
    migration: Option<ActiveMigration>,
    trigger: MigrationTrigger,
    samplers: Vec<QualitySampler>,
    mesh_path: Option<Vec<String>>,
}

#[derive(Debug)]
struct PlcRt {
    node: NodeId,
    peers: Vec<NodeId>,
    next_cycle: u64,
    cycles: u64,
    misses: u64,
    sent: u64,
}

#[derive(Debug, Default)]
struct ActuatorRt {
    commands: u64,
    stalls: u64,
    undetected: u64,
    max_err: f64,
}

struct World<'s> {
    sc: &'s Scenario,
    seed: u64,
    topo: ValidatedTopology,
    attach: Attachments,
    slices: SliceTable,
    router: Router,
    radio: RadioNetwork,
    jitter: RngStream,
    paths: HashMap<(NodeId, NodeId), Option<Rc<CachedPath>>>,
    packets: HashMap<u64, InFlight>,
    next_pid: u64,
    trace: MetricTrace,
    buckets: Vec<Bucket>,
    drops: BTreeMap<DropReason, u64>,
    flows: Vec<FlowState>,
    devices: Vec<DeviceRt>,
    device_of: HashMap<NodeId, u32>,
    gateways: Vec<GatewayRt>,
    gateway_of: HashMap<NodeId, u32>,
    controller: SdnController,
    batches: HashMap<u64, Vec<SensorRecord>>,
    next_batch: u64,
    plcs: Vec<PlcRt>,
    actuators: Vec<ActuatorRt>,
    sync_groups: Vec<String>,
    sync_rounds: BTreeMap<(u32, u32), (Nanos, Nanos, u32)>,
    peak: BTreeMap<NodeId, u64>,
    migrations: Vec<MigrationReport>,
    warnings: Vec<String>,
    record_paths: bool,
    delivered_paths: Vec<(u64, Vec<String>)>,
}

/// Runs `scenario` with the given seed.
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput, HarnessError> {
    run_with(scenario, RunOptions { seed, ..RunOptions::default() })
}

pub fn run_with(scenario: &Scenario, opts: RunOptions) -> Result<RunOutput, HarnessError> {
    let mut world = World::new(scenario, opts.seed)?;
    world.record_paths = opts.record_paths;
    let mut eng: Engine<Ev> = Engine::new(opts.seed);
    if opts.event_log {
        eng = eng.with_event_log();
    }
    world.schedule_initial(&mut eng);
    // generators stop at the horizon; packets still in flight are drained
    eng.run_until(Nanos::MAX, |eng, ev| world.handle(eng, ev.payload));
    let event_log = eng.take_event_log();
    let report = world.report();
    Ok(RunOutput { report, trace: world.trace, event_log, paths: world.delivered_paths })
}

impl<'s> World<'s> {
    fn new(sc: &'s Scenario, seed: u64) -> Result<Self, HarnessError> {
        let topo = sc.validate()?;
        let attach = topo.initial_attachments();
        let mut slices = SliceTable::new();
        for req in &sc.slices {
            let s = admit_slice(&topo, &attach, &slices, &sc.targets, req)?;
            slices.push(s);
        }
        let node = |id: &str| topo.lookup(id).expect("validated reference");
        let slice_ref = |s: &Option<String>| s.as_deref().and_then(|s| slices.by_id(s));

        let mut sync_groups: Vec<String> = sc.traffic.iter().filter_map(|f| f.sync_group.clone()).collect();
        sync_groups.sort();
        sync_groups.dedup();
        let flows = sc
            .traffic
            .iter()
            .map(|f| FlowState {
                src: node(&f.src),
                dst: node(&f.dst),
                slice: slice_ref(&f.slice),
                port: Rc::from(f.port_label.as_str()),
                sync: f.sync_group.as_ref().map(|g| sync_groups.binary_search(g).expect("collected") as u32),
                rng: RngStream::derive(seed, &format!("flow/{}", f.id)),
                seq: 0,
                end: f.stop_ns.unwrap_or(Nanos::MAX).min(sc.duration_ns),
            })
            .collect();

        let devices: Vec<DeviceRt> = sc
            .devices
            .iter()
            .map(|d| DeviceRt {
                node: node(&d.id),
                dst: node(&d.uplink.dst),
                slice: slice_ref(&d.uplink.slice),
                battery: Battery::new(&d.energy),
                charged_to: 0,
                dead_at: None,
                buffer: Vec::new(),
                flush_pending: false,
                transmissions: 0,
                records: 0,
                lost: 0,
            })
            .collect();
        let device_of = devices.iter().enumerate().map(|(i, d)| (d.node, i as u32)).collect();

        let mut controller = SdnController::new();
        let mut gateways = Vec::new();
        for g in &sc.gateways {
            controller.register(&g.id);
            let mut table = FlowTable::new();
            for r in &g.flow_rules {
                if let Ok(m) = controller.install_flow(&g.id, r.clone()) {
                    m.apply(&mut table);
                }
            }
            let samplers = if g.auto_migration.is_some() {
                g.channels
                    .iter()
                    .map(|c| sc.quality.sampler(c, seed))
                    .collect::<Result<Vec<_>, RadioError>>()
                    .map_err(|e| HarnessError::Run(format!("gateway {}: {e}", g.id)))?
            } else {
                Vec::new()
            };
            gateways.push(GatewayRt {
                node: node(&g.id),
                active: g.active().to_string(),
                up: BTreeSet::from([g.active().to_string()]),
                table,
                buffer: Vec::new(),
                flush_pending: false,
                records_in: 0,
                records_out: 0,
                packets: 0,
                gaps: 0,
                packet_ins: 0,
                migration: None,
                trigger: MigrationTrigger::default(),
                samplers,
                mesh_path: None,
            });
        }
        let gateway_of = gateways.iter().enumerate().map(|(i, g)| (g.node, i as u32)).collect();

        let plcs = sc
            .plcs
            .iter()
            .map(|p| PlcRt {
                node: node(&p.id),
                peers: p.peers.iter().map(|x| node(x)).collect(),
                next_cycle: 0,
                cycles: 0,
                misses: 0,
                sent: 0,
            })
            .collect();

        let mut w = World {
            sc,
            seed,
            router: Router::new(&topo, sc.link_model.local_link_latency_ns),
            radio: RadioNetwork::new(sc.link_model.clone()),
            jitter: RngStream::derive(seed, "radio/jitter"),
            buckets: vec![Bucket::default(); slices.len() + 1],
            topo,
            attach,
            slices,
            paths: HashMap::new(),
            packets: HashMap::new(),
            next_pid: 0,
            trace: MetricTrace::new(),
            drops: BTreeMap::new(),
            flows,
            devices,
            device_of,
            gateways,
            gateway_of,
            controller,
            batches: HashMap::new(),
            next_batch: 0,
            plcs,
            actuators: sc.actuators.iter().map(|_| ActuatorRt::default()).collect(),
            sync_groups,
            sync_rounds: BTreeMap::new(),
            peak: BTreeMap::new(),
            migrations: Vec::new(),
            warnings: Vec::new(),
            record_paths: false,
            delivered_paths: Vec::new(),
        };
        w.update_density();
        Ok(w)
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }

    fn schedule_initial(&mut self, eng: &mut Engine<Ev>) {
        let sc = self.sc;
        let horizon = sc.duration_ns;
        let at = |eng: &mut Engine<Ev>, ev: Ev, t: Nanos| {
            if t < horizon {
                eng.schedule(ev, t).expect("clock at zero");
            }
        };
        for (i, m) in sc.migrations.iter().enumerate() {
            at(eng, Ev::MigrationStart { idx: i as u32 }, m.time_ns);
        }
        for (i, m) in sc.mobility.iter().enumerate() {
            at(eng, Ev::Mobility { idx: i as u32 }, m.time_ns);
        }
        for (i, o) in sc.link_outages.iter().enumerate() {
            at(eng, Ev::LinkOutage { idx: i as u32 }, o.time_ns);
        }
        for (a, cfg) in sc.actuators.iter().enumerate() {
            for (c, cmd) in cfg.commands.iter().enumerate() {
                at(eng, Ev::Actuation { act: a as u32, cmd: c as u32 }, cmd.time_ns);
            }
        }
        for (i, p) in sc.plcs.iter().enumerate() {
            at(eng, Ev::PlcCycle { plc: i as u32 }, p.start_ns);
        }
        for i in 0..self.flows.len() {
            if let Some(t) = self.first_emission(i) {
                at(eng, Ev::FlowEmit { flow: i as u32 }, t);
            }
        }
        for (i, d) in sc.devices.iter().enumerate() {
            at(eng, Ev::SensorSample { dev: i as u32 }, d.start_ns);
        }
        for (i, g) in self.gateways.iter().enumerate() {
            if !g.samplers.is_empty() {
                at(eng, Ev::QualitySample { gw: i as u32 }, 0);
            }
        }
    }

    fn handle(&mut self, eng: &mut Engine<Ev>, ev: Ev) {
        match ev {
            Ev::FlowEmit { flow } => self.on_flow_emit(eng, flow as usize),
            Ev::PacketSend { pid, .. } => self.on_send(eng, pid),
            Ev::PacketHop { pid, hop, .. } => self.advance(eng, pid, hop as usize),
            Ev::PacketArrive { pid, .. } => self.on_arrive(eng.now(), pid),
            Ev::PacketDrop { pid, reason, .. } => self.on_drop(eng.now(), pid, reason),
            Ev::ControllerInstall { gw, pid, hop } => self.on_controller(eng, gw as usize, pid, hop as usize),
            Ev::SensorSample { dev } => self.on_sample(eng, dev as usize),
            Ev::DeviceFlush { dev } => self.on_device_flush(eng, dev as usize),
            Ev::RecordHop { gw, batch } => self.on_record_hop(eng, gw as usize, batch),
            Ev::GatewayFlush { gw } => {
                let g = &mut self.gateways[gw as usize];
                g.flush_pending = false;
                let recs = std::mem::take(&mut g.buffer);
                self.gateway_emit(eng, gw as usize, recs);
            }
            Ev::MigrationStart { idx } => {
                let m = &self.sc.migrations[idx as usize];
                let gw = self.sc.gateways.iter().position(|g| g.id == m.gateway).expect("validated");
                self.start_migration(eng, gw, &m.channel, m.strategy);
            }
            Ev::MigrationStep { gw } => self.run_due_steps(eng, gw as usize),
            Ev::QualitySample { gw } => self.on_quality(eng, gw as usize),
            Ev::PlcCycle { plc } => self.on_plc(eng, plc as usize),
            Ev::Mobility { idx } => {
                let r = &self.sc.mobility[idx as usize];
                let dev = self.topo.lookup(&r.device).expect("validated");
                let to = self.topo.lookup(&r.attach_to).expect("validated");
                if let Err(e) = self.attach.reattach(&self.topo, dev, Some(to)) {
                    self.warn(format!("mobility at {}: {e}", r.time_ns));
                }
                self.topology_changed();
            }
            Ev::LinkOutage { idx } => self.on_outage(idx as usize),
            Ev::Actuation { act, cmd } => self.on_actuation(eng.now(), act as usize, cmd as usize),
        }
    }

    // ---- packets -------------------------------------------------------

    #[allow(clippy::too_many_arguments)]
    fn spawn(
        &mut self,
        eng: &mut Engine<Ev>,
        at: Nanos,
        src: NodeId,
        dst: NodeId,
        size: u32,
        class: ServiceClass,
        pref: Option<SliceIdx>,
        deadline: Option<Nanos>,
        port: Rc<str>,
        sync: Option<(u32, u32)>,
    ) {
        let endpoint = if self.topo.kind(src).is_device() { src } else { dst };
        let cell = self.attach.root_cell(&self.topo, endpoint);
        let slice = pref.or_else(|| cell.and_then(|c| self.slices.admitted_for(c, class)));
        let early_drop = match (cell, slice) {
            (None, _) => Some(DropReason::Detached),
            (Some(_), None) => Some(DropReason::NoSlice),
            (Some(c), Some(s)) => {
                let sl = self.slices.get(s);
                (!(sl.admitted && sl.service_class == class && sl.cells.contains(&c))).then_some(DropReason::NoSlice)
            }
        };
        let bucket = slice.map_or(UNSLICED, |s| s.0);
        let budget = deadline
            .or(slice.map(|s| self.slices.get(s).deadline_ns))
            .unwrap_or_else(|| self.sc.targets.target(class).user_plane_latency_budget_ns)
            .max(1);
        let id = self.next_pid;
        self.next_pid += 1;
        let packet = Packet {
            id,
            src,
            dst,
            size_bytes: size.max(1),
            class,
            slice,
            created_at: at,
            deadline: at + budget,
            flow: None,
            seq: 0,
        };
        self.packets.insert(id, InFlight { packet, bucket, port, path: None, radio_done: false, early_drop, sync });
        eng.schedule(Ev::PacketSend { pid: id, bucket }, at).expect("spawn is never in the past");
    }

    fn bucket_idx(b: u32, n: usize) -> usize {
        if b == UNSLICED {
            n - 1
        } else {
            b as usize
        }
    }

    fn observe(&mut self, time: Nanos, kind: ObservationKind, p: &InFlight, value: u64) {
        self.trace.push(Observation { time, kind, subject: p.packet.id, class: p.packet.class, slice: p.bucket, value });
    }

    fn path(&mut self, src: NodeId, dst: NodeId) -> Option<Rc<CachedPath>> {
        if let Some(p) = self.paths.get(&(src, dst)) {
            return p.clone();
        }
        let built = self.router.route(&self.topo, &self.attach, src, dst).ok().map(|path| {
            let hops = path.hops;
            let last = hops.len() - 1;
            let edge_lat = hops.windows(2).map(|w| self.router.edge_latency(&self.topo, w[0], w[1])).collect();
            let boundaries =
                hops.windows(2).filter_map(|w| Boundary::between(self.topo.kind(w[0]), self.topo.kind(w[1]))).collect();
            let gateway_at =
                hops.iter().enumerate().map(|(i, h)| if i < last { self.gateway_of.get(h).copied() } else { None }).collect();
            let radio_edge = hops.windows(2).position(|w| {
                let (a, b) = (self.topo.kind(w[0]), self.topo.kind(w[1]));
                (a.is_device() && b == NodeKind::Cell) || (a == NodeKind::Cell && b.is_device())
            });
            Rc::new(CachedPath { hops, edge_lat, boundaries, gateway_at, radio_edge })
        });
        self.paths.insert((src, dst), built.clone());
        built
    }

    fn on_send(&mut self, eng: &mut Engine<Ev>, pid: u64) {
        let now = eng.now();
        let p = self.packets.get(&pid).expect("in flight");
        let n = self.buckets.len();
        let b = &mut self.buckets[Self::bucket_idx(p.bucket, n)];
        b.sent += 1;
        b.sent_bytes += p.packet.size_bytes as u64;
        let (size, early, src, dst) = (p.packet.size_bytes, p.early_drop, p.packet.src, p.packet.dst);
        let p = self.packets.remove(&pid).expect("in flight");
        self.observe(now, ObservationKind::Sent, &p, size as u64);
        self.packets.insert(pid, p);
        if let Some(r) = early {
            return self.drop_packet(eng, pid, r);
        }
        let Some(path) = self.path(src, dst) else {
            return self.drop_packet(eng, pid, DropReason::Unreachable);
        };
        if !path.boundaries.is_empty() {
            let p = &self.packets[&pid];
            let header = PacketHeader {
                class: p.packet.class,
                slice_id: p.packet.slice.map(|s| self.slices.get(s).id.clone()).unwrap_or_default(),
                src_kind: self.topo.kind(src).into(),
                dst_kind: self.topo.kind(dst).into(),
            };
            if path.boundaries.iter().any(|&b| !firewall_check(&header, b, &self.sc.firewall).is_allow()) {
                return self.drop_packet(eng, pid, DropReason::FirewallDenied);
            }
        }
        self.packets.get_mut(&pid).expect("in flight").path = Some(path);
        self.advance(eng, pid, 0);
    }

    /// The packet is at hop `hop` at the current time. Applies the gateway
    /// flow table if one sits here, then walks forward until the next stop.
    fn advance(&mut self, eng: &mut Engine<Ev>, pid: u64, hop: usize) {
        let now = eng.now();
        let p = &self.packets[&pid];
        let path = p.path.clone().expect("routed");
        let bucket = p.bucket;
        let last = path.hops.len() - 1;
        if hop == last {
            eng.schedule(Ev::PacketArrive { pid, bucket }, now).expect("now");
            return;
        }
        if let Some(g) = path.gateway_at[hop] {
            let gw = &self.gateways[g as usize];
            let header = FlowHeader {
                src: self.topo.id(p.packet.src),
                dst: self.topo.id(p.packet.dst),
                class: p.packet.class,
                port_label: &p.port,
            };
            let iface_up = |i: &String| gw.up.contains(i);
            let verdict = match flow_match(&gw.table, &header) {
                FlowAction::Drop => Err(DropReason::FlowTableDrop),
                FlowAction::ToController => Ok(false),
                FlowAction::Forward(i) if !iface_up(i) => Err(DropReason::LinkDown),
                FlowAction::Duplicate(a, b) if !iface_up(a) && !iface_up(b) => Err(DropReason::LinkDown),
                _ => Ok(true),
            };
            match verdict {
                Err(r) => {
                    if r == DropReason::LinkDown {
                        if let Some(m) = self.gateways[g as usize].migration.as_mut() {
                            m.lost += 1;
                        }
                    }
                    return self.drop_packet(eng, pid, r);
                }
                Ok(false) => {
                    let gw = &mut self.gateways[g as usize];
                    gw.packet_ins += 1;
                    let ctrl = self.sc.gateways[g as usize].timing.control_latency_ns;
                    eng.schedule_in(Ev::ControllerInstall { gw: g, pid, hop: hop as u16 }, 2 * ctrl);
                    return;
                }
                Ok(true) => {}
            }
        }

        let mut t = now;
        let mut h = hop;
        loop {
            if path.radio_edge == Some(h) && !self.packets[&pid].radio_done {
                if t != now {
                    eng.schedule(Ev::PacketHop { pid, bucket, hop: h as u16 }, t).expect("future");
                    return;
                }
                let packet = self.packets[&pid].packet;
                match self.radio.transmit(&self.topo, &self.attach, &self.slices, now, &packet, &mut self.jitter) {
                    Ok(DeliveryOutcome::Delivered(d)) => {
                        self.packets.get_mut(&pid).expect("in flight").radio_done = true;
                        t = d.delivered_at;
                    }
                    Ok(DeliveryOutcome::Dropped(r)) => return self.drop_packet(eng, pid, r),
                    Err(RadioError::Detached { .. }) => return self.drop_packet(eng, pid, DropReason::Detached),
                    Err(_) => return self.drop_packet(eng, pid, DropReason::NoSlice),
                }
            } else {
                t += path.edge_lat[h];
            }
            h += 1;
            if h == last {
                eng.schedule(Ev::PacketArrive { pid, bucket }, t).expect("future");
                return;
            }
            if path.gateway_at[h].is_some() {
                eng.schedule(Ev::PacketHop { pid, bucket, hop: h as u16 }, t).expect("future");
                return;
            }
        }
    }

    fn on_controller(&mut self, eng: &mut Engine<Ev>, g: usize, pid: u64, hop: usize) {
        let now = eng.now();
        let p = &self.packets[&pid];
        let gw_id = &self.sc.gateways[g].id;
        let gw = &mut self.gateways[g];
        let mut rule = FlowRule::new(
            1,
            FlowMatch { dst: Some(self.topo.id(p.packet.dst).to_string()), ..FlowMatch::default() },
            FlowAction::Forward(gw.active.clone()),
        );
        rule.installed_at = now;
        if let Ok(m) = self.controller.install_flow(gw_id, rule) {
            m.apply(&mut gw.table);
        }
        self.advance(eng, pid, hop);
    }

    fn drop_packet(&mut self, eng: &mut Engine<Ev>, pid: u64, reason: DropReason) {
        let bucket = self.packets[&pid].bucket;
        eng.schedule(Ev::PacketDrop { pid, bucket, reason }, eng.now()).expect("now");
    }

    fn on_drop(&mut self, now: Nanos, pid: u64, reason: DropReason) {
        let p = self.packets.remove(&pid).expect("in flight");
        let n = self.buckets.len();
        self.buckets[Self::bucket_idx(p.bucket, n)].dropped += 1;
        *self.drops.entry(reason).or_default() += 1;
        self.observe(now, ObservationKind::Dropped, &p, drop_code(reason));
    }

    fn on_arrive(&mut self, now: Nanos, pid: u64) {
        let p = self.packets.remove(&pid).expect("in flight");
        let latency = now - p.packet.created_at;
        let n = self.buckets.len();
        let b = &mut self.buckets[Self::bucket_idx(p.bucket, n)];
        b.delivered += 1;
        b.delivered_bytes += p.packet.size_bytes as u64;
        if now <= p.packet.deadline {
            b.within += 1;
        }
        if let Some(key) = p.sync {
            let e = self.sync_rounds.entry(key).or_insert((now, now, 0));
            e.0 = e.0.min(now);
            e.1 = e.1.max(now);
            e.2 += 1;
        }
        if self.record_paths {
            let hops = p.path.as_ref().map(|path| path.hops.iter().map(|&h| self.topo.id(h).to_string()).collect());
            self.delivered_paths.push((pid, hops.unwrap_or_default()));
        }
        self.observe(now, ObservationKind::Delivered, &p, latency);
    }

    // ---- traffic sources ----------------------------------------------

    fn first_emission(&mut self, i: usize) -> Option<Nanos> {
        let f = &self.sc.traffic[i];
        let st = &mut self.flows[i];
        let t = if f.period_ns.is_some() {
            f.start_ns
        } else if let Some(mean) = f.poisson_mean_ns {
            f.start_ns + st.rng.exponential_ns(mean as f64)
        } else {
            *f.schedule_ns.iter().min()?
        };
        (t < st.end).then_some(t)
    }

    fn on_flow_emit(&mut self, eng: &mut Engine<Ev>, i: usize) {
        let now = eng.now();
        let f = &self.sc.traffic[i];
        let st = &mut self.flows[i];
        let seq = st.seq;
        st.seq += 1;
        let next = if let Some(p) = f.period_ns {
            Some(f.start_ns + st.seq as Nanos * p)
        } else if let Some(mean) = f.poisson_mean_ns {
            Some(now + st.rng.exponential_ns(mean as f64))
        } else {
            // schedule entries after this one, in time order
            let mut sorted = f.schedule_ns.clone();
            sorted.sort_unstable();
            sorted.get(st.seq as usize).copied()
        };
        let (src, dst, slice, port, sync, end) = (st.src, st.dst, st.slice, st.port.clone(), st.sync, st.end);
        if let Some(t) = next.filter(|&t| t < end) {
            eng.schedule(Ev::FlowEmit { flow: i as u32 }, t).expect("future");
        }
        self.spawn(eng, now, src, dst, f.size_bytes, f.class, slice, f.deadline_ns, port, sync.map(|g| (g, seq)));
    }

    /// Charges sleep energy up to `t`. Returns false once the device is dead.
    fn charge(&mut self, d: usize, t: Nanos) -> bool {
        let s = &mut self.devices[d];
        if s.dead_at.is_some() {
            return false;
        }
        let dt = t.saturating_sub(s.charged_to);
        if let Some(left) = s.battery.sleep_time_left() {
            if left <= dt {
                s.battery.consume(EnergyOp::Sleep(left));
                s.dead_at = Some(s.charged_to + left);
                s.charged_to = t;
                return false;
            }
        }
        s.battery.consume(EnergyOp::Sleep(dt));
        s.charged_to = t.max(s.charged_to);
        true
    }

    fn on_sample(&mut self, eng: &mut Engine<Ev>, d: usize) {
        let now = eng.now();
        if !self.charge(d, now) {
            return;
        }
        let cfg = &self.sc.devices[d];
        let recs = sample_all(self.seed, self.devices[d].node, &cfg.sensors, now, cfg.alarm_threshold);
        match cfg.mode {
            GatewayMode::Online => self.device_transmit(eng, d, recs),
            GatewayMode::Sleep => {
                let alarms: Vec<_> = recs.into_iter().filter(|r| r.alarm).collect();
                if !alarms.is_empty() {
                    self.device_transmit(eng, d, alarms);
                }
            }
            GatewayMode::Interval(p) => {
                let s = &mut self.devices[d];
                s.buffer.extend(recs);
                if !s.flush_pending {
                    let at = crate::gateway::next_flush_at(p, cfg.phase_ns, now);
                    if at < self.sc.duration_ns {
                        s.flush_pending = true;
                        eng.schedule(Ev::DeviceFlush { dev: d as u32 }, at).expect("future");
                    }
                }
            }
        }
        let next = now + cfg.sample_period_ns;
        if next < self.sc.duration_ns {
            eng.schedule(Ev::SensorSample { dev: d as u32 }, next).expect("future");
        }
    }

    fn on_device_flush(&mut self, eng: &mut Engine<Ev>, d: usize) {
        self.devices[d].flush_pending = false;
        let recs = std::mem::take(&mut self.devices[d].buffer);
        if !self.charge(d, eng.now()) {
            self.devices[d].lost += recs.len() as u64;
            return;
        }
        if !recs.is_empty() {
            self.device_transmit(eng, d, recs);
        }
    }

    fn device_transmit(&mut self, eng: &mut Engine<Ev>, d: usize, recs: Vec<SensorRecord>) {
        let now = eng.now();
        let s = &mut self.devices[d];
        s.battery.consume(EnergyOp::Tx);
        s.transmissions += 1;
        s.records += recs.len() as u64;
        if s.battery.is_dead() {
            s.dead_at = Some(now);
        }
        let (node, dst, slice) = (s.node, s.dst, s.slice);
        let parent_gw = self.attach.parent(node).and_then(|p| self.gateway_of.get(&p).copied());
        if let Some(g) = parent_gw {
            let batch = self.next_batch;
            self.next_batch += 1;
            self.batches.insert(batch, recs);
            eng.schedule_in(Ev::RecordHop { gw: g, batch }, self.sc.link_model.local_link_latency_ns);
        } else {
            let size = PACKET_HEADER_BYTES + recs.iter().map(|r| r.size_bytes()).sum::<u32>();
            let class = self.sc.devices[d].uplink.class;
            self.spawn(eng, now, node, dst, size, class, slice, None, Rc::from(""), None);
        }
    }

    fn on_record_hop(&mut self, eng: &mut Engine<Ev>, g: usize, batch: u64) {
        let now = eng.now();
        let recs = self.batches.remove(&batch).expect("batch in transit");
        self.gateways[g].records_in += recs.len() as u64;
        let cfg = &self.sc.gateways[g];
        match cfg.mode {
            GatewayMode::Online => self.gateway_emit(eng, g, recs),
            GatewayMode::Sleep => {
                let alarms: Vec<_> = recs.into_iter().filter(|r| r.alarm).collect();
                self.gateway_emit(eng, g, alarms);
            }
            GatewayMode::Interval(p) => {
                let gw = &mut self.gateways[g];
                gw.buffer.extend(recs);
                if !gw.flush_pending {
                    let at = crate::gateway::next_flush_at(p, cfg.phase_ns, now);
                    if at < self.sc.duration_ns {
                        gw.flush_pending = true;
                        eng.schedule(Ev::GatewayFlush { gw: g as u32 }, at).expect("future");
                    }
                }
            }
        }
    }

    /// Aggregates `recs` and sends one packet per uplink destination.
    fn gateway_emit(&mut self, eng: &mut Engine<Ev>, g: usize, recs: Vec<SensorRecord>) {
        if recs.is_empty() {
            return;
        }
        let cfg = &self.sc.gateways[g];
        let out = aggregate(&recs, cfg.aggregation);
        let at = eng.now() + cfg.processing_ns(recs.len());
        let mut groups: BTreeMap<(NodeId, ServiceClass, Option<SliceIdx>), u32> = BTreeMap::new();
        for r in &out.records {
            let Some(&d) = self.device_of.get(&r.record.device) else { continue };
            let dev = &self.devices[d as usize];
            let class = self.sc.devices[d as usize].uplink.class;
            *groups.entry((dev.dst, class, dev.slice)).or_insert(PACKET_HEADER_BYTES) += r.size_bytes();
        }
        let gw = &mut self.gateways[g];
        gw.records_out += out.records.len() as u64;
        gw.gaps += out.gaps.len() as u64;
        gw.packets += groups.len() as u64;
        let src = gw.node;
        for ((dst, class, slice), size) in groups {
            self.spawn(eng, at, src, dst, size, class, slice, None, Rc::from(""), None);
        }
    }

    fn on_plc(&mut self, eng: &mut Engine<Ev>, i: usize) {
        let now = eng.now();
        let cfg = &self.sc.plcs[i];
        let st = &mut self.plcs[i];
        let rec = cyclic_tick(cfg, st.next_cycle, self.sc.link_model.base_latency.urllc_ns);
        st.cycles += 1;
        st.misses += (!rec.deadline_met) as u64;
        st.next_cycle += 1;
        st.sent += st.peers.len() as u64;
        let next = cfg.start_ns + st.next_cycle * cfg.cycle_time_ns;
        if next < self.sc.duration_ns {
            eng.schedule(Ev::PlcCycle { plc: i as u32 }, next).expect("future");
        }
        let (src, peers) = (st.node, st.peers.clone());
        for dst in peers {
            self.spawn(eng, now, src, dst, cfg.message_size_bytes, ServiceClass::Urllc, None, None, Rc::from(""), None);
        }
    }

    // ---- gateway radio management --------------------------------------

    fn on_quality(&mut self, eng: &mut Engine<Ev>, g: usize) {
        let now = eng.now();
        let cfg = &self.sc.gateways[g];
        let gw = &mut self.gateways[g];
        let scores: Vec<(String, f64)> =
            gw.samplers.iter_mut().map(|s| s.next_sample()).map(|q| (q.channel, q.score)).collect();
        let next = now + self.sc.quality.sample_period_ns.max(1);
        if next < self.sc.duration_ns {
            eng.schedule(Ev::QualitySample { gw: g as u32 }, next).expect("future");
        }
        let Some(rule) = cfg.auto_migration else { return };
        if gw.migration.is_some() {
            return;
        }
        let active = scores.iter().find(|(c, _)| *c == gw.active).map_or(0.0, |s| s.1);
        let alts: Vec<(&str, f64)> =
            scores.iter().filter(|(c, _)| *c != gw.active).map(|(c, s)| (c.as_str(), *s)).collect();
        if let Some(ch) = gw.trigger.observe(&rule, active, &alts) {
            let ch = ch.to_string();
            self.start_migration(eng, g, &ch, rule.strategy);
        }
    }

    fn start_migration(&mut self, eng: &mut Engine<Ev>, g: usize, channel: &str, strategy: MigrationStrategy) {
        let now = eng.now();
        let cfg = &self.sc.gateways[g];
        if self.gateways[g].migration.is_some() {
            return self.warn(format!("gateway {} at {now}: migration already in progress", cfg.id));
        }
        let radio = crate::gateway::GatewayRadio {
            radios: cfg.radios,
            channels: cfg.channels.clone(),
            active: self.gateways[g].active.clone(),
        };
        match migrate_link(&radio, channel, strategy, now, cfg.timing) {
            Err(e) => self.warn(format!("gateway {} at {now}: {e}", cfg.id)),
            Ok(plan) if plan.is_noop() => self.migrations.push(plan.report(&cfg.id, 0)),
            Ok(plan) => {
                self.gateways[g].migration = Some(ActiveMigration { plan, next: 0, lost: 0 });
                self.run_due_steps(eng, g);
            }
        }
    }

    fn run_due_steps(&mut self, eng: &mut Engine<Ev>, g: usize) {
        let now = eng.now();
        let id = self.sc.gateways[g].id.as_str();
        let gw = &mut self.gateways[g];
        let Some(m) = gw.migration.as_mut() else { return };
        while let Some(&(t, step)) = m.plan.steps.get(m.next) {
            if t > now {
                eng.schedule(Ev::MigrationStep { gw: g as u32 }, t).expect("future");
                return;
            }
            match step {
                MigrationStep::NewLinkUp => {
                    gw.up.insert(m.plan.new_channel.clone());
                }
                MigrationStep::SwitchUpdate => {
                    if let Ok(fm) = self.controller.redirect(id, &m.plan.old_channel, &m.plan.new_channel) {
                        fm.apply(&mut gw.table);
                    }
                    gw.active = m.plan.new_channel.clone();
                }
                MigrationStep::OldLinkDown => {
                    gw.up.remove(&m.plan.old_channel);
                }
            }
            m.next += 1;
        }
        let done = gw.migration.take().expect("checked above");
        self.migrations.push(done.plan.report(id, done.lost));
    }

    fn on_outage(&mut self, idx: usize) {
        let o = &self.sc.link_outages[idx];
        let g = self.sc.gateways.iter().position(|c| c.id == o.gateway).expect("validated");
        let mut graph = MeshGraph::new();
        for c in &self.sc.gateways {
            graph.add_node(&c.id);
            for n in &c.mesh_neighbors {
                graph.add_edge(&c.id, n);
            }
        }
        let uplinks: BTreeSet<String> = self
            .sc
            .gateways
            .iter()
            .zip(&self.gateways)
            .filter(|(c, rt)| {
                c.id != o.gateway && self.attach.parent(rt.node).is_some_and(|p| self.topo.kind(p) == NodeKind::Cell)
            })
            .map(|(c, _)| c.id.clone())
            .collect();
        let node = self.gateways[g].node;
        match mesh_route(&graph, &o.gateway, &uplinks) {
            Ok(path) => {
                let via = self.topo.lookup(&path[1]).expect("configured gateway");
                if let Err(e) = self.attach.reattach(&self.topo, node, Some(via)) {
                    self.warn(format!("link outage at {}: {e}", o.time_ns));
                }
                self.gateways[g].mesh_path = Some(path);
            }
            Err(e) => {
                self.attach.reattach(&self.topo, node, None).expect("detaching cannot form a cycle");
                self.warn(format!("link outage at {}: {e}", o.time_ns));
            }
        }
        self.topology_changed();
    }

    fn on_actuation(&mut self, now: Nanos, a: usize, c: usize) {
        let cfg = &self.sc.actuators[a];
        let cmd = &cfg.commands[c];
        match cfg.actuator.actuate(cmd.axis, cmd.units, now) {
            Ok(r) => {
                let st = &mut self.actuators[a];
                st.commands += 1;
                st.stalls += r.stall_detected as u64;
                let err = r.position_error().abs();
                if err > 0.0 {
                    st.undetected += 1;
                }
                st.max_err = st.max_err.max(err);
            }
            Err(e) => self.warn(format!("actuator {} at {now}: {e}", cfg.id)),
        }
    }

    fn topology_changed(&mut self) {
        self.paths.clear();
        self.update_density();
    }

    fn update_density(&mut self) {
        let mut counts: BTreeMap<NodeId, u64> = self.topo.cell_ids().map(|c| (c, 0)).collect();
        for d in self.topo.device_ids() {
            if let Some(c) = self.attach.root_cell(&self.topo, d) {
                *counts.entry(c).or_default() += 1;
            }
        }
        for (c, n) in counts {
            let e = self.peak.entry(c).or_default();
            *e = (*e).max(n);
        }
    }

    // ---- report --------------------------------------------------------

    fn report(&mut self) -> KpiReport {
        let sc = self.sc;
        let horizon = sc.duration_ns;
        for d in 0..self.devices.len() {
            let t = horizon.max(self.devices[d].charged_to);
            self.charge(d, t);
        }
        let secs = horizon as f64 / NS_PER_SEC as f64;
        let n = self.buckets.len();
        let mut slices = Vec::new();
        for b in 0..n {
            let st = self.buckets[b];
            let key = if b == n - 1 { UNSLICED } else { b as u32 };
            let sl = (key != UNSLICED).then(|| self.slices.get(SliceIdx(key)));
            if sl.is_none() && st.sent == 0 {
                continue;
            }
            let lat = self.trace.sorted_latencies(key);
            let pct = |p| percentile_sorted(&lat, p).expect("non-empty");
            let latency = (!lat.is_empty()).then(|| LatencyStats {
                p50_ns: pct(0.5),
                p99_ns: pct(0.99),
                p999_ns: pct(0.999),
                p9999_ns: pct(0.9999),
                max_ns: *lat.last().expect("non-empty"),
                mean_ns: lat.iter().map(|&x| x as f64).sum::<f64>() / lat.len() as f64,
            });
            let offered_bps = st.sent_bytes as f64 * 8.0 / secs;
            let delivered_bps = st.delivered_bytes as f64 * 8.0 / secs;
            slices.push(SliceReport {
                id: sl.map_or_else(|| "-".to_string(), |s| s.id.clone()),
                class: sl.map(|s| s.service_class),
                admitted: sl.is_some_and(|s| s.admitted),
                rejection: sl.and_then(|s| s.rejection.as_ref()).map(|r| r.to_string()),
                reserved_rate_bps: sl.map_or(0, |s| s.reserved_rate_bps),
                deadline_ns: sl.map(|s| s.deadline_ns),
                sent: st.sent,
                delivered: st.delivered,
                dropped: st.dropped,
                delivered_within_deadline: st.within,
                deadline_ratio: (st.sent > 0).then(|| st.within as f64 / st.sent as f64),
                latency,
                offered_bps,
                delivered_bps,
                throughput_ratio: (st.sent_bytes > 0).then(|| st.delivered_bytes as f64 / st.sent_bytes as f64),
            });
        }

        let plcs = sc
            .plcs
            .iter()
            .zip(&self.plcs)
            .map(|(cfg, st)| PlcReport {
                id: cfg.id.clone(),
                placement: match cfg.placement {
                    Placement::OnDevice => "ON_DEVICE".into(),
                    Placement::EdgeCloud => "EDGE_CLOUD".into(),
                },
                cycle_time_ns: cfg.cycle_time_ns,
                cycle_duration_ns: cfg.cycle_duration(sc.link_model.base_latency.urllc_ns),
                cycles: st.cycles,
                misses: st.misses,
                miss_ratio: if st.cycles == 0 { 0.0 } else { st.misses as f64 / st.cycles as f64 },
                messages_sent: st.sent,
            })
            .collect();

        let devices = sc
            .devices
            .iter()
            .zip(&self.devices)
            .map(|(cfg, st)| {
                let alive = st.dead_at.unwrap_or(horizon).min(horizon).max(1);
                let duty = st.transmissions as f64 / (alive as f64 / NS_PER_HOUR as f64);
                DeviceReport {
                    id: cfg.id.clone(),
                    mode: match cfg.mode {
                        GatewayMode::Online => "ONLINE".into(),
                        GatewayMode::Interval(p) => format!("INTERVAL({p})"),
                        GatewayMode::Sleep => "SLEEP".into(),
                    },
                    transmissions: st.transmissions,
                    records: st.records,
                    records_lost: st.lost + st.buffer.len() as u64,
                    consumed_j: st.battery.consumed_aj() as f64 / 1e18,
                    consumed_aj: st.battery.consumed_aj(),
                    remaining_j: st.battery.remaining_j().max(0.0),
                    duty_per_hour: duty,
                    lifetime_years: lifetime_estimate(&cfg.energy, duty),
                    death_time_ns: st.dead_at,
                }
            })
            .collect();

        let cells = self
            .topo
            .cell_ids()
            .map(|c| {
                let cell = self.topo.cell(c).expect("cell id");
                let peak = self.peak.get(&c).copied().unwrap_or(0);
                CellReport {
                    id: cell.id.clone(),
                    capacity_bps: cell.capacity_bps,
                    admitted_rate_bps: self.slices.reserved_in(c),
                    area_m2: cell.area_m2,
                    peak_devices: peak,
                    peak_density_per_km2: peak as f64 / cell.area_m2 * crate::model::M2_PER_KM2,
                }
            })
            .collect();

        let gateways = sc
            .gateways
            .iter()
            .zip(&self.gateways)
            .map(|(cfg, st)| GatewayReport {
                id: cfg.id.clone(),
                active_channel: st.active.clone(),
                records_in: st.records_in,
                records_out: st.records_out,
                packets: st.packets,
                gaps: st.gaps,
                packet_ins: st.packet_ins,
                flow_rules: st.table.len() as u64,
                mesh_path: st.mesh_path.clone(),
            })
            .collect();

        let actuators = sc
            .actuators
            .iter()
            .zip(&self.actuators)
            .map(|(cfg, st)| ActuatorReport {
                id: cfg.id.clone(),
                commands: st.commands,
                stalls_detected: st.stalls,
                undetected_stalls: st.undetected,
                max_position_error: st.max_err,
            })
            .collect();

        let mut sync: Vec<(u64, Nanos)> = vec![(0, 0); self.sync_groups.len()];
        for (&(g, _), &(lo, hi, n)) in &self.sync_rounds {
            if n >= 2 {
                let e = &mut sync[g as usize];
                e.0 += 1;
                e.1 = e.1.max(hi - lo);
            }
        }
        let sync_groups = self
            .sync_groups
            .iter()
            .zip(sync)
            .map(|(g, (rounds, skew))| SyncReport { group: g.clone(), rounds, max_skew_ns: skew })
            .collect();

        let mut assumptions: Vec<String> = DEFAULT_ASSUMPTIONS.iter().map(|s| s.to_string()).collect();
        assumptions.push("latency is one-way, from packet creation to arrival at the destination".into());
        assumptions.push("edge cloud PLC cycles add a fixed URLLC one-way latency each way".into());

        let mut report = KpiReport {
            scenario: sc.name.clone(),
            seed: self.seed,
            duration_ns: horizon,
            assumptions,
            warnings: self.warnings.clone(),
            slices,
            plcs,
            devices,
            cells,
            gateways,
            migrations: self.migrations.clone(),
            actuators,
            sync_groups,
            drops: self.drops.iter().map(|(r, n)| (r.as_str().to_string(), *n)).collect(),
            thresholds: Vec::new(),
            pass: true,
        };
        report.thresholds = evaluate_thresholds(&report, &sc.thresholds);
        report.pass = report.thresholds.iter().all(|t| t.pass);
        report
    }
}
