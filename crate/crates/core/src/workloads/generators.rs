use super::scenario::{Flow, Reattach, Scenario, SensorDeviceConfig, SliceThreshold, Uplink};
use crate::corenet::{Boundary, FirewallAction, FirewallRule, HeaderMatch, SliceRequest};
use crate::devices::{EnergyParams, SensorKind};
use crate::engine::RngStream;
use crate::gateway::GatewayMode;
use crate::model::{
    BaseStation, BitsPerSecond, Cell, Core, CoreKind, DeviceKind, DeviceRef, Nanos, Network, NetworkKind,
    ServiceClass, Topology, WiredLink, M2_PER_KM2, NS_PER_HOUR, NS_PER_MS, NS_PER_SEC, NS_PER_US,
};

/// Propagation delay of fibre backhaul.
pub const PROPAGATION_NS_PER_KM: Nanos = 5 * NS_PER_US;

const CELL_CAPACITY: BitsPerSecond = 1_000_000_000;

fn cell(id: &str, bs: &str, area_m2: f64) -> Cell {
    Cell { id: id.into(), area_m2, capacity_bps: CELL_CAPACITY, base_station: bs.into() }
}

fn bs(id: &str, core: &str) -> BaseStation {
    BaseStation { id: id.into(), core: core.into(), edge_cloud_capacity_ops: 0 }
}

fn private_core(targets: &[&str]) -> Core {
    Core {
        id: "core".into(),
        kind: CoreKind::Private,
        breakout_targets: targets.iter().map(|s| s.to_string()).collect(),
        functions: ["AMF", "SMF", "UPF"].iter().map(|s| s.to_string()).collect(),
    }
}

fn net(id: &str, kind: NetworkKind) -> Network {
    Network { id: id.into(), kind }
}

fn dev(id: &str, kind: DeviceKind, attachment: &str) -> DeviceRef {
    DeviceRef { id: id.into(), kind, attachment: attachment.into() }
}

fn slice(id: &str, class: ServiceClass, rate: BitsPerSecond, cells: &[String]) -> SliceRequest {
    SliceRequest {
        id: id.into(),
        service_class: class,
        reserved_rate_bps: rate,
        cell_ids: cells.to_vec(),
        deadline_ns: None,
        density_claim_per_km2: None,
    }
}

fn allow(boundary: Boundary, class: ServiceClass) -> FirewallRule {
    FirewallRule { boundary, matches: HeaderMatch { class: Some(class), ..Default::default() }, action: FirewallAction::Allow }
}

fn periodic(id: &str, src: &str, dst: &str, class: ServiceClass, size: u32, period: Nanos) -> Flow {
    Flow {
        id: id.into(),
        src: src.into(),
        dst: dst.into(),
        class,
        slice: None,
        size_bytes: size,
        period_ns: Some(period),
        poisson_mean_ns: None,
        schedule_ns: Vec::new(),
        start_ns: 0,
        stop_ns: None,
        port_label: String::new(),
        deadline_ns: None,
        sync_group: None,
    }
}

/// Workpiece carriers with wireless sensor devices moving between
/// production sites.
pub fn gen_smart_production(n_carriers: u32, n_sites: u32, order_change_rate_per_hour: f64, seed: u64) -> Scenario {
    let n_carriers = n_carriers.max(1);
    let n_sites = n_sites.max(1);
    let duration = 4 * NS_PER_HOUR;
    let dwell = NS_PER_HOUR;
    let mut rng = RngStream::derive(seed, "gen/smart_production");

    let mut topo = Topology {
        cores: vec![private_core(&["mes", "warehouse"])],
        networks: vec![net("mes", NetworkKind::Production), net("warehouse", NetworkKind::Company)],
        ..Topology::default()
    };
    let site_cell = |s: u32| format!("cell-site{s}");
    for s in 0..n_sites {
        topo.base_stations.push(bs(&format!("bs-site{s}"), "core"));
        topo.cells.push(cell(&site_cell(s), &format!("bs-site{s}"), 1.0e4));
    }
    let mut sc = Scenario::new("smart_production", duration, topo);
    sc.seed = seed;
    for s in 0..n_sites {
        sc.slices.push(slice(&format!("mmtc-site{s}"), ServiceClass::Mmtc, 10_000_000, &[site_cell(s)]));
    }
    sc.firewall.rules.push(allow(Boundary::PrivateCoreProductionNet, ServiceClass::Mmtc));

    for k in 0..n_carriers {
        let id = format!("carrier{k}");
        let home = k % n_sites;
        sc.topology.devices.push(dev(&id, DeviceKind::WirelessSensorDevice, &site_cell(home)));
        sc.devices.push(SensorDeviceConfig {
            id: id.clone(),
            sensors: vec![SensorKind::Accel3Axis, SensorKind::Gyro3Axis, SensorKind::Magnet3Axis, SensorKind::Temperature],
            sample_period_ns: 5 * 60 * NS_PER_SEC,
            start_ns: rng.below(5 * 60 * NS_PER_SEC),
            energy: EnergyParams::default(),
            // shock detection on the accelerometer magnitude
            alarm_threshold: Some(33.0),
            mode: GatewayMode::Interval(15 * 60 * NS_PER_SEC),
            phase_ns: rng.below(15 * 60 * NS_PER_SEC),
            uplink: Uplink { dst: "mes".into(), class: ServiceClass::Mmtc, slice: None },
        });
        // carrier k moves to the next site every hour, staggered
        let offset = k as u64 * dwell / n_carriers as u64;
        let mut checkins = Vec::new();
        let mut j = 1;
        while offset + j * dwell < duration {
            let t = offset + j * dwell;
            sc.mobility.push(Reattach { time_ns: t, device: id.clone(), attach_to: site_cell((home + j as u32) % n_sites) });
            checkins.push(t + NS_PER_MS);
            j += 1;
        }
        if !checkins.is_empty() {
            let mut f = periodic(&format!("checkin-{k}"), &id, "warehouse", ServiceClass::Mmtc, 64, 1);
            f.period_ns = None;
            f.schedule_ns = checkins;
            sc.traffic.push(f);
        }
        if order_change_rate_per_hour > 0.0 {
            let mut f = periodic(&format!("orders-{k}"), "mes", &id, ServiceClass::Mmtc, 128, 1);
            f.period_ns = None;
            f.poisson_mean_ns = Some((NS_PER_HOUR as f64 / order_change_rate_per_hour).round().max(1.0) as Nanos);
            sc.traffic.push(f);
        }
    }
    sc.mobility.sort_by(|a, b| a.time_ns.cmp(&b.time_ns).then(a.device.cmp(&b.device)));
    sc
}

/// AGV convoys: masters hold the 5G attachment, slaves hang off their
/// master on a local link.
pub fn gen_agv(n_convoys: u32, slaves_per_master: u32, map_rate_bps: BitsPerSecond, seed: u64) -> Scenario {
    let n = n_convoys.max(1);
    let topo = Topology {
        cells: vec![cell("cell", "bs", 2.0e4)],
        base_stations: vec![bs("bs", "core")],
        cores: vec![private_core(&["fleet", "mapsrv"])],
        networks: vec![net("fleet", NetworkKind::Production), net("mapsrv", NetworkKind::Production)],
        ..Topology::default()
    };
    let mut sc = Scenario::new("agv", 10 * NS_PER_SEC, topo);
    sc.seed = seed;
    let mut rng = RngStream::derive(seed, "gen/agv");
    let cells = vec!["cell".to_string()];
    sc.slices.push(slice("urllc-control", ServiceClass::Urllc, 20_000_000, &cells));
    sc.firewall.rules.push(allow(Boundary::PrivateCoreProductionNet, ServiceClass::Urllc));

    let master = |i: u32| format!("agv{i}");
    for i in 0..n {
        sc.topology.devices.push(dev(&master(i), DeviceKind::EdgePlc, "cell"));
        let mut ctl = periodic(&format!("ctl-{i}"), &master(i), "fleet", ServiceClass::Urllc, 100, 10 * NS_PER_MS);
        ctl.start_ns = rng.below(10 * NS_PER_MS);
        sc.traffic.push(ctl);
        for j in 0..slaves_per_master {
            let s = format!("agv{i}-s{j}");
            sc.topology.devices.push(dev(&s, DeviceKind::Actuator, &master(i)));
            let mut f = periodic(&format!("ctl-{i}-{j}"), &master(i), &s, ServiceClass::Urllc, 32, 10 * NS_PER_MS);
            f.start_ns = rng.below(10 * NS_PER_MS);
            sc.traffic.push(f);
        }
    }

    if map_rate_bps > 0 {
        const MAP_PACKET: u32 = 1500;
        let total = map_rate_bps * n as u64;
        // keep the map slice at 80% load
        sc.slices.push(slice("embb-maps", ServiceClass::Embb, total.div_ceil(4) * 5, &cells));
        sc.firewall.rules.push(allow(Boundary::PrivateCoreProductionNet, ServiceClass::Embb));
        let per_peer = if n > 1 { map_rate_bps / (n as u64 - 1) } else { map_rate_bps };
        let period = (MAP_PACKET as u64 * 8 * NS_PER_SEC).div_ceil(per_peer.max(1));
        for i in 0..n {
            let peers: Vec<String> = if n > 1 { (0..n).filter(|&k| k != i).map(master).collect() } else { vec!["mapsrv".into()] };
            for p in peers {
                let mut f = periodic(&format!("map-{i}-{p}"), &master(i), &p, ServiceClass::Embb, MAP_PACKET, period);
                f.sync_group = Some("maps".into());
                sc.traffic.push(f);
            }
        }
    }
    sc
}

/// Extra knobs for [`gen_condition_monitoring`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionMonitoringOptions {
    pub sample_period_ns: Nanos,
    pub interval_ns: Nanos,
    /// Every n-th sensor runs in SLEEP mode; 0 disables.
    pub sleep_every: u32,
    pub camera_rate_bps: Option<BitsPerSecond>,
    pub duration_ns: Nanos,
}

impl Default for ConditionMonitoringOptions {
    fn default() -> Self {
        Self {
            sample_period_ns: NS_PER_HOUR,
            interval_ns: NS_PER_HOUR,
            sleep_every: 10,
            camera_rate_bps: None,
            duration_ns: 24 * NS_PER_HOUR,
        }
    }
}

/// Many small wireless sensors over a shop floor split into two cells.
pub fn gen_condition_monitoring(n_sensors: u32, area_m2: f64, reconfig_events: u32, seed: u64) -> Scenario {
    gen_condition_monitoring_with(n_sensors, area_m2, reconfig_events, seed, ConditionMonitoringOptions::default())
}

pub fn gen_condition_monitoring_with(
    n_sensors: u32,
    area_m2: f64,
    reconfig_events: u32,
    seed: u64,
    opt: ConditionMonitoringOptions,
) -> Scenario {
    let n = n_sensors.max(1);
    let topo = Topology {
        cells: vec![cell("cell-a", "bs", area_m2 / 2.0), cell("cell-b", "bs", area_m2 / 2.0)],
        base_stations: vec![bs("bs", "core")],
        cores: vec![private_core(&["cms"])],
        networks: vec![net("cms", NetworkKind::Production)],
        ..Topology::default()
    };
    let mut sc = Scenario::new("condition_monitoring", opt.duration_ns, topo);
    sc.seed = seed;
    let mut rng = RngStream::derive(seed, "gen/condition_monitoring");
    let cells = vec!["cell-a".to_string(), "cell-b".to_string()];
    let mut mmtc = slice("mmtc", ServiceClass::Mmtc, 10_000_000, &cells);
    mmtc.density_claim_per_km2 = Some(n as f64 / area_m2 * M2_PER_KM2);
    sc.slices.push(mmtc);
    sc.firewall.rules.push(allow(Boundary::PrivateCoreProductionNet, ServiceClass::Mmtc));
    sc.thresholds.slices.push(SliceThreshold {
        slice: "mmtc".into(),
        min_deadline_ratio: Some(0.99),
        require_admitted: true,
        ..Default::default()
    });

    let name = |i: u32| format!("ws{i:05}");
    for i in 0..n {
        sc.topology.devices.push(dev(&name(i), DeviceKind::WirelessSensorDevice, &cells[(i % 2) as usize]));
        let sleep = opt.sleep_every > 0 && i % opt.sleep_every == opt.sleep_every - 1;
        sc.devices.push(SensorDeviceConfig {
            id: name(i),
            sensors: vec![SensorKind::Acoustic],
            sample_period_ns: opt.sample_period_ns,
            start_ns: rng.below(opt.sample_period_ns),
            energy: EnergyParams::default(),
            alarm_threshold: Some(88.0),
            mode: if sleep { GatewayMode::Sleep } else { GatewayMode::Interval(opt.interval_ns) },
            phase_ns: rng.below(opt.interval_ns),
            uplink: Uplink { dst: "cms".into(), class: ServiceClass::Mmtc, slice: None },
        });
    }
    for _ in 0..reconfig_events {
        let i = rng.below(n as u64) as u32;
        let t = 1 + rng.below(opt.duration_ns - 1);
        sc.mobility.push(Reattach { time_ns: t, device: name(i), attach_to: cells[rng.below(2) as usize].clone() });
    }
    sc.mobility.sort_by(|a, b| a.time_ns.cmp(&b.time_ns).then(a.device.cmp(&b.device)));

    if let Some(rate) = opt.camera_rate_bps.filter(|&r| r > 0) {
        sc.topology.devices.push(dev("camera", DeviceKind::Sensor, "cell-a"));
        sc.slices.push(slice("embb-camera", ServiceClass::Embb, rate.div_ceil(4) * 5, &cells[..1]));
        sc.firewall.rules.push(allow(Boundary::PrivateCoreProductionNet, ServiceClass::Embb));
        let period = (1500 * 8 * NS_PER_SEC).div_ceil(rate);
        sc.traffic.push(periodic("camera", "camera", "cms", ServiceClass::Embb, 1500, period));
    }
    sc
}

/// Pipeline measurement spots in a chain, each with its own cell, backhauled
/// to one core over distance-proportional links.
pub fn gen_retrofit(n_spots: u32, spot_distance_km: f64, seed: u64) -> Scenario {
    let n = n_spots.max(1);
    let mut topo = Topology {
        cores: vec![private_core(&["monitoring"])],
        networks: vec![net("monitoring", NetworkKind::Production)],
        ..Topology::default()
    };
    for i in 0..n {
        let b = format!("bs{i}");
        topo.base_stations.push(bs(&b, "core"));
        topo.cells.push(cell(&format!("spot{i}"), &b, 1.0e6));
        topo.devices.push(dev(&format!("meter{i}"), DeviceKind::WirelessSensorDevice, &format!("spot{i}")));
        let km = i as f64 * spot_distance_km;
        topo.wired_links.push(WiredLink {
            a: b,
            b: "core".into(),
            latency_ns: (km * PROPAGATION_NS_PER_KM as f64).round() as Nanos,
            rate_bps: 10_000_000_000,
        });
    }
    let mut sc = Scenario::new("retrofit", 24 * NS_PER_HOUR, topo);
    sc.seed = seed;
    let mut rng = RngStream::derive(seed, "gen/retrofit");
    let cells: Vec<String> = (0..n).map(|i| format!("spot{i}")).collect();
    sc.slices.push(slice("mmtc", ServiceClass::Mmtc, 1_000_000, &cells));
    sc.firewall.rules.push(allow(Boundary::PrivateCoreProductionNet, ServiceClass::Mmtc));
    for i in 0..n {
        sc.devices.push(SensorDeviceConfig {
            id: format!("meter{i}"),
            sensors: vec![SensorKind::Gas, SensorKind::Temperature],
            sample_period_ns: 15 * 60 * NS_PER_SEC,
            start_ns: rng.below(15 * 60 * NS_PER_SEC),
            energy: EnergyParams::default(),
            alarm_threshold: Some(990.0),
            mode: GatewayMode::Interval(NS_PER_HOUR),
            phase_ns: rng.below(NS_PER_HOUR),
            uplink: Uplink { dst: "monitoring".into(), class: ServiceClass::Mmtc, slice: None },
        });
    }
    sc
}
