//! Acceptance suite. Each criterion prints one PASS/FAIL line; run with
//! `cargo test --test acceptance -- --nocapture` to see them.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use fab5g::corenet::{admit_slice, SliceRequest};
use fab5g::devices::{lifetime_estimate, sample_all, simulate_lifetime, EnergyParams};
use fab5g::engine::{write_event_log, RngStream};
use fab5g::gateway::{
    flow_match, mesh_route, next_flush_at, FlowAction, FlowHeader, FlowMatch, FlowRule, FlowTable, GatewayMode, MeshGraph,
};
use fab5g::harness::{
    deadline_reliability, latency_percentile, parse_scenario_str, run, run_with, KpiReport, ObservationKind, RunOptions,
    Strictness, UNSLICED,
};
use fab5g::model::{
    validate_topology, BaseStation, Cell, Core, CoreKind, ServiceClass, SliceTable, TargetOverrides, Topology,
    NS_PER_HOUR, NS_PER_MS, NS_PER_SEC,
};
use fab5g::workloads::{
    gen_agv, gen_condition_monitoring, gen_condition_monitoring_with, gen_retrofit, gen_smart_production,
    ConditionMonitoringOptions, Scenario,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario(text: &str) -> Scenario {
    parse_scenario_str(text, Strictness::Strict).unwrap_or_else(|e| panic!("{e}\n{text}")).scenario
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// One private core with a single cell and the given breakout networks.
fn single_cell(name: &str, duration_ns: u64, capacity_bps: u64, networks: &[&str]) -> String {
    let mut s = format!(
        r#"
name = "{name}"
seed = 11
duration_ns = {duration_ns}

[[topology.cells]]
id = "cell"
area_m2 = 10000.0
capacity_bps = {capacity_bps}
base_station = "bs"

[[topology.base_stations]]
id = "bs"
core = "core"

[[topology.cores]]
id = "core"
kind = "PRIVATE"
breakout_targets = {networks:?}
"#
    );
    for n in networks {
        s += &format!("\n[[topology.networks]]\nid = \"{n}\"\nkind = \"PRODUCTION\"\n");
    }
    for class in ["URLLC", "EMBB", "MMTC"] {
        s += &format!(
            "\n[[firewall.rules]]\nboundary = \"PRIVATE_CORE_PRODUCTION_NET\"\naction = \"ALLOW\"\nmatch = {{ class = \"{class}\" }}\n"
        );
    }
    s
}

fn device(id: &str, kind: &str, attachment: &str) -> String {
    format!("\n[[topology.devices]]\nid = \"{id}\"\nkind = \"{kind}\"\nattachment = \"{attachment}\"\n")
}

fn slice(id: &str, class: &str, rate: u64) -> String {
    format!("\n[[slices]]\nid = \"{id}\"\nservice_class = \"{class}\"\nreserved_rate_bps = {rate}\ncell_ids = [\"cell\"]\n")
}

// ---- 1 ------------------------------------------------------------------

fn determinism() -> Outcome {
    let scenarios = [
        gen_agv(3, 2, 40_000_000, 5),
        gen_smart_production(8, 3, 2.0, 5),
        gen_condition_monitoring(500, 1.0e4, 6, 5),
    ];
    let mut worst = 0.0f64;
    for sc in &scenarios {
        let mut outs = Vec::new();
        for _ in 0..2 {
            let t = Instant::now();
            let o = run_with(sc, RunOptions { seed: 5, event_log: true, ..RunOptions::default() }).map_err(|e| e.to_string())?;
            worst = worst.max(secs(t.elapsed()));
            let mut log = Vec::new();
            write_event_log(&mut log, o.event_log.as_deref().unwrap_or_default()).unwrap();
            outs.push((o.report.to_json().unwrap(), log));
        }
        if outs[0] != outs[1] {
            return Err(format!("{}: runs differ", sc.name));
        }
        if outs[0].1.is_empty() {
            return Err(format!("{}: empty event log", sc.name));
        }
    }
    check(worst < 10.0, format!("3 scenarios byte-identical reports and event logs, slowest run {worst:.2} s"))
}

// ---- 2 ------------------------------------------------------------------

fn urllc_compliance() -> Outcome {
    const N: usize = 10;
    let mut text = single_cell("urllc_baseline", 100 * NS_PER_SEC, 1_000_000_000, &[]);
    for i in 0..N {
        text += &device(&format!("plc{i}"), "EDGE_PLC", "cell");
    }
    text += &slice("urllc", "URLLC", 20_000_000);
    for i in 0..N {
        text += &format!(
            "\n[[plcs]]\nid = \"plc{i}\"\ncycle_time_ns = 1000000\nio_latency_ns = 0\ncompute_time_ns = 100000\npeers = [\"plc{}\"]\n",
            (i + 1) % N
        );
    }
    let sc = scenario(&text);
    let t = Instant::now();
    let out = run(&sc, 1).map_err(|e| e.to_string())?;
    let elapsed = secs(t.elapsed());
    let s = out.report.slice("urllc").ok_or("no urllc slice in report")?;
    let lat = s.latency.as_ref().ok_or("nothing delivered")?;
    let rho = s.offered_bps / s.reserved_rate_bps as f64;
    let rel = deadline_reliability(&out.trace, NS_PER_MS, ServiceClass::Urllc).map_err(|e| e.to_string())?;
    check(
        s.admitted && s.sent >= 1_000_000 && rho <= 0.5 && lat.p9999_ns <= NS_PER_MS && rel >= 0.99999 && elapsed < 60.0,
        format!(
            "{} messages, rho {rho:.3}, p99.99 {} ns, reliability {rel:.6}, runtime {elapsed:.1} s",
            s.sent, lat.p9999_ns
        ),
    )
}

// ---- 3 ------------------------------------------------------------------

fn mmtc_density() -> Outcome {
    let opts = ConditionMonitoringOptions { sleep_every: 0, ..ConditionMonitoringOptions::default() };
    let sc = gen_condition_monitoring_with(10_000, 1.0e4, 0, 3, opts);
    let t = Instant::now();
    let out = run(&sc, 3).map_err(|e| e.to_string())?;
    let elapsed = secs(t.elapsed());
    let s = out.report.slice("mmtc").ok_or("no mmtc slice")?;
    let density: f64 = out.report.cells.iter().map(|c| c.peak_devices as f64).sum::<f64>()
        / out.report.cells.iter().map(|c| c.area_m2).sum::<f64>()
        * 1.0e6;
    let ratio = s.deadline_ratio.unwrap_or(0.0);
    check(
        s.admitted && s.deadline_ns == Some(10 * NS_PER_SEC) && ratio >= 0.99 && elapsed < 120.0,
        format!(
            "{} devices/km², admitted {}, {} messages, within 10 s {ratio:.5}, runtime {elapsed:.1} s",
            density, s.admitted, s.sent
        ),
    )
}

// ---- 4 ------------------------------------------------------------------

fn embb_throughput() -> Outcome {
    const RATE: u64 = 20_000_000_000;
    const SIZE: u64 = 1500;
    let service = SIZE * 8 * NS_PER_SEC / RATE;
    // Poisson arrivals at 80% of the slice rate
    let mean = service * 5 / 4;
    let mut text = single_cell("embb", 100 * NS_PER_MS, RATE, &["mes"]);
    text += &device("ue", "PHONE", "cell");
    text += &slice("embb", "EMBB", RATE);
    text += &format!(
        "\n[[traffic]]\nid = \"bulk\"\nsrc = \"ue\"\ndst = \"mes\"\nclass = \"EMBB\"\nsize_bytes = {SIZE}\npoisson_mean_ns = {mean}\n"
    );
    let out = run(&scenario(&text), 4).map_err(|e| e.to_string())?;
    let s = out.report.slice("embb").ok_or("no embb slice")?;
    let p99 = s.latency.as_ref().ok_or("nothing delivered")?.p99_ns;
    let rho = s.offered_bps / RATE as f64;
    let ratio = s.throughput_ratio.unwrap_or(0.0);
    check(
        ratio >= 0.95 && p99 <= 4 * NS_PER_MS && rho <= 0.81,
        format!(
            "offered {:.2} Gbit/s (rho {rho:.3}), delivered {:.2} Gbit/s, ratio {ratio:.4}, p99 {p99} ns, {} packets",
            s.offered_bps / 1e9,
            s.delivered_bps / 1e9,
            s.sent
        ),
    )
}

// ---- 5 ------------------------------------------------------------------

fn battery_lifetime() -> Outcome {
    let p = EnergyParams::default();
    let closed = lifetime_estimate(&p, 1.0);
    let stepped = simulate_lifetime(&p, 1.0);

    // the same device inside the simulator, run until the battery is empty
    let mut text = single_cell("battery", 30 * 8766 * NS_PER_HOUR, 1_000_000_000, &["cms"]);
    text += &device("wsd", "WIRELESS_SENSOR_DEVICE", "cell");
    text += &slice("mmtc", "MMTC", 1_000_000);
    text += &format!(
        "\n[[devices]]\nid = \"wsd\"\nsensors = [\"temperature\"]\nsample_period_ns = {h}\nmode = {{ INTERVAL = {h} }}\nphase_ns = {half}\n[devices.uplink]\ndst = \"cms\"\nclass = \"MMTC\"\n",
        h = NS_PER_HOUR,
        half = NS_PER_HOUR / 2
    );
    let out = run(&scenario(&text), 5).map_err(|e| e.to_string())?;
    let d = &out.report.devices[0];
    let death = d.death_time_ns.ok_or("device never died")?;
    let simulated = death as f64 / NS_PER_SEC as f64 / fab5g::model::SECONDS_PER_YEAR;
    let rel = |x: f64| (x - closed).abs() / closed;
    check(
        closed >= 10.0 && rel(stepped) < 0.01 && rel(simulated) < 0.01,
        format!("closed form {closed:.3} y, step ledger {stepped:.3} y, event simulation {simulated:.3} y"),
    )
}

// ---- 6 ------------------------------------------------------------------

fn migration_text(strategy: Option<&str>, setup_ns: u64) -> String {
    let mut text = single_cell("migration", 2 * NS_PER_SEC, 1_000_000_000, &["scada"]);
    text += &device("gw", "EDGE_GATEWAY", "cell");
    text += &slice("urllc", "URLLC", 10_000_000);
    text += &format!(
        r#"
[[gateways]]
id = "gw"
radios = 2
channels = ["ch1", "ch6"]
timing = {{ link_setup_ns = {setup_ns}, control_latency_ns = 1000000 }}

[[gateways.flow_rules]]
priority = 10
action = {{ FORWARD = "ch1" }}

[[traffic]]
id = "telemetry"
src = "gw"
dst = "scada"
class = "URLLC"
size_bytes = 64
period_ns = 1000000
"#
    );
    if let Some(s) = strategy {
        text += &format!(
            "\n[[migrations]]\ntime_ns = 1000000000\ngateway = \"gw\"\nchannel = \"ch6\"\nstrategy = \"{s}\"\n"
        );
    }
    text
}

fn make_before_break() -> Outcome {
    let delivered = |r: &KpiReport| r.slice("urllc").map_or(0, |s| s.delivered);
    let base = run(&scenario(&migration_text(None, 50 * NS_PER_MS)), 6).map_err(|e| e.to_string())?.report;
    let mbb = run(&scenario(&migration_text(Some("MAKE_BEFORE_BREAK"), 50 * NS_PER_MS)), 6)
        .map_err(|e| e.to_string())?
        .report;
    let bbm = run(&scenario(&migration_text(Some("BREAK_BEFORE_MAKE"), 50 * NS_PER_MS)), 6)
        .map_err(|e| e.to_string())?
        .report;
    let mbb_loss = delivered(&base) as i64 - delivered(&mbb) as i64;
    let bbm_loss = delivered(&base) as i64 - delivered(&bbm) as i64;
    let reported = |r: &KpiReport| r.migrations.first().map(|m| m.packets_lost_during_migration);
    check(
        mbb_loss == 0
            && reported(&mbb) == Some(0)
            && mbb.gateways[0].active_channel == "ch6"
            && (49..=51).contains(&bbm_loss)
            && reported(&bbm) == Some(bbm_loss as u64),
        format!(
            "baseline {} delivered; make-before-break loses {mbb_loss}, break-before-make with 50 ms gap loses {bbm_loss}",
            delivered(&base)
        ),
    )
}

// ---- 7 ------------------------------------------------------------------

fn linear_scan<'a>(rules: &'a [FlowRule], h: &FlowHeader<'_>) -> &'a FlowAction {
    let mut best: Option<&FlowRule> = None;
    for r in rules {
        let m = &r.matches;
        let hit = m.src.as_deref().is_none_or(|s| s == h.src)
            && m.dst.as_deref().is_none_or(|s| s == h.dst)
            && m.class.is_none_or(|c| c == h.class)
            && m.port_label.as_deref().is_none_or(|p| p == h.port_label);
        // rules are in insertion order, so a strict comparison keeps the earliest
        if hit && best.is_none_or(|b| r.priority > b.priority) {
            best = Some(r);
        }
    }
    best.map_or(&FlowAction::ToController, |r| &r.action)
}

fn oracle_flow_match(rng: &mut RngStream) -> Result<u64, String> {
    let names = ["a", "b", "c", "d"];
    let ports = ["p0", "p1", "p2"];
    let pick = |rng: &mut RngStream, xs: &[&str]| -> Option<String> {
        (rng.below(2) == 0).then(|| xs[rng.below(xs.len() as u64) as usize].to_string())
    };
    let mut checked = 0;
    for _ in 0..100 {
        let mut table = FlowTable::new();
        let mut accepted = Vec::new();
        for _ in 0..=rng.below(32) {
            let m = FlowMatch {
                src: pick(rng, &names),
                dst: pick(rng, &names),
                class: (rng.below(2) == 0).then(|| ServiceClass::ALL[rng.below(3) as usize]),
                port_label: pick(rng, &ports),
            };
            let action = match rng.below(4) {
                0 => FlowAction::Forward(format!("if{}", rng.below(3))),
                1 => FlowAction::Duplicate("if0".into(), "if1".into()),
                2 => FlowAction::Drop,
                _ => FlowAction::ToController,
            };
            let rule = FlowRule::new(rng.below(8) as u32, m, action);
            if table.insert(rule.clone()) {
                accepted.push(rule);
            }
        }
        for _ in 0..10_000 {
            let h = FlowHeader {
                src: names[rng.below(4) as usize],
                dst: names[rng.below(4) as usize],
                class: ServiceClass::ALL[rng.below(3) as usize],
                port_label: ports[rng.below(3) as usize],
            };
            let got = flow_match(&table, &h);
            let want = linear_scan(&accepted, &h);
            if got != want {
                return Err(format!("flow_match {got:?} vs linear scan {want:?} for {h:?}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Lexicographically smallest minimum-hop path from `src` to any uplink.
fn bfs_oracle(adj: &BTreeMap<String, BTreeSet<String>>, src: &str, uplinks: &BTreeSet<String>) -> Option<Vec<String>> {
    let mut dist: HashMap<&str, usize> = HashMap::from([(src, 0)]);
    let mut q = VecDeque::from([src]);
    while let Some(n) = q.pop_front() {
        for m in &adj[n] {
            if !dist.contains_key(m.as_str()) {
                dist.insert(m, dist[n] + 1);
                q.push_back(m);
            }
        }
    }
    let target = uplinks.iter().filter_map(|u| dist.get(u.as_str())).min().copied()?;
    let mut best: Option<Vec<String>> = None;
    let mut stack = vec![vec![src.to_string()]];
    while let Some(path) = stack.pop() {
        let last = path.last().unwrap();
        if path.len() - 1 == target {
            if uplinks.contains(last) && best.as_ref().is_none_or(|b| path < *b) {
                best = Some(path);
            }
            continue;
        }
        for m in &adj[last.as_str()] {
            if dist[m.as_str()] == path.len() {
                let mut p = path.clone();
                p.push(m.clone());
                stack.push(p);
            }
        }
    }
    best
}

fn oracle_mesh(rng: &mut RngStream) -> Result<u64, String> {
    for _ in 0..1000 {
        let n = 1 + rng.below(20) as usize;
        let name = |i: usize| format!("g{i:02}");
        let mut g = MeshGraph::new();
        let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for i in 0..n {
            g.add_node(&name(i));
            adj.entry(name(i)).or_default();
        }
        let p_edge = rng.next_f64() * 0.4;
        for i in 0..n {
            for j in i + 1..n {
                if rng.next_f64() < p_edge {
                    g.add_edge(&name(i), &name(j));
                    adj.get_mut(&name(i)).unwrap().insert(name(j));
                    adj.get_mut(&name(j)).unwrap().insert(name(i));
                }
            }
        }
        let uplinks: BTreeSet<String> = (0..n).filter(|_| rng.below(4) == 0).map(name).collect();
        let src = name(rng.below(n as u64) as usize);
        let got = mesh_route(&g, &src, &uplinks).ok();
        let want = bfs_oracle(&adj, &src, &uplinks);
        if got != want {
            return Err(format!("mesh_route {got:?} vs BFS {want:?} from {src}"));
        }
    }
    Ok(1000)
}

fn oracle_percentile(rng: &mut RngStream) -> Result<u64, String> {
    for _ in 0..2000 {
        let n = 1 + rng.below(2000) as usize;
        let v: Vec<u64> = (0..n).map(|_| rng.below(10 * NS_PER_MS)).collect();
        let (a, b) = (1 + rng.below(10_000), 10_000);
        let p = a as f64 / b as f64;
        let mut sorted = v.clone();
        sorted.sort_unstable();
        let k = (a as usize * n).div_ceil(b as usize).max(1);
        let got = latency_percentile(&v, p).map_err(|e| e.to_string())?;
        if got != sorted[k - 1] {
            return Err(format!("percentile {p} of {n}: {got} vs {}", sorted[k - 1]));
        }
    }
    Ok(2000)
}

fn oracle_reliability() -> Result<String, String> {
    let sc = gen_agv(4, 2, 40_000_000, 8);
    let out = run_with(&sc, RunOptions { seed: 8, event_log: true, ..RunOptions::default() }).map_err(|e| e.to_string())?;
    let log = out.event_log.unwrap();
    let class_of: Vec<ServiceClass> = out.report.slices.iter().filter_map(|s| s.class).collect();
    let mut details = Vec::new();
    for class in [ServiceClass::Urllc, ServiceClass::Embb] {
        let budget = out.report.slices.iter().find(|s| s.class == Some(class)).and_then(|s| s.latency.as_ref()).unwrap().p50_ns;
        let mut sent_at: HashMap<&str, u64> = HashMap::new();
        let (mut sent, mut ok) = (0u64, 0u64);
        for e in &log {
            let mut parts = e.subject.split('/');
            let bucket = parts.next().unwrap();
            let Some(pid) = parts.next() else { continue };
            let c = if bucket == "-" { None } else { class_of.get(bucket.parse::<usize>().unwrap()).copied() };
            if c != Some(class) {
                continue;
            }
            match e.kind {
                "packet_send" => {
                    sent += 1;
                    sent_at.insert(pid, e.time);
                }
                "packet_arrival" if e.time - sent_at[pid] <= budget => ok += 1,
                _ => {}
            }
        }
        let recount = ok as f64 / sent as f64;
        let got = deadline_reliability(&out.trace, budget, class).map_err(|e| e.to_string())?;
        if got != recount {
            return Err(format!("{class}: deadline_reliability {got} vs event log {recount}"));
        }
        details.push(format!("{class} {got:.4}"));
    }
    Ok(details.join(", "))
}

fn oracle_admission(rng: &mut RngStream) -> Result<u64, String> {
    let mut total = 0;
    for _ in 0..200 {
        let n_cells = 1 + rng.below(5) as usize;
        let caps: Vec<u64> = (0..n_cells).map(|_| (1 + rng.below(10)) * 100_000_000).collect();
        let topo = validate_topology(Topology {
            cells: caps
                .iter()
                .enumerate()
                .map(|(i, &c)| Cell { id: format!("c{i}"), area_m2: 1e4, capacity_bps: c, base_station: "bs".into() })
                .collect(),
            base_stations: vec![BaseStation { id: "bs".into(), core: "core".into(), edge_cloud_capacity_ops: 0 }],
            cores: vec![Core { id: "core".into(), kind: CoreKind::Private, breakout_targets: vec![], functions: vec![] }],
            ..Topology::default()
        })
        .map_err(|e| e.to_string())?;
        let attach = topo.initial_attachments();
        let targets = TargetOverrides::default();
        let mut table = SliceTable::new();
        let mut used = vec![0u64; n_cells];
        for k in 0..1 + rng.below(12) {
            let cells: Vec<usize> = (0..n_cells).filter(|_| rng.below(2) == 0).collect();
            let cells = if cells.is_empty() { vec![0] } else { cells };
            let class = ServiceClass::ALL[rng.below(3) as usize];
            let claim = rng.next_f64() * 2.0e6;
            let req = SliceRequest {
                id: format!("s{k}"),
                service_class: class,
                reserved_rate_bps: (1 + rng.below(6)) * 50_000_000,
                cell_ids: cells.iter().map(|i| format!("c{i}")).collect(),
                deadline_ns: None,
                density_claim_per_km2: Some(claim),
            };
            let fits = cells.iter().all(|&i| used[i] + req.reserved_rate_bps <= caps[i]);
            let want = fits && (class != ServiceClass::Mmtc || claim <= 1.0e6);
            let got = admit_slice(&topo, &attach, &table, &targets, &req).map_err(|e| e.to_string())?;
            if got.admitted != want {
                return Err(format!("request {req:?}: admitted {} vs oracle {want}", got.admitted));
            }
            if want {
                for &i in &cells {
                    used[i] += req.reserved_rate_bps;
                }
            }
            table.push(got);
            total += 1;
        }
    }
    Ok(total)
}

fn oracle_equivalences() -> Outcome {
    let mut rng = RngStream::derive(77, "acceptance/oracles");
    let flows = oracle_flow_match(&mut rng)?;
    let meshes = oracle_mesh(&mut rng)?;
    let pct = oracle_percentile(&mut rng)?;
    let rel = oracle_reliability()?;
    let adm = oracle_admission(&mut rng)?;
    Ok(format!(
        "flow_match {flows} lookups, mesh_route {meshes} graphs, percentile {pct} cases, reliability ({rel}), admission {adm} requests"
    ))
}

// ---- 8 ------------------------------------------------------------------

fn queueing_fidelity() -> Outcome {
    const RATE: u64 = 1_000_000_000;
    let s = 1500 * 8 * NS_PER_SEC / RATE;
    let rho = 0.5;
    let mean_gap = (s as f64 / rho) as u64;
    let mut text = single_cell("md1", 5 * NS_PER_SEC, RATE, &["mes"]);
    text += "\n[link_model.contention]\nkind = \"none\"\n";
    text += &device("ue", "PHONE", "cell");
    text += &slice("embb", "EMBB", RATE);
    text += &format!(
        "\n[[traffic]]\nid = \"poisson\"\nsrc = \"ue\"\ndst = \"mes\"\nclass = \"EMBB\"\nsize_bytes = 1500\npoisson_mean_ns = {mean_gap}\n"
    );
    let sc = scenario(&text);
    let out = run(&sc, 8).map_err(|e| e.to_string())?;
    let lat = out.trace.sorted_latencies(0);
    let fixed = sc.link_model.base_latency.embb_ns + s;
    let mean_wait = lat.iter().map(|&l| (l - fixed) as f64).sum::<f64>() / lat.len() as f64;
    let expected = s as f64 * rho / (2.0 * (1.0 - rho));
    let err = (mean_wait - expected).abs() / expected;
    check(
        lat.len() >= 100_000 && err < 0.05,
        format!("{} packets, mean wait {mean_wait:.1} ns vs M/D/1 {expected:.1} ns ({:.2}% off)", lat.len(), err * 100.0),
    )
}

// ---- 9 ------------------------------------------------------------------

fn privacy_topology(rng: &mut RngStream, idx: usize) -> (String, Vec<String>, Vec<String>) {
    let mut text = format!("name = \"privacy{idx}\"\nduration_ns = {}\n", 10 * NS_PER_MS);
    let n_priv = 1 + rng.below(3) as usize;
    let n_pub = 1 + rng.below(2) as usize;
    let factory = ["prod", "it"];
    // private core breaks out to a random subset of the factory networks
    let mut breakout: Vec<&str> = factory.iter().copied().filter(|_| rng.below(2) == 0).collect();
    if breakout.is_empty() {
        breakout.push("prod");
    }
    text += &format!(
        "\n[[topology.cores]]\nid = \"pcore\"\nkind = \"PRIVATE\"\nbreakout_targets = {breakout:?}\n\n[[topology.cores]]\nid = \"pubcore\"\nkind = \"PUBLIC\"\nbreakout_targets = [\"inet\", \"prod\", \"it\"]\n"
    );
    text += "\n[[topology.networks]]\nid = \"prod\"\nkind = \"PRODUCTION\"\n\n[[topology.networks]]\nid = \"it\"\nkind = \"COMPANY\"\n\n[[topology.networks]]\nid = \"inet\"\nkind = \"INTERNET\"\n";
    // shortcuts through the public side
    for (a, b) in [("pcore", "pubcore"), ("pcore", "inet"), ("inet", "it"), ("prod", "it")] {
        if rng.below(2) == 0 {
            text += &format!("\n[[topology.wired_links]]\na = \"{a}\"\nb = \"{b}\"\nlatency_ns = 1000\nrate_bps = 1000000000\n");
        }
    }
    let mut private_devices = Vec::new();
    for (prefix, n, core) in [("p", n_priv, "pcore"), ("q", n_pub, "pubcore")] {
        for c in 0..n {
            let cell = format!("{prefix}cell{c}");
            text += &format!(
                "\n[[topology.base_stations]]\nid = \"{prefix}bs{c}\"\ncore = \"{core}\"\n\n[[topology.cells]]\nid = \"{cell}\"\narea_m2 = 10000.0\ncapacity_bps = 1000000000\nbase_station = \"{prefix}bs{c}\"\n"
            );
            text += &format!(
                "\n[[slices]]\nid = \"u-{cell}\"\nservice_class = \"URLLC\"\nreserved_rate_bps = 100000000\ncell_ids = [\"{cell}\"]\n"
            );
            for d in 0..2 {
                let id = format!("{prefix}dev{c}-{d}");
                text += &device(&id, "SENSOR", &cell);
                if prefix == "p" {
                    private_devices.push(id);
                }
            }
        }
    }
    for b in ["PRIVATE_CORE_PRODUCTION_NET", "PRIVATE_CORE_PUBLIC_CORE", "PUBLIC_CORE_INTERNET"] {
        text += &format!("\n[[firewall.rules]]\nboundary = \"{b}\"\naction = \"ALLOW\"\n");
    }
    let mut dsts: Vec<String> = factory.iter().map(|s| s.to_string()).collect();
    dsts.extend(private_devices.iter().cloned());
    (text, private_devices, dsts)
}

fn privacy_invariant() -> Outcome {
    let mut rng = RngStream::derive(99, "acceptance/privacy");
    let (mut flows, mut delivered, mut unreachable, mut leaks) = (0u64, 0u64, 0u64, 0u64);
    for idx in 0..50 {
        let (mut text, srcs, dsts) = privacy_topology(&mut rng, idx);
        for f in 0..20 {
            let src = &srcs[rng.below(srcs.len() as u64) as usize];
            let dst = dsts.iter().filter(|d| *d != src).nth(rng.below(dsts.len() as u64 - 1) as usize).unwrap();
            text += &format!(
                "\n[[traffic]]\nid = \"f{f}\"\nsrc = \"{src}\"\ndst = \"{dst}\"\nclass = \"URLLC\"\nsize_bytes = 64\nschedule_ns = [{}]\n",
                f * 1000
            );
            flows += 1;
        }
        let sc = scenario(&text);
        let out = run_with(&sc, RunOptions { seed: idx as u64, record_paths: true, ..RunOptions::default() })
            .map_err(|e| e.to_string())?;
        let public: BTreeSet<&str> = ["pubcore", "inet"].into();
        for (_, hops) in &out.paths {
            delivered += 1;
            if hops.iter().any(|h| public.contains(h.as_str())) || hops.iter().any(|h| h.starts_with('q')) {
                leaks += 1;
            }
        }
        unreachable += out.report.drops.get("unreachable").copied().unwrap_or(0);
    }
    check(
        flows == 1000 && leaks == 0 && delivered + unreachable == flows,
        format!("{flows} private flows: {delivered} delivered, {unreachable} unreachable, {leaks} through the public side"),
    )
}

// ---- 10 -----------------------------------------------------------------

fn stress_scenario() -> Scenario {
    let mut text = single_cell("stress", 200 * NS_PER_MS, 1_000_000_000, &["mes"]);
    // eMBB into the production net has no allow rule
    text = text.replace("match = { class = \"EMBB\" }", "match = { class = \"MMTC\" }");
    text += &device("ue", "PHONE", "cell");
    text += &device("gw", "EDGE_GATEWAY", "cell");
    text += &device("s0", "SENSOR", "gw");
    text += &slice("tiny", "URLLC", 1_000_000);
    text += &slice("video", "EMBB", 100_000_000);
    text += r#"
[[gateways]]
id = "gw"
channels = ["ch1"]

[[gateways.flow_rules]]
priority = 1
action = { FORWARD = "ch1" }

[[link_outages]]
time_ns = 100000000
gateway = "gw"

[[traffic]]
id = "flood"
src = "ue"
dst = "mes"
class = "URLLC"
size_bytes = 1500
period_ns = 10000

[[traffic]]
id = "denied"
src = "ue"
dst = "mes"
class = "EMBB"
size_bytes = 500
period_ns = 1000000

[[traffic]]
id = "unsliced"
src = "ue"
dst = "mes"
class = "MMTC"
size_bytes = 100
period_ns = 1000000

[[traffic]]
id = "behind-gw"
src = "s0"
dst = "mes"
class = "URLLC"
size_bytes = 40
period_ns = 5000000
"#;
    scenario(&text)
}

fn mode_scenario(rng: &mut RngStream) -> Scenario {
    let mut text = single_cell("modes", 12 * NS_PER_HOUR, 1_000_000_000, &["cms"]);
    text += &slice("mmtc", "MMTC", 100_000_000);
    let sensors = ["temperature", "acoustic", "accel_3axis", "gas"];
    for i in 0..40 {
        let id = format!("d{i}");
        text += &device(&id, "WIRELESS_SENSOR_DEVICE", "cell");
        // sample instants stay off the flush grid (odd vs. whole-second offsets)
        let period = (1 + rng.below(60)) * 60 * NS_PER_SEC;
        let start = rng.below(600) * NS_PER_SEC + 1;
        let mode = match rng.below(3) {
            0 => "\"ONLINE\"".to_string(),
            1 => "\"SLEEP\"".to_string(),
            _ => format!("{{ INTERVAL = {} }}", (1 + rng.below(120)) * 60 * NS_PER_SEC),
        };
        let threshold = 20.0 + rng.next_f64() * 80.0;
        let sensor = sensors[rng.below(4) as usize];
        text += &format!(
            "\n[[devices]]\nid = \"{id}\"\nsensors = [\"{sensor}\"]\nsample_period_ns = {period}\nstart_ns = {start}\nmode = {mode}\nphase_ns = {}\nalarm_threshold = {threshold}\n[devices.uplink]\ndst = \"cms\"\nclass = \"MMTC\"\n",
            rng.below(3600) * NS_PER_SEC
        );
    }
    scenario(&text)
}

/// Expected (transmissions, records sent, records left unsent).
fn mode_oracle(sc: &Scenario, i: usize, seed: u64) -> (u64, u64, u64) {
    let d = &sc.devices[i];
    let node = sc.validate().unwrap().lookup(&d.id).unwrap();
    let mut t = d.start_ns;
    let (mut tx, mut recs, mut lost) = (0, 0, 0);
    let mut slots: BTreeMap<u64, u64> = BTreeMap::new();
    while t < sc.duration_ns {
        let r = sample_all(seed, node, &d.sensors, t, d.alarm_threshold);
        match d.mode {
            GatewayMode::Online => {
                tx += 1;
                recs += r.len() as u64;
            }
            GatewayMode::Sleep => {
                let alarms = r.iter().filter(|x| x.alarm).count() as u64;
                if alarms > 0 {
                    tx += 1;
                    recs += alarms;
                }
            }
            GatewayMode::Interval(p) => {
                *slots.entry(next_flush_at(p, d.phase_ns, t)).or_default() += r.len() as u64;
            }
        }
        t += d.sample_period_ns;
    }
    for (slot, n) in slots {
        if slot < sc.duration_ns {
            tx += 1;
            recs += n;
        } else {
            lost += n;
        }
    }
    (tx, recs, lost)
}

fn conservation() -> Outcome {
    let mut rng = RngStream::derive(10, "acceptance/conservation");
    let scenarios = vec![
        stress_scenario(),
        gen_agv(3, 2, 40_000_000, 1),
        gen_smart_production(6, 2, 3.0, 1),
        gen_condition_monitoring(300, 1.0e4, 4, 1),
        gen_retrofit(4, 2.0, 1),
        mode_scenario(&mut rng),
    ];
    let mut packets = 0u64;
    let mut drop_kinds = BTreeSet::new();
    let mut devices = 0;
    for sc in &scenarios {
        let out = run(sc, 21).map_err(|e| e.to_string())?;
        let r = &out.report;
        for s in &r.slices {
            if s.sent != s.delivered + s.dropped {
                return Err(format!("{} slice {}: {} != {} + {}", sc.name, s.id, s.sent, s.delivered, s.dropped));
            }
            packets += s.sent;
        }
        let count = |k| out.trace.observations().iter().filter(|o| o.kind == k).count() as u64;
        let dropped: u64 = r.drops.values().sum();
        if count(ObservationKind::Sent) != count(ObservationKind::Delivered) + count(ObservationKind::Dropped)
            || dropped != count(ObservationKind::Dropped)
        {
            return Err(format!("{}: trace or drop map does not balance", sc.name));
        }
        drop_kinds.extend(r.drops.keys().cloned());
        if out.trace.observations().iter().any(|o| o.slice == UNSLICED) && r.slice("-").is_none() {
            return Err(format!("{}: unsliced packets missing from report", sc.name));
        }

        for (cfg, d) in sc.devices.iter().zip(&r.devices) {
            let sleep_nw = (cfg.energy.sleep_power_w * 1e9).round() as u128;
            let tx_aj = (cfg.energy.tx_energy_per_message_j * 1e18).round() as u128;
            if d.death_time_ns.is_none() {
                let want = d.transmissions as u128 * tx_aj + sleep_nw * sc.duration_ns as u128;
                if d.consumed_aj != want {
                    return Err(format!("{} device {}: ledger {} aJ vs {want} aJ", sc.name, d.id, d.consumed_aj));
                }
            }
            devices += 1;
        }
    }
    let modes = scenarios.last().unwrap();
    let r = run(modes, 21).map_err(|e| e.to_string())?.report;
    for (i, d) in r.devices.iter().enumerate() {
        let want = mode_oracle(modes, i, 21);
        let got = (d.transmissions, d.records, d.records_lost);
        if got != want {
            return Err(format!("device {} ({}): got {got:?}, contract {want:?}", d.id, d.mode));
        }
    }
    check(
        drop_kinds.len() >= 4,
        format!(
            "{packets} packets balance across {} scenarios (drop kinds {drop_kinds:?}); {devices} energy ledgers exact; {} mode contracts hold",
            scenarios.len(),
            r.devices.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("determinism", determinism),
        ("urllc compliance", urllc_compliance),
        ("mmtc density", mmtc_density),
        ("embb throughput", embb_throughput),
        ("battery lifetime", battery_lifetime),
        ("make before break", make_before_break),
        ("oracle equivalences", oracle_equivalences),
        ("queueing fidelity", queueing_fidelity),
        ("privacy invariant", privacy_invariant),
        ("conservation", conservation),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let took = t.elapsed().as_secs_f64();
        match &res {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d}) [{took:.1} s]", i + 1),
            Err(d) => {
                println!("criterion {:>2} {name}: FAIL ({d}) [{took:.1} s]", i + 1);
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
