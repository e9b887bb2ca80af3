use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::engine::{write_event_log, LogEntry};
use crate::gateway::MigrationReport;
use crate::model::{BitsPerSecond, Nanos, ServiceClass};
use crate::workloads::Thresholds;

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const EVENT_LOG_FILE: &str = "events.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub p50_ns: Nanos,
    pub p99_ns: Nanos,
    pub p999_ns: Nanos,
    pub p9999_ns: Nanos,
    pub max_ns: Nanos,
    pub mean_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub id: String,
    /// Absent for the bucket of packets that found no slice.
    pub class: Option<ServiceClass>,
    pub admitted: bool,
    pub rejection: Option<String>,
    pub reserved_rate_bps: BitsPerSecond,
    pub deadline_ns: Option<Nanos>,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub delivered_within_deadline: u64,
    /// Within-deadline deliveries over sent; absent when nothing was sent.
    pub deadline_ratio: Option<f64>,
    pub latency: Option<LatencyStats>,
    pub offered_bps: f64,
    pub delivered_bps: f64,
    pub throughput_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcReport {
    pub id: String,
    pub placement: String,
    pub cycle_time_ns: Nanos,
    pub cycle_duration_ns: Nanos,
    pub cycles: u64,
    pub misses: u64,
    pub miss_ratio: f64,
    pub messages_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub id: String,
    pub mode: String,
    pub transmissions: u64,
    pub records: u64,
    pub records_lost: u64,
    pub consumed_j: f64,
    /// Exact ledger value in attojoules.
    pub consumed_aj: u128,
    pub remaining_j: f64,
    pub duty_per_hour: f64,
    /// Closed-form lifetime at the observed duty.
    pub lifetime_years: f64,
    pub death_time_ns: Option<Nanos>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub id: String,
    pub capacity_bps: BitsPerSecond,
    pub admitted_rate_bps: BitsPerSecond,
    pub area_m2: f64,
    pub peak_devices: u64,
    pub peak_density_per_km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayReport {
    pub id: String,
    pub active_channel: String,
    pub records_in: u64,
    pub records_out: u64,
    pub packets: u64,
    pub gaps: u64,
    pub packet_ins: u64,
    pub flow_rules: u64,
    pub mesh_path: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorReport {
    pub id: String,
    pub commands: u64,
    pub stalls_detected: u64,
    pub undetected_stalls: u64,
    pub max_position_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub group: String,
    pub rounds: u64,
    pub max_skew_ns: Nanos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub name: String,
    pub subject: String,
    pub limit: f64,
    pub observed: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_ns: Nanos,
    pub assumptions: Vec<String>,
    pub warnings: Vec<String>,
    pub slices: Vec<SliceReport>,
    pub plcs: Vec<PlcReport>,
    pub devices: Vec<DeviceReport>,
    pub cells: Vec<CellReport>,
    pub gateways: Vec<GatewayReport>,
    pub migrations: Vec<MigrationReport>,
    pub actuators: Vec<ActuatorReport>,
    pub sync_groups: Vec<SyncReport>,
    pub drops: BTreeMap<String, u64>,
    pub thresholds: Vec<ThresholdResult>,
    pub pass: bool,
}

impl KpiReport {
    pub fn slice(&self, id: &str) -> Option<&SliceReport> {
        self.slices.iter().find(|s| s.id == id)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check(out: &mut Vec<ThresholdResult>, name: &str, subject: &str, limit: f64, observed: Option<f64>, upper: bool) {
    let pass = observed.is_some_and(|o| if upper { o <= limit } else { o >= limit });
    out.push(ThresholdResult { name: name.into(), subject: subject.into(), limit, observed, pass });
}

/// Compares a report against scenario thresholds. A threshold whose metric
/// has no observation fails.
pub fn evaluate_thresholds(report: &KpiReport, t: &Thresholds) -> Vec<ThresholdResult> {
    let mut out = Vec::new();
    for st in &t.slices {
        let s = report.slice(&st.slice);
        let id = st.slice.as_str();
        if st.require_admitted {
            check(&mut out, "admitted", id, 1.0, s.map(|s| s.admitted as u8 as f64), false);
        }
        if let Some(n) = st.min_sent {
            check(&mut out, "min_sent", id, n as f64, s.map(|s| s.sent as f64), false);
        }
        let lat = s.and_then(|s| s.latency);
        if let Some(v) = st.max_p99_ns {
            check(&mut out, "max_p99_ns", id, v as f64, lat.map(|l| l.p99_ns as f64), true);
        }
        if let Some(v) = st.max_p9999_ns {
            check(&mut out, "max_p9999_ns", id, v as f64, lat.map(|l| l.p9999_ns as f64), true);
        }
        if let Some(v) = st.min_deadline_ratio {
            check(&mut out, "min_deadline_ratio", id, v, s.and_then(|s| s.deadline_ratio), false);
        }
        if let Some(v) = st.min_throughput_ratio {
            check(&mut out, "min_throughput_ratio", id, v, s.and_then(|s| s.throughput_ratio), false);
        }
    }
    if let Some(v) = t.max_plc_miss_ratio {
        for p in &report.plcs {
            check(&mut out, "max_plc_miss_ratio", &p.id, v, Some(p.miss_ratio), true);
        }
    }
    if let Some(v) = t.min_lifetime_years {
        for d in &report.devices {
            check(&mut out, "min_lifetime_years", &d.id, v, Some(d.lifetime_years), false);
        }
    }
    if let Some(v) = t.max_migration_loss {
        for m in &report.migrations {
            check(&mut out, "max_migration_loss", &m.gateway, v as f64, Some(m.packets_lost_during_migration as f64), true);
        }
    }
    if let Some(v) = t.max_sync_skew_ns {
        for g in &report.sync_groups {
            check(&mut out, "max_sync_skew_ns", &g.group, v as f64, Some(g.max_skew_ns as f64), true);
        }
    }
    out
}

/// One row of the flat summary. Columns not relevant to a row kind stay
/// empty.
#[derive(Debug, Default, Serialize)]
struct Row<'a> {
    kind: &'a str,
    id: &'a str,
    class: Option<&'a str>,
    sent: Option<u64>,
    delivered: Option<u64>,
    dropped: Option<u64>,
    deadline_ratio: Option<f64>,
    p50_ns: Option<Nanos>,
    p99_ns: Option<Nanos>,
    p9999_ns: Option<Nanos>,
    max_ns: Option<Nanos>,
    delivered_bps: Option<f64>,
    cycles: Option<u64>,
    misses: Option<u64>,
    miss_ratio: Option<f64>,
    transmissions: Option<u64>,
    lifetime_years: Option<f64>,
    death_time_ns: Option<Nanos>,
}

pub fn write_summary_csv<W: Write>(w: W, report: &KpiReport) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    for s in &report.slices {
        out.serialize(Row {
            kind: "slice",
            id: &s.id,
            class: s.class.map(|c| c.as_str()),
            sent: Some(s.sent),
            delivered: Some(s.delivered),
            dropped: Some(s.dropped),
            deadline_ratio: s.deadline_ratio,
            p50_ns: s.latency.map(|l| l.p50_ns),
            p99_ns: s.latency.map(|l| l.p99_ns),
            p9999_ns: s.latency.map(|l| l.p9999_ns),
            max_ns: s.latency.map(|l| l.max_ns),
            delivered_bps: Some(s.delivered_bps),
            ..Row::default()
        })?;
    }
    for p in &report.plcs {
        out.serialize(Row {
            kind: "plc",
            id: &p.id,
            cycles: Some(p.cycles),
            misses: Some(p.misses),
            miss_ratio: Some(p.miss_ratio),
            ..Row::default()
        })?;
    }
    for d in &report.devices {
        out.serialize(Row {
            kind: "device",
            id: &d.id,
            transmissions: Some(d.transmissions),
            lifetime_years: Some(d.lifetime_years),
            death_time_ns: d.death_time_ns,
            ..Row::default()
        })?;
    }
    out.flush().map_err(|e| HarnessError::Io { path: SUMMARY_FILE.into(), source: e })?;
    Ok(())
}

pub fn summary_csv(report: &KpiReport) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, report)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Writes report.json, summary.csv and, when given, events.tsv into `dir`.
pub fn write_artifacts(dir: &Path, report: &KpiReport, events: Option<&[LogEntry]>) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let write = |name: &str, body: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| HarnessError::io(&p, e))
    };
    write(REPORT_FILE, report.to_json()?.as_bytes())?;
    write(SUMMARY_FILE, summary_csv(report)?.as_bytes())?;
    if let Some(ev) = events {
        let p = dir.join(EVENT_LOG_FILE);
        let f = std::fs::File::create(&p).map_err(|e| HarnessError::io(&p, e))?;
        let mut w = std::io::BufWriter::new(f);
        write_event_log(&mut w, ev).map_err(|e| HarnessError::io(&p, e))?;
        w.flush().map_err(|e| HarnessError::io(&p, e))?;
    }
    Ok(())
}

/// Reads report.json from a run directory and rewrites summary.csv.
pub fn rerender(dir: &Path) -> Result<KpiReport, HarnessError> {
    let p = dir.join(REPORT_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
    let report = KpiReport::from_json(&text)?;
    let s = dir.join(SUMMARY_FILE);
    std::fs::write(&s, summary_csv(&report)?).map_err(|e| HarnessError::io(&s, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::SliceThreshold;

    fn slice(id: &str, sent: u64, delivered: u64, p99: Nanos) -> SliceReport {
        SliceReport {
            id: id.into(),
            class: Some(ServiceClass::Urllc),
            admitted: true,
            rejection: None,
            reserved_rate_bps: 1,
            deadline_ns: Some(1_000_000),
            sent,
            delivered,
            dropped: sent - delivered,
            delivered_within_deadline: delivered,
            deadline_ratio: (sent > 0).then(|| delivered as f64 / sent as f64),
            latency: (delivered > 0).then_some(LatencyStats {
                p50_ns: p99 / 2,
                p99_ns: p99,
                p999_ns: p99,
                p9999_ns: p99,
                max_ns: p99,
                mean_ns: p99 as f64 / 2.0,
            }),
            offered_bps: 0.0,
            delivered_bps: 0.0,
            throughput_ratio: None,
        }
    }

    fn report(slices: Vec<SliceReport>) -> KpiReport {
        KpiReport {
            scenario: "t".into(),
            seed: 1,
            duration_ns: 1,
            assumptions: vec![],
            warnings: vec![],
            slices,
            plcs: vec![],
            devices: vec![],
            cells: vec![],
            gateways: vec![],
            migrations: vec![],
            actuators: vec![],
            sync_groups: vec![],
            drops: BTreeMap::new(),
            thresholds: vec![],
            pass: true,
        }
    }

    #[test]
    fn thresholds_pass_and_fail() {
        let r = report(vec![slice("u", 100, 100, 400_000), slice("v", 10, 9, 2_000_000)]);
        let t = Thresholds {
            slices: vec![
                SliceThreshold { slice: "u".into(), max_p9999_ns: Some(1_000_000), min_deadline_ratio: Some(0.99999), ..Default::default() },
                SliceThreshold { slice: "v".into(), max_p99_ns: Some(1_000_000), ..Default::default() },
            ],
            ..Default::default()
        };
        let res = evaluate_thresholds(&r, &t);
        assert_eq!(res.iter().map(|r| r.pass).collect::<Vec<_>>(), vec![true, true, false]);
    }

    #[test]
    fn missing_observation_fails() {
        let r = report(vec![slice("u", 0, 0, 0)]);
        let t = Thresholds {
            slices: vec![SliceThreshold { slice: "u".into(), max_p99_ns: Some(1), ..Default::default() }],
            ..Default::default()
        };
        assert!(!evaluate_thresholds(&r, &t)[0].pass);
    }

    #[test]
    fn json_round_trip_and_csv_rows() {
        let r = report(vec![slice("u", 100, 99, 400_000)]);
        assert_eq!(KpiReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        let csv = summary_csv(&r).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("kind,id,class,sent"));
    }
}
