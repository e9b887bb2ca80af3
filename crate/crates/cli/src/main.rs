use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fab5g::harness::{
    parse_scenario_with, rerender, run_with, summary_csv, write_artifacts, write_scenario, emit_scenario, KpiReport,
    RunOptions, Strictness,
};
use fab5g::workloads::{gen_agv, gen_condition_monitoring, gen_retrofit, gen_smart_production};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "simulate", version, about = "Factory 5G network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json and summary.csv.
    Run {
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "FAB5G_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Also write the per-event log (events.tsv).
        #[arg(long)]
        events: bool,
        /// Skip unknown keys with a warning instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        lenient: bool,
    },
    /// Generate a scenario for one of the built-in use cases.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        /// Main size parameter: carriers, convoys, sensors or spots.
        #[arg(long, short = 'n', default_value_t = 4)]
        count: u32,
        /// Sites (smart-production), slaves per master (agv), reconfiguration
        /// events (condition-monitoring).
        #[arg(long, default_value_t = 2)]
        secondary: u32,
        /// Order change rate per hour, map rate in bit/s, area in m² or
        /// spot distance in km.
        #[arg(long)]
        param: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Re-read report.json from a run directory and rewrite summary.csv.
    Report { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    SmartProduction,
    Agv,
    ConditionMonitoring,
    Retrofit,
}

fn strictness(lenient: bool) -> Strictness {
    if lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    }
}

fn print_summary(report: &KpiReport) {
    match summary_csv(report) {
        Ok(csv) => print!("{csv}"),
        Err(e) => eprintln!("error: {e}"),
    }
    for t in report.thresholds.iter().filter(|t| !t.pass) {
        eprintln!("threshold failed: {} {} (limit {}, observed {:?})", t.name, t.subject, t.limit, t.observed);
    }
}

fn run(scenario: &Path, seed: Option<u64>, out: &Path, events: bool, lenient: bool) -> Result<u8, String> {
    let parsed = parse_scenario_with(scenario, strictness(lenient)).map_err(|e| e.to_string())?;
    for w in &parsed.warnings {
        log::warn!("{w}");
    }
    let opts = RunOptions { seed: seed.unwrap_or(parsed.scenario.seed), event_log: events, ..RunOptions::default() };
    let mut output = run_with(&parsed.scenario, opts).map_err(|e| e.to_string())?;
    output.report.warnings.extend(parsed.warnings);
    write_artifacts(out, &output.report, output.event_log.as_deref()).map_err(|e| e.to_string())?;
    print_summary(&output.report);
    Ok(if output.report.pass { 0 } else { EXIT_FAIL })
}

fn gen(kind: GenKind, n: u32, secondary: u32, param: Option<f64>, seed: u64, out: Option<&Path>) -> Result<u8, String> {
    let sc = match kind {
        GenKind::SmartProduction => gen_smart_production(n, secondary, param.unwrap_or(1.0), seed),
        GenKind::Agv => gen_agv(n, secondary, param.unwrap_or(0.0) as u64, seed),
        GenKind::ConditionMonitoring => gen_condition_monitoring(n, param.unwrap_or(1.0e4), secondary, seed),
        GenKind::Retrofit => gen_retrofit(n, param.unwrap_or(1.0), seed),
    };
    match out {
        Some(p) => write_scenario(p, &sc).map_err(|e| e.to_string())?,
        None => {
            let text = emit_scenario(&sc).map_err(|e| e.to_string())?;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, seed, out, events, lenient } => run(&scenario, seed, &out, events, lenient),
        Command::Validate { scenario, lenient } => parse_scenario_with(&scenario, strictness(lenient))
            .map(|p| {
                for w in &p.warnings {
                    log::warn!("{w}");
                }
                println!("ok: {}", p.scenario.name);
                0
            })
            .map_err(|e| e.to_string()),
        Command::Gen { kind, count, secondary, param, seed, out } => {
            gen(kind, count, secondary, param, seed, out.as_deref())
        }
        Command::Report { dir } => rerender(&dir)
            .map(|r| {
                print_summary(&r);
                if r.pass {
                    0
                } else {
                    EXIT_FAIL
                }
            })
            .map_err(|e| e.to_string()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
