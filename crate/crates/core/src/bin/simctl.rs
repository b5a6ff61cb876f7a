use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kvshare_sim::metrics::write_atomic;
use kvshare_sim::sweep::{run_sweep, summary_csv, write_sweep, SweepAxis, SweepSpec};
use kvshare_sim::workload::{self, WorkloadFile};
use kvshare_sim::{simulate_sessions, MetricsReport, ServingMode, SimConfig};

/// Multi-model disaggregated serving simulator.
#[derive(Parser)]
#[command(name = "simctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write report.json and requests.csv.
    Run(RunArgs),
    /// Run a grid of (value x mode) cells and write one directory per cell plus summary.csv.
    Sweep(SweepArgs),
    /// Write the generated session list as a workload file.
    ExportWorkload(ExportArgs),
    /// Run one simulation and print or write its event trace.
    Trace(RunArgs),
}

#[derive(Args)]
struct Common {
    /// Config file (TOML, or JSON with a .json extension).
    config: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides run.mode.
    #[arg(long)]
    mode: Option<ServingMode>,
    /// Replay an exported workload file instead of generating one.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Also write trace.log (run only).
    #[arg(long)]
    trace: bool,
    /// Exit 0 even if some requests failed.
    #[arg(long)]
    allow_failures: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Concurrency,
    ArrivalRate,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Restrict to one mode; both by default.
    #[arg(long)]
    mode: Option<ServingMode>,
    /// Per cell, pick the admission cap with the highest throughput.
    #[arg(long)]
    auto_concurrency: bool,
    /// Run cells one at a time.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    allow_failures: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
}

fn load_config(c: &Common) -> Result<SimConfig> {
    let mut cfg = SimConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> PathBuf {
    c.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn simulate(args: &RunArgs, trace: bool) -> Result<(MetricsReport, Option<String>)> {
    let mut cfg = load_config(&args.common)?;
    if let Some(mode) = args.mode {
        cfg.run.mode = mode;
    }
    let (sessions, token_seed) = match &args.workload {
        Some(p) => {
            let f = WorkloadFile::load(p)?;
            (f.sessions, f.seed)
        }
        None => (workload::generate(&cfg.workload, cfg.run.seed)?, cfg.run.seed),
    };
    let out = simulate_sessions(&cfg, sessions, token_seed, trace)?;
    Ok((out.report, out.trace))
}

fn check_failures(failed: u64, allow: bool) -> Result<()> {
    if failed > 0 && !allow {
        bail!("{failed} request(s) failed (pass --allow-failures to accept)");
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let (report, trace) = simulate(args, args.trace)?;
    let dir = out_dir(&args.common);
    report
        .write_to_dir(&dir)
        .with_context(|| format!("writing {}", dir.display()))?;
    if let Some(t) = trace {
        write_atomic(&dir.join("trace.log"), t.as_bytes())?;
    }
    let r = &report.requests;
    println!(
        "{} seed={} requests={} tok/s={:.1} p95_e2e_us={} hit={:.4} failed={} -> {}",
        report.mode,
        report.seed,
        r.completed_requests,
        r.throughput_tok_s,
        r.p95_e2e_us.map_or("-".into(), |v| v.to_string()),
        report.cache.hit_ratio,
        report.fleet.failed_requests,
        dir.display()
    );
    check_failures(report.fleet.failed_requests, args.allow_failures)
}

fn cmd_trace(args: &RunArgs) -> Result<()> {
    let (report, trace) = simulate(args, true)?;
    let trace = trace.expect("tracing enabled");
    match &args.common.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_atomic(&dir.join("trace.log"), trace.as_bytes())?;
        }
        None => print!("{trace}"),
    }
    check_failures(report.fleet.failed_requests, args.allow_failures)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let axis = match args.axis {
        Axis::Concurrency => SweepAxis::Concurrency(
            args.values
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                        Ok(v as u32)
                    } else {
                        bail!("concurrency values must be positive integers (got {v})")
                    }
                })
                .collect::<Result<_>>()?,
        ),
        Axis::ArrivalRate => {
            if let Some(v) = args.values.iter().find(|v| !(**v > 0.0)) {
                bail!("arrival rates must be > 0 (got {v})");
            }
            SweepAxis::ArrivalRate(args.values.clone())
        }
    };
    let spec = SweepSpec {
        axis,
        modes: args.mode.map_or(ServingMode::ALL.to_vec(), |m| vec![m]),
        master_seed: cfg.run.seed,
        auto_concurrency: args.auto_concurrency,
        parallel: !args.serial,
    };
    let cells = run_sweep(&cfg, &spec)?;
    let dir = out_dir(&args.common);
    write_sweep(&dir, spec.axis.name(), &cells)
        .with_context(|| format!("writing {}", dir.display()))?;
    print!("{}", summary_csv(spec.axis.name(), &cells));
    let failed: u64 = cells.iter().map(|c| c.report.fleet.failed_requests).sum();
    check_failures(failed, args.allow_failures)
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let sessions = workload::generate(&cfg.workload, cfg.run.seed)?;
    let json = WorkloadFile::new(cfg.run.seed, sessions).to_json();
    match &args.common.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path: &Path = &dir.join("workload.json");
            write_atomic(path, json.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ExportWorkload(a) => cmd_export(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
