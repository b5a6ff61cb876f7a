//! Sweeps the session arrival rate in both modes, picking each cell's
//! admission cap by throughput, and prints the chosen cap alongside.
//!
//! ```text
//! cargo run --release --example arrival_sweep -- configs/react.toml
//! ```

use std::path::PathBuf;

use kvshare_sim::sweep::{run_sweep, SweepAxis, SweepSpec};
use kvshare_sim::{ServingMode, SimConfig};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/react.toml")));
    let cfg = SimConfig::load(&path)?;
    let spec = SweepSpec {
        axis: SweepAxis::ArrivalRate(vec![0.5, 1.0, 2.0, 4.0, 8.0]),
        modes: ServingMode::ALL.to_vec(),
        master_seed: cfg.run.seed,
        auto_concurrency: true,
        parallel: true,
    };
    let cells = run_sweep(&cfg, &spec)?;
    println!(
        "{:<13} {:>5} {:>4} {:>10} {:>12} {:>7}",
        "mode", "rate", "cap", "tok/s", "p95_e2e_ms", "hit"
    );
    for c in &cells {
        let r = &c.report;
        println!(
            "{:<13} {:>5} {:>4} {:>10.1} {:>12.1} {:>7.3}",
            c.mode.as_str(),
            c.point.value(),
            c.concurrency.unwrap_or(0),
            r.requests.throughput_tok_s,
            r.requests.p95_e2e_us.unwrap_or(0) as f64 / 1e3,
            r.cache.hit_ratio,
        );
    }
    Ok(())
}
