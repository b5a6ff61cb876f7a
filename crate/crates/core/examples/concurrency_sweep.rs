//! Sweeps the admission cap at a fixed arrival rate in both serving modes
//! and prints throughput, prefix hit ratio and tail latency per cap.
//!
//! ```text
//! cargo run --release --example concurrency_sweep -- configs/react.toml
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
    let caps: Vec<u32> = (1..=16).map(|i| i * 10).collect();
    let spec = SweepSpec {
        axis: SweepAxis::Concurrency(caps),
        modes: ServingMode::ALL.to_vec(),
        master_seed: cfg.run.seed,
        auto_concurrency: false,
        parallel: true,
    };
    let cells = run_sweep(&cfg, &spec)?;

    println!(
        "{:<13} {:>4} {:>10} {:>7} {:>12} {:>11} {:>7} {:>9}",
        "mode", "cap", "tok/s", "hit", "p95_e2e_ms", "ttft_ms", "staged", "evicted"
    );
    for c in &cells {
        let r = &c.report;
        println!(
            "{:<13} {:>4} {:>10.1} {:>7.3} {:>12.1} {:>11.1} {:>7} {:>9}",
            c.mode.as_str(),
            c.point.value(),
            r.requests.throughput_tok_s,
            r.cache.hit_ratio,
            r.requests.p95_e2e_us.unwrap_or(0) as f64 / 1e3,
            r.requests.mean_ttft_us.unwrap_or(0.0) / 1e3,
            r.fleet.staged_handoffs,
            r.cache.evictions,
        );
    }
    Ok(())
}
