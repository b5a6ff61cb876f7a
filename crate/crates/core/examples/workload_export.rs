//! Exports a generated workload, reloads it and replays the identical
//! session list under both serving modes.

use kvshare_sim::workload::{generate, WorkloadFile};
use kvshare_sim::{simulate_sessions, ServingMode, SimConfig};

fn main() -> anyhow::Result<()> {
    let mut cfg = SimConfig::from_toml_str(
        "[workload]\npattern = \"reflexion\"\narrival_rate = 2.0\nduration_s = 10.0\n",
    )?;
    let dir = std::env::temp_dir().join("kvshare-workload-export");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("workload.json");
    let file = WorkloadFile::new(11, generate(&cfg.workload, 11)?);
    std::fs::write(&path, file.to_json())?;
    println!("{} sessions -> {}", file.sessions.len(), path.display());

    let loaded = WorkloadFile::load(&path)?;
    assert_eq!(loaded, file);
    for mode in ServingMode::ALL {
        cfg.run.mode = mode;
        let r = simulate_sessions(&cfg, loaded.sessions.clone(), loaded.seed, false)?.report;
        println!(
            "{mode:<13} requests {:>4}  mean e2e {:>9.1} us  hit {:.3}",
            r.requests.completed_requests,
            r.requests.mean_e2e_us.unwrap_or(0.0),
            r.cache.hit_ratio
        );
    }
    Ok(())
}
