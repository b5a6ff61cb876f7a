//! One session of four agents over a 1000-token shared prompt, each adding
//! 100 private tokens. Dedicated prefill caches the prompt once per model;
//! a shared prefill module caches it once.

use kvshare_sim::model::{AgentProfile, ContextMode, ModelId, SessionId, SessionSpec, SimTime};
use kvshare_sim::{simulate_sessions, ServingMode, SimConfig};

fn main() -> anyhow::Result<()> {
    let mut cfg = SimConfig::from_toml_str(
        r#"
[cache]
block_size = 4
prefill_capacity_blocks = "unbounded"

[workload]
pattern = "react"
arrival_rate = 1.0
duration_s = 1.0
"#,
    )?;
    let session = SessionSpec {
        session_id: SessionId(0),
        arrival_time: SimTime(0),
        initial_prompt_len: 1000,
        turns: 1,
        agent_chain: (0..4)
            .map(|m| AgentProfile {
                model_id: ModelId(m),
                input_extension_len: 100,
                output_len: 1,
            })
            .collect(),
        context_mode: ContextMode::Parallel,
    };
    for mode in ServingMode::ALL {
        cfg.run.mode = mode;
        let report = simulate_sessions(&cfg, vec![session.clone()], 0, false)?.report;
        println!(
            "{mode:<13} peak footprint {:>5} tokens  {:?}",
            report.cache.peak_footprint_total_tokens, report.cache.peak_footprint_tokens
        );
    }
    Ok(())
}
