//! Traces one chained session in both modes and prints each request's TTFT.
//! With a shared prefill module only the newest tokens are computed when the
//! agent changes; dedicated prefill recomputes the whole context.

use kvshare_sim::model::{AgentProfile, ContextMode, ModelId, SessionId, SessionSpec, SimTime};
use kvshare_sim::{simulate_sessions, ServingMode, SimConfig};

fn main() -> anyhow::Result<()> {
    let mut cfg = SimConfig::from_toml_str(
        "[workload]\npattern = \"react\"\narrival_rate = 1.0\nduration_s = 1.0\n",
    )?;
    let session = SessionSpec {
        session_id: SessionId(0),
        arrival_time: SimTime(0),
        initial_prompt_len: 512,
        turns: 3,
        agent_chain: (0..4)
            .map(|m| AgentProfile {
                model_id: ModelId(m),
                input_extension_len: 64,
                output_len: 32,
            })
            .collect(),
        context_mode: ContextMode::Chained,
    };
    let show_trace = std::env::args().any(|a| a == "--trace");
    for mode in ServingMode::ALL {
        cfg.run.mode = mode;
        let out = simulate_sessions(&cfg, vec![session.clone()], 0, show_trace)?;
        println!("{mode}");
        for r in &out.report.records {
            println!(
                "  turn {} step {} model {}  ttft {:>6} us  e2e {:>7} us",
                r.turn_index, r.step_index, r.model_id, r.ttft_us, r.e2e_us
            );
        }
        if let Some(t) = out.trace {
            print!("{t}");
        }
    }
    Ok(())
}
