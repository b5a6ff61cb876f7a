//! Seeded multi-agent session workloads.
//!
//! Sessions arrive as a Poisson process. Inter-arrival gaps use the inverse
//! CDF `gap = -ln(1 - u) / rate`, where `u = (x >> 11) * 2^-53` and `x` is the
//! next output of a SplitMix64 generator whose state starts at the seed.
//! Arrival instants are rounded half-up to whole microseconds and arrivals
//! after `duration_s` are dropped.
//!
//! Token content is synthetic. Session `s` only ever uses token ids in
//! `[(s + 1) << 32, (s + 2) << 32)`, so two sessions can never share a
//! prefix; within a session every agent works over the same growing context.

use std::path::Path;

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::round_half_up;
use crate::model::{
    AgentProfile, ContextMode, ModelId, SessionId, SessionSpec, SimTime, Token, TokenSeq,
};

pub const WORKLOAD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    React,
    Reflexion,
}

/// Reference token lengths of a pattern: `(initial_prompt, extension, output, turns)`.
pub fn pattern_defaults(pattern: Pattern) -> (u32, u32, u32, u32) {
    match pattern {
        Pattern::React => (512, 64, 128, 3),
        Pattern::Reflexion => (512, 96, 256, 3),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub pattern: Pattern,
    /// Sessions per second.
    pub arrival_rate: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub initial_prompt_len: Option<u32>,
    #[serde(default)]
    pub turns: Option<u32>,
    /// One entry per agent; defaults to the pattern's value for every agent.
    #[serde(default)]
    pub input_extension_lens: Option<Vec<u32>>,
    #[serde(default)]
    pub output_lens: Option<Vec<u32>>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelId>,
    #[serde(default)]
    pub context_mode: ContextMode,
}

fn default_models() -> Vec<ModelId> {
    (0..4).map(ModelId).collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("workload.arrival_rate must be > 0 (got {0})")]
    ArrivalRate(f64),
    #[error("workload.duration_s must be > 0 (got {0})")]
    Duration(f64),
    #[error("workload.models must not be empty")]
    NoModels,
    #[error("workload.turns must be >= 1")]
    NoTurns,
    #[error("workload.{field} has {got} entries, expected one per model ({want})")]
    LengthMismatch {
        field: &'static str,
        got: usize,
        want: usize,
    },
    #[error("workload.output_lens entries must be >= 1")]
    ZeroOutput,
}

impl WorkloadConfig {
    pub fn new(pattern: Pattern, arrival_rate: f64, duration_s: f64) -> Self {
        Self {
            pattern,
            arrival_rate,
            duration_s,
            initial_prompt_len: None,
            turns: None,
            input_extension_lens: None,
            output_lens: None,
            models: default_models(),
            context_mode: ContextMode::Chained,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.arrival_rate > 0.0) {
            return Err(WorkloadError::ArrivalRate(self.arrival_rate));
        }
        if !(self.duration_s > 0.0) {
            return Err(WorkloadError::Duration(self.duration_s));
        }
        if self.models.is_empty() {
            return Err(WorkloadError::NoModels);
        }
        if self.turns == Some(0) {
            return Err(WorkloadError::NoTurns);
        }
        for (field, lens) in [
            ("input_extension_lens", &self.input_extension_lens),
            ("output_lens", &self.output_lens),
        ] {
            if let Some(v) = lens {
                if v.len() != self.models.len() {
                    return Err(WorkloadError::LengthMismatch {
                        field,
                        got: v.len(),
                        want: self.models.len(),
                    });
                }
            }
        }
        if self.output_lens.as_ref().is_some_and(|v| v.contains(&0)) {
            return Err(WorkloadError::ZeroOutput);
        }
        Ok(())
    }

    pub fn agent_chain(&self) -> Vec<AgentProfile> {
        let (_, ext, out, _) = pattern_defaults(self.pattern);
        self.models
            .iter()
            .enumerate()
            .map(|(i, &model_id)| AgentProfile {
                model_id,
                input_extension_len: self
                    .input_extension_lens
                    .as_ref()
                    .map_or(ext, |v| v[i]),
                output_len: self.output_lens.as_ref().map_or(out, |v| v[i]),
            })
            .collect()
    }

    pub fn initial_prompt_len(&self) -> u32 {
        self.initial_prompt_len
            .unwrap_or(pattern_defaults(self.pattern).0)
    }

    pub fn turns(&self) -> u32 {
        self.turns.unwrap_or(pattern_defaults(self.pattern).3)
    }
}

/// Maps a SplitMix64 output to a uniform value in `[0, 1)`.
fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generates the session list for one run, ordered by arrival.
pub fn generate(config: &WorkloadConfig, seed: u64) -> Result<Vec<SessionSpec>, WorkloadError> {
    config.validate()?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let chain = config.agent_chain();
    let mut sessions = Vec::new();
    let mut t = 0.0f64;
    loop {
        let u = unit_interval(rng.next_u64());
        t += -(1.0 - u).ln() / config.arrival_rate;
        if t > config.duration_s {
            break;
        }
        sessions.push(SessionSpec {
            session_id: SessionId(sessions.len() as u32),
            arrival_time: SimTime(round_half_up(t * 1e6)),
            initial_prompt_len: config.initial_prompt_len(),
            turns: config.turns(),
            agent_chain: chain.clone(),
            context_mode: config.context_mode,
        });
    }
    Ok(sessions)
}

/// What a synthetic token run stands for inside a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Prompt,
    Extension { turn: u32, step: u32 },
    Output { turn: u32, step: u32 },
}

impl Purpose {
    fn code(self) -> u64 {
        let (kind, turn, step) = match self {
            Purpose::Prompt => (0u64, 0u32, 0u32),
            Purpose::Extension { turn, step } => (1, turn, step),
            Purpose::Output { turn, step } => (2, turn, step),
        };
        kind | (u64::from(turn) << 2) | (u64::from(step) << 33)
    }
}

/// Deterministic synthetic tokens for `(seed, session, purpose, index)`.
pub fn synth_tokens(seed: u64, session: SessionId, purpose: Purpose, length: usize) -> TokenSeq {
    let base: Token = (u64::from(session.0) + 1) << 32;
    let key = seed
        ^ u64::from(session.0).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ purpose.code().wrapping_mul(0xd6e8_feb8_6659_fd93);
    (0..length as u64)
        .map(|i| {
            let mut rng = SplitMix64::seed_from_u64(key ^ i.wrapping_mul(0xa076_1d64_78bd_642f));
            base | (rng.next_u64() & 0xffff_ffff)
        })
        .collect::<Vec<_>>()
        .into()
}

/// Portable workload file so different runs can consume the same trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadFile {
    pub schema_version: u32,
    /// Seed for synthetic token content.
    pub seed: u64,
    pub sessions: Vec<SessionSpec>,
}

#[derive(Debug, Error)]
pub enum WorkloadFileError {
    #[error("reading workload file {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing workload file {path}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("workload file {path} has schema_version {got}, expected {want}")]
    Version { path: String, got: u32, want: u32 },
    #[error("invalid workload file {path}")]
    Invalid {
        path: String,
        source: crate::model::SpecError,
    },
}

impl WorkloadFile {
    pub fn new(seed: u64, sessions: Vec<SessionSpec>) -> Self {
        Self {
            schema_version: WORKLOAD_SCHEMA_VERSION,
            seed,
            sessions,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("workload serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, WorkloadFileError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| WorkloadFileError::Io {
            path: p.clone(),
            source,
        })?;
        let file: WorkloadFile =
            serde_json::from_str(&text).map_err(|source| WorkloadFileError::Parse {
                path: p.clone(),
                source,
            })?;
        if file.schema_version != WORKLOAD_SCHEMA_VERSION {
            return Err(WorkloadFileError::Version {
                path: p,
                got: file.schema_version,
                want: WORKLOAD_SCHEMA_VERSION,
            });
        }
        for s in &file.sessions {
            s.validate().map_err(|source| WorkloadFileError::Invalid {
                path: p.clone(),
                source,
            })?;
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn react(rate: f64, duration: f64) -> WorkloadConfig {
        WorkloadConfig::new(Pattern::React, rate, duration)
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = react(4.0, 30.0);
        assert_eq!(generate(&cfg, 7).unwrap(), generate(&cfg, 7).unwrap());
        assert_ne!(generate(&cfg, 7).unwrap(), generate(&cfg, 8).unwrap());
    }

    #[test]
    fn arrivals_are_ordered_and_bounded() {
        let sessions = generate(&react(4.0, 30.0), 1).unwrap();
        assert!(sessions
            .windows(2)
            .all(|w| w[0].arrival_time <= w[1].arrival_time));
        assert!(sessions.iter().all(|s| s.arrival_time <= SimTime(30_000_000)));
        for (i, s) in sessions.iter().enumerate() {
            assert_eq!(s.session_id, SessionId(i as u32));
        }
    }

    #[test]
    fn request_count_per_session() {
        let s = &generate(&react(4.0, 10.0), 3).unwrap()[0];
        assert_eq!(s.turns, 3);
        assert_eq!(s.agent_chain.len(), 4);
        assert_eq!(s.total_requests(), 12);
    }

    #[test]
    fn pattern_lengths() {
        let r = react(1.0, 1.0).agent_chain();
        assert!(r.iter().all(|a| a.input_extension_len == 64 && a.output_len == 128));
        let f = WorkloadConfig::new(Pattern::Reflexion, 1.0, 1.0).agent_chain();
        assert!(f.iter().all(|a| a.input_extension_len == 96 && a.output_len == 256));
    }

    #[test]
    fn config_validation() {
        assert_eq!(
            generate(&react(0.0, 1.0), 0),
            Err(WorkloadError::ArrivalRate(0.0))
        );
        assert_eq!(
            generate(&react(1.0, -1.0), 0),
            Err(WorkloadError::Duration(-1.0))
        );
        let mut cfg = react(1.0, 1.0);
        cfg.output_lens = Some(vec![1, 2]);
        assert!(matches!(
            cfg.validate(),
            Err(WorkloadError::LengthMismatch { .. })
        ));
        cfg.output_lens = Some(vec![1, 0, 1, 1]);
        assert_eq!(cfg.validate(), Err(WorkloadError::ZeroOutput));
    }

    #[test]
    fn synth_tokens_examples() {
        let a = synth_tokens(1, SessionId(3), Purpose::Prompt, 32);
        assert_eq!(a, synth_tokens(1, SessionId(3), Purpose::Prompt, 32));
        assert_eq!(a.len(), 32);
        assert!(synth_tokens(1, SessionId(3), Purpose::Prompt, 0).is_empty());

        let b = synth_tokens(1, SessionId(4), Purpose::Prompt, 32);
        let (lo_a, hi_a) = (
            *a.tokens().iter().min().unwrap(),
            *a.tokens().iter().max().unwrap(),
        );
        assert!(b.tokens().iter().all(|t| *t < lo_a || *t > hi_a));
        assert!(a.tokens().iter().all(|t| t >> 32 == 4));
        assert!(b.tokens().iter().all(|t| t >> 32 == 5));

        let shorter = synth_tokens(1, SessionId(3), Purpose::Prompt, 8);
        assert!(shorter.is_prefix_of(&a));
        assert_ne!(
            synth_tokens(1, SessionId(3), Purpose::Extension { turn: 0, step: 0 }, 8),
            synth_tokens(1, SessionId(3), Purpose::Extension { turn: 0, step: 1 }, 8)
        );
    }

    #[test]
    fn workload_file_round_trip() {
        let sessions = generate(&react(2.0, 5.0), 9).unwrap();
        let file = WorkloadFile::new(9, sessions);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        std::fs::write(&path, file.to_json()).unwrap();
        assert_eq!(WorkloadFile::load(&path).unwrap(), file);
    }
}
