//! Run configuration. Accepted as TOML or JSON with sections `[run]`,
//! `[fleet]`, `[cache]`, `[cost]` and `[workload]`; only `[workload]` is
//! mandatory. See `docs/config-reference.md` for every field and default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, CostParams};
use crate::router::ServingMode;
use crate::workload::{WorkloadConfig, WorkloadError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub fleet: FleetConfig,
    #[serde(default)]
    pub cache: CacheConfig,
    #[serde(default)]
    pub cost: CostParams,
    pub workload: WorkloadConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: ServingMode,
    pub seed: u64,
    /// Leading fraction of the run excluded from throughput.
    pub warmup_fraction: f64,
    /// Fault if the next event is further than this many simulated seconds away.
    pub livelock_bound_s: f64,
    /// Candidate admission caps tried per cell by `--auto-concurrency`.
    pub auto_concurrency_caps: Vec<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: ServingMode::PrefillShare,
            seed: 0,
            warmup_fraction: 0.1,
            livelock_bound_s: 3600.0,
            auto_concurrency_caps: (1..=16).map(|i| i * 10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    /// Shared prefill pool size; defaults to one per model. Baseline mode
    /// always runs one dedicated prefill worker per model.
    pub prefill_workers: Option<u32>,
    pub decode_workers_per_model: u32,
    /// Upper bound on a decode worker's active batch.
    pub max_batch: u32,
    /// Admission cap on simultaneously active sessions; absent means unlimited.
    pub max_concurrent_sessions: Option<u32>,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            prefill_workers: None,
            decode_workers_per_model: 1,
            max_batch: 256,
            max_concurrent_sessions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub block_size: u32,
    /// Per prefill worker: a block count or `"unbounded"`.
    pub prefill_capacity_blocks: Capacity,
    /// Per decode worker. Exceeding it engages staging, never drops requests.
    pub decode_capacity_blocks: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            block_size: 16,
            prefill_capacity_blocks: Capacity::Blocks(4_096),
            decode_capacity_blocks: 4_096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CapacityRepr", into = "CapacityRepr")]
pub enum Capacity {
    Blocks(u64),
    Unbounded,
}

impl Capacity {
    pub fn blocks(self) -> Option<u64> {
        match self {
            Capacity::Blocks(n) => Some(n),
            Capacity::Unbounded => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CapacityRepr {
    Blocks(u64),
    Word(String),
}

impl TryFrom<CapacityRepr> for Capacity {
    type Error = String;

    fn try_from(r: CapacityRepr) -> Result<Self, String> {
        match r {
            CapacityRepr::Blocks(n) => Ok(Capacity::Blocks(n)),
            CapacityRepr::Word(w) if w == "unbounded" => Ok(Capacity::Unbounded),
            CapacityRepr::Word(w) => Err(format!(
                "expected a block count or \"unbounded\", got \"{w}\""
            )),
        }
    }
}

impl From<Capacity> for CapacityRepr {
    fn from(c: Capacity) -> Self {
        match c {
            Capacity::Blocks(n) => CapacityRepr::Blocks(n),
            Capacity::Unbounded => CapacityRepr::Word("unbounded".into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config: {0}")]
    Workload(#[from] WorkloadError),
    #[error("config [cost]: {0}")]
    Cost(#[from] CostError),
    #[error("config: {field} {message}")]
    Field {
        field: &'static str,
        message: String,
    },
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::parse(text, "<toml>", Format::Toml)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        Self::parse(text, "<json>", Format::Json)
    }

    /// Loads a config file; `.json` files are parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: p.clone(),
            source,
        })?;
        let format = if path.extension().is_some_and(|e| e == "json") {
            Format::Json
        } else {
            Format::Toml
        };
        Self::parse(&text, &p, format)
    }

    fn parse(text: &str, origin: &str, format: Format) -> Result<Self, ConfigError> {
        let cfg: SimConfig = match format {
            Format::Toml => toml::from_str(text).map_err(|e| ConfigError::Parse {
                path: origin.to_string(),
                message: e.to_string().trim_end().to_string(),
            })?,
            Format::Json => serde_json::from_str(text).map_err(|e| ConfigError::Parse {
                path: origin.to_string(),
                message: e.to_string(),
            })?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workload.validate()?;
        self.cost.validate()?;
        let field = |field, message: &str| ConfigError::Field {
            field,
            message: message.to_string(),
        };
        if self.cache.block_size == 0 {
            return Err(field("cache.block_size", "must be >= 1"));
        }
        if self.cache.prefill_capacity_blocks == Capacity::Blocks(0) {
            return Err(field("cache.prefill_capacity_blocks", "must be >= 1"));
        }
        if self.cache.decode_capacity_blocks == 0 {
            return Err(field("cache.decode_capacity_blocks", "must be >= 1"));
        }
        if self.fleet.decode_workers_per_model == 0 {
            return Err(field("fleet.decode_workers_per_model", "must be >= 1"));
        }
        if self.fleet.prefill_workers == Some(0) {
            return Err(field("fleet.prefill_workers", "must be >= 1"));
        }
        if self.fleet.max_batch == 0 {
            return Err(field("fleet.max_batch", "must be >= 1"));
        }
        if self.fleet.max_concurrent_sessions == Some(0) {
            return Err(field("fleet.max_concurrent_sessions", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.run.warmup_fraction) {
            return Err(field("run.warmup_fraction", "must be in [0, 1)"));
        }
        if !(self.run.livelock_bound_s > 0.0) {
            return Err(field("run.livelock_bound_s", "must be > 0"));
        }
        let mut models = self.workload.models.clone();
        models.sort();
        models.dedup();
        if models.len() != self.workload.models.len() {
            return Err(field("workload.models", "must not contain duplicates"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Clone, Copy)]
enum Format {
    Toml,
    Json,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::Pattern;

    const MINIMAL: &str = r#"
[workload]
pattern = "react"
arrival_rate = 4.0
duration_s = 60.0
"#;

    #[test]
    fn minimal_toml_gets_defaults() {
        let cfg = SimConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.workload.pattern, Pattern::React);
        assert_eq!(cfg.cost, CostParams::default());
        assert_eq!(cfg.cache.block_size, 16);
        assert_eq!(cfg.run.mode, ServingMode::PrefillShare);
        assert_eq!(cfg.run.warmup_fraction, 0.1);
    }

    #[test]
    fn json_is_accepted() {
        let cfg = SimConfig::from_json_str(
            r#"{"workload": {"pattern": "reflexion", "arrival_rate": 1.0, "duration_s": 5.0},
                "run": {"mode": "baseline", "seed": 3}}"#,
        )
        .unwrap();
        assert_eq!(cfg.run.mode, ServingMode::Baseline);
        assert_eq!(cfg.run.seed, 3);
    }

    #[test]
    fn missing_field_is_named() {
        let err = SimConfig::from_toml_str("[workload]\npattern = \"react\"\nduration_s = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("arrival_rate"), "{err}");
        let err = SimConfig::from_toml_str("[run]\nseed = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("workload"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected_with_location() {
        let err = SimConfig::from_toml_str(&format!("{MINIMAL}\n[cache]\nblok_size = 4\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("blok_size"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn semantic_validation() {
        let err = SimConfig::from_toml_str(&format!("{MINIMAL}\n[cache]\nblock_size = 0\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("cache.block_size"), "{err}");
        let err = SimConfig::from_toml_str(&format!("{MINIMAL}\n[cost]\nstaging_penalty = 0.5\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("staging_penalty"), "{err}");
    }

    #[test]
    fn unbounded_prefill_pool() {
        let cfg = SimConfig::from_toml_str(&format!(
            "{MINIMAL}\n[cache]\nprefill_capacity_blocks = \"unbounded\"\n"
        ))
        .unwrap();
        assert_eq!(cfg.cache.prefill_capacity_blocks, Capacity::Unbounded);
        assert_eq!(SimConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
        let err = SimConfig::from_toml_str(&format!(
            "{MINIMAL}\n[cache]\nprefill_capacity_blocks = \"lots\"\n"
        ))
        .unwrap_err()
        .to_string();
        assert!(err.contains("unbounded"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(SimConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }
}
