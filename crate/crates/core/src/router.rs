//! Serving modes, fleet layout and routing decisions.
//!
//! In [`ServingMode::Baseline`] each model owns one prefill worker and its KV
//! lives in that model's namespace. In [`ServingMode::PrefillShare`] every
//! model reuses one base prefill module: all prefill KV lives in the shared
//! namespace and a session is pinned to a single prefill worker for its whole
//! lifetime, so every agent of the session lands on the worker holding its
//! context. Decode workers are always per model.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kv::Namespace;
use crate::model::{ModelId, SessionId, WorkerId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServingMode {
    Baseline,
    #[default]
    PrefillShare,
}

impl ServingMode {
    pub const ALL: [ServingMode; 2] = [ServingMode::Baseline, ServingMode::PrefillShare];

    pub fn as_str(self) -> &'static str {
        match self {
            ServingMode::Baseline => "baseline",
            ServingMode::PrefillShare => "prefillshare",
        }
    }

    /// Namespace prefill KV of `model` is cached under.
    pub fn namespace(self, model: ModelId) -> Namespace {
        match self {
            ServingMode::Baseline => Namespace::PerModel(model),
            ServingMode::PrefillShare => Namespace::Shared,
        }
    }
}

impl fmt::Display for ServingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ServingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(ServingMode::Baseline),
            "prefillshare" => Ok(ServingMode::PrefillShare),
            other => Err(format!(
                "unknown mode `{other}` (expected `baseline` or `prefillshare`)"
            )),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouterError {
    #[error("no worker serves model {0}")]
    UnknownModel(ModelId),
    #[error("session {session} is pinned to {pinned}; refusing to move it to {requested}")]
    Repin {
        session: SessionId,
        pinned: WorkerId,
        requested: WorkerId,
    },
}

/// Worker layout. Prefill workers take ids `0..P`, decode workers follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fleet {
    mode: ServingMode,
    models: Vec<ModelId>,
    prefill_workers: u32,
    decode_per_model: u32,
}

impl Fleet {
    pub fn new(
        mode: ServingMode,
        models: &[ModelId],
        shared_prefill_workers: Option<u32>,
        decode_per_model: u32,
    ) -> Self {
        let n = models.len() as u32;
        let prefill_workers = match mode {
            ServingMode::Baseline => n,
            ServingMode::PrefillShare => shared_prefill_workers.unwrap_or(n),
        };
        Self {
            mode,
            models: models.to_vec(),
            prefill_workers,
            decode_per_model,
        }
    }

    pub fn mode(&self) -> ServingMode {
        self.mode
    }

    pub fn models(&self) -> &[ModelId] {
        &self.models
    }

    pub fn prefill_count(&self) -> u32 {
        self.prefill_workers
    }

    pub fn decode_count(&self) -> u32 {
        self.models.len() as u32 * self.decode_per_model
    }

    fn model_index(&self, model: ModelId) -> Result<u32, RouterError> {
        self.models
            .iter()
            .position(|&m| m == model)
            .map(|i| i as u32)
            .ok_or(RouterError::UnknownModel(model))
    }

    /// Baseline prefill worker dedicated to `model`.
    pub fn dedicated_prefill(&self, model: ModelId) -> Result<WorkerId, RouterError> {
        self.model_index(model).map(WorkerId)
    }

    pub fn decode_workers(&self, model: ModelId) -> Result<Vec<WorkerId>, RouterError> {
        let i = self.model_index(model)?;
        let first = self.prefill_workers + i * self.decode_per_model;
        Ok((first..first + self.decode_per_model).map(WorkerId).collect())
    }

    /// Model served by a decode worker, `None` for prefill ids.
    pub fn decode_model(&self, worker: WorkerId) -> Option<ModelId> {
        let rel = worker.0.checked_sub(self.prefill_workers)?;
        self.models
            .get((rel / self.decode_per_model) as usize)
            .copied()
    }
}

/// Session to prefill-worker pins used in shared-prefill mode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoutingTable {
    pins: BTreeMap<SessionId, WorkerId>,
}

impl RoutingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, session: SessionId) -> Option<WorkerId> {
        self.pins.get(&session).copied()
    }

    /// Records a pin. A session's pin never changes while it lives.
    pub fn pin(&mut self, session: SessionId, worker: WorkerId) -> Result<(), RouterError> {
        match self.pins.get(&session) {
            Some(&pinned) if pinned != worker => Err(RouterError::Repin {
                session,
                pinned,
                requested: worker,
            }),
            _ => {
                self.pins.insert(session, worker);
                Ok(())
            }
        }
    }

    pub fn unpin(&mut self, session: SessionId) -> Option<WorkerId> {
        self.pins.remove(&session)
    }

    pub fn len(&self) -> usize {
        self.pins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty()
    }
}

/// Load snapshot of one prefill worker, as seen by the router.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefillLoad {
    pub worker: WorkerId,
    /// Queued plus running jobs.
    pub queued: usize,
    /// Live sessions pinned to the worker.
    pub pinned_sessions: u32,
}

/// Chooses the prefill worker for a request of `session` on `model`.
///
/// Baseline uses the model's dedicated worker. Shared-prefill mode returns
/// the session's pin if it has one; otherwise it pins the session to the
/// least-queued worker, breaking ties by fewest pinned sessions and then by
/// lowest id.
pub fn route_prefill(
    fleet: &Fleet,
    table: &mut RoutingTable,
    session: SessionId,
    model: ModelId,
    loads: &[PrefillLoad],
) -> Result<WorkerId, RouterError> {
    match fleet.mode {
        ServingMode::Baseline => fleet.dedicated_prefill(model),
        ServingMode::PrefillShare => {
            fleet.model_index(model)?;
            if let Some(w) = table.get(session) {
                return Ok(w);
            }
            let chosen = loads
                .iter()
                .min_by_key(|l| (l.queued, l.pinned_sessions, l.worker))
                .expect("at least one prefill worker")
                .worker;
            table.pin(session, chosen)?;
            Ok(chosen)
        }
    }
}

/// Least-loaded decode worker; ties go to the lowest id.
pub fn pick_decode(candidates: &[(WorkerId, usize)]) -> WorkerId {
    candidates
        .iter()
        .min_by_key(|&&(w, load)| (load, w))
        .expect("at least one decode worker")
        .0
}
