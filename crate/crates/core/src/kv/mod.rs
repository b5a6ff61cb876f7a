//! Block-granular KV-cache pool with a namespaced prefix index.
//!
//! Every pool caches block-aligned token prefixes. A prefix of `k` full
//! blocks is represented by a chain of `k` [`KvBlock`]s hanging off the
//! namespace root; siblings are keyed by the token run they cover, so the
//! index is a radix tree whose edges are one block wide. Partial tail blocks
//! are never indexed.
//!
//! Lookups pin the blocks they return. Pinned blocks are never evicted.
//! Eviction removes unpinned leaves in ascending `(last_access, block_id)`
//! order, so a cached path is always trimmed from its deepest block first and
//! no interior prefix is left dangling.

mod dump;
mod pool;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelId, SimTime};

pub use pool::Pool;

/// Parameter identity a cached KV block is valid under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    /// The shared base prefill module.
    Shared,
    /// A task-specific fine-tuned model.
    PerModel(ModelId),
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Namespace::Shared => f.write_str("shared"),
            Namespace::PerModel(m) => write!(f, "{m}"),
        }
    }
}

/// Block ids are allocated from a per-pool counter and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u64);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// Read-only view of one cached block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvBlock {
    pub block_id: BlockId,
    pub namespace: Namespace,
    /// Number of full blocks from the namespace root down to and including this one.
    pub depth: usize,
    pub ref_count: u32,
    pub last_access: SimTime,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefixMatch {
    pub matched_tokens: usize,
    /// Root-to-leaf order.
    pub blocks: Vec<BlockId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub capacity_blocks: usize,
    pub used_blocks: usize,
    pub free_blocks: usize,
    pub matched_tokens: u64,
    pub lookup_tokens: u64,
    pub eviction_count: u64,
}

impl PoolStats {
    /// Token-weighted prefix hit ratio in `[0, 1]`; zero when nothing was looked up.
    pub fn hit_ratio(&self) -> f64 {
        if self.lookup_tokens == 0 {
            0.0
        } else {
            self.matched_tokens as f64 / self.lookup_tokens as f64
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KvError {
    #[error("capacity exhausted: need {need} free blocks, only {available} obtainable")]
    CapacityExhausted { need: usize, available: usize },
    #[error("release of {0} would drive its ref_count below zero")]
    RefUnderflow(BlockId),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
}
