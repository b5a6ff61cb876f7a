use std::collections::VecDeque;

use crate::kv::Pool;
use crate::model::{ModelId, RequestId, WorkerId};

/// A prefill worker: one FIFO job queue served one job at a time, plus the
/// worker's prefix-cache pool.
#[derive(Debug)]
pub struct PrefillWorker {
    pub id: WorkerId,
    pub pool: Pool,
    pub queue: VecDeque<RequestId>,
    pub running: Option<RequestId>,
    pub pinned_sessions: u32,
}

impl PrefillWorker {
    pub fn new(id: WorkerId, pool: Pool) -> Self {
        Self {
            id,
            pool,
            queue: VecDeque::new(),
            running: None,
            pinned_sessions: 0,
        }
    }

    pub fn backlog(&self) -> usize {
        self.queue.len() + usize::from(self.running.is_some())
    }
}

#[derive(Debug)]
pub struct DecodeWorker {
    pub id: WorkerId,
    pub model: ModelId,
    pub capacity_tokens: u64,
    pub resident_tokens: u64,
    pub max_batch: usize,
    /// Handoff currently on the link.
    pub receiving: Option<RequestId>,
    pub stepping: bool,
    pub ingest: VecDeque<RequestId>,
    /// Ingested requests waiting for a batch slot.
    pub ready: VecDeque<RequestId>,
    /// Active batch in join order.
    pub batch: Vec<RequestId>,
    pub peak_resident_tokens: u64,
    pub handoffs: u64,
    pub staged_handoffs: u64,
    pub steps: u64,
}

impl DecodeWorker {
    pub fn new(id: WorkerId, model: ModelId, capacity_tokens: u64, max_batch: usize) -> Self {
        Self {
            id,
            model,
            capacity_tokens,
            resident_tokens: 0,
            max_batch,
            receiving: None,
            stepping: false,
            ingest: VecDeque::new(),
            ready: VecDeque::new(),
            batch: Vec::new(),
            peak_resident_tokens: 0,
            handoffs: 0,
            staged_handoffs: 0,
            steps: 0,
        }
    }

    pub fn resident_fraction(&self) -> f64 {
        self.resident_tokens as f64 / self.capacity_tokens as f64
    }

    /// Requests assigned to this worker and not yet finished.
    pub fn load(&self) -> usize {
        self.ingest.len()
            + self.ready.len()
            + self.batch.len()
            + usize::from(self.receiving.is_some())
    }

    pub fn add_resident(&mut self, tokens: u64) {
        self.resident_tokens += tokens;
        self.peak_resident_tokens = self.peak_resident_tokens.max(self.resident_tokens);
    }

    /// Moves ready requests into free batch slots.
    pub fn fill_batch(&mut self) {
        while self.batch.len() < self.max_batch {
            match self.ready.pop_front() {
                Some(r) => self.batch.push(r),
                None => break,
            }
        }
    }
}
