use std::collections::VecDeque;

use crate::model::SessionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    /// Waiting; `position` is zero-based.
    Queued { position: usize },
}

/// FIFO admission with an optional cap on simultaneously active sessions.
#[derive(Debug, Clone, Default)]
pub struct AdmissionController {
    cap: Option<u32>,
    active: u32,
    peak_active: u32,
    waiting: VecDeque<SessionId>,
}

impl AdmissionController {
    pub fn new(cap: Option<u32>) -> Self {
        Self {
            cap,
            ..Self::default()
        }
    }

    pub fn try_admit(&mut self, session: SessionId) -> Admission {
        if self.cap.is_some_and(|c| self.active >= c) {
            self.waiting.push_back(session);
            Admission::Queued {
                position: self.waiting.len() - 1,
            }
        } else {
            self.activate();
            Admission::Admitted
        }
    }

    /// Frees one slot and admits the head of the queue into it, if any.
    pub fn release(&mut self) -> Option<SessionId> {
        assert!(self.active > 0, "release without an active session");
        self.active -= 1;
        let next = self.waiting.pop_front()?;
        self.activate();
        Some(next)
    }

    fn activate(&mut self) {
        self.active += 1;
        self.peak_active = self.peak_active.max(self.active);
    }

    pub fn active(&self) -> u32 {
        self.active
    }

    pub fn peak_active(&self) -> u32 {
        self.peak_active
    }

    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }
}
