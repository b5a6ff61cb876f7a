//! Discrete-event cluster: event queue, prefill and decode workers, session
//! admission and the engine that drives sessions through
//! prefill, KV handoff and batched decode.

mod admission;
mod engine;
mod events;
mod worker;

pub use admission::{Admission, AdmissionController};
pub use engine::{simulate, simulate_sessions, SimError, SimOutcome, Simulation};
pub use events::EventQueue;
pub use worker::{DecodeWorker, PrefillWorker};
