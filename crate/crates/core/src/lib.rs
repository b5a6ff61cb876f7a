//! Deterministic discrete-event simulator for multi-model, disaggregated LLM
//! serving in which task-specific models can share one prefill module and
//! its prefix KV cache.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: identifiers, time, token sequences, sessions, events.
//! * [`kv`]: block-granular KV pools with a namespaced prefix index.
//! * [`cost`]: analytic prefill, decode and handoff latencies.
//! * [`router`]: serving modes, fleet layout and routing decisions.
//! * [`cluster`]: the event loop, workers, admission and engine.
//! * [`workload`]: seeded session generation and workload files.
//! * [`metrics`]: per-request records, aggregates and report writers.
//! * [`config`] and [`sweep`]: run configuration and parameter sweeps.
//!
//! ```
//! use kvshare_sim::config::SimConfig;
//!
//! let cfg = SimConfig::from_toml_str(
//!     "[workload]\npattern = \"react\"\narrival_rate = 1.0\nduration_s = 5.0\n",
//! )
//! .unwrap();
//! let out = kvshare_sim::cluster::simulate(&cfg, false).unwrap();
//! assert_eq!(out.report.fleet.failed_requests, 0);
//! ```

pub mod cluster;
pub mod config;
pub mod cost;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod router;
pub mod sweep;
pub mod workload;

pub use cluster::{simulate, simulate_sessions, SimError, SimOutcome, Simulation};
pub use config::SimConfig;
pub use metrics::MetricsReport;
pub use router::ServingMode;
