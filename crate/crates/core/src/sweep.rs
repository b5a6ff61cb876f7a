//! Parameter sweeps over admission cap or arrival rate.
//!
//! Every cell derives its seed from the master seed and the bit pattern of
//! its axis value only, so both serving modes see the same workload and a
//! cell's result does not depend on which other cells run or in what order.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::cluster::{simulate, SimError};
use crate::config::SimConfig;
use crate::metrics::{write_atomic, MetricsReport};
use crate::router::ServingMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "axis", content = "values")]
pub enum SweepAxis {
    Concurrency(Vec<u32>),
    ArrivalRate(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Concurrency(_) => "concurrency",
            SweepAxis::ArrivalRate(_) => "arrival_rate",
        }
    }

    fn points(&self) -> Vec<AxisPoint> {
        match self {
            SweepAxis::Concurrency(v) => v.iter().map(|&c| AxisPoint::Concurrency(c)).collect(),
            SweepAxis::ArrivalRate(v) => v.iter().map(|&r| AxisPoint::ArrivalRate(r)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisPoint {
    Concurrency(u32),
    ArrivalRate(f64),
}

impl AxisPoint {
    pub fn value(self) -> f64 {
        match self {
            AxisPoint::Concurrency(c) => f64::from(c),
            AxisPoint::ArrivalRate(r) => r,
        }
    }

    fn bits(self) -> u64 {
        match self {
            AxisPoint::Concurrency(c) => u64::from(c),
            AxisPoint::ArrivalRate(r) => r.to_bits(),
        }
    }

    fn label(self) -> String {
        match self {
            AxisPoint::Concurrency(c) => format!("concurrency_{c}"),
            AxisPoint::ArrivalRate(r) => format!("rate_{r}"),
        }
    }

    fn apply(self, cfg: &mut SimConfig) {
        match self {
            AxisPoint::Concurrency(c) => cfg.fleet.max_concurrent_sessions = Some(c),
            AxisPoint::ArrivalRate(r) => cfg.workload.arrival_rate = r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub modes: Vec<ServingMode>,
    pub master_seed: u64,
    /// Pick each cell's admission cap from `run.auto_concurrency_caps` by
    /// maximum throughput.
    pub auto_concurrency: bool,
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub mode: ServingMode,
    pub point: AxisPoint,
    pub seed: u64,
    /// Admission cap actually used.
    pub concurrency: Option<u32>,
    pub report: MetricsReport,
}

/// Seed of the cell at `point`. Independent of mode and of the other cells.
pub fn cell_seed(master_seed: u64, point: AxisPoint) -> u64 {
    let mut rng = SplitMix64::seed_from_u64(master_seed ^ point.bits().rotate_left(17));
    rng.next_u64()
}

/// Runs every `(mode, point)` cell. Results come back in mode-major,
/// axis-minor order whether or not cells run in parallel.
pub fn run_sweep(base: &SimConfig, spec: &SweepSpec) -> Result<Vec<SweepCell>, SimError> {
    let jobs: Vec<(ServingMode, AxisPoint)> = spec
        .modes
        .iter()
        .flat_map(|&m| spec.axis.points().into_iter().map(move |p| (m, p)))
        .collect();
    let run = |&(mode, point): &(ServingMode, AxisPoint)| run_cell(base, spec, mode, point);
    if spec.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    }
}

fn run_cell(
    base: &SimConfig,
    spec: &SweepSpec,
    mode: ServingMode,
    point: AxisPoint,
) -> Result<SweepCell, SimError> {
    let seed = cell_seed(spec.master_seed, point);
    let mut cfg = base.clone();
    cfg.run.mode = mode;
    cfg.run.seed = seed;
    point.apply(&mut cfg);
    if spec.auto_concurrency && !matches!(point, AxisPoint::Concurrency(_)) {
        let (cap, report) = auto_concurrency(&cfg, spec.parallel)?;
        return Ok(SweepCell {
            mode,
            point,
            seed,
            concurrency: Some(cap),
            report,
        });
    }
    let report = simulate(&cfg, false)?.report;
    Ok(SweepCell {
        mode,
        point,
        seed,
        concurrency: cfg.fleet.max_concurrent_sessions,
        report,
    })
}

/// Tries every candidate cap on the same seed and keeps the one with the
/// highest throughput; ties go to the smaller cap.
pub fn auto_concurrency(
    cfg: &SimConfig,
    parallel: bool,
) -> Result<(u32, MetricsReport), SimError> {
    let caps = &cfg.run.auto_concurrency_caps;
    assert!(!caps.is_empty(), "auto_concurrency_caps is empty");
    let run = |&cap: &u32| {
        let mut c = cfg.clone();
        c.fleet.max_concurrent_sessions = Some(cap);
        simulate(&c, false).map(|o| (cap, o.report))
    };
    let results: Vec<(u32, MetricsReport)> = if parallel {
        caps.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        caps.iter().map(run).collect::<Result<_, _>>()?
    };
    let mut best: Option<(u32, MetricsReport)> = None;
    for (cap, report) in results {
        let better = match &best {
            None => true,
            Some((bcap, b)) => {
                let (t, bt) = (report.requests.throughput_tok_s, b.requests.throughput_tok_s);
                t > bt || (t == bt && cap < *bcap)
            }
        };
        if better {
            best = Some((cap, report));
        }
    }
    Ok(best.expect("non-empty"))
}

pub const SUMMARY_HEADER: &str = "mode,axis,value,seed,concurrency,throughput_tok_s,p95_e2e_us,\
mean_ttft_us,hit_ratio,failed_requests,staged_handoffs,evictions";

pub fn summary_csv(axis: &str, cells: &[SweepCell]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        let r = &c.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3},{},{},{:.6},{},{},{}",
            c.mode,
            axis,
            c.point.value(),
            c.seed,
            c.concurrency.map_or(String::new(), |v| v.to_string()),
            r.requests.throughput_tok_s,
            r.requests.p95_e2e_us.map_or(String::new(), |v| v.to_string()),
            r.requests
                .mean_ttft_us
                .map_or(String::new(), |v| format!("{v:.1}")),
            r.cache.hit_ratio,
            r.fleet.failed_requests,
            r.fleet.staged_handoffs,
            r.cache.evictions,
        );
    }
    out
}

/// Writes one directory per cell plus `summary.csv`.
pub fn write_sweep(dir: &Path, axis: &str, cells: &[SweepCell]) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for c in cells {
        c.report
            .write_to_dir(&dir.join(format!("{}_{}", c.mode, c.point.label())))?;
    }
    write_atomic(&dir.join("summary.csv"), summary_csv(axis, cells).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_only_on_master_and_point() {
        let a = cell_seed(7, AxisPoint::Concurrency(40));
        assert_eq!(a, cell_seed(7, AxisPoint::Concurrency(40)));
        assert_ne!(a, cell_seed(7, AxisPoint::Concurrency(50)));
        assert_ne!(a, cell_seed(8, AxisPoint::Concurrency(40)));
        assert_ne!(
            cell_seed(7, AxisPoint::ArrivalRate(1.0)),
            cell_seed(7, AxisPoint::ArrivalRate(2.0))
        );
    }
}
