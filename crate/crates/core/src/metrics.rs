//! Per-request records, aggregate statistics and report writers.
//!
//! Percentiles use the nearest-rank method: the p-th percentile of `n`
//! sorted values is the element at rank `ceil(p / 100 * n)` (1-based).
//! Throughput counts output tokens emitted in `[w * T, T]`, where `T` is the
//! time of the last event and `w` the warmup fraction, divided by
//! `(1 - w) * T` seconds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::model::{ModelId, RequestId, SessionId};
use crate::router::ServingMode;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "request_id,session_id,model_id,ttft_us,e2e_us,out_tokens";

pub const HIT_RATIO_DEFINITION: &str = "sum of matched prefix tokens over sum of lookup tokens, \
     where every prefill lookup counts the full context length of its request";
pub const THROUGHPUT_DEFINITION: &str = "output tokens emitted in [warmup_fraction * T_end, T_end] \
     divided by (1 - warmup_fraction) * T_end seconds";
pub const PERCENTILE_DEFINITION: &str = "nearest rank: sorted[ceil(p / 100 * n) - 1]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub request_id: RequestId,
    pub session_id: SessionId,
    pub model_id: ModelId,
    pub turn_index: u32,
    pub step_index: u32,
    pub issue_us: u64,
    pub ttft_us: u64,
    pub e2e_us: u64,
    pub out_tokens: u32,
    /// Gaps between consecutive output tokens.
    pub itl_us: Vec<u64>,
}

impl RequestRecord {
    /// Absolute emission time of every output token.
    pub fn token_times(&self) -> impl Iterator<Item = u64> + '_ {
        let first = self.issue_us + self.ttft_us;
        std::iter::once(first).chain(self.itl_us.iter().scan(first, |t, gap| {
            *t += gap;
            Some(*t)
        }))
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.request_id.0,
            self.session_id.0,
            self.model_id.0,
            self.ttft_us,
            self.e2e_us,
            self.out_tokens
        )
    }
}

/// Nearest-rank percentile; `None` for an empty sample.
pub fn percentile(values: &[u64], p: f64) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn mean(values: &[u64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64)
    }
}

/// Output tokens per second inside the post-warmup window.
pub fn windowed_throughput(
    token_times: impl IntoIterator<Item = u64>,
    end_us: u64,
    warmup_fraction: f64,
) -> f64 {
    if end_us == 0 {
        return 0.0;
    }
    let start = warmup_fraction * end_us as f64;
    let count = token_times
        .into_iter()
        .filter(|&t| t as f64 >= start && t <= end_us)
        .count();
    let window_s = (1.0 - warmup_fraction) * end_us as f64 / 1e6;
    count as f64 / window_s
}

/// Aggregates derivable from request records alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestAggregates {
    pub completed_requests: u64,
    pub output_tokens: u64,
    pub end_us: u64,
    pub warmup_fraction: f64,
    pub throughput_tok_s: f64,
    pub mean_ttft_us: Option<f64>,
    pub p95_ttft_us: Option<u64>,
    pub mean_e2e_us: Option<f64>,
    pub p95_e2e_us: Option<u64>,
    pub mean_itl_us: Option<f64>,
    pub p95_itl_us: Option<u64>,
}

impl RequestAggregates {
    pub fn from_records(records: &[RequestRecord], end_us: u64, warmup_fraction: f64) -> Self {
        let ttft: Vec<u64> = records.iter().map(|r| r.ttft_us).collect();
        let e2e: Vec<u64> = records.iter().map(|r| r.e2e_us).collect();
        let itl: Vec<u64> = records.iter().flat_map(|r| r.itl_us.iter().copied()).collect();
        Self {
            completed_requests: records.len() as u64,
            output_tokens: records.iter().map(|r| u64::from(r.out_tokens)).sum(),
            end_us,
            warmup_fraction,
            throughput_tok_s: windowed_throughput(
                records.iter().flat_map(|r| r.token_times()),
                end_us,
                warmup_fraction,
            ),
            mean_ttft_us: mean(&ttft),
            p95_ttft_us: percentile(&ttft, 95.0),
            mean_e2e_us: mean(&e2e),
            p95_e2e_us: percentile(&e2e, 95.0),
            mean_itl_us: mean(&itl),
            p95_itl_us: percentile(&itl, 95.0),
        }
    }
}

/// Prefix-cache statistics summed over all prefill pools.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheSummary {
    pub matched_tokens: u64,
    pub lookup_tokens: u64,
    pub hit_ratio: f64,
    pub hit_ratio_by_namespace: BTreeMap<String, f64>,
    /// Peak of the instantaneous per-namespace footprint summed over pools.
    pub peak_footprint_tokens: BTreeMap<String, u64>,
    pub peak_footprint_total_tokens: u64,
    pub evictions: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FleetSummary {
    pub prefill_workers: u32,
    pub decode_workers: u32,
    pub sessions: u64,
    pub completed_sessions: u64,
    pub failed_sessions: u64,
    pub failed_requests: u64,
    pub handoffs: u64,
    pub staged_handoffs: u64,
    pub peak_decode_resident_fraction: f64,
    pub peak_active_sessions: u32,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub hit_ratio: String,
    pub throughput: String,
    pub percentile: String,
}

impl Default for ReportMetadata {
    fn default() -> Self {
        Self {
            hit_ratio: HIT_RATIO_DEFINITION.to_string(),
            throughput: THROUGHPUT_DEFINITION.to_string(),
            percentile: PERCENTILE_DEFINITION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub mode: ServingMode,
    pub seed: u64,
    pub metadata: ReportMetadata,
    pub config: SimConfig,
    pub requests: RequestAggregates,
    pub cache: CacheSummary,
    pub fleet: FleetSummary,
    #[serde(skip)]
    pub records: Vec<RequestRecord>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        records_csv(&self.records)
    }

    /// Writes `report.json` and `requests.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.json"), self.to_json().as_bytes())?;
        write_atomic(&dir.join("requests.csv"), self.to_csv().as_bytes())
    }
}

pub fn records_csv(records: &[RequestRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 95.0), Some(95));
        assert_eq!(percentile(&v, 100.0), Some(100));
        assert_eq!(percentile(&[7], 95.0), Some(7));
        assert_eq!(percentile(&[3, 1, 2], 50.0), Some(2));
        assert_eq!(percentile(&[10, 20], 95.0), Some(20));
        assert_eq!(percentile(&[10, 20], 0.0), Some(10));
        assert_eq!(percentile(&[], 95.0), None);
    }

    fn rec(id: u64, issue: u64, ttft: u64, itl: Vec<u64>) -> RequestRecord {
        let e2e = ttft + itl.iter().sum::<u64>();
        RequestRecord {
            request_id: RequestId(id),
            session_id: SessionId(0),
            model_id: ModelId(0),
            turn_index: 0,
            step_index: 0,
            issue_us: issue,
            ttft_us: ttft,
            e2e_us: e2e,
            out_tokens: itl.len() as u32 + 1,
            itl_us: itl,
        }
    }

    #[test]
    fn token_times_accumulate() {
        let r = rec(0, 100, 50, vec![10, 20]);
        assert_eq!(r.token_times().collect::<Vec<_>>(), vec![150, 160, 180]);
    }

    #[test]
    fn warmup_excludes_cold_start() {
        // 10 tokens over the first second, then 100 tokens over the next nine.
        let mut times: Vec<u64> = (0..10).map(|i| i * 100_000).collect();
        times.extend((0..100).map(|i| 1_000_000 + i * 90_000));
        let end = 10_000_000;
        let whole = windowed_throughput(times.iter().copied(), end, 0.0);
        let warm = windowed_throughput(times.iter().copied(), end, 0.1);
        assert!((whole - 11.0).abs() < 1e-9);
        assert!((warm - 100.0 / 9.0).abs() < 1e-9);
        assert!(warm >= whole);
    }

    #[test]
    fn csv_has_exact_header() {
        let csv = records_csv(&[rec(3, 0, 5, vec![1])]);
        assert_eq!(csv, format!("{CSV_HEADER}\n3,0,0,5,6,2\n"));
    }

    #[test]
    fn aggregates_of_empty_run() {
        let a = RequestAggregates::from_records(&[], 0, 0.1);
        assert_eq!(a.p95_e2e_us, None);
        assert_eq!(a.throughput_tok_s, 0.0);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
