//! Analytic latency model: compute-bound prefill, memory-bound batched decode
//! steps, and KV handoff with a staging penalty under decode-side memory
//! pressure. All outputs are whole microseconds, rounded half-up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Fixed per-request prefill cost, µs.
    pub prefill_fixed_overhead_us: f64,
    /// Prefill throughput of one worker, tokens/s.
    pub prefill_rate_tok_s: f64,
    /// Fixed cost of one batched decode step, µs.
    pub decode_step_base_us: f64,
    /// Added per request in the batch, µs.
    pub decode_step_per_request_us: f64,
    /// Added per 1000 resident KV tokens on the decode worker, µs.
    pub decode_step_per_kv_ktoken_us: f64,
    pub kv_bytes_per_token: f64,
    /// Prefill-to-decode transfer bandwidth, bytes/s.
    pub transfer_bandwidth_bytes_s: f64,
    /// Fraction of decode KV capacity above which handoffs are staged.
    pub staging_threshold: f64,
    /// Multiplier applied to a staged handoff.
    pub staging_penalty: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            prefill_fixed_overhead_us: 2_000.0,
            prefill_rate_tok_s: 8_000.0,
            decode_step_base_us: 10_000.0,
            decode_step_per_request_us: 500.0,
            decode_step_per_kv_ktoken_us: 50.0,
            kv_bytes_per_token: 262_144.0,
            transfer_bandwidth_bytes_s: 64.0 * (1u64 << 30) as f64,
            staging_threshold: 0.9,
            staging_penalty: 4.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("cost parameter `{0}` must be > 0 (got {1})")]
    NonPositive(&'static str, f64),
    #[error("cost parameter `{0}` must be >= 0 (got {1})")]
    Negative(&'static str, f64),
    #[error("staging_penalty must be >= 1 (got {0})")]
    PenaltyBelowOne(f64),
    #[error("staging_threshold must be in (0, 1] (got {0})")]
    Threshold(f64),
}

pub fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

impl CostParams {
    pub fn validate(&self) -> Result<(), CostError> {
        for (name, v) in [
            ("prefill_rate_tok_s", self.prefill_rate_tok_s),
            ("kv_bytes_per_token", self.kv_bytes_per_token),
            ("transfer_bandwidth_bytes_s", self.transfer_bandwidth_bytes_s),
        ] {
            if !(v > 0.0) {
                return Err(CostError::NonPositive(name, v));
            }
        }
        for (name, v) in [
            ("prefill_fixed_overhead_us", self.prefill_fixed_overhead_us),
            ("decode_step_base_us", self.decode_step_base_us),
            ("decode_step_per_request_us", self.decode_step_per_request_us),
            (
                "decode_step_per_kv_ktoken_us",
                self.decode_step_per_kv_ktoken_us,
            ),
        ] {
            if !(v >= 0.0) {
                return Err(CostError::Negative(name, v));
            }
        }
        if !(self.staging_penalty >= 1.0) {
            return Err(CostError::PenaltyBelowOne(self.staging_penalty));
        }
        if !(self.staging_threshold > 0.0 && self.staging_threshold <= 1.0) {
            return Err(CostError::Threshold(self.staging_threshold));
        }
        Ok(())
    }

    /// Duration of a prefill job computing `new_tokens` uncached tokens.
    pub fn prefill_time(&self, new_tokens: u64) -> u64 {
        round_half_up(self.prefill_fixed_overhead_us)
            + round_half_up(new_tokens as f64 / self.prefill_rate_tok_s * 1e6)
    }

    /// Duration of one synchronous decode step over `batch_size` requests.
    ///
    /// # Panics
    /// If `batch_size` is zero.
    pub fn decode_step_time(&self, batch_size: usize, resident_kv_tokens: u64) -> u64 {
        assert!(batch_size >= 1, "decode step needs a non-empty batch");
        round_half_up(
            self.decode_step_base_us
                + self.decode_step_per_request_us * batch_size as f64
                + self.decode_step_per_kv_ktoken_us * (resident_kv_tokens as f64 / 1000.0),
        )
    }

    pub fn is_staged(&self, decode_resident_fraction: f64) -> bool {
        decode_resident_fraction > self.staging_threshold
    }

    /// Transfer time for `tokens` of KV. The unpenalized transfer is rounded
    /// first; a staged transfer is that value times `staging_penalty`.
    pub fn handoff_time(&self, tokens: u64, decode_resident_fraction: f64) -> u64 {
        let base = round_half_up(
            tokens as f64 * self.kv_bytes_per_token / self.transfer_bandwidth_bytes_s * 1e6,
        );
        if self.is_staged(decode_resident_fraction) {
            round_half_up(base as f64 * self.staging_penalty)
        } else {
            base
        }
    }
}
