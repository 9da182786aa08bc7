//! Classical stand-ins for the oracle-model quantum subroutines.
//!
//! Each subroutine computes its target exactly from the oracle's stored
//! (quantized) values, moves it inside the error ball its contract allows,
//! fails with the contract's probability, and charges a closed-form query
//! count to a [`QueryLedger`].

mod ops;

pub use ops::{
    additive_queries, min_find_queries, norm_queries, q_inner_additive, q_inner_relative,
    q_max_find, q_min_find, q_norm_estimate, q_state_sample, ratio_error_bound,
    relative_budget, relative_queries, state_queries, weight_on_demand, AdditiveCore,
    InnerEstimate,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use crate::noise::NoiseMode;
use crate::error::{check_len, check_range, Error, Result};

/// Per-oracle query counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    counts: BTreeMap<String, u128>,
    total: u128,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, key: &str, n: u128) {
        if n == 0 {
            return;
        }
        match self.counts.get_mut(key) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(key.to_string(), n);
            }
        }
        self.total += n;
    }

    pub fn get(&self, key: &str) -> u128 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<String, u128> {
        &self.counts
    }

    /// Counter-wise addition.
    pub fn merge(&mut self, other: &QueryLedger) {
        for (k, &v) in &other.counts {
            self.charge(k, v);
        }
    }
}

/// Constants behind every `O(.)` query count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryConstants {
    /// Minimum / maximum finding: `c_min sqrt(N) ln(1/delta)`.
    pub c_min: f64,
    /// Norm estimation: `c_ae sqrt(N) / eps ln(1/delta)`.
    pub c_ae: f64,
    /// State preparation: `c_aa sqrt(N) ln(1/delta)`.
    pub c_aa: f64,
    /// Inner-product estimation. Composite estimators are charged as the sum
    /// of their sub-calls, so this is reported but multiplies nothing.
    pub c_ip: f64,
    /// Queries per oracle access (compute, then uncompute).
    pub oracle_factor: u64,
}

impl Default for QueryConstants {
    fn default() -> Self {
        QueryConstants {
            c_min: 2.0,
            c_ae: 6.0 * std::f64::consts::PI,
            c_aa: 2.0,
            c_ip: 2.0,
            oracle_factor: 2,
        }
    }
}

/// Grid the oracles round their values to.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantization {
    /// `eta = min(1/(4N^2), eps/(2N), xi/(4N))` over the accuracies in play.
    #[default]
    Auto,
    Off,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default)]
    pub constants: QueryConstants,
    #[serde(default)]
    pub quantization: Quantization,
}

impl SimConfig {
    pub fn with_noise(noise: NoiseMode) -> Self {
        SimConfig { noise, ..Default::default() }
    }

    /// Exact values, no failures, no quantization.
    pub fn exact() -> Self {
        SimConfig { noise: NoiseMode::Exact, quantization: Quantization::Off, ..Default::default() }
    }

    /// Grid step for dimension `n` given the norm accuracies `eps` and
    /// sampling accuracies `xi` the run will request.
    pub fn eta(&self, n: usize, eps: &[f64], xi: &[f64]) -> f64 {
        match self.quantization {
            Quantization::Off => 0.0,
            Quantization::Fixed(e) => e,
            Quantization::Auto => {
                let n = n as f64;
                let mut eta = 1.0 / (4.0 * n * n);
                for &e in eps {
                    eta = eta.min(e / (2.0 * n));
                }
                for &x in xi {
                    eta = eta.min(x / (4.0 * n));
                }
                eta
            }
        }
    }

    pub fn injects_failures(&self) -> bool {
        self.noise.injects_failures()
    }
}

/// `1.5 * 2^52`.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// Nearest multiple of `eta` (identity for `eta = 0`).
#[inline]
pub fn round_to_grid(x: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        return x;
    }
    let k = x / eta;
    if k.abs() >= 4.5e15 {
        return x;
    }
    ((k + ROUND_MAGIC) - ROUND_MAGIC) * eta
}

/// Outcome of a simulated subroutine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult<T> {
    pub value: T,
    /// The call used up its failure probability; `value` carries no accuracy guarantee.
    pub failed: bool,
    /// Queries charged to the ledger by this call.
    pub queries: u128,
}

/// Vector accessor returning values rounded to an `eta` grid.
///
/// Every access costs `cost_per_access` queries against `key`; subroutines
/// charge whole batches of accesses at once.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedOracle {
    key: String,
    values: Vec<f64>,
    entry_error: f64,
    cost_per_access: u64,
}

impl QuantizedOracle {
    pub fn new(key: impl Into<String>, raw: &[f64], eta: f64, cost_per_access: u64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("oracle vector"));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::param("eta", "must be finite and non-negative"));
        }
        for (i, &v) in raw.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::OutOfRange { index: i, value: v, lo: f64::MIN, hi: f64::MAX });
            }
        }
        Ok(QuantizedOracle {
            key: key.into(),
            values: raw.iter().map(|&x| round_to_grid(x, eta)).collect(),
            entry_error: eta / 2.0,
            cost_per_access,
        })
    }

    /// Wraps values that are already quantized, each within `entry_error` of the truth.
    pub fn from_quantized(key: impl Into<String>, values: Vec<f64>, entry_error: f64, cost_per_access: u64) -> Self {
        QuantizedOracle { key: key.into(), values, entry_error, cost_per_access }
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Stored values, without charging (simulation internals and tests).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest distance between a stored value and the true one.
    pub fn entry_error(&self) -> f64 {
        self.entry_error
    }

    pub fn cost_per_access(&self) -> u64 {
        self.cost_per_access
    }

    /// One access: the quantized value, charged to the ledger.
    pub fn get(&self, j: usize, ledger: &mut QueryLedger) -> f64 {
        ledger.charge(&self.key, self.cost_per_access as u128);
        self.values[j]
    }

    pub(crate) fn charge(&self, accesses: u64, ledger: &mut QueryLedger) -> u128 {
        let q = accesses as u128 * self.cost_per_access as u128;
        ledger.charge(&self.key, q);
        q
    }
}

/// Per-round loss vectors kept on an `eta` grid, as the loss oracles of
/// every past round would return them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    n: usize,
    eta: f64,
    key: String,
    rows: Vec<f64>,
    cumulative: Vec<f64>,
}

impl LossHistory {
    pub fn new(n: usize, eta: f64, key: impl Into<String>) -> Self {
        LossHistory { n, eta, key: key.into(), rows: Vec::new(), cumulative: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    /// Rounds recorded so far.
    pub fn rounds(&self) -> usize {
        self.rows.len() / self.n.max(1)
    }

    /// Quantizes and appends one round; returns the stored row.
    pub fn push(&mut self, l: &[f64]) -> Result<&[f64]> {
        check_len(self.n, l.len())?;
        check_range(l, 0.0, 1.0)?;
        let start = self.rows.len();
        for (c, &x) in self.cumulative.iter_mut().zip(l) {
            let q = round_to_grid(x, self.eta).clamp(0.0, 1.0);
            self.rows.push(q);
            *c += q;
        }
        Ok(&self.rows[start..])
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t * self.n..(t + 1) * self.n]
    }

    /// `sum_{t' < t} l_j^(t')` with 1-based `t`, summed from the stored rows.
    pub fn cumulative_before(&self, j: usize, t: usize) -> f64 {
        (0..t.saturating_sub(1)).map(|s| self.rows[s * self.n + j]).sum()
    }

    /// Cumulative losses over every recorded round.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }
}

#[cfg(test)]
mod tests;
