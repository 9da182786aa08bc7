use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LossHistory, QuantizedOracle, QueryConstants, QueryLedger, SimConfig, SimResult};
use crate::error::{check_len, check_open_unit, Error, Result};
use crate::noise::{failure_error, NoiseMode};
use crate::sampling::AliasTable;

fn ceil_count(x: f64) -> u64 {
    (x.ceil() as u64).max(1)
}

/// `ceil(c_min sqrt(N) ln(1/delta))`
pub fn min_find_queries(n: usize, delta: f64, c: &QueryConstants) -> u64 {
    ceil_count(c.c_min * (n as f64).sqrt() * (1.0 / delta).ln())
}

/// `ceil(c_ae sqrt(N) / eps ln(1/delta))`
pub fn norm_queries(n: usize, epsilon: f64, delta: f64, c: &QueryConstants) -> u64 {
    ceil_count(c.c_ae * (n as f64).sqrt() / epsilon * (1.0 / delta).ln())
}

/// `ceil(c_aa sqrt(N) ln(1/delta))`
pub fn state_queries(n: usize, delta: f64, c: &QueryConstants) -> u64 {
    ceil_count(c.c_aa * (n as f64).sqrt() * (1.0 / delta).ln())
}

/// Sub-call accesses of the additive estimator: `(u only, z = u and v)`.
pub fn additive_queries(n: usize, epsilon: f64, delta: f64, c: &QueryConstants) -> (u64, u64) {
    let (e, d) = (epsilon / 16.0, delta / 4.0);
    let k = min_find_queries(n, d, c) + norm_queries(n, e, d, c);
    (k, k)
}

/// Sub-call accesses of the relative estimator, `(u only, z)`; the early exit skips the z norm.
pub fn relative_queries(n: usize, epsilon: f64, delta: f64, c: &QueryConstants, early_exit: bool) -> (u64, u64) {
    let (e, d) = (epsilon / 4.0, delta / 4.0);
    let u = min_find_queries(n, d, c) + norm_queries(n, e, d, c);
    let z = min_find_queries(n, d, c) + if early_exit { 0 } else { norm_queries(n, e, d, c) };
    (u, z)
}

/// `(eps_a + eps_b) / (1 - eps_b)`: relative error of `a~/b~` when `a~` and
/// `b~` are within relative `eps_a`, `eps_b` of `a`, `b`.
pub fn ratio_error_bound(eps_a: f64, eps_b: f64) -> Result<f64> {
    if !(eps_a >= 0.0) || !eps_a.is_finite() {
        return Err(Error::param("eps_a", "must be finite and non-negative"));
    }
    if !(0.0..1.0).contains(&eps_b) {
        return Err(Error::param("eps_b", "must lie in [0, 1)"));
    }
    Ok((eps_a + eps_b) / (1.0 - eps_b))
}

/// Relative error a norm estimate may add on top of quantization while still
/// landing within `eps` of the unquantized norm: `(eps (S - n e) - n e) / S`.
pub fn relative_budget(sum: f64, n: usize, entry_error: f64, eps: f64) -> f64 {
    if !(sum > 0.0) {
        return 0.0;
    }
    let q = n as f64 * entry_error;
    ((eps * (sum - q) - q) / sum).max(0.0)
}

fn draw_failure<R: Rng + ?Sized>(sim: &SimConfig, delta: f64, rng: &mut R) -> bool {
    sim.injects_failures() && rng.random::<f64>() < delta
}

fn extreme_find<R, F>(
    u: &QuantizedOracle,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
    better: F,
) -> Result<SimResult<(usize, f64)>>
where
    R: Rng + ?Sized,
    F: Fn(f64, f64) -> bool,
{
    check_open_unit("delta", delta)?;
    let vals = u.values();
    let queries = u.charge(min_find_queries(vals.len(), delta, &sim.constants), ledger);
    let mut best = 0;
    for (j, &x) in vals.iter().enumerate() {
        if better(x, vals[best]) {
            best = j;
        }
    }
    let failed = draw_failure(sim, delta, rng);
    if failed {
        best = rng.random_range(0..vals.len());
    }
    Ok(SimResult { value: (best, vals[best]), failed, queries })
}

/// Index and value of the minimum (lowest index on ties); a failed call returns a uniform index.
pub fn q_min_find<R: Rng + ?Sized>(
    u: &QuantizedOracle,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<SimResult<(usize, f64)>> {
    extreme_find(u, delta, sim, ledger, rng, |a, b| a < b)
}

pub fn q_max_find<R: Rng + ?Sized>(
    u: &QuantizedOracle,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<SimResult<(usize, f64)>> {
    extreme_find(u, delta, sim, ledger, rng, |a, b| a > b)
}

fn check_unit_box(u: &QuantizedOracle) -> Result<()> {
    let slack = u.entry_error() + 1e-12;
    for (i, &x) in u.values().iter().enumerate() {
        if !(x >= -slack && x <= 1.0 + slack) {
            return Err(Error::OutOfRange { index: i, value: x, lo: 0.0, hi: 1.0 });
        }
    }
    Ok(())
}

/// Estimate of `|u|_1` for `u` in `[0,1]^N` with maximum 1.
pub fn q_norm_estimate<R: Rng + ?Sized>(
    u: &QuantizedOracle,
    epsilon: f64,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<SimResult<f64>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", "must be positive"));
    }
    check_open_unit("delta", delta)?;
    check_unit_box(u)?;
    let max = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if (max - 1.0).abs() > u.entry_error() + 1e-12 {
        return Err(Error::param("u", format!("maximum is {max}, expected 1")));
    }
    let n = u.len();
    let queries = u.charge(norm_queries(n, epsilon, delta, &sim.constants), ledger);
    let s: f64 = u.values().iter().sum();
    let failed = draw_failure(sim, delta, rng);
    let rel = if failed {
        failure_error(epsilon, rng)
    } else {
        sim.noise.error(relative_budget(s, n, u.entry_error(), epsilon), rng)
    };
    Ok(SimResult { value: (s * (1.0 + rel)).max(f64::MIN_POSITIVE), failed, queries })
}

/// Index drawn from `u / |u|_1`; a failed call returns a uniform index.
pub fn q_state_sample<R: Rng + ?Sized>(
    u: &QuantizedOracle,
    xi: f64,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<SimResult<usize>> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::param("xi", "must lie in (0, 1]"));
    }
    check_open_unit("delta", delta)?;
    check_unit_box(u)?;
    let n = u.len();
    let eta = 2.0 * u.entry_error();
    if eta > xi / (4.0 * n as f64) * (1.0 + 1e-12) {
        return Err(Error::param("eta", format!("{eta} exceeds xi/(4N) = {}", xi / (4.0 * n as f64))));
    }
    let queries = u.charge(state_queries(n, delta, &sim.constants), ledger);
    let failed = draw_failure(sim, delta, rng);
    let value = if failed {
        rng.random_range(0..n)
    } else {
        let w: Vec<f64> = u.values().iter().map(|&x| x.max(0.0)).collect();
        AliasTable::from_weights(&w)?.sample(rng)
    };
    Ok(SimResult { value, failed, queries })
}

/// Inner-product estimate with the by-products of its sub-calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerEstimate {
    pub value: f64,
    /// Estimate of `|u / u_max|_1`.
    pub gamma_u: f64,
    /// Index the maximum finding reported for `u`.
    pub u_argmax: usize,
}

/// Additive estimator arithmetic for a fixed `u`, shared by the one-off
/// estimator and batched callers that get `u . v` from a matrix product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveCore {
    n: usize,
    eps: f64,
    eps_sub: f64,
    delta_sub: f64,
    u_sum: f64,
    u_max: f64,
    z_err: f64,
    u_budget: f64,
    noise: NoiseMode,
    failures: bool,
}

impl AdditiveCore {
    /// `u_sum` and `u_max` of the stored `u`; `u_err`, `v_err` the oracles' entry errors.
    pub fn new(
        n: usize,
        u_sum: f64,
        u_max: f64,
        u_err: f64,
        v_err: f64,
        epsilon: f64,
        delta: f64,
        sim: &SimConfig,
    ) -> Result<Self> {
        check_open_unit("epsilon", epsilon)?;
        check_open_unit("delta", delta)?;
        if !(u_sum > 0.0) {
            return Err(Error::param("u", "must be non-zero"));
        }
        let eps_sub = epsilon / 16.0;
        Ok(AdditiveCore {
            n,
            eps: epsilon,
            eps_sub,
            delta_sub: delta / 4.0,
            u_sum,
            u_max,
            z_err: 4.0 * u_err + (1.0 + u_err) * v_err,
            u_budget: relative_budget(u_sum, n, u_err, eps_sub),
            noise: sim.noise,
            failures: sim.injects_failures(),
        })
    }

    /// Probability that at least one of the four sub-calls fails.
    pub fn failure_probability(&self) -> f64 {
        if self.failures {
            1.0 - (1.0 - self.delta_sub).powi(4)
        } else {
            0.0
        }
    }

    pub fn sub_delta(&self) -> f64 {
        self.delta_sub
    }

    pub fn noise(&self) -> NoiseMode {
        self.noise
    }

    /// `S_z / S_u - 3` with `S_z = sum_j u_j (v_j + 3)`.
    pub fn exact(&self, z_sum: f64) -> f64 {
        z_sum / self.u_sum - 3.0
    }

    /// Estimate from unit noise draws `f_u`, `f_z` in `[-1,1]`, scaled to
    /// the sub-call budgets. Returns the value and `gamma_u`.
    pub fn estimate(&self, z_sum: f64, f_u: f64, f_z: f64) -> (f64, f64) {
        let z_budget = relative_budget(z_sum, self.n, self.z_err, self.eps_sub);
        let gz = z_sum * (1.0 + f_z * z_budget);
        let gu = self.u_sum * (1.0 + f_u * self.u_budget);
        (gz / gu - 3.0, gu / self.u_max)
    }

    /// Value of a failed call: the exact value moved by `[eps, 2 eps]`.
    pub fn failed_value<R: Rng + ?Sized>(&self, z_sum: f64, rng: &mut R) -> f64 {
        self.exact(z_sum) + failure_error(self.eps, rng)
    }

    pub fn gamma_u_exact(&self) -> f64 {
        self.u_sum / self.u_max
    }
}

fn check_pair(u: &QuantizedOracle, v: &QuantizedOracle, epsilon: f64, delta: f64) -> Result<()> {
    check_open_unit("epsilon", epsilon)?;
    check_open_unit("delta", delta)?;
    check_len(u.len(), v.len())?;
    check_unit_box(u)
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = j;
        }
    }
    best
}

/// `u . v / |u|_1` to additive accuracy `eps` for non-zero `u` in `[0,1]^N`
/// and `v` in `[-1,1]^N`, via the shifted vector `z = u (v + 3)`.
pub fn q_inner_additive<R: Rng + ?Sized>(
    u: &QuantizedOracle,
    v: &QuantizedOracle,
    epsilon: f64,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<SimResult<InnerEstimate>> {
    check_pair(u, v, epsilon, delta)?;
    let slack = v.entry_error() + 1e-12;
    for (i, &x) in v.values().iter().enumerate() {
        if !(x.abs() <= 1.0 + slack) {
            return Err(Error::OutOfRange { index: i, value: x, lo: -1.0, hi: 1.0 });
        }
    }
    let n = u.len();
    let uv = u.values();
    let u_sum: f64 = uv.iter().sum();
    let u_arg = argmax_lowest(uv);
    let core = AdditiveCore::new(n, u_sum, uv[u_arg], u.entry_error(), v.entry_error(), epsilon, delta, sim)?;
    let z_sum: f64 = uv.iter().zip(v.values()).map(|(&a, &b)| a * (b + 3.0)).sum();

    let (ku, kz) = additive_queries(n, epsilon, delta, &sim.constants);
    let queries = u.charge(ku + kz, ledger) + v.charge(kz, ledger);

    let d = core.sub_delta();
    let fails = [
        draw_failure(sim, d, rng),
        draw_failure(sim, d, rng),
        draw_failure(sim, d, rng),
        draw_failure(sim, d, rng),
    ];
    let u_argmax = if fails[0] { rng.random_range(0..n) } else { u_arg };
    let f_u = sim.noise.error(1.0, rng);
    let f_z = sim.noise.error(1.0, rng);
    let (mut value, mut gamma_u) = core.estimate(z_sum, f_u, f_z);
    if fails[1] {
        gamma_u = (core.gamma_u_exact() * (1.0 + failure_error(epsilon / 16.0, rng))).max(f64::MIN_POSITIVE);
    }
    let failed = fails.iter().any(|&f| f);
    if failed {
        value = core.failed_value(z_sum, rng);
    }
    Ok(SimResult { value: InnerEstimate { value, gamma_u, u_argmax }, failed, queries })
}

/// `u . v / |u|_1` to relative accuracy `eps` for `u`, `v` in `[0,1]^N`.
pub fn q_inner_relative<R: Rng + ?Sized>(
    u: &QuantizedOracle,
    v: &QuantizedOracle,
    epsilon: f64,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<SimResult<InnerEstimate>> {
    check_pair(u, v, epsilon, delta)?;
    check_unit_box(v)?;
    let n = u.len();
    let uv = u.values();
    let u_sum: f64 = uv.iter().sum();
    if !(u_sum > 0.0) {
        return Err(Error::param("u", "must be non-zero"));
    }
    let u_arg = argmax_lowest(uv);
    let u_max = uv[u_arg];
    let (eps_sub, d) = (epsilon / 4.0, delta / 4.0);
    let z: Vec<f64> = uv.iter().zip(v.values()).map(|(&a, &b)| a * b.max(0.0)).collect();
    let z_max = z.iter().cloned().fold(0.0, f64::max);
    let early_exit = z_max == 0.0;

    let (ku, kz) = relative_queries(n, epsilon, delta, &sim.constants, early_exit);
    let queries = u.charge(ku + kz, ledger) + v.charge(kz, ledger);

    let mut fails = [false; 4];
    for f in fails.iter_mut().take(if early_exit { 3 } else { 4 }) {
        *f = draw_failure(sim, d, rng);
    }
    let u_argmax = if fails[0] { rng.random_range(0..n) } else { u_arg };
    let u_budget = relative_budget(u_sum, n, u.entry_error(), eps_sub);
    let gu = if fails[1] {
        u_sum * (1.0 + failure_error(eps_sub, rng))
    } else {
        u_sum * (1.0 + sim.noise.error(u_budget, rng))
    };
    let gamma_u = (gu / u_max).max(f64::MIN_POSITIVE);
    let failed = fails.iter().any(|&f| f);
    if early_exit {
        return Ok(SimResult { value: InnerEstimate { value: 0.0, gamma_u, u_argmax }, failed, queries });
    }
    let z_sum: f64 = z.iter().sum();
    let z_err = u.entry_error() + (1.0 + u.entry_error()) * v.entry_error();
    let exact = z_sum / u_sum;
    let value = if failed {
        exact * (1.0 + failure_error(epsilon, rng))
    } else {
        let gz = z_sum * (1.0 + sim.noise.error(relative_budget(z_sum, n, z_err, eps_sub), rng));
        gz / gu
    };
    Ok(SimResult { value: InnerEstimate { value: value.max(0.0), gamma_u, u_argmax }, failed, queries })
}

/// `beta^(sum_{t' < t} l_j^(t')) / N` from the stored history (1-based `t`),
/// rounded to the history's grid and charged `oracle_factor (t - 1)` queries.
pub fn weight_on_demand(
    history: &LossHistory,
    beta: f64,
    j: usize,
    t: usize,
    constants: &QueryConstants,
    ledger: &mut QueryLedger,
) -> Result<SimResult<f64>> {
    check_open_unit("beta", beta)?;
    if t == 0 || t > history.rounds() + 1 {
        return Err(Error::param("t", format!("round {t} outside 1..={}", history.rounds() + 1)));
    }
    if j >= history.n() {
        return Err(Error::OutOfRange { index: j, value: j as f64, lo: 0.0, hi: history.n() as f64 });
    }
    let queries = constants.oracle_factor as u128 * (t as u128 - 1);
    ledger.charge(history.key(), queries);
    let w = (history.cumulative_before(j, t) * beta.ln()).exp() / history.n() as f64;
    Ok(SimResult { value: super::round_to_grid(w, history.eta()), failed: false, queries })
}
