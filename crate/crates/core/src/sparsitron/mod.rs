//! The Sparsitron: Hedge over feature coordinates driven by GLM residuals,
//! with candidate selection by (approximate) empirical risk on a second sample.

mod data;
mod planted;

pub use data::{FeatureLayout, GlmSample, TrainingSet};
pub use planted::{true_risk_estimate, PlantedGlm, RiskEstimate};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_open_unit, Error, Result};
use crate::hedge::WeightState;
use crate::linalg::{dot, gram_block};
use crate::noise::{failure_error, FailureClock, NoiseMode};
use crate::rng::SimRng;
use crate::sampling::{l1_inner_product_estimate_with, AliasTable, EstimatorConfig};

/// Non-decreasing 1-Lipschitz link with range `[0,1]`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    /// `clamp(x + 1/2, 0, 1)`
    Ramp,
    #[serde(skip)]
    Custom(fn(f64) -> f64),
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ramp(x: f64) -> f64 {
    (x + 0.5).clamp(0.0, 1.0)
}

impl PartialEq for Activation {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Activation::Sigmoid, Activation::Sigmoid) | (Activation::Ramp, Activation::Ramp) => true,
            (Activation::Custom(a), Activation::Custom(b)) => std::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

impl Activation {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Ramp => ramp(x),
            Activation::Custom(f) => f(x),
        }
    }

    /// Spot-checks range, monotonicity and the Lipschitz constant on a
    /// 10^4-point grid over `[-4 lambda, 4 lambda]`.
    pub fn check_properties(&self, lambda: f64) -> Result<()> {
        let half = if lambda > 0.0 { 4.0 * lambda } else { 1.0 };
        let n = 10_000;
        let step = 2.0 * half / (n - 1) as f64;
        let mut prev = self.eval(-half);
        for i in 0..n {
            let x = -half + i as f64 * step;
            let y = self.eval(x);
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::param("activation", format!("value {y} at {x} outside [0,1]")));
            }
            if i > 0 {
                if y < prev {
                    return Err(Error::param("activation", format!("decreasing near {x}")));
                }
                if y - prev > step * (1.0 + 1e-9) {
                    return Err(Error::param("activation", format!("slope above 1 near {x}")));
                }
            }
            prev = y;
        }
        Ok(())
    }

    /// `(1/M) sum_m (sigma(lambda z_m) - b_m)^2` with the match hoisted out of the loop.
    pub(crate) fn mean_sq_residual(&self, lambda: f64, z: &[f64], b: &[f64]) -> f64 {
        fn go(f: impl Fn(f64) -> f64, lambda: f64, z: &[f64], b: &[f64]) -> f64 {
            let mut acc = 0.0;
            for (&zi, &bi) in z.iter().zip(b) {
                let r = f(lambda * zi) - bi;
                acc += r * r;
            }
            acc / z.len() as f64
        }
        match *self {
            Activation::Sigmoid => crate::linalg::sigmoid_sq_residual_sum(lambda, z, b) / z.len() as f64,
            Activation::Ramp => go(ramp, lambda, z, b),
            Activation::Custom(f) => go(f, lambda, z, b),
        }
    }
}

/// `beta = 1 - sqrt(ln N / T)`.
pub fn sparsitron_beta(dim: usize, n_rounds: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::param("dim", "need at least 2 coordinates"));
    }
    if n_rounds == 0 {
        return Err(Error::param("n_rounds", "must be positive"));
    }
    let beta = 1.0 - ((dim as f64).ln() / n_rounds as f64).sqrt();
    if beta <= 0.0 {
        return Err(Error::param("n_rounds", format!("T = {n_rounds} must exceed ln N")));
    }
    Ok(beta)
}

/// `ceil(C lambda^2 ln(N / (delta eps)) / eps^2)`.
pub fn required_t(lambda: f64, n: usize, epsilon: f64, delta: f64, c: f64) -> usize {
    let raw = c * lambda * lambda * (n as f64 / (delta * epsilon)).ln() / (epsilon * epsilon);
    (raw.ceil() as usize).max(1)
}

/// `ceil(C_M ln(T / delta) / eps^2)`.
pub fn required_m(t: usize, epsilon: f64, delta: f64, c_m: f64) -> usize {
    let raw = c_m * (t as f64 / delta).ln() / (epsilon * epsilon);
    (raw.ceil() as usize).max(1)
}

/// Residual `sigma(lambda clamp(h)) - y`.
#[inline]
pub fn residual(h: f64, y: f64, lambda: f64, sigma: &Activation) -> f64 {
    sigma.eval(lambda * h.clamp(-1.0, 1.0)) - y
}

/// `l = (1 + r x) / 2` with residual `r`.
pub fn loss_from_residual_into(x: &[f64], r: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(x.iter().map(|&xj| 0.5 * (1.0 + r * xj)));
}

/// `l = (1 + (sigma(lambda h) - y) x) / 2`, `h` clamped to `[-1,1]`.
pub fn sparsitron_loss_vector(x: &[f64], y: f64, lambda: f64, sigma: &Activation, h: f64) -> Result<Vec<f64>> {
    const TOL: f64 = 1e-9;
    for (i, &v) in x.iter().enumerate() {
        if !(v.abs() <= 1.0 + TOL) {
            return Err(Error::OutOfRange { index: i, value: v, lo: -1.0, hi: 1.0 });
        }
    }
    if !(-TOL..=1.0 + TOL).contains(&y) {
        return Err(Error::OutOfRange { index: 0, value: y, lo: 0.0, hi: 1.0 });
    }
    if h.is_nan() {
        return Err(Error::param("h", "NaN"));
    }
    let r = residual(h, y.clamp(0.0, 1.0), lambda, sigma);
    let mut out = Vec::with_capacity(x.len());
    loss_from_residual_into(x, r, &mut out);
    for l in out.iter_mut() {
        *l = l.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// `(1/M) sum_m (sigma(v . a_m) - b_m)^2` over expanded rows.
pub fn empirical_risk(v: &[f64], set: &TrainingSet, sigma: &Activation) -> Result<f64> {
    check_len(set.dim(), v.len())?;
    if set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let z: Vec<f64> = (0..set.len()).map(|m| dot(v, set.row(m))).collect();
    Ok(sigma.mean_sq_residual(1.0, &z, set.labels()))
}

/// `(1/M) sum_m (sigma(lambda z_m) - b_m)^2`.
pub fn approx_empirical_risk(z: &[f64], b: &[f64], lambda: f64, sigma: &Activation) -> Result<f64> {
    check_len(z.len(), b.len())?;
    if z.is_empty() {
        return Err(Error::Empty("estimates"));
    }
    Ok(sigma.mean_sq_residual(lambda, z, b))
}

/// Source of the `p^(t) . a^(m)` values used for risk selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RiskEstimator {
    /// Exact inner products through the same kernel as the original mode.
    Exact,
    /// Median-of-means over alias-table draws with the sampled-estimator counts.
    MedianOfMeans,
    /// Exact value plus error inside the `eps/(16 lambda)` ball, failing with
    /// probability `delta/(MT)` per estimate.
    Bounded { noise: NoiseMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SparsitronMode {
    Original,
    Approximate { estimator: RiskEstimator },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsitronConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Defaults to [`sparsitron_beta`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub mode: SparsitronMode,
    /// Keep `|z - p.a|` for every estimate (harness use; `T * M` entries).
    #[serde(default)]
    pub record_estimate_errors: bool,
    /// Refuse median-of-means runs needing more index draws than this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_estimator_draws: Option<u128>,
}

impl SparsitronConfig {
    pub fn new(lambda: f64, epsilon: f64, delta: f64, mode: SparsitronMode) -> Self {
        SparsitronConfig {
            lambda,
            epsilon,
            delta,
            beta: None,
            mode,
            record_estimate_errors: false,
            max_estimator_draws: None,
        }
    }

    /// Accuracy demanded of each risk inner product.
    pub fn estimate_accuracy(&self) -> f64 {
        self.epsilon / (16.0 * self.lambda)
    }
}

/// Index draws a median-of-means run of the given shape consumes.
pub fn median_of_means_draws(t: usize, m: usize, lambda: f64, epsilon: f64, delta: f64) -> Result<u128> {
    let cfg = EstimatorConfig::new(epsilon / (16.0 * lambda), delta / (m as f64 * t as f64))?;
    Ok(cfg.total_samples() as u128 * t as u128 * m as u128)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsitronModel {
    pub lambda: f64,
    pub beta: f64,
    pub layout: FeatureLayout,
    pub raw_dim: usize,
    /// Index `t'` (0-based) of the selected candidate `lambda p^(t')`.
    pub selected_round: usize,
    pub p_selected: Vec<f64>,
    /// Per-round (approximate) empirical risks.
    pub risks: Vec<f64>,
    /// `sigma(lambda h^(t)) - y^(t)` per round; with train1 this rebuilds every `p^(t)`.
    pub residuals: Vec<f64>,
    #[serde(default)]
    pub failed_estimates: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimate_errors: Vec<f64>,
}

impl SparsitronModel {
    /// `v = lambda p^(t')` over expanded coordinates.
    pub fn v(&self) -> Vec<f64> {
        self.p_selected.iter().map(|p| self.lambda * p).collect()
    }

    /// `v . x` for a raw feature vector.
    pub fn margin(&self, raw_x: &[f64]) -> f64 {
        self.lambda * dot(&self.p_selected, &self.layout.expand(raw_x))
    }

    pub fn predict(&self, raw_x: &[f64], sigma: &Activation) -> f64 {
        sigma.eval(self.margin(raw_x))
    }

    /// Signed raw weights and bias of `v`.
    pub fn signed_weights(&self) -> Result<(Vec<f64>, f64)> {
        self.layout.collapse(&self.v(), self.raw_dim)
    }

    /// `p^(t)` replayed from train1 and the stored residuals.
    pub fn rebuild_p(&self, train1: &TrainingSet, t: usize) -> Result<Vec<f64>> {
        if t > self.residuals.len() || t > train1.len() {
            return Err(Error::param("t", format!("round {t} beyond history")));
        }
        check_len(self.p_selected.len(), train1.dim())?;
        let mut state = WeightState::new(train1.dim(), self.beta)?;
        let mut l = Vec::with_capacity(train1.dim());
        for s in 0..t {
            loss_from_residual_into(train1.row(s), self.residuals[s], &mut l);
            state.update_unchecked(&l);
        }
        Ok(state.probabilities())
    }
}

/// The Hedge trajectory: row `t` of the `T x N` matrix is `p^(t)`, plus the residual of round `t`.
pub fn hedge_trajectory(
    train1: &TrainingSet,
    lambda: f64,
    sigma: &Activation,
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = train1.dim();
    let t_max = train1.len();
    let mut state = WeightState::new(d, beta)?;
    let mut traj = Vec::with_capacity(t_max * d);
    let mut residuals = Vec::with_capacity(t_max);
    let mut p = Vec::with_capacity(d);
    let mut l = Vec::with_capacity(d);
    for t in 0..t_max {
        state.probabilities_into(&mut p);
        let x = train1.row(t);
        let r = residual(dot(&p, x), train1.label(t), lambda, sigma);
        loss_from_residual_into(x, r, &mut l);
        state.update_unchecked(&l);
        traj.extend_from_slice(&p);
        residuals.push(r);
    }
    Ok((traj, residuals))
}

/// Rounds per Gram block.
const BLOCK_ROUNDS: usize = 64;

/// Calls `f(t, margins)` for every round with `margins[m] = p^(t) . a^(m)`.
pub(crate) fn for_each_round_margins(
    traj: &[f64],
    dim: usize,
    train2: &TrainingSet,
    mut f: impl FnMut(usize, &mut [f64]) -> Result<()>,
) -> Result<()> {
    let t_max = traj.len() / dim;
    let m = train2.len();
    let mut block = vec![0.0; BLOCK_ROUNDS * m];
    let mut t0 = 0;
    while t0 < t_max {
        let rows = BLOCK_ROUNDS.min(t_max - t0);
        let out = &mut block[..rows * m];
        gram_block(&traj[t0 * dim..(t0 + rows) * dim], rows, train2.features(), m, dim, out);
        for r in 0..rows {
            f(t0 + r, &mut out[r * m..(r + 1) * m])?;
        }
        t0 += rows;
    }
    Ok(())
}

/// Lowest index of the minimum.
pub fn argmin_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

pub fn run_sparsitron<R: Rng + ?Sized>(
    cfg: &SparsitronConfig,
    sigma: &Activation,
    train1: &TrainingSet,
    train2: &TrainingSet,
    rng: &mut R,
) -> Result<SparsitronModel> {
    let mut out = run_sparsitron_modes(cfg, &[cfg.mode], sigma, train1, train2, rng)?;
    Ok(out.pop().expect("one mode"))
}

enum ModeRun {
    Exact,
    Bounded { noise: NoiseMode, clock: FailureClock, rng: SimRng, scratch: Vec<f64> },
    MedianOfMeans { est: EstimatorConfig, rng: SimRng },
}

/// Runs several modes over one shared Hedge trajectory and Gram pass.
///
/// Mode `i` draws from the `i`-th generator split off `rng`, so the first
/// mode reproduces a lone [`run_sparsitron`] call with the same generator.
pub fn run_sparsitron_modes<R: Rng + ?Sized>(
    cfg: &SparsitronConfig,
    modes: &[SparsitronMode],
    sigma: &Activation,
    train1: &TrainingSet,
    train2: &TrainingSet,
    rng: &mut R,
) -> Result<Vec<SparsitronModel>> {
    if !(cfg.lambda >= 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::param("lambda", "must be finite and non-negative"));
    }
    check_open_unit("epsilon", cfg.epsilon)?;
    check_open_unit("delta", cfg.delta)?;
    if train1.is_empty() || train2.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_len(train1.dim(), train2.dim())?;
    let d = train1.dim();
    let t_max = train1.len();
    let m_max = train2.len();
    let beta = match cfg.beta {
        Some(b) => {
            check_open_unit("beta", b)?;
            b
        }
        None => sparsitron_beta(d, t_max)?,
    };
    let lambda = cfg.lambda;
    let labels = train2.labels();
    let bound = cfg.estimate_accuracy();
    let per_estimate_delta = cfg.delta / (m_max as f64 * t_max as f64);

    let mut runs = Vec::with_capacity(modes.len());
    for mode in modes {
        let mut sub = split_rng(rng);
        let estimator = match *mode {
            SparsitronMode::Approximate { estimator } if lambda > 0.0 => estimator,
            _ => RiskEstimator::Exact,
        };
        runs.push(match estimator {
            RiskEstimator::Exact => ModeRun::Exact,
            RiskEstimator::Bounded { noise } => {
                let q = if noise.injects_failures() { per_estimate_delta } else { 0.0 };
                let clock = FailureClock::new(q, &mut sub);
                ModeRun::Bounded { noise, clock, rng: sub, scratch: vec![0.0; m_max] }
            }
            RiskEstimator::MedianOfMeans => {
                let draws = median_of_means_draws(t_max, m_max, lambda, cfg.epsilon, cfg.delta)?;
                if let Some(cap) = cfg.max_estimator_draws {
                    if draws > cap {
                        return Err(Error::param(
                            "max_estimator_draws",
                            format!("run needs {draws} index draws, cap is {cap}"),
                        ));
                    }
                }
                let est = EstimatorConfig::new(bound, per_estimate_delta)?;
                ModeRun::MedianOfMeans { est, rng: sub }
            }
        });
    }

    let (traj, residuals) = hedge_trajectory(train1, lambda, sigma, beta)?;
    let mut risks: Vec<Vec<f64>> = vec![Vec::with_capacity(t_max); modes.len()];
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); modes.len()];
    let mut failed = vec![0u64; modes.len()];
    let record = cfg.record_estimate_errors;
    let mut exact_risk = None;

    for_each_round_margins(&traj, d, train2, |t, z| {
        exact_risk = None;
        for (i, run) in runs.iter_mut().enumerate() {
            let risk = match run {
                ModeRun::Exact => {
                    if record {
                        errors[i].extend(std::iter::repeat_n(0.0, m_max));
                    }
                    *exact_risk.get_or_insert_with(|| sigma.mean_sq_residual(lambda, z, labels))
                }
                ModeRun::Bounded { noise, clock, rng, scratch } => {
                    noise.fill_errors(bound, rng, scratch);
                    clock.run(scratch.len(), rng, |k, rng| {
                        failed[i] += 1;
                        scratch[k] = failure_error(bound, rng);
                    });
                    if record {
                        errors[i].extend(scratch.iter().map(|e| e.abs()));
                    }
                    for (e, zi) in scratch.iter_mut().zip(z.iter()) {
                        *e += *zi;
                    }
                    sigma.mean_sq_residual(lambda, scratch, labels)
                }
                ModeRun::MedianOfMeans { est, rng } => {
                    let table = AliasTable::build(&traj[t * d..(t + 1) * d])?;
                    let mut est_z = Vec::with_capacity(m_max);
                    for (m, &zi) in z.iter().enumerate() {
                        let row = train2.row(m);
                        let e = l1_inner_product_estimate_with(&table, |j| row[j], est, rng)?;
                        if record {
                            errors[i].push((e - zi).abs());
                        }
                        est_z.push(e);
                    }
                    sigma.mean_sq_residual(lambda, &est_z, labels)
                }
            };
            risks[i].push(risk);
        }
        Ok(())
    })?;

    Ok(risks
        .into_iter()
        .zip(errors)
        .zip(failed)
        .map(|((risks, estimate_errors), failed_estimates)| {
            let selected_round = argmin_lowest(&risks);
            SparsitronModel {
                lambda,
                beta,
                layout: train1.layout(),
                raw_dim: train1.raw_dim(),
                selected_round,
                p_selected: traj[selected_round * d..(selected_round + 1) * d].to_vec(),
                risks,
                residuals: residuals.clone(),
                failed_estimates,
                estimate_errors,
            }
        })
        .collect())
}

/// Independent generator seeded from `rng`.
pub(crate) fn split_rng<R: Rng + ?Sized>(rng: &mut R) -> SimRng {
    let mut seed = <SimRng as SeedableRng>::Seed::default();
    rng.fill_bytes(&mut seed);
    SimRng::from_seed(seed)
}
