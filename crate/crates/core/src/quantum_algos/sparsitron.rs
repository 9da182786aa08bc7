use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_open_unit, Error, Result};
use crate::noise::FailureClock;
use crate::quantum_sim::{
    additive_queries, q_inner_additive, round_to_grid, AdditiveCore, LossHistory, QuantizedOracle, QueryLedger,
    SimConfig, SimResult,
};
use crate::sparsitron::{
    argmin_lowest, for_each_round_margins, residual, sparsitron_beta, split_rng, Activation, FeatureLayout,
    TrainingSet,
};

use super::rescaled_weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSparsitronConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Defaults to [`sparsitron_beta`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub sim: SimConfig,
}

impl QSparsitronConfig {
    pub fn new(lambda: f64, epsilon: f64, delta: f64, sim: SimConfig) -> Self {
        QSparsitronConfig { lambda, epsilon, delta, beta: None, sim }
    }

    /// Additive accuracy of `h^(t)`, `eps / (8 lambda^2)`, capped at 1/2.
    pub fn h_accuracy(&self) -> f64 {
        (self.epsilon / (8.0 * self.lambda * self.lambda)).min(0.5)
    }

    /// Additive accuracy of `z^(t,m)`, `eps / (16 lambda)`, capped at 1/2.
    pub fn z_accuracy(&self) -> f64 {
        (self.epsilon / (16.0 * self.lambda)).min(0.5)
    }
}

/// What the algorithm outputs, plus bookkeeping for the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSparsitronOutput {
    pub lambda: f64,
    pub beta: f64,
    pub eta: f64,
    pub layout: FeatureLayout,
    pub raw_dim: usize,
    /// `h^(1..=t')`.
    pub h: Vec<f64>,
    /// `Gamma^(t')`, estimate of `|w^(t') / w_max^(t')|_1`.
    pub gamma: f64,
    /// `w_max^(t') = beta^(L_min) / N`.
    pub w_max: f64,
    /// `L_min` behind `w_max`.
    pub l_min: f64,
    /// 0-based `t'`.
    pub selected_round: usize,
    pub risks: Vec<f64>,
    pub failed_h: u64,
    pub failed_z: u64,
    pub ledger: QueryLedger,
}

fn loss_entry(r: f64, x: f64, eta: f64) -> f64 {
    round_to_grid((0.5 * (1.0 + r * x)).clamp(0.0, 1.0), eta).clamp(0.0, 1.0)
}

pub fn q_sparsitron<R: Rng + ?Sized>(
    cfg: &QSparsitronConfig,
    sigma: &Activation,
    train1: &TrainingSet,
    train2: &TrainingSet,
    rng: &mut R,
) -> Result<QSparsitronOutput> {
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::param("lambda", "must be finite and positive"));
    }
    check_open_unit("epsilon", cfg.epsilon)?;
    check_open_unit("delta", cfg.delta)?;
    if train1.is_empty() || train2.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_len(train1.dim(), train2.dim())?;
    let d = train1.dim();
    let (t_max, m_max) = (train1.len(), train2.len());
    let beta = match cfg.beta {
        Some(b) => {
            check_open_unit("beta", b)?;
            b
        }
        None => sparsitron_beta(d, t_max)?,
    };
    let ln_beta = beta.ln();
    let lambda = cfg.lambda;
    let (eps_h, eps_z) = (cfg.h_accuracy(), cfg.z_accuracy());
    let delta_h = cfg.delta / (2.0 * t_max as f64);
    let delta_z = cfg.delta / (2.0 * m_max as f64 * t_max as f64);
    let sim = &cfg.sim;
    let eta = sim.eta(d, &[eps_h / 16.0, eps_z / 16.0], &[]);
    let f = sim.constants.oracle_factor;

    let mut ledger = QueryLedger::new();
    let mut history = LossHistory::new(d, eta, "train1");
    let mut traj = Vec::with_capacity(t_max * d);
    let mut u_sums = Vec::with_capacity(t_max);
    let (mut hs, mut gammas, mut l_mins) = (Vec::with_capacity(t_max), Vec::with_capacity(t_max), Vec::with_capacity(t_max));
    let mut failed_h = 0;
    let mut l = vec![0.0; d];
    for t in 0..t_max {
        let l_min = history.cumulative().iter().cloned().fold(f64::INFINITY, f64::min);
        let u_vals = rescaled_weights(history.cumulative(), l_min, ln_beta, eta);
        u_sums.push(u_vals.iter().sum::<f64>());
        traj.extend_from_slice(&u_vals);
        let u = QuantizedOracle::from_quantized("train1", u_vals, eta / 2.0, f * t as u64);
        let x = QuantizedOracle::new("train1", train1.row(t), eta, f)?;
        let est = q_inner_additive(&u, &x, eps_h, delta_h, sim, &mut ledger, rng)?;
        failed_h += est.failed as u64;
        let h = est.value.value;
        let r = residual(h, train1.label(t), lambda, sigma);
        for (lj, &xj) in l.iter_mut().zip(x.values()) {
            *lj = (0.5 * (1.0 + r * xj)).clamp(0.0, 1.0);
        }
        history.push(&l)?;
        hs.push(h);
        gammas.push(est.value.gamma_u);
        l_mins.push(l_min);
    }

    let (ku, kz) = additive_queries(d, eps_z, delta_z, &sim.constants);
    let (ku, kz, f) = (ku as u128, kz as u128, f as u128);
    let m = m_max as u128;
    for t in 0..t_max as u128 {
        ledger.charge("train1", m * (ku + kz) * f * t);
    }
    ledger.charge("train2", t_max as u128 * m * kz * f);

    let train2q = train2.map_features(|x| round_to_grid(x, eta));
    let labels = train2.labels();
    let mut zrng = split_rng(rng);
    let probe = AdditiveCore::new(d, 1.0, 1.0, eta / 2.0, eta / 2.0, eps_z, delta_z, sim)?;
    let mut clock = FailureClock::new(probe.failure_probability(), &mut zrng);
    let (mut f_u, mut f_z) = (vec![0.0; m_max], vec![0.0; m_max]);
    let mut risks = Vec::with_capacity(t_max);
    let mut failed_z = 0;
    for_each_round_margins(&traj, d, &train2q, |t, z| {
        let core = AdditiveCore::new(d, u_sums[t], 1.0, eta / 2.0, eta / 2.0, eps_z, delta_z, sim)?;
        sim.noise.fill_errors(1.0, &mut zrng, &mut f_u);
        sim.noise.fill_errors(1.0, &mut zrng, &mut f_z);
        let shift = 3.0 * u_sums[t];
        for (i, zi) in z.iter_mut().enumerate() {
            let s_z = *zi + shift;
            *zi = if clock.tick(&mut zrng) {
                failed_z += 1;
                core.failed_value(s_z, &mut zrng)
            } else {
                core.estimate(s_z, f_u[i], f_z[i]).0
            };
        }
        risks.push(sigma.mean_sq_residual(lambda, z, labels));
        Ok(())
    })?;

    let sel = argmin_lowest(&risks);
    hs.truncate(sel + 1);
    Ok(QSparsitronOutput {
        lambda,
        beta,
        eta,
        layout: train1.layout(),
        raw_dim: train1.raw_dim(),
        h: hs,
        gamma: gammas[sel],
        w_max: (l_mins[sel] * ln_beta).exp() / d as f64,
        l_min: l_mins[sel],
        selected_round: sel,
        risks,
        failed_h,
        failed_z,
        ledger,
    })
}

fn check_output(out: &QSparsitronOutput, train1: &TrainingSet) -> Result<()> {
    if out.h.len() != out.selected_round + 1 || out.selected_round >= train1.len().max(1) {
        return Err(Error::param("output", "h history does not match the selected round"));
    }
    check_len(out.layout.dim(out.raw_dim), train1.dim())
}

/// `q_j = lambda beta^(L_j) / (N w_max Gamma)` rebuilt in `O(t')` operations from
/// the stored `h` and the first training set.
pub fn reconstruct_q_element(out: &QSparsitronOutput, train1: &TrainingSet, sigma: &Activation, j: usize) -> Result<f64> {
    check_output(out, train1)?;
    if j >= train1.dim() {
        return Err(Error::OutOfRange { index: j, value: j as f64, lo: 0.0, hi: train1.dim() as f64 });
    }
    let mut l_j = 0.0;
    for s in 0..out.selected_round {
        let r = residual(out.h[s], train1.label(s), out.lambda, sigma);
        l_j += loss_entry(r, round_to_grid(train1.row(s)[j], out.eta), out.eta);
    }
    Ok(out.lambda * ((l_j - out.l_min) * out.beta.ln()).exp() / out.gamma)
}

/// Every `q_j`, sharing the residual computations.
pub fn reconstruct_q(out: &QSparsitronOutput, train1: &TrainingSet, sigma: &Activation) -> Result<Vec<f64>> {
    check_output(out, train1)?;
    let mut cum = vec![0.0; train1.dim()];
    for s in 0..out.selected_round {
        let r = residual(out.h[s], train1.label(s), out.lambda, sigma);
        for (c, &x) in cum.iter_mut().zip(train1.row(s)) {
            *c += loss_entry(r, round_to_grid(x, out.eta), out.eta);
        }
    }
    let ln_beta = out.beta.ln();
    Ok(cum.iter().map(|&c| out.lambda * ((c - out.l_min) * ln_beta).exp() / out.gamma).collect())
}

/// `sigma(|q|_1 I)` with `I` an additive `eps / |q|_1` estimate of `q . x / |q|_1`.
#[allow(clippy::too_many_arguments)]
pub fn classify_new<R: Rng + ?Sized>(
    out: &QSparsitronOutput,
    train1: &TrainingSet,
    sigma: &Activation,
    x_raw: &[f64],
    epsilon: f64,
    delta: f64,
    sim: &SimConfig,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<SimResult<f64>> {
    check_len(out.raw_dim, x_raw.len())?;
    check_open_unit("epsilon", epsilon)?;
    let q = reconstruct_q(out, train1, sigma)?;
    let norm: f64 = q.iter().sum();
    let q_max = q.iter().cloned().fold(0.0, f64::max);
    let acc = (epsilon / norm).min(0.5);
    let eta = sim.eta(q.len(), &[acc / 16.0], &[]);
    let f = sim.constants.oracle_factor;
    let u_vals: Vec<f64> = q.iter().map(|&v| v / q_max).collect();
    let u = QuantizedOracle::new("train1", &u_vals, eta, f * out.selected_round as u64)?;
    let v = QuantizedOracle::new("input", &out.layout.expand(x_raw), eta, f)?;
    let est = q_inner_additive(&u, &v, acc, delta, sim, ledger, rng)?;
    Ok(SimResult { value: sigma.eval(norm * est.value.value), failed: est.failed, queries: est.queries })
}
