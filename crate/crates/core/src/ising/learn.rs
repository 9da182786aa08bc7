use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{to_glm_problem, IsingSampleSet};
use crate::error::{check_len, check_open_unit, Error, Result};
use crate::noise::NoiseMode;
use crate::quantum_algos::{q_sparsitron, reconstruct_q, QSparsitronConfig};
use crate::quantum_sim::{QueryLedger, SimConfig};
use crate::sparsitron::{
    required_m, required_t, run_sparsitron, split_rng, Activation, FeatureLayout, RiskEstimator, SparsitronConfig,
    SparsitronMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Classical,
    ClassicalApprox,
    QuantumSim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingLearnConfig {
    /// Upper bound on the model width.
    pub lambda_bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub backend: Backend,
    /// GLM l1 budget is `lambda_factor * lambda_bound`.
    #[serde(default = "default_lambda_factor")]
    pub lambda_factor: f64,
    /// Per-node GLM risk target; `epsilon^2 / 8` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glm_epsilon: Option<f64>,
    #[serde(default = "default_c")]
    pub c_t: f64,
    #[serde(default = "default_c")]
    pub c_m: f64,
    /// Explicit Sparsitron rounds per node, overriding the formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// Explicit risk-estimation samples per node, overriding the formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_samples: Option<usize>,
    /// Risk estimator of the `classical-approx` backend.
    #[serde(default = "default_estimator")]
    pub estimator: RiskEstimator,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_lambda_factor() -> f64 {
    6.0
}

fn default_c() -> f64 {
    10.0
}

fn default_estimator() -> RiskEstimator {
    RiskEstimator::Bounded { noise: NoiseMode::Uniform }
}

impl IsingLearnConfig {
    pub fn new(lambda_bound: f64, epsilon: f64, delta: f64, backend: Backend) -> Self {
        IsingLearnConfig {
            lambda_bound,
            epsilon,
            delta,
            backend,
            lambda_factor: default_lambda_factor(),
            glm_epsilon: None,
            c_t: default_c(),
            c_m: default_c(),
            rounds: None,
            risk_samples: None,
            estimator: default_estimator(),
            sim: SimConfig::default(),
        }
    }

    pub fn glm_lambda(&self) -> f64 {
        self.lambda_factor * self.lambda_bound
    }

    pub fn glm_epsilon(&self) -> f64 {
        self.glm_epsilon.unwrap_or(self.epsilon * self.epsilon / 8.0)
    }

    /// Sample split for `n` spins and `available` samples.
    pub fn budget(&self, n: usize, available: usize) -> SampleBudget {
        let eps = self.glm_epsilon();
        let delta_node = self.delta / n as f64;
        let dim = FeatureLayout::default().dim(n.saturating_sub(1));
        let required_t = required_t(self.glm_lambda(), dim, eps, delta_node, self.c_t);
        let required_m = required_m(required_t, eps, delta_node, self.c_m);
        let want_t = self.rounds.unwrap_or(required_t);
        let want_m = self.risk_samples.unwrap_or(required_m);
        let sufficient = want_t + want_m <= available;
        let (used_t, used_m) = if sufficient {
            (want_t, want_m)
        } else {
            let t = ((available as f64 * want_t as f64 / (want_t + want_m) as f64) as usize).clamp(1, available.saturating_sub(1).max(1));
            (t, available.saturating_sub(t))
        };
        SampleBudget {
            glm_epsilon: eps,
            glm_lambda: self.glm_lambda(),
            required_t,
            required_m,
            used_t,
            used_m,
            available,
            sufficient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub glm_epsilon: f64,
    pub glm_lambda: f64,
    /// Formula counts per node at `glm_epsilon`, `delta / N`.
    pub required_t: usize,
    pub required_m: usize,
    pub used_t: usize,
    pub used_m: usize,
    pub available: usize,
    /// The requested split fit in the available samples.
    pub sufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFit {
    pub node: usize,
    /// Signed GLM weights over the other spins, in node order.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub selected_round: usize,
    pub failed_estimates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<QueryLedger>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedIsing {
    pub n: usize,
    pub backend: Backend,
    /// Symmetrized estimate, row-major.
    pub a_star: Vec<f64>,
    /// Estimated biases `-b_j / 2`.
    pub theta_star: Vec<f64>,
    /// `max |A* - A*^T|` before symmetrization.
    pub asymmetry: f64,
    pub budget: SampleBudget,
    pub nodes: Vec<NodeFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<QueryLedger>,
}

/// One GLM learn per node, `A*_jk = -w_k / 4`, then `(A* + A*^T) / 2`.
pub fn learn_ising<R: Rng + ?Sized>(
    samples: &IsingSampleSet,
    cfg: &IsingLearnConfig,
    rng: &mut R,
) -> Result<LearnedIsing> {
    let n = samples.n();
    if n < 2 {
        return Err(Error::param("n", "need at least 2 spins"));
    }
    if !(cfg.lambda_bound > 0.0) || !cfg.lambda_bound.is_finite() {
        return Err(Error::param("lambda_bound", "must be finite and positive"));
    }
    check_open_unit("epsilon", cfg.epsilon)?;
    check_open_unit("delta", cfg.delta)?;
    check_open_unit("glm_epsilon", cfg.glm_epsilon())?;
    let budget = cfg.budget(n, samples.len());
    if budget.used_t == 0 || budget.used_m == 0 {
        return Err(Error::param("samples", format!("{} samples cannot be split", samples.len())));
    }
    let layout = FeatureLayout::default();
    let sigma = Activation::Sigmoid;
    let train1_rows = samples.slice(0, budget.used_t)?;
    let train2_rows = samples.slice(budget.used_t, budget.used_t + budget.used_m)?;
    let delta_node = cfg.delta / n as f64;
    let lambda = cfg.glm_lambda();
    let eps = cfg.glm_epsilon();

    let mut raw = vec![0.0; n * n];
    let mut theta_star = vec![0.0; n];
    let mut nodes = Vec::with_capacity(n);
    let mut total = QueryLedger::new();
    for j in 0..n {
        let mut node_rng = split_rng(rng);
        let t1 = to_glm_problem(&train1_rows, j, layout)?;
        let t2 = to_glm_problem(&train2_rows, j, layout)?;
        let (weights, bias, selected_round, failed_estimates, ledger) = match cfg.backend {
            Backend::Classical | Backend::ClassicalApprox => {
                let mode = if cfg.backend == Backend::Classical {
                    SparsitronMode::Original
                } else {
                    SparsitronMode::Approximate { estimator: cfg.estimator }
                };
                let sc = SparsitronConfig::new(lambda, eps, delta_node, mode);
                let model = run_sparsitron(&sc, &sigma, &t1, &t2, &mut node_rng)?;
                let (w, b) = model.signed_weights()?;
                (w, b, model.selected_round, model.failed_estimates, None)
            }
            Backend::QuantumSim => {
                let qc = QSparsitronConfig::new(lambda, eps, delta_node, cfg.sim);
                let out = q_sparsitron(&qc, &sigma, &t1, &t2, &mut node_rng)?;
                let q = reconstruct_q(&out, &t1, &sigma)?;
                let (w, b) = layout.collapse(&q, n - 1)?;
                total.merge(&out.ledger);
                (w, b, out.selected_round, out.failed_h + out.failed_z, Some(out.ledger))
            }
        };
        for (k, &wk) in (0..n).filter(|&k| k != j).zip(&weights) {
            raw[j * n + k] = -wk / 4.0;
        }
        theta_star[j] = -bias / 2.0;
        nodes.push(NodeFit { node: j, weights, bias, selected_round, failed_estimates, ledger });
    }

    let mut asymmetry: f64 = 0.0;
    let mut a_star = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            asymmetry = asymmetry.max((raw[i * n + k] - raw[k * n + i]).abs());
            if i != k {
                a_star[i * n + k] = 0.5 * (raw[i * n + k] + raw[k * n + i]);
            }
        }
    }
    Ok(LearnedIsing {
        n,
        backend: cfg.backend,
        a_star,
        theta_star,
        asymmetry,
        budget,
        nodes,
        ledger: (cfg.backend == Backend::QuantumSim).then_some(total),
    })
}

/// `max_ij |A_ij - B_ij|`.
pub fn max_abs_error(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}
