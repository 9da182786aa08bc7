//! The quantum Hedge and Sparsitron algorithms run against the simulated
//! subroutines of [`crate::quantum_sim`].

mod sparsitron;

pub use sparsitron::{
    classify_new, q_sparsitron, reconstruct_q, reconstruct_q_element, QSparsitronConfig, QSparsitronOutput,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_open_unit, check_range, Error, Result};
use crate::hedge::{compute_beta, LossStream, WeightState};
use crate::quantum_sim::{
    q_inner_relative, q_min_find, q_state_sample, round_to_grid, LossHistory, QuantizedOracle, QueryLedger,
    SimConfig,
};

/// Settings shared by the two quantum Hedge algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QHedgeConfig {
    pub n_experts: usize,
    pub n_rounds: usize,
    /// Defaults to [`compute_beta`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Relative accuracy of the per-round loss estimates.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub delta: f64,
    /// Fee `C0` per allocated strategy per round.
    #[serde(default)]
    pub transaction_cost: f64,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub record_rounds: bool,
}

fn default_epsilon() -> f64 {
    0.1
}

impl QHedgeConfig {
    pub fn new(n_experts: usize, n_rounds: usize, epsilon: f64, delta: f64) -> Self {
        QHedgeConfig {
            n_experts,
            n_rounds,
            beta: None,
            epsilon,
            delta,
            transaction_cost: 0.0,
            sim: SimConfig::default(),
            record_rounds: false,
        }
    }

    pub fn beta(&self) -> Result<f64> {
        match self.beta {
            Some(b) => {
                check_open_unit("beta", b)?;
                Ok(b)
            }
            None => compute_beta(self.n_experts, self.n_rounds),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_experts < 2 {
            return Err(Error::param("n_experts", "need at least 2 experts"));
        }
        if self.n_rounds == 0 {
            return Err(Error::param("n_rounds", "must be positive"));
        }
        check_open_unit("delta", self.delta)?;
        if !(self.transaction_cost >= 0.0) || !self.transaction_cost.is_finite() {
            return Err(Error::param("transaction_cost", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QHedgeRound {
    /// `w_max^(t) = beta^(L_min^(t-1)) / N`.
    pub w_max: f64,
    pub l_min: f64,
    /// Loss estimate `L^(t)`, or the loss suffered on the sampled strategy.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<usize>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QHedgeReport {
    pub beta: f64,
    /// `sum_t L^(t)` for the estimate, `L_samp^Q` for active betting.
    pub total_loss: f64,
    /// Exact Hedge loss `L_H = sum_t p^(t) . l^(t)` on the same stream.
    pub hedge_loss: f64,
    pub offline_min_loss: f64,
    pub regret: f64,
    pub transaction_cost: f64,
    /// State-preparation accuracy of active betting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    pub eta: f64,
    /// Rounds with at least one failed subroutine.
    pub failed_rounds: u64,
    pub ledger: QueryLedger,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rounds: Vec<QHedgeRound>,
}

/// `u_j = beta^(L_j - l_ref)` capped at 1 and put on the grid.
fn rescaled_weights(cumulative: &[f64], l_ref: f64, ln_beta: f64, eta: f64) -> Vec<f64> {
    cumulative.iter().map(|&c| round_to_grid(((c - l_ref) * ln_beta).exp().min(1.0), eta)).collect()
}

fn min_lowest(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::INFINITY, f64::min)
}

struct Tracker {
    state: WeightState,
    p: Vec<f64>,
    hedge_loss: f64,
}

impl Tracker {
    fn new(n: usize, beta: f64) -> Result<Self> {
        let state = WeightState::new(n, beta)?;
        let p = state.probabilities();
        Ok(Tracker { state, p, hedge_loss: 0.0 })
    }

    fn observe(&mut self, l: &[f64]) {
        self.hedge_loss += crate::linalg::dot(&self.p, l);
        self.state.update_unchecked(l);
        self.state.probabilities_into(&mut self.p);
    }
}

fn next_losses<S: LossStream + ?Sized>(stream: &mut S, t: usize, p: &[f64], n_rounds: usize) -> Result<Vec<f64>> {
    let l = stream.next_losses(t, p).ok_or(Error::StreamExhausted { rounds: t, expected: n_rounds })?;
    check_range(&l, 0.0, 1.0)?;
    Ok(l)
}

/// Estimates the Hedge total loss round by round with the relative-accuracy
/// inner-product estimator over the weights rebuilt from past loss oracles.
pub fn q_estimate_total_loss<S, R>(cfg: &QHedgeConfig, stream: &mut S, rng: &mut R) -> Result<QHedgeReport>
where
    S: LossStream + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1]"));
    }
    check_len(cfg.n_experts, stream.n_experts())?;
    let (n, t_max) = (cfg.n_experts, cfg.n_rounds);
    let beta = cfg.beta()?;
    let ln_beta = beta.ln();
    // The inner estimator needs eps in (0,1); eps = 1 runs just below it.
    let eps = cfg.epsilon.min(1.0 - 1e-12);
    let delta_t = cfg.delta / t_max as f64;
    let eta = cfg.sim.eta(n, &[eps / 4.0], &[]);
    let f = cfg.sim.constants.oracle_factor;

    let mut history = LossHistory::new(n, eta, "loss");
    let mut tracker = Tracker::new(n, beta)?;
    let mut ledger = QueryLedger::new();
    let mut rounds = Vec::new();
    let (mut total, mut failed_rounds) = (0.0, 0);

    for t in 0..t_max {
        let l_min = min_lowest(history.cumulative());
        let u = QuantizedOracle::from_quantized(
            "loss",
            rescaled_weights(history.cumulative(), l_min, ln_beta, eta),
            eta / 2.0,
            f * t as u64,
        );
        let l = next_losses(stream, t, &tracker.p, t_max)?;
        tracker.observe(&l);
        let stored = history.push(&l)?.to_vec();
        let v = QuantizedOracle::from_quantized("loss", stored, eta / 2.0, f);
        let est = q_inner_relative(&u, &v, eps, delta_t, &cfg.sim, &mut ledger, rng)?;
        total += est.value.value;
        failed_rounds += est.failed as u64;
        if cfg.record_rounds {
            rounds.push(QHedgeRound {
                w_max: (l_min * ln_beta).exp() / n as f64,
                l_min,
                value: est.value.value,
                choice: None,
                failed: est.failed,
            });
        }
    }
    let offline = min_lowest(tracker.state.cumulative_loss());
    Ok(QHedgeReport {
        beta,
        total_loss: total,
        hedge_loss: tracker.hedge_loss,
        offline_min_loss: offline,
        regret: total - offline,
        transaction_cost: 0.0,
        xi: None,
        eta,
        failed_rounds,
        ledger,
        rounds,
    })
}

/// `xi = sqrt(ln N / T)`.
pub fn active_hedge_xi(n_experts: usize, n_rounds: usize) -> Result<f64> {
    let xi = ((n_experts as f64).ln() / n_rounds as f64).sqrt();
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::param("n_rounds", format!("xi = sqrt(ln N / T) = {xi} outside (0, 1]")));
    }
    Ok(xi)
}

/// Active betting: each round finds `L_min`, prepares the weight state to
/// accuracy `xi`, measures it and allocates to the outcome at cost `C0`.
pub fn q_active_hedge<S, R>(cfg: &QHedgeConfig, stream: &mut S, rng: &mut R) -> Result<QHedgeReport>
where
    S: LossStream + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    check_len(cfg.n_experts, stream.n_experts())?;
    let (n, t_max) = (cfg.n_experts, cfg.n_rounds);
    let xi = active_hedge_xi(n, t_max)?;
    let beta = cfg.beta()?;
    let ln_beta = beta.ln();
    let delta_t = cfg.delta / (2.0 * t_max as f64);
    let eta = cfg.sim.eta(n, &[], &[xi]);
    let f = cfg.sim.constants.oracle_factor;

    let mut history = LossHistory::new(n, eta, "loss");
    let mut tracker = Tracker::new(n, beta)?;
    let mut ledger = QueryLedger::new();
    let mut rounds = Vec::new();
    let (mut total, mut failed_rounds) = (0.0, 0);

    for t in 0..t_max {
        let cumulative = QuantizedOracle::from_quantized("loss", history.cumulative().to_vec(), 0.0, f * t as u64);
        let found = q_min_find(&cumulative, delta_t, &cfg.sim, &mut ledger, rng)?;
        let l_min = found.value.1;
        let u = QuantizedOracle::from_quantized(
            "loss",
            rescaled_weights(history.cumulative(), l_min, ln_beta, eta),
            eta / 2.0,
            f * t as u64,
        );
        let drawn = q_state_sample(&u, xi, delta_t, &cfg.sim, &mut ledger, rng)?;
        let j = drawn.value;
        let l = next_losses(stream, t, &tracker.p, t_max)?;
        tracker.observe(&l);
        history.push(&l)?;
        ledger.charge("loss", f as u128);
        total += l[j];
        let failed = found.failed || drawn.failed;
        failed_rounds += failed as u64;
        if cfg.record_rounds {
            rounds.push(QHedgeRound {
                w_max: (l_min * ln_beta).exp() / n as f64,
                l_min,
                value: l[j],
                choice: Some(j),
                failed,
            });
        }
    }
    let offline = min_lowest(tracker.state.cumulative_loss());
    Ok(QHedgeReport {
        beta,
        total_loss: total,
        hedge_loss: tracker.hedge_loss,
        offline_min_loss: offline,
        regret: total - offline,
        transaction_cost: t_max as f64 * cfg.transaction_cost,
        xi: Some(xi),
        eta,
        failed_rounds,
        ledger,
        rounds,
    })
}
