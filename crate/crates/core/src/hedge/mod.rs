//! The Hedge algorithm (multiplicative weights over `N` experts) with the
//! null / deterministic / sampled allocation flags and transaction-cost
//! accounting.
//!
//! Weights are never stored directly. [`WeightState`] keeps each expert's
//! cumulative loss `L_j`, and the weight `beta^L_j / N` is materialized on
//! demand, so `beta^T / N` never underflows.

mod stream;

pub use stream::{
    adversarial_streams, AdaptiveAdversary, AdversaryKind, BernoulliStream, LossStream, MatrixStream,
    UniformStream,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_open_unit, check_range, Error, Result};
use crate::sampling::AliasTable;

/// `beta = 1 / (1 + sqrt(2 ln N / T))`, the learning rate behind the regret bound.
pub fn compute_beta(n_experts: usize, n_rounds: usize) -> Result<f64> {
    if n_experts < 2 {
        return Err(Error::param("n_experts", "need at least 2 experts (ln N = 0 otherwise)"));
    }
    if n_rounds == 0 {
        return Err(Error::param("n_rounds", "must be positive"));
    }
    Ok(beta_from_ln(
        (n_experts as f64).ln(),
        n_rounds as f64,
    ))
}

/// [`compute_beta`] with `ln N` and `T` given as reals.
pub fn beta_from_ln(ln_n: f64, t: f64) -> f64 {
    1.0 / (1.0 + (2.0 * ln_n / t).sqrt())
}

/// `sqrt(2 T ln N) + ln N`.
pub fn regret_bound(n_experts: usize, n_rounds: usize) -> f64 {
    regret_bound_from_ln((n_experts as f64).ln(), n_rounds as f64)
}

pub fn regret_bound_from_ln(ln_n: f64, t: f64) -> f64 {
    (2.0 * t * ln_n).sqrt() + ln_n
}

/// `3 sqrt(T ln(N / delta)) + ln N`, holding with probability `1 - delta` for the sampled flag.
pub fn sampled_regret_bound(n_experts: usize, n_rounds: usize, delta: f64) -> Result<f64> {
    check_open_unit("delta", delta)?;
    let n = n_experts as f64;
    Ok(3.0 * (n_rounds as f64 * (n / delta).ln()).sqrt() + n.ln())
}

/// `p . l`.
pub fn step_loss(p: &[f64], l: &[f64]) -> Result<f64> {
    check_len(p.len(), l.len())?;
    check_range(l, 0.0, 1.0)?;
    Ok(crate::linalg::dot(p, l))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HedgeFlag {
    Null,
    Deterministic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeConfig {
    pub n_experts: usize,
    pub n_rounds: usize,
    pub beta: f64,
    pub flag: HedgeFlag,
    /// Fee `C0` per allocated strategy per round.
    #[serde(default)]
    pub transaction_cost: f64,
    #[serde(default)]
    pub seed: u64,
    /// Keep per-round records in the outcome.
    #[serde(default)]
    pub record_rounds: bool,
}

impl HedgeConfig {
    /// Config with `beta` from [`compute_beta`].
    pub fn with_default_beta(n_experts: usize, n_rounds: usize, flag: HedgeFlag) -> Result<Self> {
        Ok(HedgeConfig {
            n_experts,
            n_rounds,
            beta: compute_beta(n_experts, n_rounds)?,
            flag,
            transaction_cost: 0.0,
            seed: 0,
            record_rounds: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_experts == 0 {
            return Err(Error::param("n_experts", "must be positive"));
        }
        if self.n_rounds == 0 {
            return Err(Error::param("n_rounds", "must be positive"));
        }
        check_open_unit("beta", self.beta)?;
        if !(self.transaction_cost >= 0.0) || !self.transaction_cost.is_finite() {
            return Err(Error::param("transaction_cost", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Cumulative per-expert losses; weights are `beta^L_j / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    cumulative_loss: Vec<f64>,
    beta: f64,
    ln_beta: f64,
}

impl WeightState {
    pub fn new(n_experts: usize, beta: f64) -> Result<Self> {
        if n_experts == 0 {
            return Err(Error::param("n_experts", "must be positive"));
        }
        check_open_unit("beta", beta)?;
        Ok(WeightState {
            cumulative_loss: vec![0.0; n_experts],
            beta,
            ln_beta: beta.ln(),
        })
    }

    /// State after the given cumulative losses, e.g. when rebuilding from a history.
    pub fn from_cumulative(cumulative_loss: Vec<f64>, beta: f64) -> Result<Self> {
        let mut s = WeightState::new(cumulative_loss.len(), beta)?;
        for (i, &c) in cumulative_loss.iter().enumerate() {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::OutOfRange { index: i, value: c, lo: 0.0, hi: f64::INFINITY });
            }
        }
        s.cumulative_loss = cumulative_loss;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.cumulative_loss.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn cumulative_loss(&self) -> &[f64] {
        &self.cumulative_loss
    }

    /// `w_j = beta^L_j / N`.
    pub fn weight(&self, j: usize) -> f64 {
        (self.cumulative_loss[j] * self.ln_beta).exp() / self.n() as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.weight(j)).collect()
    }

    /// `ln w_j`.
    pub fn log_weight(&self, j: usize) -> f64 {
        self.cumulative_loss[j] * self.ln_beta - (self.n() as f64).ln()
    }

    /// Lowest-index expert with the smallest cumulative loss, and that loss.
    pub fn min_cumulative_loss(&self) -> (usize, f64) {
        let mut best = (0, self.cumulative_loss[0]);
        for (j, &c) in self.cumulative_loss.iter().enumerate().skip(1) {
            if c < best.1 {
                best = (j, c);
            }
        }
        best
    }

    /// Weights divided by the largest weight: `beta^(L_j - L_min)`, all in `(0, 1]`.
    pub fn rescaled_weights_into(&self, out: &mut Vec<f64>) {
        let (_, l_min) = self.min_cumulative_loss();
        out.clear();
        out.extend(self.cumulative_loss.iter().map(|&c| ((c - l_min) * self.ln_beta).exp()));
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n());
        self.probabilities_into(&mut p);
        p
    }

    /// `p_j = w_j / |w|_1`, evaluated after subtracting the largest log-weight.
    pub fn probabilities_into(&self, out: &mut Vec<f64>) {
        self.rescaled_weights_into(out);
        let total: f64 = out.iter().sum();
        let inv = 1.0 / total;
        for p in out.iter_mut() {
            *p *= inv;
        }
    }

    /// Multiplies weight `j` by `beta^l_j`.
    pub fn update(&mut self, l: &[f64]) -> Result<()> {
        check_len(self.n(), l.len())?;
        check_range(l, 0.0, 1.0)?;
        self.update_unchecked(l);
        Ok(())
    }

    pub(crate) fn update_unchecked(&mut self, l: &[f64]) {
        for (c, &x) in self.cumulative_loss.iter_mut().zip(l) {
            *c += x;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub step_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeOutcome {
    pub flag: HedgeFlag,
    /// `sum_t p.l` for null/deterministic, `sum_t l_{j(t)}` for sampled.
    pub total_loss: f64,
    pub transaction_cost: f64,
    pub offline_min_loss: f64,
    /// Lowest-index expert achieving `offline_min_loss`.
    pub best_expert: usize,
    pub regret: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_round: Vec<RoundRecord>,
}

/// Round-by-round Hedge learner.
#[derive(Debug, Clone)]
pub struct Hedge {
    config: HedgeConfig,
    state: WeightState,
    probs: Vec<f64>,
    round: usize,
    total_loss: f64,
    /// Strategy allocations charged so far.
    allocations: u64,
}

impl Hedge {
    pub fn new(config: HedgeConfig) -> Result<Self> {
        config.validate()?;
        let state = WeightState::new(config.n_experts, config.beta)?;
        let probs = state.probabilities();
        Ok(Hedge {
            config,
            state,
            probs,
            round: 0,
            total_loss: 0.0,
            allocations: 0,
        })
    }

    pub fn config(&self) -> &HedgeConfig {
        &self.config
    }

    pub fn state(&self) -> &WeightState {
        &self.state
    }

    /// Allocation `p^(t)` for the upcoming round.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn rounds_played(&self) -> usize {
        self.round
    }

    pub fn total_loss(&self) -> f64 {
        self.total_loss
    }

    /// Allocation count times `C0`, so the fee is exact rather than a running sum.
    pub fn transaction_cost(&self) -> f64 {
        self.allocations as f64 * self.config.transaction_cost
    }

    /// Allocates per the flag, suffers the loss `l`, and applies the multiplicative update.
    pub fn play<R: Rng + ?Sized>(&mut self, l: &[f64], rng: &mut R) -> Result<RoundRecord> {
        check_len(self.config.n_experts, l.len())?;
        check_range(l, 0.0, 1.0)?;
        self.round += 1;
        let (step, sampled_index, allocated) = match self.config.flag {
            HedgeFlag::Null => (crate::linalg::dot(&self.probs, l), None, 0),
            HedgeFlag::Deterministic => (crate::linalg::dot(&self.probs, l), None, self.config.n_experts as u64),
            HedgeFlag::Sampled => {
                let table = AliasTable::build(&self.probs)?;
                let j = table.sample(rng);
                (l[j], Some(j), 1)
            }
        };
        self.total_loss += step;
        self.allocations += allocated;
        self.state.update_unchecked(l);
        self.state.probabilities_into(&mut self.probs);
        Ok(RoundRecord {
            round: self.round,
            step_loss: step,
            sampled_index,
        })
    }

    /// Outcome so far; the offline minimum is read from the cumulative losses.
    pub fn outcome(&self, per_round: Vec<RoundRecord>) -> HedgeOutcome {
        let (best_expert, offline_min_loss) = self.state.min_cumulative_loss();
        HedgeOutcome {
            flag: self.config.flag,
            total_loss: self.total_loss,
            transaction_cost: self.transaction_cost(),
            offline_min_loss,
            best_expert,
            regret: self.total_loss - offline_min_loss,
            per_round,
        }
    }
}

/// Plays `config.n_rounds` rounds against `stream`.
pub fn run_hedge<S, R>(config: &HedgeConfig, stream: &mut S, rng: &mut R) -> Result<HedgeOutcome>
where
    S: LossStream + ?Sized,
    R: Rng + ?Sized,
{
    check_len(config.n_experts, stream.n_experts())?;
    let mut hedge = Hedge::new(config.clone())?;
    let mut records = Vec::new();
    for t in 0..config.n_rounds {
        let l = stream.next_losses(t, hedge.probabilities()).ok_or(Error::StreamExhausted {
            rounds: t,
            expected: config.n_rounds,
        })?;
        let rec = hedge.play(&l, rng)?;
        if config.record_rounds {
            records.push(rec);
        }
    }
    Ok(hedge.outcome(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn beta_plug_in_values() {
        let ln2 = 2f64.ln();
        assert!((beta_from_ln(ln2, 2.0 * ln2) - 0.5).abs() < 1e-15);
        // ln N = 2: T = 8 puts 1/2 under the root, T = 16 puts 1/4.
        assert!((beta_from_ln(2.0, 8.0) - 1.0 / (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
        assert!((beta_from_ln(2.0, 16.0) - 2.0 / 3.0).abs() < 1e-15);
        // N = 100, T = 10000; reference from a 40-digit evaluation.
        let b = compute_beta(100, 10_000).unwrap();
        assert!((b - 0.970_545_362_726_012_038_674_671).abs() < 1e-15);
        assert!(compute_beta(1, 10).is_err());
        assert!(compute_beta(5, 0).is_err());
    }

    #[test]
    fn regret_bound_values() {
        assert!((regret_bound(2, 2) - ((4.0 * 2f64.ln()).sqrt() + 2f64.ln())).abs() < 1e-15);
        // 40-digit reference: 308.0905960630173615406...
        assert!((regret_bound(100, 10_000) - 308.090_596_063_017_361_5).abs() < 1e-10);
        assert!((regret_bound_from_ln(1.0, 2.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_regret_bound_values() {
        let b = sampled_regret_bound(2, 2, 0.5).unwrap();
        assert!((b - (3.0 * (2.0 * 4f64.ln()).sqrt() + 2f64.ln())).abs() < 1e-12);
        assert!((b - 5.688_474_847_506_131_8).abs() < 1e-12);
        let big = sampled_regret_bound(100, 10_000, 0.05).unwrap();
        assert!((big - 831.697_197_326_128_895_5).abs() < 1e-9);
        assert!(sampled_regret_bound(2, 2, 0.0).is_err());
        assert!(sampled_regret_bound(2, 2, 1.0).is_err());
    }

    #[test]
    fn probabilities_examples() {
        let s = WeightState::new(4, 0.3).unwrap();
        assert_eq!(s.probabilities(), vec![0.25; 4]);
        let s = WeightState::from_cumulative(vec![0.0, 1.0], 0.5).unwrap();
        let p = s.probabilities();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn probabilities_match_direct_product_form() {
        let mut rng = rng::seeded(11);
        let beta = 0.8;
        let mut s = WeightState::new(5, beta).unwrap();
        let mut direct = vec![1.0 / 5.0; 5];
        for _ in 0..50 {
            let l: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            s.update(&l).unwrap();
            for (w, x) in direct.iter_mut().zip(&l) {
                *w *= beta.powf(*x);
            }
        }
        let total: f64 = direct.iter().sum();
        for (p, w) in s.probabilities().iter().zip(&direct) {
            assert!((p - w / total).abs() < 1e-10);
        }
    }

    #[test]
    fn step_loss_examples() {
        assert_eq!(step_loss(&[0.5, 0.5], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(step_loss(&[1.0 / 3.0; 3], &[1.0; 3]).unwrap(), 1.0);
        assert_eq!(step_loss(&[0.25, 0.75], &[1.0, 0.0]).unwrap(), 0.25);
        assert!(matches!(step_loss(&[1.0], &[0.5, 0.5]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(step_loss(&[0.5, 0.5], &[1.5, 0.0]), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn update_examples() {
        let mut s = WeightState::new(3, 0.5).unwrap();
        let before = s.clone();
        s.update(&[0.0; 3]).unwrap();
        assert_eq!(s, before);

        let mut s = WeightState::new(2, 0.5).unwrap();
        s.update(&[0.0, 1.0]).unwrap();
        let p = s.probabilities();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(s.update(&[-0.1, 0.0]).is_err());
    }

    #[test]
    fn weights_match_incremental_products() {
        let mut rng = rng::seeded(5);
        let beta = 0.9;
        let n = 6;
        let mut s = WeightState::new(n, beta).unwrap();
        let mut w = vec![1.0 / n as f64; n];
        for _ in 0..100 {
            let l: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            s.update(&l).unwrap();
            for (wi, x) in w.iter_mut().zip(&l) {
                *wi *= beta.powf(*x);
            }
        }
        for (a, b) in s.weights().iter().zip(&w) {
            assert!(((a - b) / b).abs() < 1e-10);
        }
    }

    #[test]
    fn transaction_costs_per_flag() {
        let mut rng = rng::seeded(1);
        let losses: Vec<Vec<f64>> = (0..4).map(|t| vec![0.1 * t as f64, 0.5, 1.0]).collect();
        for (flag, expected) in [
            (HedgeFlag::Null, 0.0),
            (HedgeFlag::Deterministic, 12.0),
            (HedgeFlag::Sampled, 4.0),
        ] {
            let mut cfg = HedgeConfig::with_default_beta(3, 4, flag).unwrap();
            cfg.transaction_cost = 1.0;
            let mut stream = MatrixStream::new(losses.clone()).unwrap();
            let out = run_hedge(&cfg, &mut stream, &mut rng).unwrap();
            assert_eq!(out.transaction_cost, expected);
        }
    }

    #[test]
    fn zero_stream_has_zero_loss_and_regret() {
        let mut rng = rng::seeded(3);
        for flag in [HedgeFlag::Null, HedgeFlag::Deterministic, HedgeFlag::Sampled] {
            let cfg = HedgeConfig::with_default_beta(4, 10, flag).unwrap();
            let mut stream = MatrixStream::new(vec![vec![0.0; 4]; 10]).unwrap();
            let out = run_hedge(&cfg, &mut stream, &mut rng).unwrap();
            assert_eq!(out.total_loss, 0.0);
            assert_eq!(out.regret, 0.0);
        }
    }

    #[test]
    fn null_flag_matches_manual_evaluation() {
        // beta = 1/2, losses chosen by hand; evaluated round by round below.
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 1.0]];
        let cfg = HedgeConfig {
            n_experts: 2,
            n_rounds: 3,
            beta: 0.5,
            flag: HedgeFlag::Null,
            transaction_cost: 0.0,
            seed: 0,
            record_rounds: true,
        };
        let mut stream = MatrixStream::new(rows).unwrap();
        let out = run_hedge(&cfg, &mut stream, &mut rng::seeded(0)).unwrap();
        // t=1: p=(1/2,1/2), L=1/2. t=2: w=(1/4,1/2) -> p=(1/3,2/3), L=2/3.
        // t=3: w=(1/4,1/4) -> p=(1/2,1/2), L=1/4+1/2=3/4.
        let expected = [0.5, 2.0 / 3.0, 0.75];
        for (r, e) in out.per_round.iter().zip(expected) {
            assert!((r.step_loss - e).abs() < 1e-15);
        }
        assert!((out.total_loss - 23.0 / 12.0).abs() < 1e-14);
        assert_eq!(out.offline_min_loss, 1.5);
        assert_eq!(out.best_expert, 0);
        assert!((out.regret - 5.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn early_exhaustion_is_an_error() {
        let cfg = HedgeConfig::with_default_beta(2, 5, HedgeFlag::Null).unwrap();
        let mut stream = MatrixStream::new(vec![vec![0.0, 1.0]; 3]).unwrap();
        let err = run_hedge(&cfg, &mut stream, &mut rng::seeded(0)).unwrap_err();
        assert_eq!(err, Error::StreamExhausted { rounds: 3, expected: 5 });
    }

    #[test]
    fn offline_minimum_breaks_ties_by_lowest_index() {
        let s = WeightState::from_cumulative(vec![2.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(s.min_cumulative_loss(), (1, 1.0));
    }
}
