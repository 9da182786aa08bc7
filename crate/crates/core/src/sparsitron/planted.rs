use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, FeatureLayout, GlmSample, TrainingSet};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Ground-truth GLM `E[Y | x] = sigma(w . x + bias)` with `x` uniform on `[-1,1]^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedGlm {
    pub w: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
}

impl PlantedGlm {
    /// `k` non-zero coordinates of magnitude `l1 / k` with random signs.
    pub fn random_sparse<R: Rng + ?Sized>(n: usize, k: usize, l1: f64, rng: &mut R) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::param("k", format!("need 1 <= k <= {n}")));
        }
        let mut w = vec![0.0; n];
        for i in sample_indices(rng, n, k).into_iter() {
            w[i] = if rng.random::<bool>() { l1 / k as f64 } else { -l1 / k as f64 };
        }
        Ok(PlantedGlm { w, bias: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|x| x.abs()).sum::<f64>() + self.bias.abs()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.bias
    }

    pub fn mean_label(&self, x: &[f64], sigma: &Activation) -> f64 {
        sigma.eval(self.margin(x))
    }

    pub fn sample_x<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
    }

    /// Samples with Bernoulli labels.
    pub fn draw<R: Rng + ?Sized>(&self, count: usize, sigma: &Activation, rng: &mut R) -> Vec<GlmSample> {
        (0..count)
            .map(|_| {
                let x = self.sample_x(rng);
                let y = if rng.random::<f64>() < self.mean_label(&x, sigma) { 1.0 } else { 0.0 };
                GlmSample { x, y }
            })
            .collect()
    }

    pub fn training_set<R: Rng + ?Sized>(
        &self,
        count: usize,
        sigma: &Activation,
        layout: FeatureLayout,
        rng: &mut R,
    ) -> Result<TrainingSet> {
        TrainingSet::new(&self.draw(count, sigma, rng), layout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

/// Monte Carlo estimate of `E[(predict(X) - target(X))^2]`.
pub fn true_risk_estimate<R, P, T, S>(
    predict: P,
    target: T,
    n_holdout: usize,
    mut sampler: S,
    rng: &mut R,
) -> RiskEstimate
where
    R: Rng + ?Sized,
    P: Fn(&[f64]) -> f64,
    T: Fn(&[f64]) -> f64,
    S: FnMut(&mut R) -> Vec<f64>,
{
    let mut sq = Vec::with_capacity(n_holdout);
    for _ in 0..n_holdout {
        let x = sampler(rng);
        let d = predict(&x) - target(&x);
        sq.push(d * d);
    }
    let mean = crate::stats::mean(&sq);
    let std_err = crate::stats::std_dev(&sq) / (n_holdout as f64).sqrt();
    RiskEstimate { mean, std_err, n: n_holdout }
}
