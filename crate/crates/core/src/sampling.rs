//! Alias-method sampler and the median-of-means sampled inner-product estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_range, Error, Result};
use crate::stats::median_lower;

/// Walker/Vose alias table: draw a cell uniformly, keep it with probability
/// `prob[cell]`, otherwise jump to `alias[cell]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

/// Slack allowed on `sum(p)` before building.
pub const ALIAS_SUM_TOLERANCE: f64 = 1e-9;

impl AliasTable {
    /// Builds from a probability vector whose sum is within [`ALIAS_SUM_TOLERANCE`] of 1.
    pub fn build(p: &[f64]) -> Result<Self> {
        let total = validate_weights(p)?;
        if (total - 1.0).abs() > ALIAS_SUM_TOLERANCE {
            return Err(Error::param("p", format!("sums to {total}, expected 1")));
        }
        Ok(Self::build_normalized(p, total))
    }

    /// Builds from arbitrary non-negative weights with a positive sum.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let total = validate_weights(w)?;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::param("weights", "sum must be positive and finite"));
        }
        Ok(Self::build_normalized(w, total))
    }

    fn build_normalized(p: &[f64], total: f64) -> Self {
        let n = p.len();
        let scale = n as f64 / total;
        let mut q: Vec<f64> = p.iter().map(|&x| x * scale).collect();
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small = Vec::with_capacity(n);
        let mut large = Vec::with_capacity(n);
        for j in (0..n).rev() {
            if q[j] < 1.0 {
                small.push(j);
            } else {
                large.push(j);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l;
            q[l] = (q[l] + q[s]) - 1.0;
            if q[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for j in large.into_iter().chain(small) {
            q[j] = 1.0;
            alias[j] = j;
        }
        AliasTable { prob: q, alias }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn alias(&self) -> &[usize] {
        &self.alias
    }

    /// Per-index sampling probability implied by the finished table.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut r: Vec<f64> = self.prob.iter().map(|&q| q / n).collect();
        for (i, &a) in self.alias.iter().enumerate() {
            r[a] += (1.0 - self.prob[i]) / n;
        }
        r
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let cell = rng.random_range(0..self.len());
        if rng.random::<f64>() < self.prob[cell] {
            cell
        } else {
            self.alias[cell]
        }
    }
}

fn validate_weights(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    let mut total = 0.0;
    for (i, &x) in p.iter().enumerate() {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::OutOfRange { index: i, value: x, lo: 0.0, hi: f64::INFINITY });
        }
        total += x;
    }
    Ok(total)
}

/// Sample counts of the median-of-means estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// `ceil(9 / (2 eps^2))`
    pub samples_per_batch: usize,
    /// `ceil(6 ln(1/delta))`
    pub n_batches: usize,
}

impl EstimatorConfig {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_open_unit("epsilon", epsilon)?;
        check_open_unit("delta", delta)?;
        Ok(EstimatorConfig {
            epsilon,
            delta,
            samples_per_batch: (9.0 / (2.0 * epsilon * epsilon)).ceil() as usize,
            n_batches: ((6.0 * (1.0 / delta).ln()).ceil() as usize).max(1),
        })
    }

    /// Index draws consumed by one estimate.
    pub fn total_samples(&self) -> usize {
        self.samples_per_batch * self.n_batches
    }
}

/// Median over batches of batch means of `x(J)`, `J ~ p`.
///
/// `x` is evaluated lazily so callers can stream coordinates; values must lie in `[-1, 1]`.
pub fn l1_inner_product_estimate_with<R, F>(
    sampler: &AliasTable,
    mut x: F,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> f64,
{
    let mut means = Vec::with_capacity(cfg.n_batches);
    for _ in 0..cfg.n_batches {
        let mut acc = 0.0;
        for _ in 0..cfg.samples_per_batch {
            let j = sampler.sample(rng);
            let v = x(j);
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { index: j, value: v, lo: -1.0, hi: 1.0 });
            }
            acc += v;
        }
        means.push(acc / cfg.samples_per_batch as f64);
    }
    Ok(median_lower(&mut means))
}

pub fn l1_inner_product_estimate<R: Rng + ?Sized>(
    sampler: &AliasTable,
    x: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<f64> {
    crate::error::check_len(sampler.len(), x.len())?;
    check_range(x, -1.0, 1.0)?;
    l1_inner_product_estimate_with(sampler, |j| x[j], cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::stats::tv_distance_counts;

    #[test]
    fn singleton_and_uniform() {
        let t = AliasTable::build(&[1.0]).unwrap();
        assert_eq!(t.prob(), &[1.0]);
        assert_eq!(t.alias(), &[0]);
        let t = AliasTable::build(&[0.5, 0.5]).unwrap();
        assert_eq!(t.prob(), &[1.0, 1.0]);
        assert_eq!(t.alias(), &[0, 1]);
    }

    #[test]
    fn three_way_reconstruction() {
        let p = [0.1, 0.2, 0.7];
        let t = AliasTable::build(&p).unwrap();
        for (r, e) in t.reconstruct().iter().zip(p) {
            assert!((r - e).abs() < 1e-15, "{r} vs {e}");
        }
    }

    #[test]
    fn build_is_deterministic_and_validates() {
        let p = [0.3, 0.1, 0.25, 0.35];
        assert_eq!(AliasTable::build(&p).unwrap(), AliasTable::build(&p).unwrap());
        assert!(AliasTable::build(&[0.5, -0.1, 0.6]).is_err());
        assert!(AliasTable::build(&[0.5, 0.4]).is_err());
        assert!(AliasTable::build(&[]).is_err());
    }

    #[test]
    fn point_mass_always_drawn() {
        let t = AliasTable::build(&[0.0, 1.0]).unwrap();
        let mut r = rng::seeded(1);
        assert!((0..10_000).all(|_| t.sample(&mut r) == 1));
    }

    #[test]
    fn fair_coin_frequency() {
        let t = AliasTable::build(&[0.5, 0.5]).unwrap();
        let mut r = rng::seeded(2);
        let draws = 1_000_000;
        let ones = (0..draws).filter(|_| t.sample(&mut r) == 1).count();
        let f = ones as f64 / draws as f64;
        assert!((0.497..=0.503).contains(&f), "{f}");
    }

    #[test]
    fn histogram_close_to_target() {
        let mut r = rng::seeded(3);
        let w: Vec<f64> = (0..100).map(|_| r.random::<f64>()).collect();
        let t = AliasTable::from_weights(&w).unwrap();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut counts = vec![0u64; 100];
        for _ in 0..1_000_000 {
            counts[t.sample(&mut r)] += 1;
        }
        assert!(tv_distance_counts(&counts, &p) <= 0.01);
    }

    #[test]
    fn estimator_sizes() {
        let c = EstimatorConfig::new(0.05, 0.01).unwrap();
        assert_eq!(c.samples_per_batch, 1800);
        assert_eq!(c.n_batches, 28);
        assert_eq!(c.total_samples(), 1800 * 28);
        assert!(EstimatorConfig::new(0.0, 0.5).is_err());
    }

    #[test]
    fn constant_inputs_are_exact() {
        let mut r = rng::seeded(4);
        let t = AliasTable::build(&[0.2, 0.3, 0.5]).unwrap();
        let c = EstimatorConfig::new(0.2, 0.2).unwrap();
        assert_eq!(l1_inner_product_estimate(&t, &[0.0; 3], &c, &mut r).unwrap(), 0.0);
        let v = l1_inner_product_estimate(&t, &[-0.25; 3], &c, &mut r).unwrap();
        assert_eq!(v, -0.25);
        assert!(l1_inner_product_estimate(&t, &[0.0, 2.0, 0.0], &c, &mut r).is_err());
    }

    #[test]
    fn draws_consumed_match_config() {
        let mut r = rng::seeded(5);
        let t = AliasTable::build(&[0.5, 0.5]).unwrap();
        let c = EstimatorConfig::new(0.3, 0.3).unwrap();
        let mut calls = 0usize;
        l1_inner_product_estimate_with(&t, |_| { calls += 1; 0.0 }, &c, &mut r).unwrap();
        assert_eq!(calls, c.total_samples());
    }
}
