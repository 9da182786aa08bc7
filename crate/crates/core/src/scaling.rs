//! Query-count sweeps over the dimension `N`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::UniformStream;
use crate::quantum_algos::{q_active_hedge, q_estimate_total_loss, q_sparsitron, QHedgeConfig, QSparsitronConfig};
use crate::quantum_sim::{q_norm_estimate, QuantizedOracle, QueryLedger, SimConfig};
use crate::rng::{self, SimRng};
use crate::sparsitron::{Activation, FeatureLayout, PlantedGlm};
use crate::stats::log_log_slope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingTarget {
    NormEstimate,
    TotalLoss,
    ActiveHedge,
    QSparsitron,
}

impl ScalingTarget {
    pub const ALL: [ScalingTarget; 4] =
        [ScalingTarget::NormEstimate, ScalingTarget::TotalLoss, ScalingTarget::ActiveHedge, ScalingTarget::QSparsitron];

    pub fn name(self) -> &'static str {
        match self {
            ScalingTarget::NormEstimate => "norm-estimate",
            ScalingTarget::TotalLoss => "total-loss",
            ScalingTarget::ActiveHedge => "active-hedge",
            ScalingTarget::QSparsitron => "qsparsitron",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ScalingTarget::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub target: ScalingTarget,
    /// `N = 2^k` for each listed `k`.
    #[serde(default = "default_exponents")]
    pub exponents: Vec<u32>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Second training set size for the Sparsitron sweep.
    #[serde(default = "default_rounds")]
    pub risk_samples: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_exponents() -> Vec<u32> {
    (6..=12).collect()
}

fn default_rounds() -> usize {
    16
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    0.1
}

impl ScalingConfig {
    pub fn new(target: ScalingTarget) -> Self {
        ScalingConfig {
            target,
            exponents: default_exponents(),
            rounds: default_rounds(),
            risk_samples: default_rounds(),
            epsilon: default_epsilon(),
            delta: default_delta(),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub queries: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub target: ScalingTarget,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln(queries)` against `ln(N)`.
    pub slope: f64,
}

impl ScalingReport {
    /// `n,queries` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,queries\n");
        for r in &self.rows {
            s.push_str(&format!("{},{}\n", r.n, r.queries));
        }
        s
    }
}

fn ledger_for(cfg: &ScalingConfig, n: usize, rng: &mut SimRng) -> Result<QueryLedger> {
    match cfg.target {
        ScalingTarget::NormEstimate => {
            let mut u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            u[0] = 1.0;
            let eta = cfg.sim.eta(n, &[cfg.epsilon], &[]);
            let o = QuantizedOracle::new("u", &u, eta, cfg.sim.constants.oracle_factor)?;
            let mut ledger = QueryLedger::new();
            q_norm_estimate(&o, cfg.epsilon, cfg.delta, &cfg.sim, &mut ledger, rng)?;
            Ok(ledger)
        }
        ScalingTarget::TotalLoss | ScalingTarget::ActiveHedge => {
            let mut hc = QHedgeConfig::new(n, cfg.rounds, cfg.epsilon, cfg.delta);
            hc.sim = cfg.sim;
            let mut stream = UniformStream::new(n, rng::seeded(rng.random()));
            let rep = if cfg.target == ScalingTarget::TotalLoss {
                q_estimate_total_loss(&hc, &mut stream, rng)?
            } else {
                q_active_hedge(&hc, &mut stream, rng)?
            };
            Ok(rep.ledger)
        }
        ScalingTarget::QSparsitron => {
            // Raw dimension chosen so the expanded width is N.
            let raw = (n / 2).saturating_sub(1).max(1);
            let sigma = Activation::Sigmoid;
            let g = PlantedGlm::random_sparse(raw, raw.min(3), 1.0, rng)?;
            let t1 = g.training_set(cfg.rounds, &sigma, FeatureLayout::default(), rng)?;
            let t2 = g.training_set(cfg.risk_samples, &sigma, FeatureLayout::default(), rng)?;
            let qc = QSparsitronConfig::new(1.0, cfg.epsilon, cfg.delta, cfg.sim);
            Ok(q_sparsitron(&qc, &sigma, &t1, &t2, rng)?.ledger)
        }
    }
}

pub fn query_scaling<R: Rng + ?Sized>(cfg: &ScalingConfig, rng: &mut R) -> Result<ScalingReport> {
    if cfg.exponents.len() < 2 {
        return Err(Error::param("exponents", "need at least two sizes"));
    }
    let mut rows = Vec::with_capacity(cfg.exponents.len());
    for &k in &cfg.exponents {
        if k >= 31 {
            return Err(Error::param("exponents", format!("2^{k} is too large")));
        }
        let n = 1usize << k;
        let mut sub = rng::seeded(rng.random());
        rows.push(ScalingRow { n, queries: ledger_for(cfg, n, &mut sub)?.total() });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.queries as f64).collect();
    Ok(ScalingReport { target: cfg.target, slope: log_log_slope(&xs, &ys), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slopes_near_one_half() {
        for target in ScalingTarget::ALL {
            let mut cfg = ScalingConfig::new(target);
            cfg.exponents = vec![6, 8, 10];
            cfg.rounds = 8;
            cfg.risk_samples = 8;
            let rep = query_scaling(&cfg, &mut rng::seeded(1)).unwrap();
            assert!((rep.slope - 0.5).abs() < 0.1, "{target:?}: {}", rep.slope);
            assert!(rep.rows.windows(2).all(|w| w[1].queries > w[0].queries));
        }
    }

    #[test]
    fn csv_and_names() {
        let rep = ScalingReport {
            target: ScalingTarget::NormEstimate,
            rows: vec![ScalingRow { n: 64, queries: 10 }],
            slope: 0.5,
        };
        assert_eq!(rep.to_csv(), "n,queries\n64,10\n");
        assert_eq!(ScalingTarget::parse("active-hedge"), Some(ScalingTarget::ActiveHedge));
        assert_eq!(ScalingTarget::parse("nope"), None);
        let mut cfg = ScalingConfig::new(ScalingTarget::NormEstimate);
        cfg.exponents = vec![6];
        assert!(query_scaling(&cfg, &mut rng::seeded(1)).is_err());
    }
}
