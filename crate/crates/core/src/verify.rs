//! Acceptance suites with measured values next to their bounds.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::{
    adversarial_streams, regret_bound, run_hedge, sampled_regret_bound, HedgeConfig, HedgeFlag, MatrixStream,
    UniformStream,
};
use crate::ising::{
    exact_distribution, exact_sample, gibbs_sample, learn_ising, max_abs_error, sweep_kernel, Backend,
    IsingLearnConfig, IsingModel,
};
use crate::quantum_algos::{
    q_active_hedge, q_estimate_total_loss, q_sparsitron, reconstruct_q, QHedgeConfig, QSparsitronConfig,
};
use crate::quantum_sim::{
    q_inner_additive, q_inner_relative, q_max_find, q_min_find, q_norm_estimate, q_state_sample,
    ratio_error_bound, NoiseMode, QuantizedOracle, QueryLedger, SimConfig,
};
use crate::rng::{self, SimRng};
use crate::sampling::{l1_inner_product_estimate, AliasTable, EstimatorConfig};
use crate::scaling::{query_scaling, ScalingConfig, ScalingTarget};
use crate::sparsitron::{
    median_of_means_draws, required_m, required_t, run_sparsitron_modes, true_risk_estimate, Activation,
    FeatureLayout, PlantedGlm, RiskEstimator, SparsitronConfig, SparsitronMode, TrainingSet,
};
use crate::stats::{binomial_band, mean, tv_distance_counts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl Cmp {
    fn holds(self, measured: f64, bound: f64) -> bool {
        match self {
            Cmp::Le => measured <= bound,
            Cmp::Ge => measured >= bound,
            Cmp::Eq => measured == bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub cmp: Cmp,
    pub bound: f64,
    pub pass: bool,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "ok " } else { "BAD" };
        write!(f, "{tag} {}: {} {} {}", self.name, self.measured, self.cmp.symbol(), self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub criterion: u8,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub elapsed_s: f64,
    pub time_limit_s: f64,
}

impl SuiteReport {
    /// One summary line: `PASS criterion 7 (ratio-bound): ...`.
    pub fn summary_line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let status = if self.pass { "PASS" } else { "FAIL" };
        let detail = if failed.is_empty() {
            format!("{} checks", self.checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        };
        format!(
            "{status} criterion {} ({}): {detail} [{:.1} s of {} s]",
            self.criterion, self.suite, self.elapsed_s, self.time_limit_s
        )
    }
}

#[derive(Default)]
struct Suite {
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Suite {
    fn check(&mut self, name: impl Into<String>, measured: f64, cmp: Cmp, bound: f64) {
        let pass = cmp.holds(measured, bound);
        self.checks.push(Check { name: name.into(), measured, cmp, bound, pass });
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

type SuiteFn = fn(u64, &mut Suite) -> Result<()>;

/// `(name, criterion, time limit in seconds, body)`.
const SUITES: &[(&str, u8, f64, SuiteFn)] = &[
    ("hedge-regret", 1, 30.0, hedge_regret),
    ("sampled-hedge", 2, 30.0, sampled_hedge),
    ("transaction-costs", 3, 1.0, transaction_costs),
    ("alias", 4, 30.0, alias),
    ("mean-estimator", 5, 60.0, mean_estimator),
    ("oracle-contracts", 6, 300.0, oracle_contracts),
    ("ratio-bound", 7, 10.0, ratio_bound),
    ("q-total-loss", 8, 120.0, q_total_loss),
    ("q-active-hedge", 9, 120.0, q_active),
    ("query-scaling", 10, 300.0, scaling),
    ("sparsitron", 11, 300.0, sparsitron),
    ("q-sparsitron", 12, 600.0, q_sparsitron_suite),
    ("ising-learn", 13, 1200.0, ising_learn),
    ("gibbs", 14, 120.0, gibbs),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

/// Runs a suite by name or criterion number.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let entry = SUITES
        .iter()
        .find(|s| s.0 == name || name.parse::<u8>().ok() == Some(s.1))
        .ok_or_else(|| Error::param("suite", format!("unknown suite '{name}'; known: {}", suite_names().join(", "))))?;
    let (suite, criterion, limit, body) = *entry;
    let start = Instant::now();
    let mut s = Suite::default();
    body(seed, &mut s)?;
    let elapsed_s = start.elapsed().as_secs_f64();
    s.check("runtime_s", elapsed_s, Cmp::Le, limit);
    Ok(SuiteReport {
        suite: suite.to_string(),
        criterion,
        seed,
        pass: s.checks.iter().all(|c| c.pass),
        checks: s.checks,
        notes: s.notes,
        elapsed_s,
        time_limit_s: limit,
    })
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

fn random_rows(n: usize, t: usize, r: &mut SimRng) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect()
}

fn dirichlet_ones(n: usize, r: &mut SimRng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Expected TV of an exact sampler's empirical law after `draws` draws.
fn tv_noise_floor(p: &[f64], draws: usize) -> f64 {
    let c = 2.0 / (std::f64::consts::PI * draws as f64);
    0.5 * p.iter().map(|&x| (c * x * (1.0 - x)).sqrt()).sum::<f64>()
}

fn hedge_regret(seed: u64, s: &mut Suite) -> Result<()> {
    let (n, t) = (100, 10_000);
    let cfg = HedgeConfig::with_default_beta(n, t, HedgeFlag::Null)?;
    let bound = regret_bound(n, t);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut within = 0;
    let mut runs = 0;
    for i in 0..1000u64 {
        let mut stream = UniformStream::new(n, rng::stream(seed, i));
        let out = run_hedge(&cfg, &mut stream, &mut rng::stream(seed, 10_000 + i))?;
        worst = worst.max(out.regret);
        within += (out.regret <= bound) as usize;
        runs += 1;
    }
    let mut adv_worst: f64 = f64::NEG_INFINITY;
    for mut adv in adversarial_streams(n, t)? {
        let out = run_hedge(&cfg, &mut adv, &mut rng::seeded(seed))?;
        adv_worst = adv_worst.max(out.regret);
        within += (out.regret <= bound) as usize;
        runs += 1;
    }
    s.check("runs within regret bound", fraction(within, runs), Cmp::Ge, 1.0);
    s.check("max regret, random streams", worst, Cmp::Le, bound);
    s.check("max regret, adversarial streams", adv_worst, Cmp::Le, bound);
    Ok(())
}

fn sampled_hedge(seed: u64, s: &mut Suite) -> Result<()> {
    let (n, t, seeds, delta) = (50, 500, 400, 0.05);
    let rows = random_rows(n, t, &mut rng::stream(seed, 0));
    let exact = run_hedge(
        &HedgeConfig::with_default_beta(n, t, HedgeFlag::Null)?,
        &mut MatrixStream::new(rows.clone())?,
        &mut rng::seeded(seed),
    )?;
    let cfg = HedgeConfig::with_default_beta(n, t, HedgeFlag::Sampled)?;
    let bound = sampled_regret_bound(n, t, delta)?;
    let mut losses = Vec::with_capacity(seeds);
    let mut within = 0;
    for i in 0..seeds as u64 {
        let out = run_hedge(&cfg, &mut MatrixStream::new(rows.clone())?, &mut rng::stream(seed, 1 + i))?;
        within += (out.regret <= bound) as usize;
        losses.push(out.total_loss);
    }
    let tol = 4.0 * (t as f64 / (4.0 * seeds as f64)).sqrt();
    s.check("|mean sampled loss - L_H|", (mean(&losses) - exact.total_loss).abs(), Cmp::Le, tol);
    s.check("seeds within sampled regret bound", fraction(within, seeds), Cmp::Ge, 0.95);
    Ok(())
}

fn transaction_costs(seed: u64, s: &mut Suite) -> Result<()> {
    let mut r = rng::seeded(seed);
    let mut mismatches = 0;
    for _ in 0..20 {
        let n = r.random_range(2..=50usize);
        let t = r.random_range(1..=200usize);
        let c0 = 2.0 * r.random::<f64>();
        let rows = random_rows(n, t, &mut r);
        for (flag, expected) in [
            (HedgeFlag::Null, 0.0),
            (HedgeFlag::Deterministic, (n * t) as f64 * c0),
            (HedgeFlag::Sampled, t as f64 * c0),
        ] {
            let mut cfg = HedgeConfig::with_default_beta(n, t, flag)?;
            cfg.transaction_cost = c0;
            let out = run_hedge(&cfg, &mut MatrixStream::new(rows.clone())?, &mut r)?;
            mismatches += (out.transaction_cost != expected) as usize;
        }
    }
    s.check("configs x flags with C != expected", mismatches as f64, Cmp::Eq, 0.0);
    Ok(())
}

fn alias(seed: u64, s: &mut Suite) -> Result<()> {
    let mut r = rng::seeded(seed);
    let (n, draws) = (1000, 1_000_000);
    let p = dirichlet_ones(n, &mut r);
    let table = AliasTable::build(&p)?;
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        counts[table.sample(&mut r)] += 1;
    }
    s.check("TV, N=1000, 1e6 draws", tv_distance_counts(&counts, &p), Cmp::Le, 0.01);
    s.note(format!(
        "expected TV of an exact sampler at this size is {:.5}",
        tv_noise_floor(&p, draws)
    ));
    let mut worst: f64 = 0.0;
    for n in 1..=64 {
        for rep in 0..20 {
            let mut p = dirichlet_ones(n, &mut r);
            if rep % 4 == 1 && n > 1 {
                // Zero cells and one dominant cell.
                for x in p.iter_mut().step_by(2) {
                    *x = 0.0;
                }
                let tot: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= tot);
            }
            let rec = AliasTable::build(&p)?.reconstruct();
            for (a, b) in rec.iter().zip(&p) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    s.check("max reconstruction error, N <= 64", worst, Cmp::Le, 1e-12);
    Ok(())
}

fn mean_estimator(seed: u64, s: &mut Suite) -> Result<()> {
    let (eps, delta, trials) = (0.05, 0.01, 500);
    let cfg = EstimatorConfig::new(eps, delta)?;
    s.check("samples per batch", cfg.samples_per_batch as f64, Cmp::Eq, (9.0 / (2.0 * eps * eps)).ceil());
    s.check("batches", cfg.n_batches as f64, Cmp::Eq, (6.0 * (1.0 / delta).ln()).ceil());
    let mut r = rng::seeded(seed);
    let mut within = 0;
    for _ in 0..trials {
        let n = r.random_range(1..=200usize);
        let p = dirichlet_ones(n, &mut r);
        let x: Vec<f64> = (0..n).map(|_| 2.0 * r.random::<f64>() - 1.0).collect();
        let truth: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
        let est = l1_inner_product_estimate(&AliasTable::build(&p)?, &x, &cfg, &mut r)?;
        within += ((est - truth).abs() <= eps) as usize;
    }
    s.check("trials within eps", fraction(within, trials), Cmp::Ge, 0.99);
    Ok(())
}

fn unit_max(n: usize, r: &mut SimRng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n).map(|_| r.random()).collect();
    u[r.random_range(0..n)] = 1.0;
    u
}

fn dot_ratio(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / u.iter().sum::<f64>()
}

struct Tally {
    instances: u64,
    failed: u64,
    violations: u64,
}

impl Tally {
    fn new() -> Self {
        Tally { instances: 0, failed: 0, violations: 0 }
    }

    fn record(&mut self, failed: bool, ok: bool) {
        self.instances += 1;
        if failed {
            self.failed += 1;
        } else if !ok {
            self.violations += 1;
        }
    }

    fn report(&self, s: &mut Suite, op: &str, p_fail: f64) {
        s.check(format!("{op}: non-failed outputs outside bound"), self.violations as f64, Cmp::Eq, 0.0);
        let (lo, hi) = binomial_band(p_fail, self.instances, 3.0);
        let f = self.failed as f64 / self.instances as f64;
        s.check(format!("{op}: failure rate vs 3-sigma floor"), f, Cmp::Ge, lo);
        s.check(format!("{op}: failure rate vs 3-sigma ceiling"), f, Cmp::Le, hi);
    }
}

fn oracle_contracts(seed: u64, s: &mut Suite) -> Result<()> {
    const K: usize = 10_000;
    let mut r = rng::seeded(seed);
    let mut ledger = QueryLedger::new();
    for noise in [NoiseMode::Uniform, NoiseMode::Adversarial] {
        let sim = SimConfig::with_noise(noise);
        let tag = format!("{noise:?}").to_lowercase();

        let delta = 0.05;
        let (mut tmin, mut tmax) = (Tally::new(), Tally::new());
        for _ in 0..K {
            let n = r.random_range(1..64usize);
            let raw: Vec<f64> = (0..n).map(|_| r.random()).collect();
            let u = QuantizedOracle::new("u", &raw, 1e-6, 1)?;
            let tol = 2.0 * u.entry_error() + 1e-15;
            let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let m = q_min_find(&u, delta, &sim, &mut ledger, &mut r)?;
            tmin.record(m.failed, raw[m.value.0] - lo <= tol);
            let m = q_max_find(&u, delta, &sim, &mut ledger, &mut r)?;
            tmax.record(m.failed, hi - raw[m.value.0] <= tol);
        }
        tmin.report(s, &format!("min-find/{tag}"), delta);
        tmax.report(s, &format!("max-find/{tag}"), delta);

        let mut t = Tally::new();
        for _ in 0..K {
            let n = r.random_range(1..64usize);
            let eps = 0.01 + 0.5 * r.random::<f64>();
            let raw = unit_max(n, &mut r);
            let u = QuantizedOracle::new("u", &raw, sim.eta(n, &[eps], &[]), 1)?;
            let truth: f64 = raw.iter().sum();
            let g = q_norm_estimate(&u, eps, delta, &sim, &mut ledger, &mut r)?;
            t.record(g.failed, (g.value - truth).abs() <= eps * truth * (1.0 + 1e-12));
        }
        t.report(s, &format!("norm-estimate/{tag}"), delta);

        let mut t = Tally::new();
        for _ in 0..K {
            let n = r.random_range(1..64usize);
            let xi = 0.01 + 0.99 * r.random::<f64>();
            let mut raw = unit_max(n, &mut r);
            for x in raw.iter_mut() {
                if r.random::<f64>() < 0.3 && *x < 1.0 {
                    *x = 0.0;
                }
            }
            let u = QuantizedOracle::new("u", &raw, sim.eta(n, &[], &[xi]), 1)?;
            let j = q_state_sample(&u, xi, delta, &sim, &mut ledger, &mut r)?;
            t.record(j.failed, raw[j.value] > 0.0);
        }
        t.report(s, &format!("state-sample/{tag}"), delta);

        let delta = 0.02;
        let mut t = Tally::new();
        for _ in 0..K {
            let n = r.random_range(1..30usize);
            let eps = 0.01 + 0.9 * r.random::<f64>();
            let u_raw: Vec<f64> = (0..n).map(|_| 0.25 + 0.75 * r.random::<f64>()).collect();
            let v_raw: Vec<f64> = (0..n).map(|_| 0.25 + 0.75 * r.random::<f64>()).collect();
            let eta = sim.eta(n, &[eps / 32.0], &[]);
            let u = QuantizedOracle::new("u", &u_raw, eta, 1)?;
            let v = QuantizedOracle::new("v", &v_raw, eta, 1)?;
            let truth = dot_ratio(&u_raw, &v_raw);
            let e = q_inner_relative(&u, &v, eps, delta, &sim, &mut ledger, &mut r)?;
            t.record(e.failed, (e.value.value - truth).abs() <= eps * truth * (1.0 + 1e-9));
        }
        t.report(s, &format!("inner-relative/{tag}"), 1.0 - (1.0 - delta / 4.0).powi(4));

        let delta = 0.04;
        let mut t = Tally::new();
        for _ in 0..K {
            let n = r.random_range(1..30usize);
            let eps = 0.01 + 0.9 * r.random::<f64>();
            let mut u_raw: Vec<f64> = (0..n).map(|_| r.random()).collect();
            u_raw[0] = u_raw[0].max(0.1);
            let v_raw: Vec<f64> = (0..n).map(|_| 2.0 * r.random::<f64>() - 1.0).collect();
            let eta = sim.eta(n, &[eps / 16.0], &[]);
            let u = QuantizedOracle::new("u", &u_raw, eta, 1)?;
            let v = QuantizedOracle::new("v", &v_raw, eta, 1)?;
            let truth = dot_ratio(&u_raw, &v_raw);
            let e = q_inner_additive(&u, &v, eps, delta, &sim, &mut ledger, &mut r)?;
            t.record(e.failed, (e.value.value - truth).abs() <= eps);
        }
        t.report(s, &format!("inner-additive/{tag}"), 1.0 - (1.0 - delta / 4.0).powi(4));
    }

    // Distributional half of the state-sampling contract.
    let sim = SimConfig::default();
    let (n, xi, draws) = (16, 0.05, 200_000);
    let raw = unit_max(n, &mut r);
    let u = QuantizedOracle::new("u", &raw, sim.eta(n, &[], &[xi]), 1)?;
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        counts[q_state_sample(&u, xi, 1e-3, &sim, &mut ledger, &mut r)?.value] += 1;
    }
    let floor = tv_noise_floor(&p, draws);
    s.check("state-sample: empirical TV minus sampling floor", tv_distance_counts(&counts, &p) - floor, Cmp::Le, xi);
    Ok(())
}

fn ratio_bound(seed: u64, s: &mut Suite) -> Result<()> {
    let mut r = rng::seeded(seed);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let a = 0.01 + 10.0 * r.random::<f64>();
        let b = 0.01 + 10.0 * r.random::<f64>();
        let ea = 0.99 * r.random::<f64>();
        let eb = 0.99 * r.random::<f64>();
        let at = a * (1.0 + ea * (2.0 * r.random::<f64>() - 1.0));
        let bt = b * (1.0 + eb * (2.0 * r.random::<f64>() - 1.0));
        let bound = ratio_error_bound(ea, eb)? * (a / b);
        let dev = (at / bt - a / b).abs();
        if dev > bound * (1.0 + 1e-12) {
            violations += 1;
        }
        if bound > 0.0 {
            worst = worst.max(dev / bound);
        }
    }
    s.check("tuples violating the ratio bound", violations as f64, Cmp::Eq, 0.0);
    s.check("max deviation / bound", worst, Cmp::Le, 1.0 + 1e-12);
    Ok(())
}

fn q_total_loss(seed: u64, s: &mut Suite) -> Result<()> {
    let (n, t, eps, delta, seeds) = (256, 20, 0.1, 0.1, 200);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for i in 0..seeds as u64 {
        let mut cfg = QHedgeConfig::new(n, t, eps, delta);
        cfg.sim = SimConfig::with_noise(NoiseMode::Uniform);
        let mut stream = UniformStream::new(n, rng::stream(seed, 2 * i));
        let rep = q_estimate_total_loss(&cfg, &mut stream, &mut rng::stream(seed, 2 * i + 1))?;
        let rel = (rep.total_loss - rep.hedge_loss).abs() / rep.hedge_loss;
        worst = worst.max(rel);
        within += (rel <= eps) as usize;
    }
    s.check("seeds with relative error <= 0.1", fraction(within, seeds), Cmp::Ge, 0.9);
    s.note(format!("largest relative error {worst:.4}"));

    let rows = random_rows(n, t, &mut rng::stream(seed, 1 << 20));
    let classical = run_hedge(
        &HedgeConfig::with_default_beta(n, t, HedgeFlag::Null)?,
        &mut MatrixStream::new(rows.clone())?,
        &mut rng::seeded(seed),
    )?;
    let mut cfg = QHedgeConfig::new(n, t, eps, delta);
    cfg.sim = SimConfig::with_noise(NoiseMode::Exact);
    let rep = q_estimate_total_loss(&cfg, &mut MatrixStream::new(rows.clone())?, &mut rng::seeded(seed))?;
    s.check(
        "exact noise, |L - L_H| vs quantization scale T*N*eta",
        (rep.total_loss - classical.total_loss).abs(),
        Cmp::Le,
        (t * n) as f64 * rep.eta,
    );
    cfg.sim = SimConfig::exact();
    let rep = q_estimate_total_loss(&cfg, &mut MatrixStream::new(rows)?, &mut rng::seeded(seed))?;
    s.check(
        "exact noise without grid, relative |L - L_H|",
        (rep.total_loss - classical.total_loss).abs() / classical.total_loss,
        Cmp::Le,
        1e-10,
    );
    Ok(())
}

fn q_active(seed: u64, s: &mut Suite) -> Result<()> {
    let (n, t, delta, seeds) = (64, 512, 0.05, 500);
    let rows = random_rows(n, t, &mut rng::stream(seed, 0));
    let exact = run_hedge(
        &HedgeConfig::with_default_beta(n, t, HedgeFlag::Null)?,
        &mut MatrixStream::new(rows.clone())?,
        &mut rng::seeded(seed),
    )?;
    let mut cfg = QHedgeConfig::new(n, t, 0.1, delta);
    cfg.sim = SimConfig::with_noise(NoiseMode::Uniform);
    let bound = 4.0 * (t as f64 * (n as f64 / delta).ln()).sqrt() + (n as f64).ln();
    let mut losses = Vec::with_capacity(seeds);
    let mut within = 0;
    for i in 0..seeds as u64 {
        let rep = q_active_hedge(&cfg, &mut MatrixStream::new(rows.clone())?, &mut rng::stream(seed, 1 + i))?;
        within += (rep.regret <= bound) as usize;
        losses.push(rep.total_loss);
    }
    s.check(
        "|mean quantum loss - L_H|",
        (mean(&losses) - exact.total_loss).abs(),
        Cmp::Le,
        (t as f64 * (n as f64).ln()).sqrt(),
    );
    s.check("seeds within regret bound", fraction(within, seeds), Cmp::Ge, 0.9);
    Ok(())
}

fn scaling(seed: u64, s: &mut Suite) -> Result<()> {
    for (k, &target) in ScalingTarget::ALL.iter().enumerate() {
        let rep = query_scaling(&ScalingConfig::new(target), &mut rng::stream(seed, k as u64))?;
        s.check(format!("{} slope, lower", target.name()), rep.slope, Cmp::Ge, 0.4);
        s.check(format!("{} slope, upper", target.name()), rep.slope, Cmp::Le, 0.6);
    }
    Ok(())
}

struct PlantedInstance {
    glm: PlantedGlm,
    train1: TrainingSet,
    train2: TrainingSet,
}

/// Sparse planted GLM with `|w|_1 = lambda` and `required_t`/`required_m` samples.
fn planted_instance(
    n: usize,
    lambda: f64,
    eps: f64,
    delta: f64,
    sigma: &Activation,
    r: &mut SimRng,
) -> Result<PlantedInstance> {
    let layout = FeatureLayout::default();
    let t = required_t(lambda, layout.dim(n), eps, delta, 10.0);
    let m = required_m(t, eps, delta, 10.0);
    let glm = PlantedGlm::random_sparse(n, 3, lambda, r)?;
    let train1 = glm.training_set(t, sigma, layout, r)?;
    let train2 = glm.training_set(m, sigma, layout, r)?;
    Ok(PlantedInstance { glm, train1, train2 })
}

const HOLDOUT: usize = 20_000;

/// Largest median-of-means run the Sparsitron suite attempts.
const MAX_INDEX_DRAWS: f64 = 1e11;

fn sparsitron(seed: u64, s: &mut Suite) -> Result<()> {
    let (n, lambda, eps, delta, seeds) = (30, 3.0, 0.1, 0.1, 20);
    let sigma = Activation::Sigmoid;
    let modes = [
        SparsitronMode::Original,
        SparsitronMode::Approximate { estimator: RiskEstimator::Exact },
        SparsitronMode::Approximate { estimator: RiskEstimator::Bounded { noise: NoiseMode::Uniform } },
    ];
    let cfg = SparsitronConfig::new(lambda, eps, delta, SparsitronMode::Original);
    let t = required_t(lambda, FeatureLayout::default().dim(n), eps, delta, 10.0);
    let m = required_m(t, eps, delta, 10.0);
    s.note(format!("T = {t}, M = {m}"));
    // The approximate mode proper draws its risk estimates from the median-of-means sampler.
    let mom_draws = median_of_means_draws(t, m, lambda, eps, delta)?;
    let mom_feasible = (mom_draws as f64) <= MAX_INDEX_DRAWS;
    let mut modes = modes.to_vec();
    if mom_feasible {
        modes.push(SparsitronMode::Approximate { estimator: RiskEstimator::MedianOfMeans });
    } else {
        s.note(format!(
            "median-of-means approximate mode not run: {mom_draws:.3e} index draws per seed exceed {MAX_INDEX_DRAWS:e}"
        ));
    }
    let mut within = vec![0usize; modes.len()];
    let mut mismatches = 0;
    for i in 0..seeds as u64 {
        let mut r = rng::stream(seed, i);
        let inst = planted_instance(n, lambda, eps, delta, &sigma, &mut r)?;
        let models = run_sparsitron_modes(&cfg, &modes, &sigma, &inst.train1, &inst.train2, &mut r)?;
        for (k, m) in models.iter().enumerate() {
            let risk = true_risk_estimate(
                |x| m.predict(x, &sigma),
                |x| inst.glm.mean_label(x, &sigma),
                HOLDOUT,
                |r| inst.glm.sample_x(r),
                &mut r,
            );
            within[k] += (risk.mean <= eps) as usize;
        }
        let (a, b) = (&models[0], &models[1]);
        let same = a.selected_round == b.selected_round
            && a.risks.iter().map(|x| x.to_bits()).eq(b.risks.iter().map(|x| x.to_bits()))
            && a.p_selected.iter().map(|x| x.to_bits()).eq(b.p_selected.iter().map(|x| x.to_bits()));
        mismatches += (!same) as usize;
    }
    s.check("original: seeds with hold-out risk <= eps", fraction(within[0], seeds), Cmp::Ge, 0.9);
    let mom = if mom_feasible { fraction(within[3], seeds) } else { 0.0 };
    s.check("approximate (median-of-means): seeds with hold-out risk <= eps", mom, Cmp::Ge, 0.9);
    s.check(
        "approximate (bounded-error estimates): seeds with hold-out risk <= eps",
        fraction(within[2], seeds),
        Cmp::Ge,
        0.9,
    );
    s.check(
        "approximate (exact estimates): seeds with hold-out risk <= eps",
        fraction(within[1], seeds),
        Cmp::Ge,
        0.9,
    );
    s.check("exact-estimator runs differing bitwise from original", mismatches as f64, Cmp::Eq, 0.0);
    Ok(())
}

fn q_sparsitron_suite(seed: u64, s: &mut Suite) -> Result<()> {
    let (n, lambda, eps, delta, seeds) = (30, 3.0, 0.15, 0.1, 20);
    let sigma = Activation::Sigmoid;
    let mut within = 0;
    let mut norm_ok = 0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..seeds as u64 {
        let mut r = rng::stream(seed, i);
        let inst = planted_instance(n, lambda, eps, delta, &sigma, &mut r)?;
        if i == 0 {
            s.note(format!("T = {}, M = {}", inst.train1.len(), inst.train2.len()));
        }
        let cfg = QSparsitronConfig::new(lambda, eps, delta, SimConfig::with_noise(NoiseMode::Uniform));
        let out = q_sparsitron(&cfg, &sigma, &inst.train1, &inst.train2, &mut r)?;
        let q = reconstruct_q(&out, &inst.train1, &sigma)?;
        let ratio = q.iter().map(|x| x.abs()).sum::<f64>() / lambda;
        worst_ratio = worst_ratio.max((ratio - 1.0).abs());
        norm_ok += ((ratio - 1.0).abs() <= eps) as usize;
        let layout = out.layout;
        let risk = true_risk_estimate(
            |x| sigma.eval(crate::linalg::dot(&q, &layout.expand(x))),
            |x| inst.glm.mean_label(x, &sigma),
            HOLDOUT,
            |r| inst.glm.sample_x(r),
            &mut r,
        );
        within += (risk.mean <= eps) as usize;
    }
    s.check("seeds with hold-out risk <= eps", fraction(within, seeds), Cmp::Ge, 0.9);
    s.check("seeds with |q|_1 / lambda in [1-eps, 1+eps]", fraction(norm_ok, seeds), Cmp::Ge, 1.0);
    s.note(format!("largest | |q|_1/lambda - 1 | = {worst_ratio:.4}"));

    // Exact simulation against the classical approximate run with exact estimates.
    let mut r = rng::stream(seed, 1 << 20);
    let inst = planted_instance(n, lambda, eps, delta, &sigma, &mut r)?;
    let qcfg = QSparsitronConfig::new(lambda, eps, delta, SimConfig::exact());
    let out = q_sparsitron(&qcfg, &sigma, &inst.train1, &inst.train2, &mut rng::seeded(seed))?;
    let ccfg = SparsitronConfig::new(
        lambda,
        eps,
        delta,
        SparsitronMode::Approximate { estimator: RiskEstimator::Exact },
    );
    let classical = run_sparsitron_modes(&ccfg, &[ccfg.mode], &sigma, &inst.train1, &inst.train2, &mut rng::seeded(seed))?
        .pop()
        .expect("one mode");
    let risk_gap = out.risks.iter().zip(&classical.risks).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    s.check("exact mode: max risk gap vs classical", risk_gap, Cmp::Le, 1e-9);
    s.check(
        "exact mode: selected round differs from classical",
        (out.selected_round != classical.selected_round) as u8 as f64,
        Cmp::Eq,
        0.0,
    );
    let q = reconstruct_q(&out, &inst.train1, &sigma)?;
    let v = classical.v();
    let q_gap = q.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    s.check("exact mode: max |q - lambda p|", q_gap, Cmp::Le, 1e-9);
    Ok(())
}

fn ising_learn(seed: u64, s: &mut Suite) -> Result<()> {
    let (eps, delta, seeds) = (0.1, 0.1, 10);
    let model = IsingModel::ring_with_chords(10, 0.2)?;
    let max_degree = (0..model.n()).map(|i| model.degree(i)).max().unwrap_or(0);
    s.note(format!("N = 10, max degree {max_degree}, width {:.3}", model.width()));
    let (rounds, risk_samples) = (20_000, 2_000);
    for backend in [Backend::Classical, Backend::QuantumSim] {
        let mut within = 0;
        let mut worst: f64 = 0.0;
        let mut cfg = IsingLearnConfig::new(model.width(), eps, delta, backend);
        cfg.rounds = Some(rounds);
        cfg.risk_samples = Some(risk_samples);
        for i in 0..seeds as u64 {
            let mut r = rng::stream(seed, i);
            let samples = exact_sample(&model, rounds + risk_samples, &mut r)?;
            let learned = learn_ising(&samples, &cfg, &mut r)?;
            if i == 0 {
                let b = &learned.budget;
                s.note(format!(
                    "{backend:?}: default budget (eps' = {:.2e}) needs T = {}, M = {}; used T = {}, M = {}",
                    b.glm_epsilon, b.required_t, b.required_m, b.used_t, b.used_m
                ));
            }
            let err = max_abs_error(&learned.a_star, model.a())?;
            worst = worst.max(err);
            within += (err <= eps) as usize;
        }
        s.check(format!("{backend:?}: seeds with |A - A*|_max <= eps"), fraction(within, seeds), Cmp::Ge, 0.9);
        s.note(format!("{backend:?}: largest |A - A*|_max {worst:.4}"));
    }
    Ok(())
}

fn gibbs(seed: u64, s: &mut Suite) -> Result<()> {
    let mut r = rng::seeded(seed);
    let draws = 100_000;
    for n in [4, 6, 8, 10] {
        let model = IsingModel::ring_with_chords(n, 0.2)?;
        let p = exact_distribution(&model)?;
        let samples = gibbs_sample(&model, draws, 1000, 2, &mut r)?;
        let tv = tv_distance_counts(&samples.state_counts()?, &p);
        s.check(format!("TV, N={n}, 1e5 samples"), tv, Cmp::Le, 0.02);
        s.note(format!("N={n}: expected TV of exact i.i.d. sampling {:.4}", tv_noise_floor(&p, draws)));
    }
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        for _ in 0..10 {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    edges.push((i, j, r.random::<f64>() - 0.5));
                }
            }
            let theta: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
            let model = IsingModel::from_edges(n, &edges, theta)?;
            let p = exact_distribution(&model)?;
            let k = sweep_kernel(&model)?;
            let size = p.len();
            for b in 0..size {
                let pk: f64 = (0..size).map(|a| p[a] * k[a * size + b]).sum();
                worst = worst.max((pk - p[b]).abs());
            }
        }
    }
    s.check("max |pi K - pi|, N <= 4", worst, Cmp::Le, 1e-10);
    Ok(())
}
