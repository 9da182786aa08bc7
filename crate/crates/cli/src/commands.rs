use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hedgeron::hedge::{
    compute_beta, run_hedge, AdaptiveAdversary, BernoulliStream, HedgeConfig, LossStream, MatrixStream,
    UniformStream,
};
use hedgeron::ising::{
    exact_distribution, exact_sample, gibbs_sample, learn_ising, max_abs_error, IsingModel, IsingSampleSet,
};
use hedgeron::quantum_algos::{
    q_active_hedge, q_estimate_total_loss, q_sparsitron, reconstruct_q, QHedgeConfig, QSparsitronConfig,
};
use hedgeron::quantum_sim::{NoiseMode, QueryLedger};
use hedgeron::rng;
use hedgeron::sampling::AliasTable;
use hedgeron::scaling::{query_scaling, ScalingConfig};
use hedgeron::sparsitron::{
    required_m, required_t, run_sparsitron, true_risk_estimate, Activation, FeatureLayout, PlantedGlm,
    SparsitronConfig, TrainingSet,
};
use hedgeron::stats::tv_distance_counts;
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::params::*;
use crate::record::*;
use crate::Common;

/// Parameter block of one command.
pub trait Params: Serialize + DeserializeOwned + Sync {
    fn load(path: Option<&Path>, command: &str) -> Result<Self>;

    fn set_noise(&mut self, _noise: NoiseMode) -> Result<()> {
        bail!("--noise does not apply to this command")
    }

    /// Fills in defaulted values so the echoed config is complete.
    fn resolve(&mut self) -> Result<()> {
        Ok(())
    }
}

fn csv_shape(src: &LossSource, n: &mut usize, t: &mut usize) -> Result<()> {
    if let LossSource::Csv { path } = src {
        let m = MatrixStream::from_csv_path(path)?;
        *t = m.n_rounds();
        *n = m.rows().first().map_or(0, Vec::len);
    }
    Ok(())
}

impl Params for HedgeParams {
    fn load(path: Option<&Path>, _: &str) -> Result<Self> {
        load_config(path)
    }

    fn resolve(&mut self) -> Result<()> {
        csv_shape(&self.losses, &mut self.n_experts, &mut self.n_rounds)?;
        if self.beta.is_none() {
            self.beta = Some(compute_beta(self.n_experts, self.n_rounds)?);
        }
        Ok(())
    }
}

impl Params for QHedgeParams {
    fn load(path: Option<&Path>, _: &str) -> Result<Self> {
        load_config(path)
    }

    fn set_noise(&mut self, noise: NoiseMode) -> Result<()> {
        self.sim.noise = noise;
        Ok(())
    }

    fn resolve(&mut self) -> Result<()> {
        csv_shape(&self.losses, &mut self.n_experts, &mut self.n_rounds)?;
        if self.beta.is_none() {
            self.beta = Some(compute_beta(self.n_experts, self.n_rounds)?);
        }
        Ok(())
    }
}

impl Params for SparsitronParams {
    fn load(path: Option<&Path>, _: &str) -> Result<Self> {
        load_config(path)
    }

    fn resolve(&mut self) -> Result<()> {
        resolve_glm(&mut self.data, self.lambda, self.epsilon, self.delta, self.c_t, self.c_m);
        Ok(())
    }
}

impl Params for QSparsitronParams {
    fn load(path: Option<&Path>, _: &str) -> Result<Self> {
        load_config(path)
    }

    fn set_noise(&mut self, noise: NoiseMode) -> Result<()> {
        self.sim.noise = noise;
        Ok(())
    }

    fn resolve(&mut self) -> Result<()> {
        resolve_glm(&mut self.data, self.lambda, self.epsilon, self.delta, self.c_t, self.c_m);
        Ok(())
    }
}

impl Params for IsingGenParams {
    fn load(path: Option<&Path>, _: &str) -> Result<Self> {
        load_config(path)
    }
}

impl Params for SampleCheckParams {
    fn load(path: Option<&Path>, _: &str) -> Result<Self> {
        load_config(path)
    }
}

impl Params for ScalingParams {
    fn load(path: Option<&Path>, _: &str) -> Result<Self> {
        load_config(path)
    }

    fn set_noise(&mut self, noise: NoiseMode) -> Result<()> {
        self.sim.noise = noise;
        Ok(())
    }
}

impl Params for IsingSampleParams {
    fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        load_required(path, command)
    }
}

impl Params for IsingEvalParams {
    fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        load_required(path, command)
    }
}

impl Params for IsingLearnParams {
    fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        load_required(path, command)
    }

    fn set_noise(&mut self, noise: NoiseMode) -> Result<()> {
        self.learn.sim.noise = noise;
        if let hedgeron::sparsitron::RiskEstimator::Bounded { noise: n } = &mut self.learn.estimator {
            *n = noise;
        }
        Ok(())
    }
}

fn parse_noise(s: &str) -> Result<NoiseMode> {
    NoiseMode::parse(s).with_context(|| format!("unknown noise mode '{s}' (exact, uniform, adversarial)"))
}

fn load_params<P: Params>(command: &str, common: &Common) -> Result<P> {
    let mut p = P::load(common.config.as_deref(), command)?;
    if let Some(n) = &common.noise {
        p.set_noise(parse_noise(n)?)?;
    }
    p.resolve()?;
    Ok(p)
}

/// Runs `f` once per seed (in parallel), then writes records and prints a record or summary.
pub fn run_seeded<P: Params>(command: &str, common: &Common, f: fn(&P, u64, &Common) -> Result<Outcome>) -> Result<ExitCode> {
    let params: P = load_params(command, common)?;
    let config = serde_json::to_value(&params)?;
    let seeds: Vec<u64> = common.seed.seeds().collect();
    let runs: Vec<(u64, Outcome, f64)> = seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            let out = f(&params, seed, common).with_context(|| format!("seed {seed}"))?;
            Ok((seed, out, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;

    let dir = common.out.as_deref().map(ensure_dir).transpose()?;
    let mut records = Vec::with_capacity(runs.len());
    let mut values = Vec::new();
    let mut metric = None;
    for (seed, out, wall) in runs {
        if let Some((name, v)) = out.headline {
            metric = Some(name);
            values.push(v);
        }
        let record = RunRecord {
            command: command.to_string(),
            version: version(),
            generator: rng::GENERATOR.to_string(),
            seed,
            config: config.clone(),
            payload: out.payload.clone(),
            ledger: out.ledger.clone(),
            wall_clock_s: wall,
        };
        if let Some(dir) = &dir {
            write_json(&dir.join(format!("{command}-seed{seed}.json")), &record)?;
            let outcome = OutcomeFile { command: command.to_string(), seed, payload: out.payload, ledger: out.ledger };
            write_json(&dir.join(format!("{command}-seed{seed}.outcome.json")), &outcome)?;
            for (name, contents) in &out.files {
                write_text(&dir.join(name), contents)?;
            }
        }
        records.push(record);
    }
    if common.seed.is_single() {
        emit(&serde_json::to_string_pretty(&records[0])?);
    } else {
        let summary = Summary::new(command, seeds, metric, values);
        if let Some(dir) = &dir {
            write_json(&dir.join(format!("{command}-summary.json")), &summary)?;
        }
        emit(&serde_json::to_string_pretty(&summary)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn loss_stream(src: &LossSource, n: usize, n_rounds: usize, seed: u64) -> Result<Box<dyn LossStream>> {
    Ok(match src {
        LossSource::Uniform => Box::new(UniformStream::new(n, rng::stream(seed, 0))),
        LossSource::Bernoulli { means } => {
            if means.len() != n {
                bail!("bernoulli means has {} entries for {n} experts", means.len());
            }
            Box::new(BernoulliStream::new(means.clone(), rng::stream(seed, 0))?)
        }
        LossSource::Adversary { adversary } => Box::new(AdaptiveAdversary::new(*adversary, n, n_rounds)?),
        LossSource::Csv { path } => Box::new(MatrixStream::from_csv_path(path)?),
    })
}

pub fn hedge(p: &HedgeParams, seed: u64, _: &Common) -> Result<Outcome> {
    let cfg = HedgeConfig {
        n_experts: p.n_experts,
        n_rounds: p.n_rounds,
        beta: p.beta.expect("resolved"),
        flag: p.flag,
        transaction_cost: p.transaction_cost,
        seed,
        record_rounds: p.record_rounds,
    };
    let mut stream = loss_stream(&p.losses, p.n_experts, p.n_rounds, seed)?;
    let out = run_hedge(&cfg, &mut *stream, &mut rng::stream(seed, 1))?;
    let total = out.total_loss;
    Ok(Outcome::new(out)?.headline("total_loss", total))
}

fn qhedge_config(p: &QHedgeParams) -> QHedgeConfig {
    let mut cfg = QHedgeConfig::new(p.n_experts, p.n_rounds, p.epsilon, p.delta);
    cfg.beta = p.beta;
    cfg.transaction_cost = p.transaction_cost;
    cfg.sim = p.sim;
    cfg.record_rounds = p.record_rounds;
    cfg
}

pub fn qhedge_estimate(p: &QHedgeParams, seed: u64, _: &Common) -> Result<Outcome> {
    let mut stream = loss_stream(&p.losses, p.n_experts, p.n_rounds, seed)?;
    let mut rep = q_estimate_total_loss(&qhedge_config(p), &mut *stream, &mut rng::stream(seed, 1))?;
    let ledger = std::mem::take(&mut rep.ledger);
    let total = rep.total_loss;
    Ok(Outcome::new(rep)?.ledger(ledger).headline("total_loss", total))
}

pub fn qhedge_bet(p: &QHedgeParams, seed: u64, _: &Common) -> Result<Outcome> {
    let mut stream = loss_stream(&p.losses, p.n_experts, p.n_rounds, seed)?;
    let mut rep = q_active_hedge(&qhedge_config(p), &mut *stream, &mut rng::stream(seed, 1))?;
    let ledger = std::mem::take(&mut rep.ledger);
    let total = rep.total_loss;
    Ok(Outcome::new(rep)?.ledger(ledger).headline("total_loss", total))
}

fn resolve_glm(data: &mut GlmData, lambda: f64, eps: f64, delta: f64, c_t: f64, c_m: f64) {
    if let GlmData::Planted { n, rounds, risk_samples, .. } = data {
        let t = *rounds.get_or_insert_with(|| required_t(lambda, FeatureLayout::default().dim(*n), eps, delta, c_t));
        risk_samples.get_or_insert_with(|| required_m(t, eps, delta, c_m));
    }
}

struct GlmInstance {
    train1: TrainingSet,
    train2: TrainingSet,
    planted: Option<(PlantedGlm, usize)>,
}

fn glm_instance(data: &GlmData, sigma: &Activation, seed: u64) -> Result<GlmInstance> {
    let layout = FeatureLayout::default();
    Ok(match data {
        GlmData::Planted { n, k, l1, rounds, risk_samples, holdout } => {
            let mut r = rng::stream(seed, 0);
            let g = PlantedGlm::random_sparse(*n, *k, *l1, &mut r)?;
            let train1 = g.training_set(rounds.expect("resolved"), sigma, layout, &mut r)?;
            let train2 = g.training_set(risk_samples.expect("resolved"), sigma, layout, &mut r)?;
            GlmInstance { train1, train2, planted: Some((g, *holdout)) }
        }
        GlmData::Csv { train1, train2 } => GlmInstance {
            train1: TrainingSet::from_csv_path(train1, layout)?,
            train2: TrainingSet::from_csv_path(train2, layout)?,
            planted: None,
        },
    })
}

fn holdout_risk(inst: &GlmInstance, sigma: &Activation, predict: impl Fn(&[f64]) -> f64, seed: u64) -> Option<f64> {
    inst.planted.as_ref().map(|(g, n)| {
        true_risk_estimate(predict, |x| g.mean_label(x, sigma), *n, |r| g.sample_x(r), &mut rng::stream(seed, 2)).mean
    })
}

pub fn sparsitron(p: &SparsitronParams, seed: u64, _: &Common) -> Result<Outcome> {
    let sigma = p.activation;
    let inst = glm_instance(&p.data, &sigma, seed)?;
    let mut cfg = SparsitronConfig::new(p.lambda, p.epsilon, p.delta, p.mode);
    cfg.beta = p.beta;
    cfg.max_estimator_draws = p.max_estimator_draws;
    let model = run_sparsitron(&cfg, &sigma, &inst.train1, &inst.train2, &mut rng::stream(seed, 1))?;
    let (weights, bias) = model.signed_weights()?;
    let risk = holdout_risk(&inst, &sigma, |x| model.predict(x, &sigma), seed);
    let payload = json!({
        "lambda": model.lambda,
        "beta": model.beta,
        "rounds": inst.train1.len(),
        "risk_samples": inst.train2.len(),
        "selected_round": model.selected_round,
        "selected_risk": model.risks[model.selected_round - 1],
        "weights": weights,
        "bias": bias,
        "failed_estimates": model.failed_estimates,
        "holdout_risk": risk,
        "planted": inst.planted.as_ref().map(|(g, _)| g),
    });
    let out = Outcome::new(payload)?;
    Ok(match risk {
        Some(r) => out.headline("holdout_risk", r),
        None => out.headline("selected_risk", model.risks[model.selected_round - 1]),
    })
}

pub fn qsparsitron(p: &QSparsitronParams, seed: u64, _: &Common) -> Result<Outcome> {
    let sigma = p.activation;
    let inst = glm_instance(&p.data, &sigma, seed)?;
    let mut cfg = QSparsitronConfig::new(p.lambda, p.epsilon, p.delta, p.sim);
    cfg.beta = p.beta;
    let mut out = q_sparsitron(&cfg, &sigma, &inst.train1, &inst.train2, &mut rng::stream(seed, 1))?;
    let q = reconstruct_q(&out, &inst.train1, &sigma)?;
    let (weights, bias) = out.layout.collapse(&q, out.raw_dim)?;
    let layout = out.layout;
    let risk = holdout_risk(&inst, &sigma, |x| sigma.eval(hedgeron::linalg::dot(&q, &layout.expand(x))), seed);
    let ledger = std::mem::take(&mut out.ledger);
    let selected_risk = out.risks[out.selected_round - 1];
    let payload = json!({
        "lambda": out.lambda,
        "beta": out.beta,
        "eta": out.eta,
        "rounds": inst.train1.len(),
        "risk_samples": inst.train2.len(),
        "selected_round": out.selected_round,
        "selected_risk": selected_risk,
        "q_l1": q.iter().map(|x| x.abs()).sum::<f64>(),
        "weights": weights,
        "bias": bias,
        "failed_h": out.failed_h,
        "failed_z": out.failed_z,
        "holdout_risk": risk,
        "planted": inst.planted.as_ref().map(|(g, _)| g),
    });
    let o = Outcome::new(payload)?.ledger(ledger);
    Ok(match risk {
        Some(r) => o.headline("holdout_risk", r),
        None => o.headline("selected_risk", selected_risk),
    })
}

pub fn ising_gen(p: &IsingGenParams, seed: u64, _: &Common) -> Result<Outcome> {
    let model = match &p.model {
        ModelSpec::RingWithChords { n, w } => IsingModel::ring_with_chords(*n, *w)?,
        ModelSpec::Random { n, edge_prob, coupling, field } => {
            let mut r = rng::stream(seed, 0);
            let mut edges = Vec::new();
            for i in 0..*n {
                for j in i + 1..*n {
                    if r.random::<f64>() < *edge_prob {
                        edges.push((i, j, coupling * (2.0 * r.random::<f64>() - 1.0)));
                    }
                }
            }
            let theta = (0..*n).map(|_| field * (2.0 * r.random::<f64>() - 1.0)).collect();
            IsingModel::from_edges(*n, &edges, theta)?
        }
    };
    let text = model.to_json()?;
    let payload = json!({
        "model": serde_json::from_str::<serde_json::Value>(&text)?,
        "width": model.width(),
        "max_degree": (0..model.n()).map(|i| model.degree(i)).max().unwrap_or(0),
    });
    Ok(Outcome::new(payload)?.headline("width", model.width()).file(format!("model-seed{seed}.json"), text + "\n"))
}

pub fn ising_sample(p: &IsingSampleParams, seed: u64, common: &Common) -> Result<Outcome> {
    if common.out.is_none() {
        bail!("ising-sample writes a CSV and needs --out");
    }
    let model = IsingModel::from_json_path(&p.model)?;
    let mut r = rng::stream(seed, 0);
    let mut samples = match p.sampler {
        Sampler::Exact => exact_sample(&model, p.count, &mut r)?,
        Sampler::Gibbs { burn_in, thinning } => gibbs_sample(&model, p.count, burn_in, thinning, &mut r)?,
    };
    samples.seed = Some(seed);
    let mut buf = Vec::new();
    samples.write_csv(&mut buf)?;
    let file = format!("samples-seed{seed}.csv");
    // Small models: distance of the empirical law to the enumerated one.
    let tv = if model.n() <= 12 {
        Some(tv_distance_counts(&samples.state_counts()?, &exact_distribution(&model)?))
    } else {
        None
    };
    let payload = json!({
        "n": model.n(),
        "count": samples.len(),
        "provenance": samples.provenance,
        "file": file,
        "tv_to_exact": tv,
    });
    let out = Outcome::new(payload)?.file(file, String::from_utf8(buf)?);
    Ok(match tv {
        Some(v) => out.headline("tv_to_exact", v),
        None => out,
    })
}

pub fn ising_learn(p: &IsingLearnParams, seed: u64, _: &Common) -> Result<Outcome> {
    let samples = IsingSampleSet::read_csv_path(&p.samples)?;
    let mut learned = learn_ising(&samples, &p.learn, &mut rng::stream(seed, 0))?;
    let ledger = learned.ledger.take();
    for node in learned.nodes.iter_mut() {
        node.ledger = None;
    }
    let error = match &p.model {
        Some(path) => Some(max_abs_error(&learned.a_star, IsingModel::from_json_path(path)?.a())?),
        None => None,
    };
    let mut payload = serde_json::to_value(&learned)?;
    payload["max_abs_error"] = json!(error);
    let mut out = Outcome::new(payload)?;
    if let Some(l) = ledger {
        out = out.ledger(l);
    }
    Ok(match error {
        Some(e) => out.headline("max_abs_error", e),
        None => out,
    })
}

pub fn ising_eval(p: &IsingEvalParams, _seed: u64, _: &Common) -> Result<Outcome> {
    let model = IsingModel::from_json_path(&p.model)?;
    let text = std::fs::read_to_string(&p.learned).with_context(|| format!("reading {}", p.learned.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let body = if v.get("payload").is_some() { &v["payload"] } else { &v };
    let a_star: Vec<f64> = serde_json::from_value(body["a_star"].clone()).context("learned file has no a_star")?;
    let theta_star: Vec<f64> = serde_json::from_value(body["theta_star"].clone()).unwrap_or_default();
    let a_err = max_abs_error(&a_star, model.a())?;
    let theta_err = if theta_star.is_empty() { None } else { Some(max_abs_error(&theta_star, model.theta())?) };
    let payload = json!({ "n": model.n(), "max_abs_error": a_err, "theta_max_abs_error": theta_err });
    Ok(Outcome::new(payload)?.headline("max_abs_error", a_err))
}

pub fn sample_check(p: &SampleCheckParams, seed: u64, _: &Common) -> Result<Outcome> {
    if p.n == 0 || p.draws == 0 {
        bail!("n and draws must be positive");
    }
    let mut r = rng::stream(seed, 0);
    let p_vec: Vec<f64> = match p.distribution {
        CheckDistribution::Uniform => vec![1.0 / p.n as f64; p.n],
        CheckDistribution::Dirichlet => {
            let e: Vec<f64> = (0..p.n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|x| x / s).collect()
        }
    };
    let table = AliasTable::build(&p_vec)?;
    let rec_err = table.reconstruct().iter().zip(&p_vec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut counts = vec![0u64; p.n];
    for _ in 0..p.draws {
        counts[table.sample(&mut r)] += 1;
    }
    let tv = tv_distance_counts(&counts, &p_vec);
    let c = 2.0 / (std::f64::consts::PI * p.draws as f64);
    let floor = 0.5 * p_vec.iter().map(|&x| (c * x * (1.0 - x)).sqrt()).sum::<f64>();
    let payload = json!({ "tv": tv, "expected_tv_exact_sampler": floor, "reconstruction_error": rec_err });
    Ok(Outcome::new(payload)?.headline("tv", tv))
}

pub fn verify(suites: &[String], common: &Common) -> Result<ExitCode> {
    if common.config.is_some() || common.noise.is_some() {
        bail!("verify takes neither --config nor --noise");
    }
    let names: Vec<String> = if suites.is_empty() || suites.iter().any(|s| s == "all") {
        hedgeron::verify::suite_names().into_iter().map(str::to_string).collect()
    } else {
        suites.to_vec()
    };
    let dir = common.out.as_deref().map(ensure_dir).transpose()?;
    let mut all_pass = true;
    for name in &names {
        let rep = hedgeron::verify::run_suite(name, common.seed.first)?;
        emit(&rep.summary_line());
        for c in &rep.checks {
            emit(&format!("    {c}"));
        }
        for n in &rep.notes {
            emit(&format!("    note: {n}"));
        }
        if let Some(dir) = &dir {
            write_json(&dir.join(format!("verify-{}.json", rep.suite)), &rep)?;
        }
        all_pass &= rep.pass;
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn scaling(common: &Common) -> Result<ExitCode> {
    let params: ScalingParams = load_params("scaling", common)?;
    let seed = common.seed.first;
    let start = Instant::now();
    let dir = common.out.as_deref().map(ensure_dir).transpose()?;
    let mut reports = Vec::new();
    let mut ledger = QueryLedger::new();
    for (k, &target) in params.targets.iter().enumerate() {
        let cfg = ScalingConfig {
            target,
            exponents: params.exponents.clone(),
            rounds: params.rounds,
            risk_samples: params.risk_samples,
            epsilon: params.epsilon,
            delta: params.delta,
            sim: params.sim,
        };
        let rep = query_scaling(&cfg, &mut rng::stream(seed, k as u64))?;
        let csv = rep.to_csv();
        match &dir {
            Some(d) => write_text(&d.join(format!("scaling-{}.csv", target.name())), &csv)?,
            None => emit(csv.trim_end()),
        }
        let total: u128 = rep.rows.iter().map(|r| r.queries).sum();
        ledger.charge(target.name(), total);
        reports.push(rep);
    }
    let record = RunRecord {
        command: "scaling".into(),
        version: version(),
        generator: rng::GENERATOR.to_string(),
        seed,
        config: serde_json::to_value(&params)?,
        payload: serde_json::to_value(&reports)?,
        ledger: Some(ledger),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    match &dir {
        Some(d) => {
            write_json(&d.join("scaling.json"), &record)?;
            for r in &reports {
                emit(&format!("{} slope {:.4}", r.target.name(), r.slope));
            }
        }
        None => {
            for r in &reports {
                emit(&format!("# {} slope {:.4}", r.target.name(), r.slope));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
