//! Per-command parameter blocks read from `--config` JSON.

use std::path::PathBuf;

use hedgeron::hedge::{AdversaryKind, HedgeFlag};
use hedgeron::ising::IsingLearnConfig;
use hedgeron::quantum_sim::SimConfig;
use hedgeron::scaling::ScalingTarget;
use hedgeron::sparsitron::{Activation, SparsitronMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum LossSource {
    /// Fresh i.i.d. uniform losses per seed.
    #[default]
    Uniform,
    Bernoulli { means: Vec<f64> },
    Adversary { adversary: AdversaryKind },
    /// One row per round.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedgeParams {
    pub n_experts: usize,
    pub n_rounds: usize,
    pub beta: Option<f64>,
    pub flag: HedgeFlag,
    pub transaction_cost: f64,
    pub losses: LossSource,
    pub record_rounds: bool,
}

impl Default for HedgeParams {
    fn default() -> Self {
        HedgeParams {
            n_experts: 10,
            n_rounds: 100,
            beta: None,
            flag: HedgeFlag::Null,
            transaction_cost: 0.0,
            losses: LossSource::Uniform,
            record_rounds: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QHedgeParams {
    pub n_experts: usize,
    pub n_rounds: usize,
    pub beta: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub transaction_cost: f64,
    pub losses: LossSource,
    pub sim: SimConfig,
    pub record_rounds: bool,
}

impl Default for QHedgeParams {
    fn default() -> Self {
        QHedgeParams {
            n_experts: 64,
            n_rounds: 64,
            beta: None,
            epsilon: 0.1,
            delta: 0.1,
            transaction_cost: 0.0,
            losses: LossSource::Uniform,
            sim: SimConfig::default(),
            record_rounds: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum GlmData {
    /// Sparse planted model; `rounds`/`risk_samples` default to the sample-size formulas.
    Planted {
        n: usize,
        k: usize,
        l1: f64,
        #[serde(default)]
        rounds: Option<usize>,
        #[serde(default)]
        risk_samples: Option<usize>,
        #[serde(default = "default_holdout")]
        holdout: usize,
    },
    Csv { train1: PathBuf, train2: PathBuf },
}

fn default_holdout() -> usize {
    20_000
}

impl Default for GlmData {
    fn default() -> Self {
        GlmData::Planted { n: 10, k: 3, l1: 3.0, rounds: Some(2000), risk_samples: Some(500), holdout: default_holdout() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsitronParams {
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: Option<f64>,
    pub activation: Activation,
    pub mode: SparsitronMode,
    pub c_t: f64,
    pub c_m: f64,
    pub max_estimator_draws: Option<u128>,
    pub data: GlmData,
}

impl Default for SparsitronParams {
    fn default() -> Self {
        SparsitronParams {
            lambda: 3.0,
            epsilon: 0.1,
            delta: 0.1,
            beta: None,
            activation: Activation::Sigmoid,
            mode: SparsitronMode::Original,
            c_t: 10.0,
            c_m: 10.0,
            max_estimator_draws: Some(10_000_000_000),
            data: GlmData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QSparsitronParams {
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: Option<f64>,
    pub activation: Activation,
    pub sim: SimConfig,
    pub c_t: f64,
    pub c_m: f64,
    pub data: GlmData,
}

impl Default for QSparsitronParams {
    fn default() -> Self {
        QSparsitronParams {
            lambda: 3.0,
            epsilon: 0.15,
            delta: 0.1,
            beta: None,
            activation: Activation::Sigmoid,
            sim: SimConfig::default(),
            c_t: 10.0,
            c_m: 10.0,
            data: GlmData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ModelSpec {
    /// Ring plus chords across the ring, all couplings `w`.
    RingWithChords { n: usize, w: f64 },
    /// Each pair coupled with probability `edge_prob`, strength uniform in `[-coupling, coupling]`.
    Random { n: usize, edge_prob: f64, coupling: f64, #[serde(default)] field: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsingGenParams {
    pub model: ModelSpec,
}

impl Default for IsingGenParams {
    fn default() -> Self {
        IsingGenParams { model: ModelSpec::RingWithChords { n: 10, w: 0.2 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum Sampler {
    Exact,
    Gibbs { burn_in: usize, thinning: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingSampleParams {
    pub model: PathBuf,
    pub count: usize,
    #[serde(default = "default_sampler")]
    pub sampler: Sampler,
}

fn default_sampler() -> Sampler {
    Sampler::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingLearnParams {
    pub samples: PathBuf,
    /// Ground truth, when known, for reporting the error.
    #[serde(default)]
    pub model: Option<PathBuf>,
    pub learn: IsingLearnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingEvalParams {
    pub model: PathBuf,
    /// Output of `ising-learn` (a run record, an outcome file or a bare result).
    pub learned: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckDistribution {
    Dirichlet,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCheckParams {
    pub n: usize,
    pub draws: usize,
    pub distribution: CheckDistribution,
}

impl Default for SampleCheckParams {
    fn default() -> Self {
        SampleCheckParams { n: 1000, draws: 1_000_000, distribution: CheckDistribution::Dirichlet }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingParams {
    pub targets: Vec<ScalingTarget>,
    pub exponents: Vec<u32>,
    pub rounds: usize,
    pub risk_samples: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub sim: SimConfig,
}

impl Default for ScalingParams {
    fn default() -> Self {
        let base = hedgeron::scaling::ScalingConfig::new(ScalingTarget::NormEstimate);
        ScalingParams {
            targets: ScalingTarget::ALL.to_vec(),
            exponents: base.exponents,
            rounds: base.rounds,
            risk_samples: base.risk_samples,
            epsilon: base.epsilon,
            delta: base.delta,
            sim: base.sim,
        }
    }
}
