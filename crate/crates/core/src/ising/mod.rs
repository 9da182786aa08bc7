//! Ising models on `{-1,1}^N`, exact and Gibbs samplers, and structure
//! learning through one GLM regression per node.
//!
//! `P[Z = z] ∝ exp(sum_{i != j} A_ij z_i z_j + sum_i theta_i z_i)`, so each
//! unordered edge enters the exponent twice.

mod learn;

pub use learn::{learn_ising, max_abs_error, Backend, IsingLearnConfig, LearnedIsing, NodeFit, SampleBudget};

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::sampling::AliasTable;
use crate::sparsitron::{sigmoid, FeatureLayout, TrainingSet};

/// Largest model [`exact_sample`] and [`exact_distribution`] enumerate.
pub const MAX_EXACT_NODES: usize = 20;

/// Largest model [`sweep_kernel`] builds a dense kernel for.
pub const MAX_KERNEL_NODES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct IsingModel {
    n: usize,
    a: Vec<f64>,
    theta: Vec<f64>,
}

/// On-disk form: `{n, edges: [[i, j, weight]], theta}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    theta: Vec<f64>,
}

impl TryFrom<ModelFile> for IsingModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let theta = if f.theta.is_empty() { vec![0.0; f.n] } else { f.theta };
        IsingModel::from_edges(f.n, &f.edges, theta)
    }
}

impl From<IsingModel> for ModelFile {
    fn from(m: IsingModel) -> Self {
        ModelFile { n: m.n, edges: m.edges(), theta: m.theta }
    }
}

impl IsingModel {
    /// From a dense row-major matrix; must be symmetric with zero diagonal.
    pub fn new(n: usize, a: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        check_len(n * n, a.len())?;
        check_len(n, theta.len())?;
        for i in 0..n {
            if a[i * n + i] != 0.0 {
                return Err(Error::param("A", format!("diagonal entry {i} is non-zero")));
            }
            for j in 0..i {
                if a[i * n + j] != a[j * n + i] {
                    return Err(Error::param("A", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        if a.iter().chain(&theta).any(|v| !v.is_finite()) {
            return Err(Error::param("A", "entries must be finite"));
        }
        Ok(IsingModel { n, a, theta })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], theta: Vec<f64>) -> Result<Self> {
        let mut a = vec![0.0; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::param("edges", format!("bad edge ({i}, {j}) for n = {n}")));
            }
            a[i * n + j] = w;
            a[j * n + i] = w;
        }
        IsingModel::new(n, a, theta)
    }

    /// Ring `i -- i+1` plus chords `i -- i + n/2` on even `i`, all of weight `w`.
    /// Every node has degree at most 3.
    pub fn ring_with_chords(n: usize, w: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            if n > 1 && (n > 2 || i == 0) {
                edges.push((i, (i + 1) % n, w));
            }
        }
        if n >= 6 {
            for i in (0..n / 2).step_by(2) {
                let j = i + n / 2;
                if j != i + 1 && (j + 1) % n != i {
                    edges.push((i, j, w));
                }
            }
        }
        IsingModel::from_edges(n, &edges, vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn a_ij(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Non-zero couplings `(i, j, A_ij)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.a_ij(i, j);
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.a_ij(i, j) != 0.0).count()
    }

    /// `max_i (sum_j |A_ij| + |theta_i|)`.
    pub fn width(&self) -> f64 {
        (0..self.n)
            .map(|i| self.a[i * self.n..(i + 1) * self.n].iter().map(|v| v.abs()).sum::<f64>() + self.theta[i].abs())
            .fold(0.0, f64::max)
    }

    /// `sum_{i != j} A_ij z_i z_j + theta . z`.
    pub fn log_weight(&self, z: &[i8]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.n {
            let zi = z[i] as f64;
            e += self.theta[i] * zi + zi * self.local_field(z, i);
        }
        e
    }

    /// `sum_k A_ik z_k`.
    pub fn local_field(&self, z: &[i8], i: usize) -> f64 {
        self.a[i * self.n..(i + 1) * self.n].iter().zip(z).map(|(&a, &zk)| a * zk as f64).sum()
    }

    /// `P[Z_i = -1 | rest] = sigma(-4 sum_k A_ik z_k - 2 theta_i)`.
    pub fn flip_down_probability(&self, z: &[i8], i: usize) -> f64 {
        sigmoid(-4.0 * self.local_field(z, i) - 2.0 * self.theta[i])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        IsingModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Spin configuration of state `s`: bit `i` set means `z_i = +1`.
pub fn state_spins(s: usize, n: usize, out: &mut [i8]) {
    for (i, z) in out.iter_mut().enumerate().take(n) {
        *z = if (s >> i) & 1 == 1 { 1 } else { -1 };
    }
}

pub fn state_index(z: &[i8]) -> usize {
    z.iter().enumerate().fold(0, |s, (i, &zi)| if zi > 0 { s | (1 << i) } else { s })
}

/// The normalized law over all `2^N` states, indexed by [`state_index`].
pub fn exact_distribution(model: &IsingModel) -> Result<Vec<f64>> {
    let n = model.n;
    if n > MAX_EXACT_NODES {
        return Err(Error::param("n", format!("enumeration limited to {MAX_EXACT_NODES} nodes")));
    }
    let mut z = vec![0i8; n];
    let logw: Vec<f64> = (0..1usize << n)
        .map(|s| {
            state_spins(s, n, &mut z);
            model.log_weight(&z)
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    Exact,
    Gibbs { burn_in: usize, thinning: usize },
    File,
}

/// Spin samples, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingSampleSet {
    n: usize,
    spins: Vec<i8>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl IsingSampleSet {
    pub fn new(n: usize, spins: Vec<i8>, provenance: Provenance) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        if spins.len() % n != 0 {
            return Err(Error::DimensionMismatch { expected: n * (spins.len() / n + 1), got: spins.len() });
        }
        if let Some(i) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::OutOfRange { index: i, value: spins[i] as f64, lo: -1.0, hi: 1.0 });
        }
        Ok(IsingSampleSet { n, spins, provenance, seed: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.spins.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[i8] {
        &self.spins[i * self.n..(i + 1) * self.n]
    }

    /// Empirical state histogram (enumerable sizes only).
    pub fn state_counts(&self) -> Result<Vec<u64>> {
        if self.n > MAX_EXACT_NODES {
            return Err(Error::param("n", format!("histogram limited to {MAX_EXACT_NODES} nodes")));
        }
        let mut counts = vec![0u64; 1 << self.n];
        for i in 0..self.len() {
            counts[state_index(self.sample(i))] += 1;
        }
        Ok(counts)
    }

    /// One sample per row of `±1` integers, no header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..self.len() {
            wtr.write_record(self.sample(i).iter().map(|s| s.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut spins = Vec::new();
        let mut n = 0;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if row == 0 {
                n = rec.len();
            } else if rec.len() != n {
                return Err(Error::Parse(format!("row {row} has {} fields, expected {n}", rec.len())));
            }
            for f in rec.iter() {
                spins.push(f.parse::<i8>().map_err(|e| Error::Parse(format!("row {row}: {f:?}: {e}")))?);
            }
        }
        if spins.is_empty() {
            return Err(Error::Empty("sample file"));
        }
        IsingSampleSet::new(n, spins, Provenance::File)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        IsingSampleSet::read_csv(std::fs::File::open(path)?)
    }

    /// Rows `start..end` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::param("range", format!("{start}..{end} not within 0..{}", self.len())));
        }
        Ok(IsingSampleSet {
            n: self.n,
            spins: self.spins[start * self.n..end * self.n].to_vec(),
            provenance: self.provenance,
            seed: self.seed,
        })
    }
}

/// I.i.d. draws from the enumerated law.
pub fn exact_sample<R: Rng + ?Sized>(model: &IsingModel, count: usize, rng: &mut R) -> Result<IsingSampleSet> {
    let p = exact_distribution(model)?;
    let table = AliasTable::from_weights(&p)?;
    let n = model.n;
    let mut spins = vec![0i8; count * n];
    for row in spins.chunks_exact_mut(n) {
        state_spins(table.sample(rng), n, row);
    }
    IsingSampleSet::new(n, spins, Provenance::Exact)
}

/// Systematic-scan Gibbs chain from a uniform start; one sample every
/// `thinning` sweeps after `burn_in` sweeps.
///
/// Strong couplings make the chain mix slowly; nothing here detects that.
pub fn gibbs_sample<R: Rng + ?Sized>(
    model: &IsingModel,
    count: usize,
    burn_in: usize,
    thinning: usize,
    rng: &mut R,
) -> Result<IsingSampleSet> {
    if burn_in == 0 || thinning == 0 {
        return Err(Error::param("burn_in", "burn_in and thinning must be at least 1"));
    }
    let n = model.n;
    let mut z: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let sweep = |z: &mut Vec<i8>, rng: &mut R| {
        for i in 0..n {
            z[i] = if rng.random::<f64>() < model.flip_down_probability(z, i) { -1 } else { 1 };
        }
    };
    for _ in 0..burn_in {
        sweep(&mut z, rng);
    }
    let mut spins = Vec::with_capacity(count * n);
    for _ in 0..count {
        for _ in 0..thinning {
            sweep(&mut z, rng);
        }
        spins.extend_from_slice(&z);
    }
    IsingSampleSet::new(n, spins, Provenance::Gibbs { burn_in, thinning })
}

/// Row-stochastic `2^N x 2^N` kernel of one systematic sweep.
pub fn sweep_kernel(model: &IsingModel) -> Result<Vec<f64>> {
    let n = model.n;
    if n > MAX_KERNEL_NODES {
        return Err(Error::param("n", format!("kernel limited to {MAX_KERNEL_NODES} nodes")));
    }
    let s_max = 1usize << n;
    let mut k = vec![0.0; s_max * s_max];
    for s in 0..s_max {
        k[s * s_max + s] = 1.0;
    }
    let mut z = vec![0i8; n];
    for i in 0..n {
        let mut site = vec![0.0; s_max * s_max];
        for s in 0..s_max {
            state_spins(s, n, &mut z);
            let down = model.flip_down_probability(&z, i);
            site[s * s_max + (s & !(1 << i))] += down;
            site[s * s_max + (s | (1 << i))] += 1.0 - down;
        }
        let mut next = vec![0.0; s_max * s_max];
        for a in 0..s_max {
            for b in 0..s_max {
                let kab = k[a * s_max + b];
                if kab != 0.0 {
                    for c in 0..s_max {
                        next[a * s_max + c] += kab * site[b * s_max + c];
                    }
                }
            }
        }
        k = next;
    }
    Ok(k)
}

/// Node `j` as a GLM problem: features are the other spins, label `(1 - z_j) / 2`.
pub fn to_glm_problem(samples: &IsingSampleSet, j: usize, layout: FeatureLayout) -> Result<TrainingSet> {
    let n = samples.n();
    if j >= n {
        return Err(Error::OutOfRange { index: j, value: j as f64, lo: 0.0, hi: n as f64 });
    }
    if n < 2 {
        return Err(Error::param("n", "need at least 2 spins"));
    }
    let mut xs = Vec::with_capacity(samples.len() * (n - 1));
    let mut ys = Vec::with_capacity(samples.len());
    for i in 0..samples.len() {
        let z = samples.sample(i);
        xs.extend(z.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v as f64));
        ys.push((1.0 - z[j] as f64) / 2.0);
    }
    TrainingSet::from_raw(n - 1, &xs, &ys, layout)
}

#[cfg(test)]
mod tests;
