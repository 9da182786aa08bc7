use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// One labelled example `(x, y)` with `x` in `[-1,1]^N` and `y` in `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmSample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// How raw features are expanded before learning.
///
/// With `bias` a constant 1 is appended. With `sign_double` every coordinate
/// `c` is followed (as a second block) by `-c`, so a signed target vector is
/// representable by a non-negative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub bias: bool,
    pub sign_double: bool,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        FeatureLayout { bias: true, sign_double: true }
    }
}

impl FeatureLayout {
    pub fn raw() -> Self {
        FeatureLayout { bias: false, sign_double: false }
    }

    /// Width of the expanded vector.
    pub fn dim(&self, raw_dim: usize) -> usize {
        let d = raw_dim + usize::from(self.bias);
        if self.sign_double {
            2 * d
        } else {
            d
        }
    }

    pub fn expand_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
        if self.bias {
            out.push(1.0);
        }
        if self.sign_double {
            let half = out.len();
            for i in 0..half {
                let v = out[i];
                out.push(-v);
            }
        }
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim(x.len()));
        self.expand_into(x, &mut out);
        out
    }

    /// Inverse of the expansion for weight vectors: returns the signed raw
    /// weights and the bias weight (0 without a bias coordinate).
    pub fn collapse(&self, v: &[f64], raw_dim: usize) -> Result<(Vec<f64>, f64)> {
        check_len(self.dim(raw_dim), v.len())?;
        let d = raw_dim + usize::from(self.bias);
        let signed: Vec<f64> = if self.sign_double {
            (0..d).map(|i| v[i] - v[i + d]).collect()
        } else {
            v.to_vec()
        };
        let bias = if self.bias { signed[raw_dim] } else { 0.0 };
        Ok((signed[..raw_dim].to_vec(), bias))
    }
}

/// Expanded feature rows plus labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    layout: FeatureLayout,
    raw_dim: usize,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

/// Slack allowed on the `[-1,1]` and `[0,1]` ranges at ingestion.
const RANGE_SLACK: f64 = 1e-9;

impl TrainingSet {
    pub fn new(samples: &[GlmSample], layout: FeatureLayout) -> Result<Self> {
        let raw_dim = samples.first().map(|s| s.x.len()).ok_or(Error::Empty("training set"))?;
        let mut set = TrainingSet {
            layout,
            raw_dim,
            dim: layout.dim(raw_dim),
            features: Vec::with_capacity(samples.len() * layout.dim(raw_dim)),
            labels: Vec::with_capacity(samples.len()),
        };
        let mut buf = Vec::new();
        for s in samples {
            set.push(&s.x, s.y, &mut buf)?;
        }
        Ok(set)
    }

    /// Builds from flat row-major raw features.
    pub fn from_raw(raw_dim: usize, xs: &[f64], ys: &[f64], layout: FeatureLayout) -> Result<Self> {
        check_len(raw_dim * ys.len(), xs.len())?;
        if ys.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mut set = TrainingSet {
            layout,
            raw_dim,
            dim: layout.dim(raw_dim),
            features: Vec::with_capacity(ys.len() * layout.dim(raw_dim)),
            labels: Vec::with_capacity(ys.len()),
        };
        let mut buf = Vec::new();
        for (m, &y) in ys.iter().enumerate() {
            set.push(&xs[m * raw_dim..(m + 1) * raw_dim], y, &mut buf)?;
        }
        Ok(set)
    }

    fn push(&mut self, x: &[f64], y: f64, buf: &mut Vec<f64>) -> Result<()> {
        check_len(self.raw_dim, x.len())?;
        for (i, &v) in x.iter().enumerate() {
            if !(v.abs() <= 1.0 + RANGE_SLACK) {
                return Err(Error::OutOfRange { index: i, value: v, lo: -1.0, hi: 1.0 });
            }
        }
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&y) {
            return Err(Error::OutOfRange { index: self.labels.len(), value: y, lo: 0.0, hi: 1.0 });
        }
        self.layout.expand_into(x, buf);
        for v in buf.iter_mut() {
            *v = v.clamp(-1.0, 1.0);
        }
        self.features.extend_from_slice(buf);
        self.labels.push(y.clamp(0.0, 1.0));
        Ok(())
    }

    /// CSV with `N + 1` columns per row (features then label), no header.
    pub fn from_csv_reader<R: Read>(reader: R, layout: FeatureLayout) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut samples = Vec::new();
        for (m, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("row {m}: {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let (y, x) = vals
                .split_last()
                .ok_or_else(|| Error::Parse(format!("row {m} is empty")))?;
            if x.is_empty() {
                return Err(Error::Parse(format!("row {m} has no features")));
            }
            samples.push(GlmSample { x: x.to_vec(), y: *y });
        }
        TrainingSet::new(&samples, layout)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, layout: FeatureLayout) -> Result<Self> {
        TrainingSet::from_csv_reader(std::fs::File::open(path)?, layout)
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn raw_dim(&self) -> usize {
        self.raw_dim
    }

    /// Width of the expanded rows.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.features[m * self.dim..(m + 1) * self.dim]
    }

    pub fn label(&self, m: usize) -> f64 {
        self.labels[m]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// First `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> Result<(TrainingSet, TrainingSet)> {
        if n == 0 || n >= self.len() {
            return Err(Error::param("split", format!("{n} not in 1..{}", self.len())));
        }
        let cut = n * self.dim;
        let part = |f: &[f64], l: &[f64]| TrainingSet {
            layout: self.layout,
            raw_dim: self.raw_dim,
            dim: self.dim,
            features: f.to_vec(),
            labels: l.to_vec(),
        };
        Ok((
            part(&self.features[..cut], &self.labels[..n]),
            part(&self.features[cut..], &self.labels[n..]),
        ))
    }

    /// Copy with every expanded feature passed through `f`.
    pub fn map_features(&self, f: impl Fn(f64) -> f64) -> TrainingSet {
        let mut out = self.clone();
        for v in out.features.iter_mut() {
            *v = f(*v);
        }
        out
    }
}
