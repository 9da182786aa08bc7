use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::rng::SimRng;

/// Source of per-round loss vectors `l^(t)` in `[0,1]^N`.
///
/// Adaptive adversaries see the learner's allocation for the round before
/// committing to the losses, hence the `probs` argument.
pub trait LossStream {
    fn n_experts(&self) -> usize;

    /// Losses for round `round` (0-based), or `None` once the stream is exhausted.
    fn next_losses(&mut self, round: usize, probs: &[f64]) -> Option<Vec<f64>>;
}

/// Pre-recorded `T x N` loss matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixStream {
    rows: Vec<Vec<f64>>,
    n: usize,
    cursor: usize,
}

impl MatrixStream {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map(|r| r.len()).ok_or(Error::Empty("loss matrix"))?;
        if n == 0 {
            return Err(Error::Empty("loss row"));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!("row {t} has {} columns, expected {n}", row.len())));
            }
            check_range(row, 0.0, 1.0)?;
        }
        Ok(MatrixStream { rows, n, cursor: 0 })
    }

    /// Headerless CSV, one round per row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (t, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {t}: {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        MatrixStream::new(rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        MatrixStream::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rounds(&self) -> usize {
        self.rows.len()
    }

    pub fn rewind(&mut self) {
        self.cursor = 0;
    }
}

impl LossStream for MatrixStream {
    fn n_experts(&self) -> usize {
        self.n
    }

    fn next_losses(&mut self, _round: usize, _probs: &[f64]) -> Option<Vec<f64>> {
        let row = self.rows.get(self.cursor)?.clone();
        self.cursor += 1;
        Some(row)
    }
}

/// I.i.d. `U[0,1]` losses, unbounded length.
#[derive(Debug, Clone)]
pub struct UniformStream {
    n: usize,
    rng: SimRng,
}

impl UniformStream {
    pub fn new(n: usize, rng: SimRng) -> Self {
        UniformStream { n, rng }
    }
}

impl LossStream for UniformStream {
    fn n_experts(&self) -> usize {
        self.n
    }

    fn next_losses(&mut self, _round: usize, _probs: &[f64]) -> Option<Vec<f64>> {
        Some((0..self.n).map(|_| self.rng.random::<f64>()).collect())
    }
}

/// Expert `j` suffers loss 1 with probability `means[j]`, else 0.
#[derive(Debug, Clone)]
pub struct BernoulliStream {
    means: Vec<f64>,
    rng: SimRng,
}

impl BernoulliStream {
    pub fn new(means: Vec<f64>, rng: SimRng) -> Result<Self> {
        check_range(&means, 0.0, 1.0)?;
        Ok(BernoulliStream { means, rng })
    }
}

impl LossStream for BernoulliStream {
    fn n_experts(&self) -> usize {
        self.means.len()
    }

    fn next_losses(&mut self, _round: usize, _probs: &[f64]) -> Option<Vec<f64>> {
        Some(
            self.means
                .iter()
                .map(|&m| if self.rng.random::<f64>() < m { 1.0 } else { 0.0 })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// Loss 1 on the currently heaviest expert, 0 elsewhere.
    Greedy,
    /// Experts 0 and 1 alternate the unit loss; the rest always lose 1.
    FlipFlop,
    /// The last expert loses 1 for the first half and 0 after; the others 0.5 then 1.
    LateBloomer,
    /// Loss 1 on every expert holding at least `1/N` of the mass.
    Proportional,
    /// The zero-loss expert rotates every `T/N` rounds.
    SwitchingBest,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 5] = [
        AdversaryKind::Greedy,
        AdversaryKind::FlipFlop,
        AdversaryKind::LateBloomer,
        AdversaryKind::Proportional,
        AdversaryKind::SwitchingBest,
    ];
}

/// Hand-built adversarial streams, some of which react to the learner's allocation.
#[derive(Debug, Clone)]
pub struct AdaptiveAdversary {
    kind: AdversaryKind,
    n: usize,
    n_rounds: usize,
}

impl AdaptiveAdversary {
    pub fn new(kind: AdversaryKind, n: usize, n_rounds: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n_experts", "adversaries need at least 2 experts"));
        }
        Ok(AdaptiveAdversary { kind, n, n_rounds })
    }

    pub fn kind(&self) -> AdversaryKind {
        self.kind
    }
}

impl LossStream for AdaptiveAdversary {
    fn n_experts(&self) -> usize {
        self.n
    }

    fn next_losses(&mut self, round: usize, probs: &[f64]) -> Option<Vec<f64>> {
        if round >= self.n_rounds {
            return None;
        }
        let n = self.n;
        let mut l = vec![0.0; n];
        match self.kind {
            AdversaryKind::Greedy => {
                let mut best = 0;
                for (j, &p) in probs.iter().enumerate() {
                    if p > probs[best] {
                        best = j;
                    }
                }
                l[best] = 1.0;
            }
            AdversaryKind::FlipFlop => {
                l.fill(1.0);
                l[0] = if round % 2 == 0 { 1.0 } else { 0.0 };
                l[1] = 1.0 - l[0];
            }
            AdversaryKind::LateBloomer => {
                let early = round < self.n_rounds / 2;
                l.fill(if early { 0.5 } else { 1.0 });
                l[n - 1] = if early { 1.0 } else { 0.0 };
            }
            AdversaryKind::Proportional => {
                let threshold = 1.0 / n as f64;
                for (x, &p) in l.iter_mut().zip(probs) {
                    if p >= threshold {
                        *x = 1.0;
                    }
                }
            }
            AdversaryKind::SwitchingBest => {
                let block = (self.n_rounds / n).max(1);
                l.fill(1.0);
                l[(round / block) % n] = 0.0;
            }
        }
        Some(l)
    }
}

/// One instance of every [`AdversaryKind`].
pub fn adversarial_streams(n: usize, n_rounds: usize) -> Result<Vec<AdaptiveAdversary>> {
    AdversaryKind::ALL
        .iter()
        .map(|&k| AdaptiveAdversary::new(k, n, n_rounds))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let data = "0.1,0.2,0.3\n1,0,0.5\n";
        let mut s = MatrixStream::from_csv_reader(data.as_bytes()).unwrap();
        assert_eq!(s.n_experts(), 3);
        assert_eq!(s.next_losses(0, &[]).unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(s.next_losses(1, &[]).unwrap(), vec![1.0, 0.0, 0.5]);
        assert!(s.next_losses(2, &[]).is_none());
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(MatrixStream::from_csv_reader("0.1,1.2\n".as_bytes()).is_err());
        assert!(MatrixStream::from_csv_reader("0.1,abc\n".as_bytes()).is_err());
        assert!(MatrixStream::from_csv_reader("0.1,0.2\n0.3\n".as_bytes()).is_err());
        assert!(MatrixStream::from_csv_reader("".as_bytes()).is_err());
    }

    #[test]
    fn greedy_hits_heaviest_expert() {
        let mut a = AdaptiveAdversary::new(AdversaryKind::Greedy, 3, 10).unwrap();
        assert_eq!(a.next_losses(0, &[0.2, 0.5, 0.3]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(a.next_losses(1, &[0.4, 0.2, 0.4]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(a.next_losses(10, &[0.4, 0.2, 0.4]).is_none());
    }

    #[test]
    fn switching_best_rotates() {
        let mut a = AdaptiveAdversary::new(AdversaryKind::SwitchingBest, 2, 4).unwrap();
        let p = [0.5, 0.5];
        assert_eq!(a.next_losses(0, &p).unwrap(), vec![0.0, 1.0]);
        assert_eq!(a.next_losses(2, &p).unwrap(), vec![1.0, 0.0]);
    }
}
