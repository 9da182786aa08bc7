//! Error and failure injection shared by the simulated oracles.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// How a simulated estimate is moved inside its allowed error ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// True value, no failures.
    Exact,
    /// Error uniform in `[-bound, bound]`.
    #[default]
    #[serde(alias = "uniform-bounded")]
    Uniform,
    /// Error exactly `+bound` or `-bound`.
    #[serde(alias = "adversarial-extreme")]
    Adversarial,
}

impl NoiseMode {
    pub fn injects_failures(self) -> bool {
        !matches!(self, NoiseMode::Exact)
    }

    /// Error inside `[-bound, bound]`.
    pub fn error<R: Rng + ?Sized>(self, bound: f64, rng: &mut R) -> f64 {
        match self {
            NoiseMode::Exact => 0.0,
            NoiseMode::Uniform => bound * (2.0 * rng.random::<f64>() - 1.0),
            NoiseMode::Adversarial => {
                if rng.random::<bool>() {
                    bound
                } else {
                    -bound
                }
            }
        }
    }

    /// Fills `out` with independent errors. Uniform errors sit on a midpoint
    /// grid of spacing `2 bound / 2^32`; signs use one random bit each.
    pub fn fill_errors<R: Rng + ?Sized>(self, bound: f64, rng: &mut R, out: &mut [f64]) {
        const SCALE: f64 = 1.0 / (1u64 << 32) as f64;
        let mut bits = [0u64; 256];
        match self {
            NoiseMode::Exact => out.fill(0.0),
            NoiseMode::Uniform => {
                let mut halves = [0u32; 512];
                for chunk in out.chunks_mut(512) {
                    let draws = &mut halves[..chunk.len()];
                    rng.fill(draws);
                    for (o, &h) in chunk.iter_mut().zip(draws.iter()) {
                        *o = bound * (2.0 * ((h as f64 + 0.5) * SCALE) - 1.0);
                    }
                }
            }
            NoiseMode::Adversarial => {
                for chunk in out.chunks_mut(64 * 256) {
                    let words = &mut bits[..chunk.len().div_ceil(64)];
                    rng.fill(words);
                    for (i, o) in chunk.iter_mut().enumerate() {
                        *o = if (words[i / 64] >> (i % 64)) & 1 == 1 { bound } else { -bound };
                    }
                }
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(NoiseMode::Exact),
            "uniform" | "uniform-bounded" => Some(NoiseMode::Uniform),
            "adversarial" | "adversarial-extreme" => Some(NoiseMode::Adversarial),
            _ => None,
        }
    }
}

/// Error of a failed call: magnitude uniform in `[bound, 2 bound]`, random sign.
pub fn failure_error<R: Rng + ?Sized>(bound: f64, rng: &mut R) -> f64 {
    let mag = bound * (1.0 + rng.random::<f64>());
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Bernoulli(`q`) trials drawn by sampling geometric gaps between successes,
/// so long runs of tiny-`q` trials cost one draw per success.
#[derive(Debug, Clone)]
pub struct FailureClock {
    ln_keep: f64,
    remaining: u64,
}

impl FailureClock {
    pub fn new<R: Rng + ?Sized>(q: f64, rng: &mut R) -> Self {
        let mut c = FailureClock { ln_keep: (-q).ln_1p(), remaining: 0 };
        c.remaining = c.gap(rng);
        c
    }

    fn gap<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.ln_keep == 0.0 {
            return u64::MAX;
        }
        if self.ln_keep == f64::NEG_INFINITY {
            return 0;
        }
        // 1 - u lies in (0, 1], so the log is finite.
        let u: f64 = 1.0 - rng.random::<f64>();
        let g = (u.ln() / self.ln_keep).floor();
        if g >= u64::MAX as f64 {
            u64::MAX
        } else {
            g as u64
        }
    }

    /// Runs the next `n` trials, calling `on_fail` with the offset of each
    /// success; same outcomes as `n` calls to [`FailureClock::tick`].
    pub fn run<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R, mut on_fail: impl FnMut(usize, &mut R)) {
        let mut pos = 0usize;
        loop {
            let left = (n - pos) as u64;
            if self.remaining >= left {
                self.remaining -= left;
                return;
            }
            pos += self.remaining as usize;
            self.remaining = self.gap(rng);
            on_fail(pos, rng);
            pos += 1;
        }
    }

    /// Outcome of the next trial.
    pub fn tick<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.remaining == 0 {
            self.remaining = self.gap(rng);
            true
        } else {
            self.remaining -= 1;
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn errors_stay_in_ball() {
        let mut r = rng::seeded(0);
        for _ in 0..10_000 {
            let e = NoiseMode::Uniform.error(0.3, &mut r);
            assert!(e.abs() <= 0.3);
            assert_eq!(NoiseMode::Adversarial.error(0.3, &mut r).abs(), 0.3);
            let f = failure_error(0.3, &mut r).abs();
            assert!((0.3..=0.6).contains(&f));
        }
        assert_eq!(NoiseMode::Exact.error(0.3, &mut r), 0.0);
    }

    #[test]
    fn bulk_errors_stay_in_ball() {
        let mut r = rng::seeded(3);
        let mut buf = vec![0.0; 10_000];
        NoiseMode::Uniform.fill_errors(0.2, &mut r, &mut buf);
        assert!(buf.iter().all(|e| e.abs() <= 0.2));
        assert!(crate::stats::mean(&buf).abs() < 0.01);
        NoiseMode::Adversarial.fill_errors(0.2, &mut r, &mut buf);
        assert!(buf.iter().all(|e| e.abs() == 0.2));
        let up = buf.iter().filter(|&&e| e > 0.0).count() as f64;
        assert!((up - 5000.0).abs() < 200.0);
        NoiseMode::Exact.fill_errors(0.2, &mut r, &mut buf);
        assert!(buf.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn clock_run_matches_ticks() {
        for q in [0.3, 0.01, 0.0, 1.0] {
            let (mut ra, mut rb) = (rng::seeded(5), rng::seeded(5));
            let mut a = FailureClock::new(q, &mut ra);
            let mut b = FailureClock::new(q, &mut rb);
            for n in [0, 1, 7, 1000, 3] {
                let ticks: Vec<usize> = (0..n).filter(|_| a.tick(&mut ra)).collect();
                let mut runs = Vec::new();
                b.run(n, &mut rb, |i, _| runs.push(i));
                assert_eq!(ticks, runs, "q={q} n={n}");
            }
        }
    }

    #[test]
    fn clock_frequency_matches_probability() {
        let mut r = rng::seeded(1);
        for q in [0.5, 0.1, 0.01] {
            let mut c = FailureClock::new(q, &mut r);
            let n = 400_000;
            let hits = (0..n).filter(|_| c.tick(&mut r)).count() as f64;
            let sd = (n as f64 * q * (1.0 - q)).sqrt();
            assert!((hits - n as f64 * q).abs() < 4.0 * sd, "q={q} hits={hits}");
        }
        let mut never = FailureClock::new(0.0, &mut r);
        assert!((0..1000).all(|_| !never.tick(&mut r)));
        let mut always = FailureClock::new(1.0, &mut r);
        assert!((0..1000).all(|_| always.tick(&mut r)));
    }

    #[test]
    fn parse_names() {
        assert_eq!(NoiseMode::parse("exact"), Some(NoiseMode::Exact));
        assert_eq!(NoiseMode::parse("uniform"), Some(NoiseMode::Uniform));
        assert_eq!(NoiseMode::parse("adversarial"), Some(NoiseMode::Adversarial));
        assert_eq!(NoiseMode::parse("gaussian"), None);
    }
}
