//! Small statistics helpers shared by estimators and the verification suites.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Median; for an even count the lower of the two middle elements.
pub fn median_lower(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let k = (xs.len() - 1) / 2;
    let (_, m, _) = xs.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *m
}

/// Total-variation distance between an empirical histogram and a distribution.
pub fn tv_distance_counts(counts: &[u64], p: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let total = total as f64;
    0.5 * counts
        .iter()
        .zip(p)
        .map(|(&c, &q)| (c as f64 / total - q).abs())
        .sum::<f64>()
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `ln(ys)` against `ln(xs)`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    lsq_slope(&lx, &ly)
}

/// `[p - k sigma, p + k sigma]` for the frequency of a Bernoulli(p) event over `n` trials.
pub fn binomial_band(p: f64, n: u64, k: f64) -> (f64, f64) {
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    (p - k * sigma, p + k * sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_count_takes_lower_middle() {
        let mut xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median_lower(&mut xs), 2.0);
        let mut ys = [5.0, 1.0, 3.0];
        assert_eq!(median_lower(&mut ys), 3.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [64.0, 128.0, 256.0, 512.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
        assert!((log_log_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tv_of_identical_is_zero() {
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
        assert_eq!(tv_distance_counts(&[1, 3], &[0.25, 0.75]), 0.0);
    }
}
