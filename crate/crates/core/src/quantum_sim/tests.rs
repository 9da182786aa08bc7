use rand::Rng;

use super::*;
use crate::hedge::WeightState;
use crate::rng;
use crate::stats::{log_log_slope, tv_distance_counts};

fn oracle(key: &str, v: &[f64]) -> QuantizedOracle {
    QuantizedOracle::new(key, v, 0.0, 1).unwrap()
}

#[test]
fn ledger_counts_and_merges() {
    let mut a = QueryLedger::new();
    a.charge("loss", 4);
    a.charge("train1", 3);
    a.charge("loss", 1);
    let mut b = QueryLedger::new();
    b.charge("train2", 7);
    b.charge("loss", 2);
    a.merge(&b);
    assert_eq!(a.get("loss"), 7);
    assert_eq!(a.get("train2"), 7);
    assert_eq!(a.get("absent"), 0);
    assert_eq!(a.total(), 17);
    assert_eq!(a.total(), a.counts().values().sum::<u128>());
}

#[test]
fn grid_rounding() {
    assert_eq!(round_to_grid(0.37, 0.0), 0.37);
    assert!((round_to_grid(0.37, 0.25) - 0.25).abs() < 1e-15);
    assert!((round_to_grid(0.38, 0.25) - 0.5).abs() < 1e-15);
    let mut r = rng::seeded(1);
    for _ in 0..1000 {
        let x: f64 = r.random();
        let eta = 1e-3 * r.random::<f64>() + 1e-9;
        assert!((round_to_grid(x, eta) - x).abs() <= eta / 2.0 * (1.0 + 1e-9));
    }
}

#[test]
fn oracle_get_charges() {
    let o = QuantizedOracle::new("train1", &[0.26, 0.74], 0.5, 2).unwrap();
    let mut l = QueryLedger::new();
    assert_eq!(o.get(0, &mut l), 0.5);
    assert_eq!(o.get(1, &mut l), 0.5);
    assert_eq!(l.get("train1"), 4);
    assert_eq!(o.entry_error(), 0.25);
}

#[test]
fn auto_eta() {
    let s = SimConfig::default();
    assert_eq!(s.eta(10, &[], &[]), 1.0 / 400.0);
    assert_eq!(s.eta(10, &[0.01], &[]), 0.01 / 20.0);
    assert_eq!(s.eta(10, &[0.5], &[0.1]), 1.0 / 400.0);
    assert_eq!(SimConfig::exact().eta(10, &[0.01], &[]), 0.0);
}

#[test]
fn weight_on_demand_trivial() {
    let c = QueryConstants::default();
    let mut h = LossHistory::new(4, 0.0, "loss");
    let mut l = QueryLedger::new();
    let w = weight_on_demand(&h, 0.9, 2, 1, &c, &mut l).unwrap();
    assert_eq!((w.value, w.queries), (0.25, 0));
    for _ in 0..5 {
        h.push(&[0.0; 4]).unwrap();
    }
    for t in 1..=6 {
        assert_eq!(weight_on_demand(&h, 0.9, 3, t, &c, &mut l).unwrap().value, 0.25);
    }
    assert!(weight_on_demand(&h, 0.9, 0, 7, &c, &mut l).is_err());
    assert!(weight_on_demand(&h, 0.9, 0, 0, &c, &mut l).is_err());
    assert_eq!(l.get("loss"), 2 * (0 + 1 + 2 + 3 + 4 + 5));
}

#[test]
fn weight_on_demand_matches_hedge_weights() {
    let (n, t_max, beta) = (8, 20, 0.8);
    let eta = 1.0 / (4.0 * 64.0);
    let c = QueryConstants::default();
    let mut r = rng::seeded(3);
    let mut h = LossHistory::new(n, eta, "loss");
    let mut ws = WeightState::new(n, beta).unwrap();
    for t in 1..=t_max + 1 {
        let mut ledger = QueryLedger::new();
        for j in 0..n {
            let w = weight_on_demand(&h, beta, j, t, &c, &mut ledger).unwrap();
            assert_eq!(w.queries, 2 * (t as u128 - 1));
            assert!((w.value - ws.weight(j)).abs() <= eta / 2.0 + 1e-15, "t={t} j={j}");
        }
        if t <= t_max {
            let l: Vec<f64> = (0..n).map(|_| (r.random::<f64>() / eta).round() * eta).collect();
            let stored = h.push(&l).unwrap().to_vec();
            ws.update(&stored).unwrap();
        }
    }
}

#[test]
fn min_find_examples() {
    let s = SimConfig::default();
    let mut r = rng::seeded(4);
    let mut l = QueryLedger::new();
    // Zero-based: the minimum 0.1 is the second entry.
    let u = oracle("u", &[0.3, 0.1, 0.9]);
    let m = q_min_find(&u, 1e-9, &s, &mut l, &mut r).unwrap();
    assert_eq!(m.value, (1, 0.1));
    let m = q_max_find(&u, 1e-9, &s, &mut l, &mut r).unwrap();
    assert_eq!(m.value, (2, 0.9));
    let one = oracle("u", &[0.7]);
    for _ in 0..20 {
        assert_eq!(q_min_find(&one, 0.5, &s, &mut l, &mut r).unwrap().value, (0, 0.7));
    }
    let ties = oracle("u", &[0.5, 0.2, 0.2]);
    assert_eq!(q_min_find(&ties, 1e-9, &SimConfig::exact(), &mut l, &mut r).unwrap().value.0, 1);
    assert!(q_min_find(&u, 1.0, &s, &mut l, &mut r).is_err());
}

#[test]
fn min_find_failure_frequency() {
    let s = SimConfig::default();
    let mut r = rng::seeded(5);
    let mut l = QueryLedger::new();
    let u = oracle("u", &[0.3, 0.1, 0.9, 0.5]);
    let trials = 100_000;
    let mut fails = 0;
    for _ in 0..trials {
        let m = q_min_find(&u, 0.1, &s, &mut l, &mut r).unwrap();
        if m.failed {
            fails += 1;
        } else {
            assert_eq!(m.value.0, 1);
        }
    }
    let f = fails as f64 / trials as f64;
    assert!((0.09..=0.11).contains(&f), "{f}");
    assert!(!q_min_find(&u, 0.9, &SimConfig::exact(), &mut l, &mut r).unwrap().failed);
}

#[test]
fn query_counts_closed_forms() {
    let c = QueryConstants::default();
    // 2 * 4 * ln 10 = 18.42
    assert_eq!(min_find_queries(16, 0.1, &c), 19);
    // 6 pi * 8 / 0.1 * ln 100 = 6944.6
    assert_eq!(norm_queries(64, 0.1, 0.01, &c), 6945);
    assert_eq!(state_queries(16, 0.1, &c), 19);
    let (ku, kz) = additive_queries(64, 0.16, 0.04, &c);
    assert_eq!(ku, min_find_queries(64, 0.01, &c) + norm_queries(64, 0.01, 0.01, &c));
    assert_eq!(ku, kz);
    let (ru, rz) = relative_queries(64, 0.4, 0.04, &c, true);
    assert_eq!(ru, min_find_queries(64, 0.01, &c) + norm_queries(64, 0.1, 0.01, &c));
    assert_eq!(rz, min_find_queries(64, 0.01, &c));

    let s = SimConfig::default();
    let mut r = rng::seeded(6);
    let u = QuantizedOracle::new("u", &[1.0; 64], 0.0, 2).unwrap();
    let v = QuantizedOracle::new("v", &[0.5; 64], 0.0, 2).unwrap();
    let mut l = QueryLedger::new();
    let a = q_inner_additive(&u, &v, 0.16, 0.04, &s, &mut l, &mut r).unwrap();
    assert_eq!(a.queries, (2 * (ku + kz) + 2 * kz) as u128);
    assert_eq!(l.get("u"), (2 * (ku + kz)) as u128);
    assert_eq!(l.get("v"), (2 * kz) as u128);
    let n = q_norm_estimate(&u, 0.1, 0.01, &s, &mut l, &mut r).unwrap();
    assert_eq!(n.queries, 2 * 6945);
}

#[test]
fn norm_queries_scale_as_sqrt_n() {
    let c = QueryConstants::default();
    let ns: Vec<f64> = (6..=12).map(|k| (1u64 << k) as f64).collect();
    let qs: Vec<f64> = ns.iter().map(|&n| norm_queries(n as usize, 0.05, 0.01, &c) as f64).collect();
    let slope = log_log_slope(&ns, &qs);
    assert!((slope - 0.5).abs() < 0.05, "{slope}");
}

#[test]
fn norm_estimate_examples() {
    let s = SimConfig::exact();
    let mut r = rng::seeded(7);
    let mut l = QueryLedger::new();
    let ones = oracle("u", &[1.0; 10]);
    assert_eq!(q_norm_estimate(&ones, 0.1, 0.1, &s, &mut l, &mut r).unwrap().value, 10.0);
    let mut e1 = vec![0.0; 10];
    e1[0] = 1.0;
    assert_eq!(q_norm_estimate(&oracle("u", &e1), 0.1, 0.1, &s, &mut l, &mut r).unwrap().value, 1.0);
    assert!(q_norm_estimate(&ones, 0.0, 0.1, &s, &mut l, &mut r).is_err());
    assert!(q_norm_estimate(&oracle("u", &[0.5, 0.2]), 0.1, 0.1, &s, &mut l, &mut r).is_err());
}

fn random_unit_max(n: usize, r: &mut impl Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n).map(|_| r.random()).collect();
    let k = r.random_range(0..n);
    u[k] = 1.0;
    u
}

#[test]
fn norm_estimate_error_containment() {
    let mut r = rng::seeded(8);
    for noise in [NoiseMode::Uniform, NoiseMode::Adversarial] {
        let s = SimConfig::with_noise(noise);
        let mut l = QueryLedger::new();
        let mut fails = 0;
        for _ in 0..10_000 {
            let n = r.random_range(1..40);
            let eps = 0.01 + 0.5 * r.random::<f64>();
            let raw = random_unit_max(n, &mut r);
            let u = QuantizedOracle::new("u", &raw, s.eta(n, &[eps], &[]), 1).unwrap();
            let truth: f64 = raw.iter().sum();
            let g = q_norm_estimate(&u, eps, 0.05, &s, &mut l, &mut r).unwrap();
            assert!(g.value > 0.0);
            if g.failed {
                fails += 1;
            } else {
                assert!((g.value - truth).abs() <= eps * truth * (1.0 + 1e-12));
            }
        }
        let (lo, hi) = crate::stats::binomial_band(0.05, 10_000, 3.0);
        let f = fails as f64 / 10_000.0;
        assert!(f >= lo && f <= hi, "{f}");
    }
}

#[test]
fn state_sample_examples() {
    let s = SimConfig::default();
    let mut r = rng::seeded(9);
    let mut l = QueryLedger::new();
    let mut e3 = vec![0.0; 6];
    e3[2] = 1.0;
    let u = oracle("u", &e3);
    for _ in 0..1000 {
        let x = q_state_sample(&u, 0.5, 0.01, &s, &mut l, &mut r).unwrap();
        if !x.failed {
            assert_eq!(x.value, 2);
        }
    }
    let uni = oracle("u", &[1.0; 8]);
    let mut counts = [0u64; 8];
    for _ in 0..80_000 {
        counts[q_state_sample(&uni, 0.5, 0.01, &s, &mut l, &mut r).unwrap().value] += 1;
    }
    assert!(tv_distance_counts(&counts, &[0.125; 8]) < 0.01);
    assert!(q_state_sample(&uni, 0.0, 0.1, &s, &mut l, &mut r).is_err());
    assert!(q_state_sample(&uni, 1.5, 0.1, &s, &mut l, &mut r).is_err());
    let coarse = QuantizedOracle::new("u", &[1.0; 8], 0.01, 1).unwrap();
    assert!(q_state_sample(&coarse, 0.1, 0.1, &s, &mut l, &mut r).is_err());
}

#[test]
fn state_sample_histogram() {
    let s = SimConfig::default();
    let mut r = rng::seeded(10);
    let mut l = QueryLedger::new();
    let n = 16;
    let xi = 0.05;
    let raw = random_unit_max(n, &mut r);
    let u = QuantizedOracle::new("u", &raw, s.eta(n, &[], &[xi]), 1).unwrap();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let mut counts = vec![0u64; n];
    for _ in 0..1_000_000 {
        counts[q_state_sample(&u, xi, 0.001, &s, &mut l, &mut r).unwrap().value] += 1;
    }
    assert!(tv_distance_counts(&counts, &p) <= xi + 0.01);
}

#[test]
fn inner_examples() {
    let mut r = rng::seeded(11);
    let mut l = QueryLedger::new();
    let s = SimConfig::exact();
    let u = oracle("u", &[0.2, 0.9, 0.4, 1.0]);
    let zeros = oracle("v", &[0.0; 4]);
    let ones = oracle("v", &[1.0; 4]);

    let rel = q_inner_relative(&u, &zeros, 0.1, 0.1, &SimConfig::default(), &mut l, &mut r).unwrap();
    assert_eq!(rel.value.value, 0.0);
    let ones_u = oracle("u", &[1.0; 4]);
    assert_eq!(q_inner_relative(&ones_u, &ones, 0.1, 0.1, &s, &mut l, &mut r).unwrap().value.value, 1.0);

    assert_eq!(q_inner_additive(&u, &zeros, 0.1, 0.1, &s, &mut l, &mut r).unwrap().value.value, 0.0);
    assert_eq!(q_inner_additive(&u, &ones, 0.1, 0.1, &s, &mut l, &mut r).unwrap().value.value, 1.0);

    let z = oracle("u", &[0.0; 4]);
    assert!(q_inner_relative(&z, &ones, 0.1, 0.1, &s, &mut l, &mut r).is_err());
    assert!(q_inner_additive(&z, &ones, 0.1, 0.1, &s, &mut l, &mut r).is_err());
    assert!(q_inner_additive(&u, &oracle("v", &[1.0; 3]), 0.1, 0.1, &s, &mut l, &mut r).is_err());

    let e = q_inner_additive(&u, &ones, 0.1, 0.1, &s, &mut l, &mut r).unwrap().value;
    assert_eq!(e.u_argmax, 3);
    assert!((e.gamma_u - 2.5).abs() < 1e-15);
}

fn dot_ratio(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / u.iter().sum::<f64>()
}

#[test]
fn inner_relative_error_containment() {
    let mut r = rng::seeded(12);
    for noise in [NoiseMode::Uniform, NoiseMode::Adversarial] {
        let s = SimConfig::with_noise(noise);
        let mut l = QueryLedger::new();
        for _ in 0..10_000 {
            let n = r.random_range(1..30);
            let eps = 0.01 + 0.9 * r.random::<f64>();
            // Relative accuracy needs entries well above the grid step.
            let u_raw: Vec<f64> = (0..n).map(|_| 0.25 + 0.75 * r.random::<f64>()).collect();
            let v_raw: Vec<f64> = (0..n).map(|_| 0.25 + 0.75 * r.random::<f64>()).collect();
            let eta = s.eta(n, &[eps / 32.0], &[]);
            let u = QuantizedOracle::new("u", &u_raw, eta, 1).unwrap();
            let v = QuantizedOracle::new("v", &v_raw, eta, 1).unwrap();
            let truth = dot_ratio(&u_raw, &v_raw);
            let e = q_inner_relative(&u, &v, eps, 0.02, &s, &mut l, &mut r).unwrap();
            if !e.failed {
                assert!((e.value.value - truth).abs() <= eps * truth * (1.0 + 1e-9), "{} {truth} {eps}", e.value.value);
            }
        }
    }
}

#[test]
fn inner_additive_error_containment() {
    let mut r = rng::seeded(13);
    for noise in [NoiseMode::Uniform, NoiseMode::Adversarial] {
        let s = SimConfig::with_noise(noise);
        let mut l = QueryLedger::new();
        let mut fails = 0;
        for _ in 0..10_000 {
            let n = r.random_range(1..30);
            let eps = 0.01 + 0.9 * r.random::<f64>();
            let mut u_raw: Vec<f64> = (0..n).map(|_| r.random()).collect();
            u_raw[0] = u_raw[0].max(0.1);
            let v_raw: Vec<f64> = (0..n).map(|_| 2.0 * r.random::<f64>() - 1.0).collect();
            let eta = s.eta(n, &[eps / 16.0], &[]);
            let u = QuantizedOracle::new("u", &u_raw, eta, 1).unwrap();
            let v = QuantizedOracle::new("v", &v_raw, eta, 1).unwrap();
            let truth = dot_ratio(&u_raw, &v_raw);
            let e = q_inner_additive(&u, &v, eps, 0.04, &s, &mut l, &mut r).unwrap();
            if e.failed {
                fails += 1;
            } else {
                assert!((e.value.value - truth).abs() <= eps, "{} {truth} {eps}", e.value.value);
                let g = u.values().iter().sum::<f64>() / u.values().iter().cloned().fold(0.0, f64::max);
                assert!((e.value.gamma_u - g).abs() <= eps / 16.0 * g * (1.0 + 1e-9));
            }
        }
        let p = 1.0 - 0.99f64.powi(4);
        let (lo, hi) = crate::stats::binomial_band(p, 10_000, 3.0);
        let f = fails as f64 / 10_000.0;
        assert!(f >= lo && f <= hi, "{f}");
    }
}

#[test]
fn additive_core_matches_one_off_estimator() {
    let mut r = rng::seeded(14);
    let s = SimConfig::exact();
    let mut l = QueryLedger::new();
    for _ in 0..200 {
        let n = r.random_range(1..20);
        let u_raw: Vec<f64> = (0..n).map(|_| 0.01 + r.random::<f64>()).map(|x: f64| x.min(1.0)).collect();
        let v_raw: Vec<f64> = (0..n).map(|_| 2.0 * r.random::<f64>() - 1.0).collect();
        let u = oracle("u", &u_raw);
        let v = oracle("v", &v_raw);
        let slow = q_inner_additive(&u, &v, 0.1, 0.1, &s, &mut l, &mut r).unwrap().value;
        let u_sum: f64 = u_raw.iter().sum();
        let u_max = u_raw.iter().cloned().fold(0.0, f64::max);
        let core = AdditiveCore::new(n, u_sum, u_max, 0.0, 0.0, 0.1, 0.1, &s).unwrap();
        let s_uv: f64 = u_raw.iter().zip(&v_raw).map(|(a, b)| a * b).sum();
        let (fast, gamma) = core.estimate(s_uv + 3.0 * u_sum, 0.0, 0.0);
        assert!((fast - slow.value).abs() < 1e-12);
        assert!((fast - dot_ratio(&u_raw, &v_raw)).abs() < 1e-12);
        assert_eq!(gamma, slow.gamma_u);
        assert_eq!(core.failure_probability(), 0.0);
    }
}

#[test]
fn ratio_bound_examples() {
    assert_eq!(ratio_error_bound(0.0, 0.0).unwrap(), 0.0);
    assert!((ratio_error_bound(0.05, 0.05).unwrap() - 0.1 / 0.95).abs() < 1e-15);
    assert!(ratio_error_bound(0.1, 1.0).is_err());
    // a = 10, a~ = 10.5, b = 2, b~ = 1.9: both at 5 %, the bound is attained.
    let dev = (10.5f64 / 1.9 - 10.0 / 2.0).abs();
    let bound = ratio_error_bound(0.05, 0.05).unwrap() * 5.0;
    assert!((dev - 0.5263157894736842).abs() < 1e-12);
    assert!(dev <= bound + 1e-12);
}

#[test]
fn ratio_bound_property() {
    let mut r = rng::seeded(15);
    for _ in 0..100_000 {
        let a = 0.01 + 10.0 * r.random::<f64>();
        let b = 0.01 + 10.0 * r.random::<f64>();
        let ea = 0.99 * r.random::<f64>();
        let eb = 0.99 * r.random::<f64>();
        let at = a * (1.0 + ea * (2.0 * r.random::<f64>() - 1.0));
        let bt = b * (1.0 + eb * (2.0 * r.random::<f64>() - 1.0));
        let bound = ratio_error_bound(ea, eb).unwrap() * (a / b);
        assert!((at / bt - a / b).abs() <= bound * (1.0 + 1e-12));
    }
}
