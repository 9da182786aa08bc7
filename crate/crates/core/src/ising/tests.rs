use rand::Rng;

use super::*;
use crate::rng;
use crate::stats::{binomial_band, tv_distance_counts};

fn random_model(n: usize, scale: f64, r: &mut impl Rng) -> IsingModel {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < 0.5 {
                edges.push((i, j, scale * (2.0 * r.random::<f64>() - 1.0)));
            }
        }
    }
    let theta = (0..n).map(|_| scale * (2.0 * r.random::<f64>() - 1.0)).collect();
    IsingModel::from_edges(n, &edges, theta).unwrap()
}

#[test]
fn width_examples() {
    assert_eq!(IsingModel::from_edges(3, &[], vec![0.0; 3]).unwrap().width(), 0.0);
    assert_eq!(IsingModel::from_edges(2, &[], vec![0.3, -0.5]).unwrap().width(), 0.5);
    let mut r = rng::seeded(1);
    for _ in 0..50 {
        let m = random_model(7, 0.4, &mut r);
        let mut best: f64 = 0.0;
        for i in 0..7 {
            let mut s = m.theta()[i].abs();
            for j in 0..7 {
                s += m.a_ij(i, j).abs();
            }
            best = best.max(s);
        }
        assert!((m.width() - best).abs() < 1e-15);
    }
}

#[test]
fn model_validation_and_json() {
    assert!(IsingModel::new(2, vec![0.0, 0.1, 0.2, 0.0], vec![0.0; 2]).is_err());
    assert!(IsingModel::new(2, vec![0.1, 0.0, 0.0, 0.0], vec![0.0; 2]).is_err());
    assert!(IsingModel::from_edges(3, &[(0, 0, 0.1)], vec![0.0; 3]).is_err());
    let m = IsingModel::from_edges(3, &[(0, 2, 0.25), (1, 2, -0.5)], vec![0.1, 0.0, -0.2]).unwrap();
    let back = IsingModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back, m);
    let parsed = IsingModel::from_json(r#"{"n": 3, "edges": [[2, 0, 0.25], [1, 2, -0.5]]}"#).unwrap();
    assert_eq!(parsed.a(), m.a());
    assert_eq!(parsed.theta(), &[0.0; 3]);
}

#[test]
fn ring_with_chords_shape() {
    let m = IsingModel::ring_with_chords(10, 0.2).unwrap();
    assert!((0..10).all(|i| m.degree(i) <= 3));
    assert_eq!(m.edges().len(), 13);
    assert!((m.width() - 0.6).abs() < 1e-15);
}

#[test]
fn state_indexing_round_trips() {
    let mut z = [0i8; 5];
    for s in 0..32 {
        state_spins(s, 5, &mut z);
        assert_eq!(state_index(&z), s);
    }
}

#[test]
fn exact_sampler_independent_spins() {
    let mut r = rng::seeded(2);
    let m = IsingModel::from_edges(4, &[], vec![0.0; 4]).unwrap();
    let s = exact_sample(&m, 20_000, &mut r).unwrap();
    for i in 0..4 {
        let mean: f64 = (0..s.len()).map(|k| s.sample(k)[i] as f64).sum::<f64>() / s.len() as f64;
        assert!(mean.abs() < 3.0 / (s.len() as f64).sqrt());
    }
    let one = IsingModel::from_edges(1, &[], vec![0.5]).unwrap();
    let n = 100_000;
    let s = exact_sample(&one, n, &mut r).unwrap();
    let up = (0..n).filter(|&k| s.sample(k)[0] == 1).count() as f64 / n as f64;
    let p = 0.5f64.exp() / (0.5f64.exp() + (-0.5f64).exp());
    let (lo, hi) = binomial_band(p, n as u64, 3.0);
    assert!(up >= lo && up <= hi, "{up}");
}

#[test]
fn exact_distribution_matches_brute_force() {
    let mut r = rng::seeded(3);
    let m = random_model(3, 0.5, &mut r);
    let p = exact_distribution(&m).unwrap();
    let mut z = [0i8; 3];
    let mut w = Vec::new();
    for s in 0..8 {
        state_spins(s, 3, &mut z);
        let mut e = 0.0;
        for i in 0..3 {
            e += m.theta()[i] * z[i] as f64;
            for j in 0..3 {
                if i != j {
                    e += m.a_ij(i, j) * (z[i] * z[j]) as f64;
                }
            }
        }
        w.push(e.exp());
    }
    let total: f64 = w.iter().sum();
    for (a, b) in p.iter().zip(&w) {
        assert!((a - b / total).abs() < 1e-14);
    }
    let s = exact_sample(&m, 1_000_000, &mut r).unwrap();
    assert!(tv_distance_counts(&s.state_counts().unwrap(), &p) <= 0.01);
    assert!(exact_distribution(&IsingModel::from_edges(21, &[], vec![0.0; 21]).unwrap()).is_err());
}

#[test]
fn gibbs_independent_spins_closed_form() {
    let mut r = rng::seeded(4);
    let m = IsingModel::from_edges(2, &[], vec![0.4, -0.3]).unwrap();
    let n = 50_000;
    let s = gibbs_sample(&m, n, 10, 1, &mut r).unwrap();
    for (i, th) in [0.4f64, -0.3].iter().enumerate() {
        let p = th.exp() / (th.exp() + (-th).exp());
        let up = (0..n).filter(|&k| s.sample(k)[i] == 1).count() as f64 / n as f64;
        let (lo, hi) = binomial_band(p, n as u64, 3.0);
        assert!(up >= lo && up <= hi);
    }
    assert!(gibbs_sample(&m, 10, 0, 1, &mut r).is_err());
    assert!(gibbs_sample(&m, 10, 1, 0, &mut r).is_err());
}

#[test]
fn gibbs_matches_enumeration() {
    let mut r = rng::seeded(5);
    let m = random_model(5, 0.3, &mut r);
    let p = exact_distribution(&m).unwrap();
    let s = gibbs_sample(&m, 100_000, 1000, 1, &mut r).unwrap();
    assert!(tv_distance_counts(&s.state_counts().unwrap(), &p) <= 0.02);
}

#[test]
fn sweep_kernel_fixes_stationary_law() {
    let mut r = rng::seeded(6);
    for n in 1..=4 {
        let m = random_model(n, 0.6, &mut r);
        let p = exact_distribution(&m).unwrap();
        let k = sweep_kernel(&m).unwrap();
        let s = 1 << n;
        for a in 0..s {
            let row: f64 = k[a * s..(a + 1) * s].iter().sum();
            assert!((row - 1.0).abs() < 1e-12);
        }
        for b in 0..s {
            let pk: f64 = (0..s).map(|a| p[a] * k[a * s + b]).sum();
            assert!((pk - p[b]).abs() < 1e-10);
        }
    }
}

#[test]
fn glm_problem_examples() {
    let s = IsingSampleSet::new(3, vec![1, -1, 1, -1, 1, 1], Provenance::File).unwrap();
    let t = to_glm_problem(&s, 1, FeatureLayout { bias: true, sign_double: false }).unwrap();
    assert_eq!(t.row(0), &[1.0, 1.0, 1.0]);
    assert_eq!(t.label(0), 1.0);
    assert_eq!(t.row(1), &[-1.0, 1.0, 1.0]);
    assert_eq!(t.label(1), 0.0);
    assert!(to_glm_problem(&s, 3, FeatureLayout::default()).is_err());
    assert!(IsingSampleSet::new(2, vec![1, 0], Provenance::File).is_err());
}

#[test]
fn glm_conditional_means_match_sigmoid() {
    let mut r = rng::seeded(7);
    let m = random_model(4, 0.5, &mut r);
    let s = exact_sample(&m, 200_000, &mut r).unwrap();
    let j = 2;
    let t = to_glm_problem(&s, j, FeatureLayout::raw()).unwrap();
    let mut sum = [0.0f64; 8];
    let mut cnt = [0u64; 8];
    for i in 0..t.len() {
        let x = t.row(i);
        let b = x.iter().enumerate().fold(0, |acc, (k, &v)| if v > 0.0 { acc | (1 << k) } else { acc });
        sum[b] += t.label(i);
        cnt[b] += 1;
    }
    let others: Vec<usize> = (0..4).filter(|&k| k != j).collect();
    for b in 0..8 {
        if cnt[b] < 5000 {
            continue;
        }
        let x: Vec<f64> = (0..3).map(|k| if (b >> k) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let wx: f64 = others.iter().zip(&x).map(|(&k, &xk)| -4.0 * m.a_ij(j, k) * xk).sum();
        let p = sigmoid(wx - 2.0 * m.theta()[j]);
        let (lo, hi) = binomial_band(p, cnt[b], 4.0);
        let emp = sum[b] / cnt[b] as f64;
        assert!(emp >= lo && emp <= hi, "{b}: {emp} vs {p}");
    }
}

#[test]
fn sample_csv_round_trip() {
    let mut r = rng::seeded(8);
    let m = random_model(4, 0.3, &mut r);
    let s = exact_sample(&m, 50, &mut r).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let back = IsingSampleSet::read_csv(&buf[..]).unwrap();
    assert_eq!(back.len(), 50);
    for i in 0..50 {
        assert_eq!(back.sample(i), s.sample(i));
    }
    assert!(IsingSampleSet::read_csv(&b"1,-1\n1,2\n"[..]).is_err());
}

#[test]
fn max_abs_error_examples() {
    let a = vec![0.0, 0.2, 0.2, 0.0];
    assert_eq!(max_abs_error(&a, &a).unwrap(), 0.0);
    let mut b = a.clone();
    b[1] += 0.07;
    assert!((max_abs_error(&a, &b).unwrap() - 0.07).abs() < 1e-15);
    assert!(max_abs_error(&a, &b[..3]).is_err());
}

#[test]
fn budget_formula_and_overrides() {
    let mut cfg = IsingLearnConfig::new(0.6, 0.1, 0.1, Backend::Classical);
    let b = cfg.budget(10, 1000);
    assert_eq!(b.glm_epsilon, 0.1 * 0.1 / 8.0);
    assert!(!b.sufficient);
    assert_eq!(b.used_t + b.used_m, 1000);
    cfg.rounds = Some(300);
    cfg.risk_samples = Some(100);
    let b = cfg.budget(10, 1000);
    assert!(b.sufficient);
    assert_eq!((b.used_t, b.used_m), (300, 100));
    // Larger width bounds never need fewer samples.
    let small = IsingLearnConfig::new(0.3, 0.1, 0.1, Backend::Classical).budget(10, 0);
    let large = IsingLearnConfig::new(0.9, 0.1, 0.1, Backend::Classical).budget(10, 0);
    assert!(large.required_t >= small.required_t && large.required_m >= small.required_m);
}

#[test]
fn learn_zero_model() {
    let mut r = rng::seeded(9);
    let m = IsingModel::from_edges(4, &[], vec![0.0; 4]).unwrap();
    let s = exact_sample(&m, 6000, &mut r).unwrap();
    let mut cfg = IsingLearnConfig::new(0.3, 0.1, 0.1, Backend::Classical);
    cfg.rounds = Some(5000);
    cfg.risk_samples = Some(1000);
    let l = learn_ising(&s, &cfg, &mut r).unwrap();
    assert!(max_abs_error(&l.a_star, m.a()).unwrap() <= 0.1);
    assert!((0..4).all(|i| l.a_star[i * 4 + i] == 0.0));
}

#[test]
fn learn_small_ring_all_backends() {
    let mut r = rng::seeded(10);
    let m = IsingModel::ring_with_chords(6, 0.2).unwrap();
    let s = exact_sample(&m, 22_000, &mut r).unwrap();
    for backend in [Backend::Classical, Backend::ClassicalApprox, Backend::QuantumSim] {
        let mut cfg = IsingLearnConfig::new(m.width(), 0.1, 0.1, backend);
        cfg.rounds = Some(20_000);
        cfg.risk_samples = Some(2000);
        let l = learn_ising(&s, &cfg, &mut rng::seeded(11)).unwrap();
        let err = max_abs_error(&l.a_star, m.a()).unwrap();
        assert!(err <= 0.1, "{backend:?}: {err}");
        assert_eq!(l.ledger.is_some(), backend == Backend::QuantumSim);
    }
}
