use std::io::Write;

use approx::assert_relative_eq;
use hedgeron::hedge::{compute_beta, regret_bound, run_hedge, sampled_regret_bound, HedgeConfig, HedgeFlag, MatrixStream};
use hedgeron::ising::{exact_sample, learn_ising, max_abs_error, Backend, IsingLearnConfig, IsingModel, IsingSampleSet};
use hedgeron::rng;
use hedgeron::sparsitron::{required_m, required_t, FeatureLayout, TrainingSet};
use hedgeron::Error;

// Reference values below were evaluated at 40 significant digits.

#[test]
fn closed_forms_at_scale() {
    assert_relative_eq!(compute_beta(100, 10_000).unwrap(), 0.970_545_362_726_012_038_674_671, max_relative = 1e-14);
    assert_relative_eq!(regret_bound(100, 10_000), 308.090_596_063_017_361_540_630_461_6, max_relative = 1e-14);
    assert_relative_eq!(
        sampled_regret_bound(100, 10_000, 0.05).unwrap(),
        831.697_197_326_128_895_501_775_436_5,
        max_relative = 1e-14
    );
}

#[test]
fn sample_sizes_at_scale() {
    // 10 * 9 * ln(62 / 0.01) / 0.01 = 78590.74...
    let t = required_t(3.0, FeatureLayout::default().dim(30), 0.1, 0.1, 10.0);
    assert_eq!(t, 78_591);
    // 10 * ln(785910) / 0.01 = 13574.59...
    assert_eq!(required_m(t, 0.1, 0.1, 10.0), 13_575);
}

#[test]
fn loss_matrix_from_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "1, 0\n0, 1\n0.5, 1").unwrap();
    let mut s = MatrixStream::from_csv_path(f.path()).unwrap();
    let cfg = HedgeConfig { beta: 0.5, ..HedgeConfig::with_default_beta(2, 3, HedgeFlag::Null).unwrap() };
    let out = run_hedge(&cfg, &mut s, &mut rng::seeded(0)).unwrap();
    assert_relative_eq!(out.total_loss, 23.0 / 12.0, max_relative = 1e-15);
    assert_relative_eq!(out.regret, 5.0 / 12.0, max_relative = 1e-14);

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "0.2, 1.5").unwrap();
    assert!(matches!(MatrixStream::from_csv_path(bad.path()), Err(Error::OutOfRange { .. })));
}

#[test]
fn training_set_from_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "0.5, -1, 1\n0, 0.25, 0").unwrap();
    let set = TrainingSet::from_csv_path(f.path(), FeatureLayout::default()).unwrap();
    assert_eq!((set.len(), set.raw_dim(), set.dim()), (2, 2, 6));
    assert_eq!(set.labels(), &[1.0, 0.0]);
    assert_eq!(set.row(0), FeatureLayout::default().expand(&[0.5, -1.0]).as_slice());
}

#[test]
fn model_and_samples_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = IsingModel::ring_with_chords(6, 0.2).unwrap();
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, model.to_json().unwrap()).unwrap();
    assert_eq!(IsingModel::from_json_path(&model_path).unwrap(), model);

    let samples = exact_sample(&model, 22_000, &mut rng::seeded(1)).unwrap();
    let csv_path = dir.path().join("samples.csv");
    samples.write_csv(std::fs::File::create(&csv_path).unwrap()).unwrap();
    let back = IsingSampleSet::read_csv_path(&csv_path).unwrap();
    assert_eq!(back.n(), 6);
    assert_eq!(back.len(), samples.len());
    assert_eq!(back.state_counts().unwrap(), samples.state_counts().unwrap());

    let mut cfg = IsingLearnConfig::new(model.width(), 0.1, 0.1, Backend::Classical);
    cfg.rounds = Some(20_000);
    cfg.risk_samples = Some(2_000);
    let learned = learn_ising(&back, &cfg, &mut rng::seeded(2)).unwrap();
    assert!(max_abs_error(&learned.a_star, model.a()).unwrap() <= 0.1);
}
