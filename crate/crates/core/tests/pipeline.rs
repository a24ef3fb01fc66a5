use std::cell::RefCell;
use std::io::Cursor;

use spag::data::{make_synthetic, parse_libsvm, write_libsvm, SyntheticKind};
use spag::harness::{local_init, reference_solution, run_experiment, REFERENCE_TOL};
use spag::linalg::dist;
use spag::tuning::{tune_mu, TuneSettings};
use spag::{
    AlgorithmParams, AlgorithmRegistry, Cluster, Error, LossKind, RegularizedLoss, StopRule,
};

fn ridge(d: usize, big_n: usize, lambda: f64) -> (spag::SparseDataset, RegularizedLoss) {
    (
        make_synthetic(d, big_n, SyntheticKind::Squared, 1.0, 4).unwrap(),
        RegularizedLoss::new(LossKind::Squared, lambda).unwrap(),
    )
}

fn stop(max_iters: usize) -> StopRule {
    StopRule {
        max_iters,
        target_subopt: None,
        wall_clock: false,
    }
}

#[test]
fn every_builtin_method_decreases_ridge_objective() {
    let (ds, loss) = ridge(10, 1200, 1e-2);
    let base = Cluster::build(ds, loss, 3, 300, 1e-2, 8).unwrap();
    let reference = reference_solution(&base, REFERENCE_TOL).unwrap();
    let registry = AlgorithmRegistry::builtin();
    for name in registry.names() {
        let mut cluster = base.clone();
        let x0 = vec![0.0; 10];
        let start = reference.suboptimality(&cluster, &x0).unwrap();
        let mut algo = registry
            .create(name, &AlgorithmParams::default(), &mut cluster, x0)
            .unwrap();
        let out = run_experiment(
            &mut cluster,
            algo.as_mut(),
            stop(40),
            Some(&reference),
            false,
        )
        .unwrap();
        let end = out.records.last().unwrap().suboptimality.unwrap();
        assert!(end < 1e-2 * start, "{name}: {start:e} -> {end:e}");
        assert_eq!(
            cluster.ledger().rounds,
            out.records.last().unwrap().comm_rounds,
            "{name}"
        );
    }
}

#[test]
fn spag_on_ridge_accepts_unit_gains() {
    let (ds, loss) = ridge(15, 2000, 1e-3);
    let mut cluster = Cluster::build(ds, loss, 4, 400, 5e-3, 2).unwrap();
    let reference = reference_solution(&cluster, REFERENCE_TOL).unwrap();
    let x0 = local_init(&cluster).unwrap();
    let mut spag = AlgorithmRegistry::builtin()
        .create("spag", &AlgorithmParams::default(), &mut cluster, x0)
        .unwrap();
    let out = run_experiment(
        &mut cluster,
        spag.as_mut(),
        stop(30),
        Some(&reference),
        false,
    )
    .unwrap();
    assert!(out.records[1..]
        .iter()
        .all(|r| r.gain == Some(1.0) && r.gain_trials == 1));
}

#[test]
fn exact_preconditioner_makes_dane_a_newton_step() {
    let (ds, loss) = ridge(12, 400, 0.5);
    let mut cluster = Cluster::build(ds, loss, 1, 400, 0.0, 0).unwrap();
    let reference = reference_solution(&cluster, REFERENCE_TOL).unwrap();
    let mut dane = AlgorithmRegistry::builtin()
        .create(
            "dane",
            &AlgorithmParams::default(),
            &mut cluster,
            vec![1.0; 12],
        )
        .unwrap();
    dane.step(&mut cluster).unwrap();
    assert!(dist(dane.x(), &reference.x_star) < 1e-8);
}

#[test]
fn tuning_moves_up_from_a_tiny_start() {
    let ds = make_synthetic(20, 3000, SyntheticKind::Logistic, 1.0, 6).unwrap();
    let loss = RegularizedLoss::new(LossKind::Logistic, 1e-5).unwrap();
    let build = |mu| Cluster::build(ds.clone(), loss, 4, 50, mu, 1);
    let base = build(1e-3).unwrap();
    let reference = reference_solution(&base, REFERENCE_TOL).unwrap();
    let x0 = local_init(&base).unwrap();
    let tried = RefCell::new(Vec::new());
    let settings = TuneSettings {
        start_mu: 1e-12,
        factor: 10.0,
        ..TuneSettings::for_sample_size(50)
    };
    let outcome = tune_mu(
        |mu| {
            tried.borrow_mut().push(mu);
            build(mu)
        },
        &AlgorithmParams::default(),
        &x0,
        &reference,
        settings,
    )
    .unwrap();
    let tried = tried.into_inner();
    assert!(tried.windows(2).all(|w| w[1] > w[0]));
    assert!(outcome.mu > 1e-12);
    assert!(outcome.trace.last().unwrap().stable);
    assert_eq!(outcome.trace.len(), tried.len());
}

#[test]
fn registry_reports_unknown_names_and_bad_starts() {
    let (ds, loss) = ridge(5, 100, 1e-2);
    let mut cluster = Cluster::build(ds, loss, 2, 50, 1e-2, 0).unwrap();
    let registry = AlgorithmRegistry::builtin();
    let err = registry
        .create(
            "newton",
            &AlgorithmParams::default(),
            &mut cluster,
            vec![0.0; 5],
        )
        .err()
        .unwrap();
    match err {
        Error::Unknown { name, known, .. } => {
            assert_eq!(name, "newton");
            assert!(known.contains("spag") && known.contains("hb-dane"));
        }
        other => panic!("unexpected {other}"),
    }
    assert!(registry
        .create(
            "pgd",
            &AlgorithmParams::default(),
            &mut cluster,
            vec![0.0; 4]
        )
        .is_err());
}

#[test]
fn cluster_rejects_oversized_requests() {
    let (ds, loss) = ridge(5, 100, 1e-2);
    assert!(Cluster::build(ds.clone(), loss, 101, 50, 1e-2, 0).is_err());
    assert!(Cluster::build(ds.clone(), loss, 2, 101, 1e-2, 0).is_err());
    assert!(Cluster::build(ds, loss, 2, 50, -1.0, 0).is_err());
}

#[test]
fn libsvm_round_trip_preserves_the_objective() {
    let ds = make_synthetic(7, 40, SyntheticKind::Logistic, 0.8, 12).unwrap();
    let mut buf = Vec::new();
    write_libsvm(&ds, &mut buf).unwrap();
    let back = parse_libsvm(Cursor::new(buf), Some(7)).unwrap();
    let loss = RegularizedLoss::new(LossKind::Logistic, 1e-3).unwrap();
    let a = Cluster::build(ds, loss, 2, 10, 0.1, 0).unwrap();
    let b = Cluster::build(back, loss, 2, 10, 0.1, 0).unwrap();
    let x: Vec<f64> = (0..7).map(|j| 0.1 * j as f64 - 0.3).collect();
    let (fa, fb) = (a.objective(&x).unwrap(), b.objective(&x).unwrap());
    assert!((fa - fb).abs() <= 1e-12 * fa.abs());
}
