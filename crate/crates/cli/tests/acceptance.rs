//! The acceptance suite. Each test prints one PASS/FAIL line straight to
//! stderr so the verdicts show up without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use spag::algorithms::{harmonic_lower_bound, theoretical_rate_certificate, Spag};
use spag::bregman::relative_constants_quadratic;
use spag::concentration::{
    default_probe_points, mu_bounded, mu_hoeffding, mu_quadratic, mu_subgaussian,
    sandwich_check_quadratic, BoundsInput,
};
use spag::data::{make_sparse_synthetic, make_synthetic, SyntheticKind};
use spag::harness::{
    local_init, reference_solution, rounds_to_target, run_experiment, IterationRecord,
    ReferenceSolution, REFERENCE_TOL,
};
use spag::linalg::{dist, norm};
use spag::losses::DataView;
use spag::tuning::{tune_agd, tune_mu, TuneSettings};
use spag::{
    AlgorithmParams, AlgorithmRegistry, Cluster, LossKind, Optimizer, RegularizedLoss,
    SparseDataset, StopRule,
};
use spag_cli::config::{ConcentrationConfig, KvConfig, MuSetting, RunConfig};
use spag_cli::{cmd_run, cmd_verify_concentration};

fn verdict(id: u32, title: &str, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let in_budget = elapsed <= budget;
    let line = format!(
        "ACCEPTANCE #{id:<2} {} {title}: {detail} [{:.1}s of {:.0}s{}]\n",
        if pass && in_budget { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if in_budget { "" } else { ", over budget" },
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass && in_budget, "{line}");
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b) / norm(b).max(f64::MIN_POSITIVE)
}

/// Rounds to `target`, or infinity when the budget ran out first.
fn rounds(records: &[IterationRecord], target: f64) -> f64 {
    rounds_to_target(records, target).map_or(f64::INFINITY, |r| r as f64)
}

fn stop(max_iters: usize, target: Option<f64>) -> StopRule {
    StopRule {
        max_iters,
        target_subopt: target,
        wall_clock: false,
    }
}

struct Instance {
    dataset: SparseDataset,
    loss: RegularizedLoss,
    m: usize,
    n: usize,
    seed: u64,
}

impl Instance {
    fn sparse_logistic(d: usize, lambda: f64, m: usize, n: usize, data_seed: u64) -> Self {
        Instance {
            dataset: make_sparse_synthetic(d, 20_000, SyntheticKind::Logistic, 0.92, data_seed)
                .unwrap(),
            loss: RegularizedLoss::new(LossKind::Logistic, lambda).unwrap(),
            m,
            n,
            seed: 3,
        }
    }

    fn cluster(&self, mu: f64) -> spag::Result<Cluster> {
        Cluster::build(
            self.dataset.clone(),
            self.loss,
            self.m,
            self.n,
            mu,
            self.seed,
        )
    }

    /// Reference solution, local initialization and tuned `μ` (60 probe
    /// iterations).
    fn prepare(&self) -> (ReferenceSolution, Vec<f64>, f64) {
        let base = self.cluster(0.1 / self.n as f64).unwrap();
        let reference = reference_solution(&base, REFERENCE_TOL).unwrap();
        let x0 = local_init(&base).unwrap();
        let settings = TuneSettings {
            probe_iters: 60,
            ..TuneSettings::for_sample_size(self.n)
        };
        let tuned = tune_mu(
            |mu| self.cluster(mu),
            &AlgorithmParams::default(),
            &x0,
            &reference,
            settings,
        )
        .unwrap();
        (reference, x0, tuned.mu)
    }
}

fn run_named(
    name: &str,
    params: &AlgorithmParams,
    cluster: &mut Cluster,
    x0: &[f64],
    reference: &ReferenceSolution,
    rule: StopRule,
) -> Vec<IterationRecord> {
    let mut algo = AlgorithmRegistry::builtin()
        .create(name, params, cluster, x0.to_vec())
        .unwrap();
    match run_experiment(cluster, algo.as_mut(), rule, Some(reference), false) {
        Ok(out) => out.records,
        Err(f) => f.partial.records,
    }
}

#[test]
fn criterion_01_calculus() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for kind in [SyntheticKind::Logistic, SyntheticKind::Squared] {
        let ds = make_synthetic(8, 60, kind, 0.9, 17).unwrap();
        let loss_kind = match kind {
            SyntheticKind::Logistic => LossKind::Logistic,
            SyntheticKind::Squared => LossKind::Squared,
        };
        let loss = RegularizedLoss::new(loss_kind, 1e-3).unwrap();
        let view = DataView::full(&ds);
        let points = default_probe_points(8, 2.0, 21, 23, None);
        let dirs = default_probe_points(8, 1.0, 20, 29, None);
        for (x, v) in points[1..].iter().zip(&dirs[1..]) {
            let h = 1e-5;
            let g = loss.gradient(view, x).unwrap();
            let fd: Vec<f64> = (0..8)
                .map(|j| {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[j] += h;
                    xm[j] -= h;
                    (loss.value(view, &xp).unwrap() - loss.value(view, &xm).unwrap()) / (2.0 * h)
                })
                .collect();
            worst = worst.max(rel_err(&fd, &g));
            let hv = loss.hessian_vec_product(view, x, v).unwrap();
            let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
            let gp = loss.gradient(view, &xp).unwrap();
            let gm = loss.gradient(view, &xm).unwrap();
            let fd_hv: Vec<f64> = gp
                .iter()
                .zip(&gm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect();
            worst = worst.max(rel_err(&fd_hv, &hv));
        }
    }
    verdict(
        1,
        "gradients and HVPs match central differences",
        worst <= 1e-5,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("worst relative error {worst:.2e} over 20 points x 2 losses (need <= 1e-5)"),
    );
}

#[test]
fn criterion_02_one_step_preconditioning() {
    let start = Instant::now();
    let ds = make_synthetic(20, 500, SyntheticKind::Squared, 0.9, 5).unwrap();
    let loss = RegularizedLoss::new(LossKind::Squared, 0.1).unwrap();
    let mut cluster = Cluster::build(ds, loss, 1, 500, 0.0, 1).unwrap();
    let reference = reference_solution(&cluster, REFERENCE_TOL).unwrap();
    let x0 = vec![0.0; 20];
    let mut dane = AlgorithmRegistry::builtin()
        .create("dane", &AlgorithmParams::default(), &mut cluster, x0)
        .unwrap();
    dane.step(&mut cluster).unwrap();
    let err = dist(dane.x(), &reference.x_star);
    verdict(
        2,
        "DANE with m=1, mu=0 solves ridge in one step",
        err <= 1e-8,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("||x1 - x*|| = {err:.2e} (need <= 1e-8)"),
    );
}

#[test]
fn criterion_03_rate_certificate() {
    let start = Instant::now();
    let inst = Instance::sparse_logistic(50, 1e-5, 4, 2000, 11);
    let (reference, x0, mu) = inst.prepare();
    let mut cluster = inst.cluster(mu).unwrap();
    let params = AlgorithmParams {
        t0: 0,
        ..AlgorithmParams::default()
    };
    let mut spag = Spag::new(&params, &mut cluster, x0).unwrap();
    let c = spag.constants();
    let potential = |s: &Spag, cl: &Cluster| {
        let st = s.state();
        st.big_a * reference.suboptimality(cl, &st.x).unwrap()
            + st.big_b * cl.precond().divergence(&reference.x_star, &st.v)
    };
    let mut prev = potential(&spag, &cluster);
    let (mut worst_rise, mut first_rise) = (f64::NEG_INFINITY, None);
    let (mut cert_ratio, mut harm_ratio, mut b_err) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for t in 1..=200 {
        spag.step(&mut cluster).unwrap();
        let now = potential(&spag, &cluster);
        let rise = (now - prev) / prev.abs();
        if rise > 1e-8 && first_rise.is_none() {
            first_rise = Some(t);
        }
        worst_rise = worst_rise.max(rise);
        prev = now;
        let st = spag.state();
        let gains = spag.schedule_gains();
        let cert = theoretical_rate_certificate(c.sigma_rel, c.l_rel, &gains).unwrap();
        cert_ratio = cert_ratio.min(st.big_a / cert.a_lower);
        harm_ratio = harm_ratio.min(st.big_a / harmonic_lower_bound(c.l_rel, &gains));
        assert_eq!(st.log_scale, 0.0);
        b_err = b_err.max((st.big_b - (1.0 + c.sigma_rel * st.big_a)).abs() / st.big_b);
    }
    let a_ok = worst_rise <= 1e-8;
    let b_ok = cert_ratio >= 1.0 - 1e-12 && harm_ratio >= 1.0 - 1e-12;
    let c_ok = b_err <= 1e-12;
    verdict(
        3,
        "rate certificate over 200 SPAG iterations",
        a_ok && b_ok && c_ok,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "tuned mu {mu:.3e}; (a) potential max relative rise {worst_rise:.2e}, first above 1e-8 at t={first_rise:?} [{}]; \
             (b) min A/cert {cert_ratio:.3}, min A/harmonic {harm_ratio:.3} [{}]; (c) max |B-(1+sigma A)|/B {b_err:.1e} [{}]",
            if a_ok { "ok" } else { "violated" },
            if b_ok { "ok" } else { "violated" },
            if c_ok { "ok" } else { "violated" },
        ),
    );
}

/// Cumulative gradient evaluations within `2(t+1) + log2(max G)`.
fn evals_within_budget(records: &[IterationRecord]) -> bool {
    let mut max_g: f64 = 1.0;
    records.iter().all(|r| {
        if let Some(g) = r.gain {
            max_g = max_g.max(g);
        }
        r.gradient_evals as f64 <= 2.0 * (r.iter as f64 + 1.0) + max_g.log2()
    })
}

#[test]
fn criterion_04_gain_behavior() {
    let start = Instant::now();
    let ridge = Instance {
        dataset: make_sparse_synthetic(50, 20_000, SyntheticKind::Squared, 0.92, 13).unwrap(),
        loss: RegularizedLoss::new(LossKind::Squared, 1e-5).unwrap(),
        m: 4,
        n: 2000,
        seed: 3,
    };
    let mut cluster = ridge.cluster(1e-3).unwrap();
    let reference = reference_solution(&cluster, REFERENCE_TOL).unwrap();
    let x0 = local_init(&cluster).unwrap();
    let rec = run_named(
        "spag",
        &AlgorithmParams::default(),
        &mut cluster,
        &x0,
        &reference,
        stop(100, None),
    );
    let ridge_gains: Vec<f64> = rec.iter().filter_map(|r| r.gain).collect();
    let ridge_ok = ridge_gains.len() == 100 && ridge_gains.iter().all(|&g| g == 1.0);
    let ridge_evals = evals_within_budget(&rec);

    let logit = Instance::sparse_logistic(50, 1e-5, 4, 2000, 11);
    let (reference, x0, mu) = logit.prepare();
    let mut cluster = logit.cluster(mu).unwrap();
    let rec = run_named(
        "spag",
        &AlgorithmParams::default(),
        &mut cluster,
        &x0,
        &reference,
        stop(200, None),
    );
    let gains: Vec<f64> = rec.iter().filter_map(|r| r.gain).collect();
    let small = gains.iter().filter(|&&g| g <= 2.0).count() as f64 / gains.len() as f64;
    let logit_evals = evals_within_budget(&rec);
    verdict(
        4,
        "gain search behavior",
        ridge_ok && ridge_evals && small >= 0.95 && logit_evals,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "ridge G=1 at {}/{} iterations; logistic G<=2 in {:.1}% of {} iterations; evaluation budget ridge {} logistic {}",
            ridge_gains.iter().filter(|&&g| g == 1.0).count(),
            ridge_gains.len(),
            100.0 * small,
            gains.len(),
            ridge_evals,
            logit_evals
        ),
    );
}

#[test]
fn criterion_05_communication_ordering() {
    let start = Instant::now();
    let target = 1e-6;
    let small = Instance::sparse_logistic(100, 1e-6, 4, 2000, 7);
    let (reference, x0, mu) = small.prepare();
    let p = AlgorithmParams::default();
    let cluster = small.cluster(mu).unwrap();
    let spag = rounds(
        &run_named(
            "spag",
            &p,
            &mut cluster.clone(),
            &x0,
            &reference,
            stop(600, Some(target)),
        ),
        target,
    );
    let dane = rounds(
        &run_named(
            "dane",
            &p,
            &mut cluster.clone(),
            &x0,
            &reference,
            stop(4000, Some(target)),
        ),
        target,
    );
    let pgd = rounds(
        &run_named(
            "pgd",
            &p,
            &mut cluster.clone(),
            &x0,
            &reference,
            stop(2000, Some(target)),
        ),
        target,
    );
    let agd_choice = tune_agd(&mut cluster.clone(), &x0, &reference, 600, target).unwrap();
    let agd = agd_choice.rounds.map_or(f64::INFINITY, |r| r as f64);

    let large = Instance {
        n: 8000,
        ..Instance::sparse_logistic(100, 1e-6, 4, 8000, 7)
    };
    let (reference8, x8, mu8) = large.prepare();
    let mut c8 = large.cluster(mu8).unwrap();
    let dane8 = rounds(
        &run_named(
            "dane",
            &p,
            &mut c8,
            &x8,
            &reference8,
            stop(4000, Some(target)),
        ),
        target,
    );

    let pass = spag < dane && dane < pgd && spag <= agd && spag < dane8;
    verdict(
        5,
        "communication ordering on sparse logistic",
        pass,
        start.elapsed(),
        Duration::from_secs(300),
        &format!(
            "rounds to 1e-6: SPAG {spag} < DANE {dane} < PGD {pgd}; tuned AGD {agd}; DANE n=8000 {dane8} (mu {mu:.3e}, n=8000 mu {mu8:.3e})"
        ),
    );
}

#[test]
fn criterion_06_quadratic_sandwich() {
    let start = Instant::now();
    let cfg = ConcentrationConfig {
        gap_draws: 0,
        ..ConcentrationConfig::default()
    };
    let report = cmd_verify_concentration(&cfg).unwrap();
    let s = report.sandwich.unwrap();
    verdict(
        6,
        "sandwich at mu_quadratic over 100 draws",
        s.passes >= 95 && s.draws == 100,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "{}/{} draws hold (need >= 95), mu {:.4e}, worst margins {:.2e}/{:.2e}",
            s.passes, s.draws, s.mu, s.worst_lower_margin, s.worst_upper_margin
        ),
    );
}

#[test]
fn criterion_07_concentration_scaling() {
    let start = Instant::now();
    let cfg = ConcentrationConfig {
        draws: 1,
        ..ConcentrationConfig::default()
    };
    let report = cmd_verify_concentration(&cfg).unwrap();
    let gap = report.gap.unwrap();
    let input = BoundsInput {
        r: 1.0,
        n: 1e4,
        d: 10.0,
        delta: 0.1,
        lambda: 0.0,
        ..BoundsInput::default()
    };
    let ratio = mu_quadratic(&input).unwrap().mu / mu_hoeffding(&input).unwrap().mu;
    let pass = gap.n_large == 4 * gap.n && gap.ratio <= 0.65 && ratio < 0.05;
    verdict(
        7,
        "Hessian gap scales like 1/sqrt(n)",
        pass,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "median gap n={} {:.4e}, n={} {:.4e}, ratio {:.3} (need <= 0.65); mu_quadratic/mu_hoeffding {ratio:.4} (need < 0.05)",
            gap.n, gap.median_gap, gap.n_large, gap.median_gap_large, gap.ratio
        ),
    );
}

#[test]
fn criterion_08_bound_values() {
    let start = Instant::now();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let base = BoundsInput {
        r: 1.0,
        n: 1000.0,
        d: 10.0,
        delta: 0.1,
        lambda: 0.0,
        ..BoundsInput::default()
    };
    // 30-digit evaluations of each formula
    let checks = [
        (
            "quadratic",
            mu_quadratic(&base).unwrap().mu,
            0.0247254810438908,
        ),
        (
            "hoeffding",
            mu_hoeffding(&base).unwrap().mu,
            0.383882072975046,
        ),
        (
            "bounded",
            mu_bounded(&BoundsInput { n: 1e4, ..base }).unwrap().mu,
            0.0585385305928888,
        ),
        (
            "subgaussian",
            mu_subgaussian(&BoundsInput {
                d: 1.0,
                n: 1.0,
                delta: (-1.0f64).exp(),
                ..base
            })
            .unwrap()
            .mu,
            5.75992104989487,
        ),
        (
            "hb-beta",
            spag::algorithms::hb_beta(1.0, 2.0).unwrap(),
            0.305572809000084,
        ),
    ];
    let worst = checks
        .iter()
        .map(|(_, got, want)| rel(*got, *want))
        .fold(0.0, f64::max);
    let detail: Vec<String> = checks
        .iter()
        .map(|(k, got, _)| format!("{k} {got:.10}"))
        .collect();
    verdict(
        8,
        "bound calculators match high-precision values",
        worst <= 1e-5,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("{}; worst relative error {worst:.1e}", detail.join(", ")),
    );
}

#[test]
fn criterion_09_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut all_equal = true;
    let mut compared = Vec::new();
    for (algo, mu) in [
        ("spag", MuSetting::Auto),
        ("spag", MuSetting::Value(1e-3)),
        ("dane", MuSetting::Value(1e-3)),
        ("hb-dane", MuSetting::Value(1e-3)),
        ("agd", MuSetting::Value(1e-3)),
        ("pgd", MuSetting::Value(1e-3)),
    ] {
        let mut bytes = Vec::new();
        for k in 0..2 {
            let mut cfg = RunConfig::default();
            for (key, value) in [
                ("d", "30"),
                ("N", "3000"),
                ("n", "400"),
                ("lambda", "1e-4"),
                ("max_iters", "30"),
            ] {
                cfg.set(key, value).unwrap();
            }
            cfg.algorithm = algo.into();
            cfg.mu = mu;
            cfg.seed = 9;
            cfg.output = dir
                .path()
                .join(format!("{algo}-{mu}-{k}.csv"))
                .display()
                .to_string();
            cmd_run(&cfg).unwrap();
            bytes.push(std::fs::read(&cfg.output).unwrap());
        }
        all_equal &= bytes[0] == bytes[1];
        compared.push(format!("{algo}(mu={mu})"));
    }
    verdict(
        9,
        "identical config and seed give identical CSV bytes",
        all_equal,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("compared {}", compared.join(", ")),
    );
}

#[test]
fn criterion_10_dane_rate() {
    let start = Instant::now();
    let ds = make_synthetic(10, 5000, SyntheticKind::Squared, 1.0, 31).unwrap();
    let lambda = 0.05;
    let loss = RegularizedLoss::new(LossKind::Squared, lambda).unwrap();
    let n = 500;
    let input = BoundsInput {
        r: ds.max_row_norm(),
        n: n as f64,
        big_n: 5000.0,
        d: 10.0,
        delta: 0.1,
        lambda,
        ..BoundsInput::default()
    };
    let mu = mu_quadratic(&input).unwrap().mu;
    let mut cluster = Cluster::build(ds.clone(), loss, 4, n, mu, 37).unwrap();
    let sample = cluster.precond().sample().unwrap().indices.clone();
    let sandwich = sandwich_check_quadratic(&loss, &ds, &sample, mu).unwrap();
    let c = relative_constants_quadratic(lambda, mu).unwrap();
    let reference = reference_solution(&cluster, REFERENCE_TOL).unwrap();
    let x0 = vec![0.0; 10];
    let d0 = cluster.precond().divergence(&reference.x_star, &x0);
    let params = AlgorithmParams {
        constants: Some(c),
        ..AlgorithmParams::default()
    };
    let rec = run_named(
        "dane",
        &params,
        &mut cluster,
        &x0,
        &reference,
        stop(100, None),
    );
    let rate = 1.0 - 1.0 / c.kappa_rel;
    let mut worst: f64 = 0.0;
    for r in &rec {
        let bound = rate.powi(r.iter as i32) * c.l_rel * d0;
        worst = worst.max(r.suboptimality.unwrap() / bound);
    }
    verdict(
        10,
        "DANE linear rate bound",
        sandwich.holds && rec.len() == 101 && worst <= 1.0,
        start.elapsed(),
        Duration::from_secs(10),
        &format!(
            "sandwich verified {} (mu {mu:.4e}, kappa_rel {:.3}); max over t<=100 of gap/bound {worst:.3e} (need <= 1)",
            sandwich.holds, c.kappa_rel
        ),
    );
}
