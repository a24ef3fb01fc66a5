//! The subcommands. Each returns a serializable report; `run` and
//! `make-synthetic` also write files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use serde::Serialize;

use spag::concentration::{
    default_probe_points, empirical_hessian_gap, full_hessian_quadratic, mu_quadratic,
    sandwich_check_with, BoundRegistry, BoundReport, BoundsInput,
};
use spag::data::{
    make_sparse_synthetic, make_synthetic, normalize_rows, parse_libsvm, subsample, write_libsvm,
    SyntheticKind,
};
use spag::harness::{
    local_init, reference_solution, rounds_to_target, run_experiment, write_csv, ReferenceSolution,
    REFERENCE_TOL,
};
use spag::tuning::{tune_agd, tune_mu, AgdChoice, TuneOutcome, TuneSettings};
use spag::{
    AlgorithmParams, AlgorithmRegistry, Cluster, LossKind, RegularizedLoss, SparseDataset, StopRule,
};

use crate::config::{ConcentrationConfig, Design, Init, KvConfig, MuSetting, RunConfig};
use crate::CliError;

fn synthetic_kind(loss: LossKind) -> SyntheticKind {
    match loss {
        LossKind::Logistic => SyntheticKind::Logistic,
        LossKind::Squared => SyntheticKind::Squared,
    }
}

/// The configured dataset: loaded from `dataset` or generated from `seed`.
pub fn load_dataset(cfg: &RunConfig) -> Result<SparseDataset, CliError> {
    let ds = match &cfg.dataset {
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::io(path, e))?;
            parse_libsvm(BufReader::new(f), None).map_err(|e| match e {
                spag::Error::Parse { line, msg } => {
                    CliError::config("dataset", format!("{path}:{line}: {msg}"))
                }
                other => other.into(),
            })?
        }
        None => {
            let kind = synthetic_kind(cfg.loss);
            match cfg.design {
                Design::Dense => make_synthetic(cfg.d, cfg.examples, kind, cfg.decay, cfg.seed)?,
                Design::Sparse => {
                    make_sparse_synthetic(cfg.d, cfg.examples, kind, cfg.decay, cfg.seed)?
                }
            }
        }
    };
    match cfg.normalize {
        Some(r) => Ok(normalize_rows(ds, r)?),
        None => Ok(ds),
    }
}

fn cluster_for(cfg: &RunConfig, ds: &SparseDataset, mu: f64) -> spag::Result<Cluster> {
    let loss = RegularizedLoss::new(cfg.loss, cfg.lambda)?;
    Cluster::build(ds.clone(), loss, cfg.m, cfg.n, mu, cfg.seed.wrapping_add(1))
}

fn algorithm_params(cfg: &RunConfig) -> AlgorithmParams {
    AlgorithmParams {
        g_min: cfg.g_min,
        t0: cfg.t0,
        inner_tol: cfg.inner_tol,
        max_inner_passes: cfg.max_inner_passes,
        dane_eta: cfg.dane_eta,
        hb_beta: cfg.hb_beta,
        agd_step: cfg.agd_step,
        agd_momentum: cfg.agd_momentum,
        ..AlgorithmParams::default()
    }
}

fn tune_settings(cfg: &RunConfig) -> TuneSettings {
    TuneSettings {
        probe_iters: cfg.probe_iters,
        ..TuneSettings::for_sample_size(cfg.n)
    }
}

/// Dataset, reference solution, starting point and, for `mu = auto`, the
/// tuning outcome.
struct Prepared {
    dataset: SparseDataset,
    reference: ReferenceSolution,
    x0: Vec<f64>,
    mu: f64,
    tuning: Option<TuneOutcome>,
}

fn prepare(cfg: &RunConfig, force_tune: bool) -> Result<Prepared, CliError> {
    let dataset = load_dataset(cfg)?;
    let settings = tune_settings(cfg);
    let probe_mu = match cfg.mu {
        MuSetting::Value(v) if !force_tune => v,
        _ => settings.start_mu,
    };
    let base = cluster_for(cfg, &dataset, probe_mu)?;
    let reference = reference_solution(&base, REFERENCE_TOL)?;
    let x0 = match cfg.init {
        Init::Local => local_init(&base)?,
        Init::Zero => vec![0.0; base.dim()],
    };
    let (mu, tuning) = match cfg.mu {
        MuSetting::Value(v) if !force_tune => (v, None),
        _ => {
            let params = algorithm_params(cfg);
            let out = tune_mu(
                |mu| cluster_for(cfg, &dataset, mu),
                &params,
                &x0,
                &reference,
                settings,
            )?;
            (out.mu, Some(out))
        }
    };
    Ok(Prepared {
        dataset,
        reference,
        x0,
        mu,
        tuning,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    /// `ok`, or `failed` when the run stopped on an error.
    pub status: String,
    pub error: Option<String>,
    pub iterations: usize,
    pub total_rounds: usize,
    pub final_suboptimality: Option<f64>,
    pub rounds_to_target: Option<usize>,
    pub mu: f64,
    pub mu_tuning: Option<TuneOutcome>,
    pub agd_tuning: Option<AgdChoice>,
    pub phi_star: f64,
    pub reference_grad_norm: f64,
    pub csv: String,
    pub config: BTreeMap<String, String>,
}

impl RunSummary {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Runs one algorithm, writes its CSV to `cfg.output` and summarizes it.
/// A run that diverges still writes the records it made and reports
/// `status = failed`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let prep = prepare(cfg, false)?;
    let mut cluster = cluster_for(cfg, &prep.dataset, prep.mu)?;
    let mut params = algorithm_params(cfg);
    let mut agd_tuning = None;
    if cfg.algorithm == "agd" && cfg.agd_tune {
        let target = cfg.target.unwrap_or(1e-6);
        let choice = tune_agd(
            &mut cluster,
            &prep.x0,
            &prep.reference,
            cfg.max_iters,
            target,
        )?;
        params.agd_step = Some(choice.step);
        params.agd_momentum = Some(choice.momentum);
        agd_tuning = Some(choice);
        cluster.reset_ledger();
    }
    let mut algo = AlgorithmRegistry::builtin().create(
        &cfg.algorithm,
        &params,
        &mut cluster,
        prep.x0.clone(),
    )?;
    let stop = StopRule {
        max_iters: cfg.max_iters,
        target_subopt: cfg.target,
        wall_clock: cfg.wall_clock,
    };
    let (records, error) = match run_experiment(
        &mut cluster,
        algo.as_mut(),
        stop,
        Some(&prep.reference),
        false,
    ) {
        Ok(out) => (out.records, None),
        Err(f) => (f.partial.records, Some(f.error.to_string())),
    };
    let file = File::create(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    let mut w = BufWriter::new(file);
    write_csv(&records, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&cfg.output, e))?;
    let last = records.last();
    Ok(RunSummary {
        algorithm: cfg.algorithm.clone(),
        status: if error.is_some() { "failed" } else { "ok" }.into(),
        error,
        iterations: last.map_or(0, |r| r.iter),
        total_rounds: last.map_or(0, |r| r.comm_rounds),
        final_suboptimality: last.and_then(|r| r.suboptimality),
        rounds_to_target: cfg.target.and_then(|t| rounds_to_target(&records, t)),
        mu: prep.mu,
        mu_tuning: prep.tuning,
        agd_tuning,
        phi_star: prep.reference.phi_star,
        reference_grad_norm: prep.reference.grad_norm,
        csv: cfg.output.clone(),
        config: cfg.pairs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub mu: f64,
    pub rule: String,
    pub settings: TuneSettings,
    pub trace: Vec<spag::tuning::MuTrial>,
    pub reference_grad_norm: f64,
    pub config: BTreeMap<String, String>,
}

/// The μ search from `0.1/n`, ignoring any fixed `mu` in the config.
pub fn cmd_tune_mu(cfg: &RunConfig) -> Result<TuneReport, CliError> {
    cfg.validate()?;
    let prep = prepare(cfg, true)?;
    let out = prep.tuning.expect("forced tuning");
    Ok(TuneReport {
        mu: out.mu,
        rule: out.rule,
        settings: tune_settings(cfg),
        trace: out.trace,
        reference_grad_norm: prep.reference.grad_norm,
        config: cfg.pairs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub n: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeOutput {
    pub report: BoundReport,
    /// `μ` at `n`, `2n` and `4n` (points beyond `N` are skipped).
    pub sweep: Vec<SweepPoint>,
    pub monotone_in_n: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsOutput {
    pub input: BoundsInput,
    pub regimes: Vec<RegimeOutput>,
}

/// One regime, or all of them when `regime` is `None`.
pub fn cmd_bounds(input: &BoundsInput, regime: Option<&str>) -> Result<BoundsOutput, CliError> {
    input.validate()?;
    let registry = BoundRegistry::builtin();
    let names: Vec<&str> = match regime {
        Some(r) => vec![registry.get(r)?.name()],
        None => registry.names(),
    };
    let mut regimes = Vec::new();
    for name in names {
        let rule = registry.get(name)?;
        let report = rule.compute(input)?;
        let mut sweep = Vec::new();
        for k in [1.0, 2.0, 4.0] {
            let n = input.n * k;
            if n > input.big_n {
                break;
            }
            let mu = rule.mu(&BoundsInput { n, ..*input })?;
            sweep.push(SweepPoint { n, mu });
        }
        let monotone_in_n = sweep.windows(2).all(|w| w[1].mu <= w[0].mu);
        regimes.push(RegimeOutput {
            report,
            sweep,
            monotone_in_n,
        });
    }
    Ok(BoundsOutput {
        input: *input,
        regimes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichSummary {
    pub mu: f64,
    pub regime: String,
    pub draws: usize,
    pub passes: usize,
    pub pass_rate: f64,
    pub worst_lower_margin: f64,
    pub worst_upper_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapSummary {
    pub n: usize,
    pub n_large: usize,
    pub median_gap: f64,
    pub median_gap_large: f64,
    /// `median(4n) / median(n)`; about 1/2 under √n concentration.
    pub ratio: f64,
    pub converged: bool,
    /// The gaps are maxima over sampled probes, so they underestimate the
    /// supremum over the ball.
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub feature_bound: f64,
    pub sandwich: Option<SandwichSummary>,
    pub gap: Option<GapSummary>,
    pub config: BTreeMap<String, String>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn median_gap(
    cfg: &ConcentrationConfig,
    loss: &RegularizedLoss,
    ds: &SparseDataset,
    probes: &[Vec<f64>],
    n: usize,
    salt: u64,
) -> Result<(f64, bool), CliError> {
    let mut gaps = Vec::with_capacity(cfg.gap_draws);
    let mut converged = true;
    for k in 0..cfg.gap_draws as u64 {
        let seed = cfg.seed.wrapping_add(salt).wrapping_add(k);
        let sample = subsample(ds.n_examples(), n, seed)?;
        let est = empirical_hessian_gap(loss, ds, &sample.indices, probes, cfg.power_iters, seed)?;
        converged &= est.converged;
        gaps.push(est.value);
    }
    Ok((median(gaps), converged))
}

/// Monte Carlo sandwich checks at the quadratic bound (squared loss only)
/// and the `n` versus `4n` gap scaling study.
pub fn cmd_verify_concentration(
    cfg: &ConcentrationConfig,
) -> Result<ConcentrationReport, CliError> {
    cfg.validate()?;
    let loss = RegularizedLoss::new(cfg.loss, cfg.lambda)?;
    let ds = make_synthetic(
        cfg.d,
        cfg.examples,
        synthetic_kind(cfg.loss),
        cfg.decay,
        cfg.seed,
    )?;
    let r = ds.max_row_norm();
    let input = BoundsInput {
        r,
        n: cfg.n as f64,
        big_n: cfg.examples as f64,
        d: cfg.d as f64,
        delta: cfg.delta,
        lambda: cfg.lambda,
        ..BoundsInput::default()
    };
    let sandwich = if cfg.loss == LossKind::Squared {
        let mu = mu_quadratic(&input)?.mu;
        let h_big = full_hessian_quadratic(&loss, &ds)?;
        let (mut passes, mut lo, mut hi) = (0, f64::INFINITY, f64::INFINITY);
        for k in 0..cfg.draws as u64 {
            let sample = subsample(
                ds.n_examples(),
                cfg.n,
                cfg.seed.wrapping_add(1).wrapping_add(k),
            )?;
            let c = sandwich_check_with(&loss, &ds, &h_big, &sample.indices, mu)?;
            passes += usize::from(c.holds);
            lo = lo.min(c.lower_margin);
            hi = hi.min(c.upper_margin);
        }
        Some(SandwichSummary {
            mu,
            regime: "quadratic".into(),
            draws: cfg.draws,
            passes,
            pass_rate: passes as f64 / cfg.draws as f64,
            worst_lower_margin: lo,
            worst_upper_margin: hi,
        })
    } else {
        None
    };
    let gap = if cfg.gap_draws > 0 {
        let probes = match cfg.loss {
            LossKind::Squared => vec![vec![0.0; cfg.d]],
            LossKind::Logistic => default_probe_points(cfg.d, 1.0, cfg.probes, cfg.seed, None),
        };
        let n_large = (4 * cfg.n).min(cfg.examples);
        let (m1, c1) = median_gap(cfg, &loss, &ds, &probes, cfg.n, 1 << 20)?;
        let (m4, c4) = median_gap(cfg, &loss, &ds, &probes, n_large, 1 << 21)?;
        Some(GapSummary {
            n: cfg.n,
            n_large,
            median_gap: m1,
            median_gap_large: m4,
            ratio: if m1 > 0.0 { m4 / m1 } else { 0.0 },
            converged: c1 && c4,
            note: "maximum over probe points; an underestimate of the supremum over the ball"
                .into(),
        })
    } else {
        None
    };
    Ok(ConcentrationReport {
        feature_bound: r,
        sandwich,
        gap,
        config: cfg.pairs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SyntheticReport {
    pub path: String,
    pub examples: usize,
    pub features: usize,
    pub max_row_norm: f64,
    pub config: BTreeMap<String, String>,
}

/// Writes the configured synthetic dataset to `cfg.output` in LibSVM form.
pub fn cmd_make_synthetic(cfg: &RunConfig) -> Result<SyntheticReport, CliError> {
    cfg.validate()?;
    if cfg.dataset.is_some() {
        return Err(CliError::config(
            "dataset",
            "make-synthetic generates data; unset `dataset`",
        ));
    }
    let ds = load_dataset(cfg)?;
    let file = File::create(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    let mut w = BufWriter::new(file);
    write_libsvm(&ds, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&cfg.output, e))?;
    Ok(SyntheticReport {
        path: cfg.output.clone(),
        examples: ds.n_examples(),
        features: ds.n_features(),
        max_row_norm: ds.max_row_norm(),
        config: cfg.pairs(),
    })
}
