//! Search procedures for `μ` and for the momentum baseline's parameters.

use serde::{Deserialize, Serialize};

use crate::algorithms::{Agd, AlgorithmParams, Spag};
use crate::error::{Error, Result};
use crate::harness::{rounds_to_target, run_experiment, Cluster, ReferenceSolution, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneSettings {
    pub start_mu: f64,
    pub factor: f64,
    /// SPAG iterations per probe.
    pub probe_iters: usize,
    pub max_trials: usize,
    /// Relative increase between consecutive suboptimalities that marks a
    /// probe unstable.
    pub increase_tol: f64,
}

impl TuneSettings {
    /// Start at `0.1/n`, factor 1.2, 20 probe iterations, 60 trials, 5%.
    pub fn for_sample_size(n: usize) -> Self {
        TuneSettings {
            start_mu: 0.1 / n as f64,
            factor: 1.2,
            probe_iters: 20,
            max_trials: 60,
            increase_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuTrial {
    pub mu: f64,
    pub stable: bool,
    pub final_subopt: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub mu: f64,
    pub trace: Vec<MuTrial>,
    pub rule: String,
}

/// Classifies a suboptimality trace; increases below `floor` are rounding.
pub fn classify_trace(subopts: &[f64], increase_tol: f64, floor: f64) -> (bool, String) {
    for (t, w) in subopts.windows(2).enumerate() {
        if !w[1].is_finite() {
            return (
                false,
                format!("non-finite suboptimality at iteration {}", t + 1),
            );
        }
        if w[1] > floor && w[1] > (1.0 + increase_tol) * w[0] {
            return (
                false,
                format!(
                    "suboptimality rose from {:e} to {:e} at iteration {}",
                    w[0],
                    w[1],
                    t + 1
                ),
            );
        }
    }
    (true, "monotone within tolerance".into())
}

fn probe(
    cluster: &mut Cluster,
    params: &AlgorithmParams,
    x0: &[f64],
    reference: &ReferenceSolution,
    s: &TuneSettings,
) -> (bool, Option<f64>, String) {
    let mut spag = match Spag::new(params, cluster, x0.to_vec()) {
        Ok(a) => a,
        Err(e) => return (false, None, e.to_string()),
    };
    let stop = StopRule {
        max_iters: s.probe_iters,
        target_subopt: None,
        wall_clock: false,
    };
    match run_experiment(cluster, &mut spag, stop, Some(reference), false) {
        Ok(out) => {
            let subs: Vec<f64> = out.records.iter().filter_map(|r| r.suboptimality).collect();
            let floor = 1e-12 * reference.phi_star.abs().max(1.0);
            let (stable, reason) = classify_trace(&subs, s.increase_tol, floor);
            (stable, subs.last().copied(), reason)
        }
        Err(f) => (false, None, f.to_string()),
    }
}

/// Multiplicative search: from `start_mu`, divide by `factor` while the
/// SPAG probe stays stable, or multiply while it is unstable; returns the
/// last stable `μ`. `make_cluster` builds the cluster for a given `μ`.
pub fn tune_mu<F>(
    mut make_cluster: F,
    params: &AlgorithmParams,
    x0: &[f64],
    reference: &ReferenceSolution,
    settings: TuneSettings,
) -> Result<TuneOutcome>
where
    F: FnMut(f64) -> Result<Cluster>,
{
    if !(settings.start_mu > 0.0 && settings.factor > 1.0) {
        return Err(Error::arg("tune", "need start_mu > 0 and factor > 1"));
    }
    let rule = format!(
        "unstable if suboptimality increases by more than {}% between consecutive probe iterations or the run fails",
        settings.increase_tol * 100.0
    );
    let mut trace = Vec::new();
    let mut mu = settings.start_mu;
    let mut direction: Option<bool> = None;
    let mut last_stable: Option<f64> = None;
    for _ in 0..settings.max_trials {
        let mut cluster = make_cluster(mu)?;
        let (stable, final_subopt, reason) = probe(&mut cluster, params, x0, reference, &settings);
        trace.push(MuTrial {
            mu,
            stable,
            final_subopt,
            reason,
        });
        let shrinking = *direction.get_or_insert(stable);
        match (shrinking, stable) {
            (true, true) => {
                last_stable = Some(mu);
                mu /= settings.factor;
            }
            (true, false) => break,
            (false, false) => mu *= settings.factor,
            (false, true) => {
                last_stable = Some(mu);
                break;
            }
        }
    }
    match last_stable {
        Some(mu) => Ok(TuneOutcome { mu, trace, rule }),
        None => Err(Error::Numerical(format!(
            "no stable mu within {} trials (tried {:?})",
            settings.max_trials,
            trace.iter().map(|t| t.mu).collect::<Vec<_>>()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgdChoice {
    pub step: f64,
    pub momentum: f64,
    pub rounds: Option<usize>,
    pub final_subopt: f64,
}

/// Grid search over step `c/L_F` and momentum `(√k−1)/(√k+1)` with
/// `k = L_F/(s·λ)`. Ranks by rounds to `target`, then final suboptimality.
pub fn tune_agd(
    cluster: &mut Cluster,
    x0: &[f64],
    reference: &ReferenceSolution,
    max_iters: usize,
    target: f64,
) -> Result<AgdChoice> {
    let l_f = cluster.smoothness()?;
    let lambda = cluster.loss().lambda;
    if !(lambda > 0.0) {
        return Err(Error::arg("lambda", "momentum tuning needs lambda > 0"));
    }
    let mut best: Option<AgdChoice> = None;
    for c in [0.5, 1.0, 2.0] {
        for s in [0.25, 1.0, 4.0] {
            let k = (l_f / (s * lambda)).max(1.0).sqrt();
            let (step, momentum) = (c / l_f, (k - 1.0) / (k + 1.0));
            let mut agd = Agd::with_params(x0.to_vec(), step, momentum)?;
            let stop = StopRule {
                max_iters,
                target_subopt: Some(target),
                wall_clock: false,
            };
            let Ok(out) = run_experiment(cluster, &mut agd, stop, Some(reference), false) else {
                continue;
            };
            let choice = AgdChoice {
                step,
                momentum,
                rounds: rounds_to_target(&out.records, target),
                final_subopt: out
                    .records
                    .last()
                    .and_then(|r| r.suboptimality)
                    .unwrap_or(f64::INFINITY),
            };
            let better = match &best {
                None => true,
                Some(b) => match (choice.rounds, b.rounds) {
                    (Some(r), Some(q)) => r < q,
                    (Some(_), None) => true,
                    (None, Some(_)) => false,
                    (None, None) => choice.final_subopt < b.final_subopt,
                },
            };
            if better {
                best = Some(choice);
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("every momentum setting diverged".into()))
}
