//! In-process server/worker simulation with communication accounting,
//! reference solutions and the experiment loop.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::Optimizer;
use crate::bregman::Preconditioner;
use crate::data::{partition, subsample, ShardAssignment, SparseDataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, is_finite, sub};
use crate::losses::{DataView, RegularizedLoss};
use crate::newton::newton_minimize;

/// Parameters broadcast by the server for one round.
#[derive(Debug, Clone, Copy)]
pub struct Broadcast<'a> {
    pub round: usize,
    pub x: &'a [f64],
}

/// A worker's reply: its local gradient and shard size.
#[derive(Debug, Clone)]
pub struct GradientReply {
    pub worker: usize,
    pub n_examples: usize,
    pub gradient: Vec<f64>,
}

/// A worker holding one shard of the data.
#[derive(Debug, Clone)]
pub struct Worker {
    id: usize,
    shard: SparseDataset,
    loss: RegularizedLoss,
}

impl Worker {
    pub fn new(id: usize, shard: SparseDataset, loss: RegularizedLoss) -> Self {
        Worker { id, shard, loss }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn n_examples(&self) -> usize {
        self.shard.n_examples()
    }

    pub fn handle(&self, msg: Broadcast<'_>) -> Result<GradientReply> {
        Ok(GradientReply {
            worker: self.id,
            n_examples: self.shard.n_examples(),
            gradient: self.loss.gradient(DataView::full(&self.shard), msg.x)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub rounds: usize,
    pub scalars: u64,
}

/// Full dataset, its shards, the server's preconditioner and the ledger.
#[derive(Debug, Clone)]
pub struct Cluster {
    dataset: SparseDataset,
    loss: RegularizedLoss,
    shards: ShardAssignment,
    workers: Vec<Worker>,
    precond: Preconditioner,
    ledger: CommLedger,
    smoothness: Option<f64>,
}

impl Cluster {
    pub fn new(
        dataset: SparseDataset,
        loss: RegularizedLoss,
        shards: ShardAssignment,
        precond: Preconditioner,
    ) -> Result<Self> {
        loss.check_labels(&dataset)?;
        let covered: usize = shards.shards.iter().map(Vec::len).sum();
        if covered != dataset.n_examples() || shards.shards.iter().any(|s| s.is_empty()) {
            return Err(Error::arg("shards", "shards must partition the dataset"));
        }
        if precond.dim() != dataset.n_features() {
            return Err(Error::arg("precond", "dimension mismatch"));
        }
        let workers = shards
            .shards
            .iter()
            .enumerate()
            .map(|(j, rows)| Worker::new(j, dataset.select(rows), loss))
            .collect();
        Ok(Cluster {
            dataset,
            loss,
            shards,
            workers,
            precond,
            ledger: CommLedger::default(),
            smoothness: None,
        })
    }

    /// Random shards over `m` workers and a preconditioner on `n` sampled
    /// examples. Both draws are derived from `seed`.
    pub fn build(
        dataset: SparseDataset,
        loss: RegularizedLoss,
        m: usize,
        n: usize,
        mu: f64,
        seed: u64,
    ) -> Result<Self> {
        let shards = partition(dataset.n_examples(), m, seed)?;
        let sample = subsample(dataset.n_examples(), n, seed.wrapping_add(1))?;
        let precond = Preconditioner::new(loss, &dataset, sample, mu)?;
        Cluster::new(dataset, loss, shards, precond)
    }

    pub fn dataset(&self) -> &SparseDataset {
        &self.dataset
    }

    pub fn loss(&self) -> RegularizedLoss {
        self.loss
    }

    pub fn shards(&self) -> &ShardAssignment {
        &self.shards
    }

    pub fn workers(&self) -> &[Worker] {
        &self.workers
    }

    pub fn m(&self) -> usize {
        self.workers.len()
    }

    pub fn dim(&self) -> usize {
        self.dataset.n_features()
    }

    pub fn precond(&self) -> &Preconditioner {
        &self.precond
    }

    pub fn ledger(&self) -> CommLedger {
        self.ledger
    }

    pub fn reset_ledger(&mut self) {
        self.ledger = CommLedger::default();
    }

    /// One communication round: broadcast `x`, collect every worker's
    /// gradient and average them weighted by shard size, in worker order.
    pub fn aggregate_gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() || !is_finite(x) {
            return Err(Error::Numerical(
                "broadcast point is not a finite d-vector".into(),
            ));
        }
        let msg = Broadcast {
            round: self.ledger.rounds,
            x,
        };
        let replies = self
            .workers
            .iter()
            .map(|w| w.handle(msg))
            .collect::<Result<Vec<_>>>()?;
        let total = self.dataset.n_examples() as f64;
        let mut agg = vec![0.0; x.len()];
        for r in &replies {
            let w = r.n_examples as f64 / total;
            for (a, g) in agg.iter_mut().zip(&r.gradient) {
                *a += w * g;
            }
        }
        let d = x.len() as u64;
        self.ledger.rounds += 1;
        self.ledger.scalars += 2 * self.workers.len() as u64 * d;
        Ok(agg)
    }

    /// `Φ(x)` over the full dataset; instrumentation only, not a round.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        self.loss.value(DataView::full(&self.dataset), x)
    }

    /// `∇Φ(x)` over the full dataset; instrumentation only, not a round.
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.loss.gradient(DataView::full(&self.dataset), x)
    }

    /// Upper bound on the smoothness of `Φ`, cached after the first call.
    pub fn smoothness(&mut self) -> Result<f64> {
        if let Some(l) = self.smoothness {
            return Ok(l);
        }
        let l = self
            .loss
            .smoothness_upper_bound(DataView::full(&self.dataset))?;
        self.smoothness = Some(l);
        Ok(l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    pub phi_star: f64,
    /// `∇Φ(x*)`, kept for the accurate suboptimality formula.
    pub grad_star: Vec<f64>,
    pub grad_norm: f64,
    pub method: String,
}

impl ReferenceSolution {
    /// `Φ(x) − Φ(x*)` computed as `D_Φ(x, x*) + ∇Φ(x*)ᵀ(x − x*)`, which
    /// avoids cancellation between two nearly equal objective values.
    pub fn suboptimality(&self, cluster: &Cluster, x: &[f64]) -> Result<f64> {
        let view = DataView::full(cluster.dataset());
        let breg = cluster.loss().bregman(view, x, &self.x_star)?;
        let lin = dot(&self.grad_star, &sub(x, &self.x_star));
        Ok(breg + lin)
    }
}

pub const REFERENCE_TOL: f64 = 1e-12;

/// Damped Newton solve of `Φ` to `‖∇Φ‖ ≤ tol`.
pub fn reference_solution(cluster: &Cluster, tol: f64) -> Result<ReferenceSolution> {
    let loss = cluster.loss();
    let view = DataView::full(cluster.dataset());
    let x0 = vec![0.0; cluster.dim()];
    let sol = newton_minimize(&loss, view, &x0, tol, 200)?;
    Ok(ReferenceSolution {
        phi_star: loss.value(view, &sol.x)?,
        x_star: sol.x,
        grad_star: sol.grad,
        grad_norm: sol.grad_norm,
        method: "damped Newton".into(),
    })
}

/// Minimizer of the server's local loss `f₀` (ridge `λ`, no `μ` term) to
/// gradient norm `1e-9`.
pub fn local_init(cluster: &Cluster) -> Result<Vec<f64>> {
    let p = cluster.precond();
    let ds = p
        .data()
        .ok_or_else(|| Error::arg("precond", "no preconditioning data to initialize from"))?;
    let sol = newton_minimize(
        &p.loss(),
        DataView::full(ds),
        &vec![0.0; p.dim()],
        1e-9,
        200,
    )?;
    Ok(sol.x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub comm_rounds: usize,
    pub gradient_evals: usize,
    pub suboptimality: Option<f64>,
    pub gain: Option<f64>,
    pub gain_trials: usize,
    pub inner_passes: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iters: usize,
    pub target_subopt: Option<f64>,
    /// Record elapsed wall time; off by default so output is reproducible.
    pub wall_clock: bool,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iters: 100,
            target_subopt: None,
            wall_clock: false,
        }
    }
}

pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<IterationRecord>,
    pub iterates: Vec<Vec<f64>>,
    pub final_x: Vec<f64>,
}

/// A run that stopped on an error, with everything recorded before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunOutput,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} after {} records",
            self.error,
            self.partial.records.len()
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs `algo` until `stop.max_iters` or the target suboptimality. With a
/// reference solution, the divergence guard and target are active and every
/// record carries its suboptimality.
pub fn run_experiment(
    cluster: &mut Cluster,
    algo: &mut dyn Optimizer,
    stop: StopRule,
    reference: Option<&ReferenceSolution>,
    keep_iterates: bool,
) -> std::result::Result<RunOutput, RunFailure> {
    let start = Instant::now();
    let base = cluster.ledger();
    let mut out = RunOutput {
        records: Vec::new(),
        iterates: Vec::new(),
        final_x: algo.x().to_vec(),
    };
    let subopt = |c: &Cluster, x: &[f64]| -> Result<Option<f64>> {
        reference.map(|r| r.suboptimality(c, x)).transpose()
    };
    let mut evals = 0;
    let s0 = match subopt(cluster, algo.x()) {
        Ok(s) => s,
        Err(error) => {
            return Err(RunFailure {
                error,
                partial: out,
            })
        }
    };
    out.records.push(IterationRecord {
        iter: 0,
        comm_rounds: 0,
        gradient_evals: 0,
        suboptimality: s0,
        gain: None,
        gain_trials: 0,
        inner_passes: 0,
        wall_ms: 0.0,
    });
    if keep_iterates {
        out.iterates.push(algo.x().to_vec());
    }
    let reached = |s: Option<f64>| matches!((s, stop.target_subopt), (Some(v), Some(t)) if v <= t);
    if reached(s0) {
        return Ok(out);
    }
    for t in 1..=stop.max_iters {
        let step = match algo.step(cluster) {
            Ok(s) => s,
            Err(error) => {
                out.final_x = algo.x().to_vec();
                return Err(RunFailure {
                    error,
                    partial: out,
                });
            }
        };
        evals += step.gradient_evals;
        let x = algo.x();
        let s = match subopt(cluster, x) {
            Ok(s) => s,
            Err(error) => {
                return Err(RunFailure {
                    error,
                    partial: out,
                })
            }
        };
        out.records.push(IterationRecord {
            iter: t,
            comm_rounds: cluster.ledger().rounds - base.rounds,
            gradient_evals: evals,
            suboptimality: s,
            gain: step.gain,
            gain_trials: step.gain_trials,
            inner_passes: step.inner_passes,
            wall_ms: if stop.wall_clock {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
        if keep_iterates {
            out.iterates.push(x.to_vec());
        }
        out.final_x = x.to_vec();
        let diverged = !is_finite(x)
            || match (s, s0) {
                (Some(v), Some(v0)) => {
                    !v.is_finite() || v > DIVERGENCE_FACTOR * v0.max(f64::MIN_POSITIVE)
                }
                _ => false,
            };
        if diverged {
            return Err(RunFailure {
                error: Error::Diverged {
                    iter: t,
                    msg: format!(
                        "{} exceeded {DIVERGENCE_FACTOR:e} times the initial suboptimality",
                        algo.name()
                    ),
                },
                partial: out,
            });
        }
        if reached(s) {
            break;
        }
    }
    Ok(out)
}

pub const CSV_HEADER: &str =
    "iter,comm_rounds,gradient_evals,suboptimality,gain,gain_trials,inner_passes,wall_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            r.comm_rounds,
            r.gradient_evals,
            opt(r.suboptimality),
            opt(r.gain),
            r.gain_trials,
            r.inner_passes,
            r.wall_ms
        )?;
    }
    Ok(())
}

/// First communication-round count at which suboptimality is `≤ target`.
pub fn rounds_to_target(records: &[IterationRecord], target: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| r.suboptimality.is_some_and(|s| s <= target))
        .map(|r| r.comm_rounds)
}
