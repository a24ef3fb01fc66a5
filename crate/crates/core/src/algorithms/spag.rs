use serde::{Deserialize, Serialize};

use super::{AlgorithmParams, Optimizer, StepReport};
use crate::bregman::{Preconditioner, RelativeConstants};
use crate::error::{Error, Result};
use crate::harness::Cluster;
use crate::inner::{solve_inner, InnerProblem};
use crate::linalg::is_finite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOut {
    pub a_next: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub big_a_next: f64,
    pub big_b_next: f64,
}

/// Solves `a²(L·G − σ) − a(Aσ + B) − AB = 0` for its positive root and
/// derives the step coefficients.
pub fn spag_schedule(a: f64, b: f64, l_rel: f64, sigma_rel: f64, gain: f64) -> Result<ScheduleOut> {
    let lg = l_rel * gain;
    if !(lg > 0.0 && a >= 0.0 && b > 0.0 && sigma_rel >= 0.0) {
        return Err(Error::arg(
            "schedule",
            format!("need L*G > 0, A >= 0, B > 0 (got L*G={lg}, A={a}, B={b})"),
        ));
    }
    let c2 = lg - sigma_rel;
    if c2 <= 0.0 {
        return Err(Error::InvalidConstants(format!(
            "L*G = {lg} must exceed sigma = {sigma_rel} for a positive step"
        )));
    }
    let c1 = a * sigma_rel + b;
    let c0 = a * b;
    // both terms are non-negative, so this form has no cancellation
    let a_next = (c1 + (c1 * c1 + 4.0 * c2 * c0).sqrt()) / (2.0 * c2);
    if !(a_next > 0.0 && a_next.is_finite()) {
        return Err(Error::Numerical(format!("schedule produced step {a_next}")));
    }
    let big_a_next = a + a_next;
    let big_b_next = b + sigma_rel * a_next;
    Ok(ScheduleOut {
        a_next,
        alpha: a_next / big_a_next,
        beta: a_next * sigma_rel / big_b_next,
        eta: a_next / big_b_next,
        big_a_next,
        big_b_next,
    })
}

/// `((1−α)x + α(1−β)v) / (1 − αβ)`.
pub fn spag_y(x: &[f64], v: &[f64], alpha: f64, beta: f64) -> Result<Vec<f64>> {
    let den = 1.0 - alpha * beta;
    if !(den > 0.0) {
        return Err(Error::Numerical(format!(
            "alpha*beta = {} must be < 1",
            alpha * beta
        )));
    }
    let (cx, cv) = ((1.0 - alpha) / den, alpha * (1.0 - beta) / den);
    Ok(x.iter().zip(v).map(|(xi, vi)| cx * xi + cv * vi).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

pub const GAIN_SLACK: f64 = 1e-12;

/// `D_φ(x⁺, y) ≤ α²G[(1−β)D_φ(v⁺, v) + βD_φ(v⁺, y)]` up to [`GAIN_SLACK`].
#[allow(clippy::too_many_arguments)]
pub fn gain_inequality_holds(
    precond: &Preconditioner,
    x_next: &[f64],
    y: &[f64],
    v_next: &[f64],
    v: &[f64],
    alpha: f64,
    beta: f64,
    gain: f64,
) -> GainCheck {
    let lhs = precond.divergence(x_next, y);
    let mut inner = (1.0 - beta) * precond.divergence(v_next, v);
    if beta > 0.0 {
        inner += beta * precond.divergence(v_next, y);
    }
    let rhs = alpha * alpha * gain * inner;
    GainCheck {
        holds: lhs <= rhs + GAIN_SLACK,
        lhs,
        rhs,
    }
}

/// The scalars and vectors carried between SPAG iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpagState {
    /// `A_t` and `B_t` divided by `exp(log_scale)`.
    pub big_a: f64,
    pub big_b: f64,
    /// `B₀` on the same scale, so `B = B₀ + σA` stays exact.
    pub big_b0: f64,
    pub log_scale: f64,
    pub g_prev: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub iter: usize,
}

impl SpagState {
    /// `v₀ = x₀`, `A₀ = 0`, `B₀ = 1`, `G₋₁ = 1`.
    pub fn initial(x0: Vec<f64>) -> Self {
        SpagState {
            big_a: 0.0,
            big_b: 1.0,
            big_b0: 1.0,
            log_scale: 0.0,
            g_prev: 1.0,
            v: x0.clone(),
            x: x0,
            iter: 0,
        }
    }

    /// The step coefficients are invariant under a common scaling of `A`
    /// and `B`; rescales once `B` exceeds [`RESCALE_AT`].
    fn renormalize(&mut self) {
        if self.big_b > RESCALE_AT {
            let s = self.big_b;
            self.big_a /= s;
            self.big_b = 1.0;
            self.big_b0 /= s;
            self.log_scale += s.ln();
        }
    }

    /// `ln A_t` on the original scale.
    pub fn ln_big_a(&self) -> f64 {
        self.big_a.ln() + self.log_scale
    }
}

pub const RESCALE_AT: f64 = 1e100;

/// Statistically preconditioned accelerated gradient with gain search.
#[derive(Debug, Clone)]
pub struct Spag {
    state: SpagState,
    constants: RelativeConstants,
    g_min: f64,
    inner_tol: f64,
    max_inner_passes: usize,
    warm_gains: Vec<f64>,
    gains: Vec<f64>,
    last_check: Option<GainCheck>,
}

impl Spag {
    pub fn new(params: &AlgorithmParams, cluster: &mut Cluster, x0: Vec<f64>) -> Result<Self> {
        let constants = params.resolve_constants(cluster)?;
        Spag::with_constants(params, constants, x0)
    }

    /// Builds the method with explicit relative constants. `params.t0`
    /// schedule steps at the smallest admissible power-of-two gain (1 unless
    /// `L ≤ σ`) initialize `A` and `B`.
    pub fn with_constants(
        params: &AlgorithmParams,
        constants: RelativeConstants,
        x0: Vec<f64>,
    ) -> Result<Self> {
        if !(params.g_min >= 0.0 && params.g_min.is_finite()) {
            return Err(Error::arg(
                "g_min",
                format!("must be >= 0, got {}", params.g_min),
            ));
        }
        super::check_positive("inner_tol", params.inner_tol)?;
        let mut state = SpagState::initial(x0);
        let mut warm_gains = Vec::with_capacity(params.t0);
        let mut g = 1.0;
        while constants.l_rel * g <= constants.sigma_rel {
            g *= 2.0;
        }
        for _ in 0..params.t0 {
            let s = spag_schedule(
                state.big_a,
                state.big_b,
                constants.l_rel,
                constants.sigma_rel,
                g,
            )?;
            state.big_a = s.big_a_next;
            state.big_b = s.big_b_next;
            state.renormalize();
            warm_gains.push(g);
        }
        Ok(Spag {
            state,
            constants,
            g_min: params.g_min,
            inner_tol: params.inner_tol,
            max_inner_passes: params.max_inner_passes,
            warm_gains,
            gains: Vec::new(),
            last_check: None,
        })
    }

    pub fn state(&self) -> &SpagState {
        &self.state
    }

    pub fn constants(&self) -> RelativeConstants {
        self.constants
    }

    /// Gains accepted by real iterations.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Gains implied by the warm start followed by the accepted ones; the
    /// sequence the certificates apply to.
    pub fn schedule_gains(&self) -> Vec<f64> {
        self.warm_gains.iter().chain(&self.gains).copied().collect()
    }

    pub fn last_check(&self) -> Option<GainCheck> {
        self.last_check
    }

    fn first_trial(&self) -> f64 {
        let mut g = self.g_min.max(self.state.g_prev / 2.0);
        while self.constants.l_rel * g <= self.constants.sigma_rel {
            g *= 2.0;
        }
        g
    }
}

impl Optimizer for Spag {
    fn name(&self) -> &'static str {
        "spag"
    }

    fn x(&self) -> &[f64] {
        &self.state.x
    }

    fn step(&mut self, cluster: &mut Cluster) -> Result<StepReport> {
        let (l, s) = (self.constants.l_rel, self.constants.sigma_rel);
        let cap = 4.0 * cluster.precond().kappa_phi().max(1.0);
        let mut gain = self.first_trial();
        let mut report = StepReport::default();
        loop {
            report.gain_trials += 1;
            let st = &self.state;
            let sched = spag_schedule(st.big_a, st.big_b, l, s, gain)?;
            let y = spag_y(&st.x, &st.v, sched.alpha, sched.beta)?;
            let grad = cluster.aggregate_gradient(&y)?;
            report.gradient_evals += 1;
            let precond = cluster.precond();
            let prob = InnerProblem::new(
                precond,
                grad,
                sched.eta,
                sched.beta,
                st.v.clone(),
                y.clone(),
            )?;
            let sol = solve_inner(&prob, &st.v, self.inner_tol, self.max_inner_passes)?;
            report.inner_passes += sol.passes;
            report.truncated += usize::from(sol.truncated);
            let v_next = sol.x;
            let x_next: Vec<f64> =
                st.x.iter()
                    .zip(&v_next)
                    .map(|(xi, vi)| (1.0 - sched.alpha) * xi + sched.alpha * vi)
                    .collect();
            if !is_finite(&x_next) {
                return Err(Error::Numerical("non-finite SPAG iterate".into()));
            }
            let check = gain_inequality_holds(
                precond,
                &x_next,
                &y,
                &v_next,
                &st.v,
                sched.alpha,
                sched.beta,
                gain,
            );
            self.last_check = Some(check);
            if check.holds {
                let st = &mut self.state;
                st.big_a = sched.big_a_next;
                st.big_b = sched.big_b_next;
                st.renormalize();
                st.g_prev = gain;
                st.x = x_next;
                st.v = v_next;
                st.iter += 1;
                self.gains.push(gain);
                report.gain = Some(gain);
                return Ok(report);
            }
            gain *= 2.0;
            if gain > cap {
                return Err(Error::Diverged {
                    iter: self.state.iter + 1,
                    msg: format!("gain search exceeded 4*kappa_phi = {cap:e}"),
                });
            }
        }
    }
}
