//! Server-side subproblems
//! `V(x) = η gᵀx + (1−β) D_φ(x, v) + β D_φ(x, y)`,
//! covering both the accelerated step (β > 0) and the plain Bregman
//! proximal step (β = 0, v = y = x_t).

use serde::{Deserialize, Serialize};

use crate::bregman::Preconditioner;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Default stopping tolerance on `‖∇V‖`.
pub const DEFAULT_INNER_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_PASSES: usize = 50_000;

#[derive(Debug, Clone)]
pub struct InnerProblem<'a> {
    precond: &'a Preconditioner,
    g: Vec<f64>,
    eta: f64,
    beta: f64,
    v_anchor: Vec<f64>,
    y_anchor: Vec<f64>,
    grad_phi_v: Vec<f64>,
    grad_phi_y: Vec<f64>,
    setup_passes: usize,
}

impl<'a> InnerProblem<'a> {
    pub fn new(
        precond: &'a Preconditioner,
        g: Vec<f64>,
        eta: f64,
        beta: f64,
        v_anchor: Vec<f64>,
        y_anchor: Vec<f64>,
    ) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::arg("eta", format!("must be > 0, got {eta}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::arg(
                "beta",
                format!("must lie in [0, 1), got {beta}"),
            ));
        }
        let d = precond.dim();
        if g.len() != d || v_anchor.len() != d || y_anchor.len() != d {
            return Err(Error::arg("anchors", "dimension mismatch"));
        }
        let grad_phi_v = precond.grad(&v_anchor);
        let (grad_phi_y, setup_passes) = if beta == 0.0 || y_anchor == v_anchor {
            (grad_phi_v.clone(), 1)
        } else {
            (precond.grad(&y_anchor), 2)
        };
        Ok(InnerProblem {
            precond,
            g,
            eta,
            beta,
            v_anchor,
            y_anchor,
            grad_phi_v,
            grad_phi_y,
            setup_passes,
        })
    }

    /// Bregman proximal step problem anchored at `x_t`.
    pub fn proximal(
        precond: &'a Preconditioner,
        grad_f: Vec<f64>,
        eta: f64,
        x_t: Vec<f64>,
    ) -> Result<Self> {
        Self::new(precond, grad_f, eta, 0.0, x_t.clone(), x_t)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn v_anchor(&self) -> &[f64] {
        &self.v_anchor
    }

    pub fn y_anchor(&self) -> &[f64] {
        &self.y_anchor
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.g
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let p = self.precond;
        let mut v =
            self.eta * dot(&self.g, x) + (1.0 - self.beta) * p.divergence(x, &self.v_anchor);
        if self.beta > 0.0 {
            v += self.beta * p.divergence(x, &self.y_anchor);
        }
        v
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.precond.grad_into(x, out);
        let (b, ob) = (self.beta, 1.0 - self.beta);
        for i in 0..out.len() {
            out[i] =
                (out[i] - ob * self.grad_phi_v[i] - b * self.grad_phi_y[i]) + self.eta * self.g[i];
        }
    }

    /// `∇V(x) = ηg + ∇φ(x) − (1−β)∇φ(v) − β∇φ(y)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out);
        out
    }
}

pub fn inner_gradient(prob: &InnerProblem<'_>, x: &[f64]) -> Vec<f64> {
    prob.gradient(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub x: Vec<f64>,
    pub grad_norm: f64,
    /// Full passes over the preconditioning data, setup included.
    pub passes: usize,
    pub iterations: usize,
    /// Set when `max_passes` ran out before reaching the tolerance.
    pub truncated: bool,
}

/// Accelerated gradient with step `1/L_φ` and constant momentum
/// `(√κ−1)/(√κ+1)`, `κ = L_φ/σ_φ`, started at `warm_start`. Stops at the
/// first evaluated point with `‖∇V‖ ≤ tol`. Out of budget, returns the best
/// point seen with `truncated` set.
pub fn solve_inner(
    prob: &InnerProblem<'_>,
    warm_start: &[f64],
    tol: f64,
    max_passes: usize,
) -> Result<InnerSolution> {
    if !(tol > 0.0) {
        return Err(Error::arg("tol", format!("must be > 0, got {tol}")));
    }
    let d = warm_start.len();
    if d != prob.precond.dim() {
        return Err(Error::arg("warm_start", "dimension mismatch"));
    }
    let p = prob.precond;
    let l = p.l_phi();
    let kappa = p.kappa_phi().max(1.0);
    let sk = kappa.sqrt();
    let momentum = (sk - 1.0) / (sk + 1.0);

    let mut passes = prob.setup_passes;
    let mut x = warm_start.to_vec();
    let mut x_prev = warm_start.to_vec();
    let mut y = warm_start.to_vec();
    let mut grad = vec![0.0; d];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    loop {
        prob.gradient_into(&y, &mut grad);
        passes += 1;
        let gn = norm(&grad);
        if !gn.is_finite() {
            return Err(Error::Numerical(
                "inner solver produced a non-finite gradient".into(),
            ));
        }
        if gn <= tol {
            return Ok(InnerSolution {
                x: y,
                grad_norm: gn,
                passes,
                iterations,
                truncated: false,
            });
        }
        if best.as_ref().is_none_or(|(b, _)| gn < *b) {
            best = Some((gn, y.clone()));
        }
        if passes >= max_passes {
            let (gn, xb) = best.expect("at least one evaluation");
            return Ok(InnerSolution {
                x: xb,
                grad_norm: gn,
                passes,
                iterations,
                truncated: true,
            });
        }
        std::mem::swap(&mut x_prev, &mut x);
        for i in 0..d {
            x[i] = y[i] - grad[i] / l;
        }
        for i in 0..d {
            y[i] = x[i] + momentum * (x[i] - x_prev[i]);
        }
        iterations += 1;
    }
}

/// `argmin_x { ∇F(x_t)ᵀx + (1/η) D_φ(x, x_t) }`, warm-started at `x_t`.
pub fn dane_step(
    precond: &Preconditioner,
    x_t: &[f64],
    grad_f: &[f64],
    eta: f64,
    tol: f64,
    max_passes: usize,
) -> Result<InnerSolution> {
    let prob = InnerProblem::proximal(precond, grad_f.to_vec(), eta, x_t.to_vec())?;
    solve_inner(&prob, x_t, tol, max_passes)
}
