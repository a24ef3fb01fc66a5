//! Damped Newton solver used for reference solutions and initial points.
//! Dense Cholesky for moderate dimension, conjugate gradient on
//! Hessian-vector products otherwise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::losses::{DataView, LossKind, RegularizedLoss};

const DENSE_LIMIT: usize = 1000;

#[derive(Debug, Clone)]
pub(crate) struct NewtonResult {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
}

pub(crate) fn dense_hessian(loss: &RegularizedLoss, view: DataView<'_>, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut h = DMatrix::<f64>::zeros(d, d);
    let n = view.len();
    for r in 0..n {
        let (row, _) = view.row(r);
        let w = match loss.kind {
            LossKind::Squared => 1.0,
            LossKind::Logistic => loss.kind.second_derivative(row.dot(x)),
        };
        for (p, (&j, &vj)) in row.indices.iter().zip(row.values).enumerate() {
            for (&k, &vk) in row.indices[p..].iter().zip(&row.values[p..]) {
                let (a, b) = if j <= k { (j, k) } else { (k, j) };
                h[(a, b)] += w * vj * vk;
            }
        }
    }
    let inv = 1.0 / n as f64;
    for j in 0..d {
        for k in j..d {
            let v = h[(j, k)] * inv;
            h[(j, k)] = v;
            h[(k, j)] = v;
        }
        h[(j, j)] += loss.lambda;
    }
    h
}

fn cg_solve(
    loss: &RegularizedLoss,
    view: DataView<'_>,
    x: &[f64],
    g: &[f64],
    rel_tol: f64,
) -> Result<Vec<f64>> {
    let d = x.len();
    let mut p_sol = vec![0.0; d];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    let target = rel_tol * rr.sqrt();
    let mut hd = vec![0.0; d];
    for _ in 0..(10 * d).max(50) {
        if rr.sqrt() <= target {
            break;
        }
        loss.hvp_into(view, x, &dir, &mut hd)?;
        let step = rr / dot(&dir, &hd);
        axpy(step, &dir, &mut p_sol);
        axpy(-step, &hd, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..d {
            dir[i] = r[i] + beta * dir[i];
        }
    }
    Ok(p_sol)
}

/// Minimizes the regularized loss over `view` until `‖∇f‖ ≤ tol`.
pub(crate) fn newton_minimize(
    loss: &RegularizedLoss,
    view: DataView<'_>,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<NewtonResult> {
    if !(loss.lambda > 0.0) {
        return Err(Error::arg("lambda", "Newton solve needs lambda > 0"));
    }
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut g = loss.gradient(view, &x)?;
    let mut gn = norm(&g);
    let mut f = loss.value(view, &x)?;
    for _ in 0..max_iters {
        if gn <= tol {
            return Ok(NewtonResult {
                x,
                grad: g,
                grad_norm: gn,
            });
        }
        let step = if d <= DENSE_LIMIT {
            let h = dense_hessian(loss, view, &x);
            let rhs = DVector::from_iterator(d, g.iter().map(|v| -v));
            let chol = h
                .cholesky()
                .ok_or_else(|| Error::Numerical("Hessian not positive definite".into()))?;
            chol.solve(&rhs).as_slice().to_vec()
        } else {
            cg_solve(loss, view, &x, &g, (gn.sqrt()).min(0.1))?
        };
        let slope = dot(&g, &step);
        // near the solution the objective is flat to rounding; judge by ‖∇f‖
        let local = -slope < 1e-10 * (1.0 + f.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let xt: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let ft = loss.value(view, &xt)?;
            let gt = loss.gradient(view, &xt)?;
            let gtn = norm(&gt);
            let armijo = ft <= f + 1e-4 * t * slope;
            if armijo || (local && gtn < gn) {
                x = xt;
                f = ft;
                g = gt;
                gn = gtn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if gn <= tol {
        return Ok(NewtonResult {
            x,
            grad: g,
            grad_norm: gn,
        });
    }
    Err(Error::Numerical(format!(
        "Newton solve stalled at gradient norm {gn:e} (target {tol:e})"
    )))
}
