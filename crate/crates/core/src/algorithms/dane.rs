use super::{check_positive, AlgorithmParams, Optimizer, StepReport};
use crate::error::{Error, Result};
use crate::harness::Cluster;
use crate::inner::dane_step;
use crate::linalg::is_finite;

/// Default heavy-ball weight `(1 − (1 + 2μ/λ)^{−1/2})²`.
pub fn hb_beta(lambda: f64, mu: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::arg("mu", format!("must be >= 0, got {mu}")));
    }
    let r = 1.0 - (1.0 + 2.0 * mu / lambda).powf(-0.5);
    Ok(r * r)
}

/// Bregman proximal point steps `x⁺ = argmin ∇F(x)ᵀz + (1/η)D_φ(z, x)`.
#[derive(Debug, Clone)]
pub struct Dane {
    x: Vec<f64>,
    eta: f64,
    inner_tol: f64,
    max_inner_passes: usize,
}

impl Dane {
    pub fn new(params: &AlgorithmParams, cluster: &mut Cluster, x0: Vec<f64>) -> Result<Self> {
        let eta = match params.dane_eta {
            Some(e) => check_positive("dane_eta", e)?,
            None => 1.0 / params.resolve_constants(cluster)?.l_rel,
        };
        Ok(Dane {
            x: x0,
            eta,
            inner_tol: check_positive("inner_tol", params.inner_tol)?,
            max_inner_passes: params.max_inner_passes,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

fn prox_step(
    cluster: &mut Cluster,
    x: &[f64],
    eta: f64,
    tol: f64,
    max: usize,
) -> Result<(Vec<f64>, StepReport)> {
    let grad = cluster.aggregate_gradient(x)?;
    let sol = dane_step(cluster.precond(), x, &grad, eta, tol, max)?;
    let report = StepReport {
        gain: None,
        gain_trials: 0,
        gradient_evals: 1,
        inner_passes: sol.passes,
        truncated: usize::from(sol.truncated),
    };
    Ok((sol.x, report))
}

impl Optimizer for Dane {
    fn name(&self) -> &'static str {
        "dane"
    }

    fn x(&self) -> &[f64] {
        &self.x
    }

    fn step(&mut self, cluster: &mut Cluster) -> Result<StepReport> {
        let (x, report) = prox_step(
            cluster,
            &self.x,
            self.eta,
            self.inner_tol,
            self.max_inner_passes,
        )?;
        self.x = x;
        Ok(report)
    }
}

/// DANE step followed by heavy-ball extrapolation `+ β(x_t − x_{t−1})`.
#[derive(Debug, Clone)]
pub struct HbDane {
    x: Vec<f64>,
    x_prev: Vec<f64>,
    eta: f64,
    beta: f64,
    inner_tol: f64,
    max_inner_passes: usize,
}

impl HbDane {
    pub fn new(params: &AlgorithmParams, cluster: &mut Cluster, x0: Vec<f64>) -> Result<Self> {
        let eta = match params.dane_eta {
            Some(e) => check_positive("dane_eta", e)?,
            None => 1.0 / params.resolve_constants(cluster)?.l_rel,
        };
        let beta = match params.hb_beta {
            Some(b) if (0.0..1.0).contains(&b) => b,
            Some(b) => {
                return Err(Error::arg(
                    "hb_beta",
                    format!("must lie in [0, 1), got {b}"),
                ))
            }
            None => hb_beta(cluster.loss().lambda, cluster.precond().mu())?,
        };
        Ok(HbDane {
            x_prev: x0.clone(),
            x: x0,
            eta,
            beta,
            inner_tol: check_positive("inner_tol", params.inner_tol)?,
            max_inner_passes: params.max_inner_passes,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Optimizer for HbDane {
    fn name(&self) -> &'static str {
        "hb-dane"
    }

    fn x(&self) -> &[f64] {
        &self.x
    }

    fn step(&mut self, cluster: &mut Cluster) -> Result<StepReport> {
        let (mut x, report) = prox_step(
            cluster,
            &self.x,
            self.eta,
            self.inner_tol,
            self.max_inner_passes,
        )?;
        for ((xn, xt), xp) in x.iter_mut().zip(&self.x).zip(&self.x_prev) {
            *xn += self.beta * (xt - xp);
        }
        if !is_finite(&x) {
            return Err(Error::Numerical("non-finite HB-DANE iterate".into()));
        }
        self.x_prev = std::mem::replace(&mut self.x, x);
        Ok(report)
    }
}
