use super::{check_positive, AlgorithmParams, Optimizer, StepReport};
use crate::error::{Error, Result};
use crate::harness::Cluster;
use crate::linalg::is_finite;

/// Gradient descent `x⁺ = x − η∇F(x)`, default `η = 1/L_F`.
#[derive(Debug, Clone)]
pub struct Pgd {
    x: Vec<f64>,
    step: f64,
}

impl Pgd {
    pub fn new(params: &AlgorithmParams, cluster: &mut Cluster, x0: Vec<f64>) -> Result<Self> {
        let step = match params.pgd_step {
            Some(s) => check_positive("pgd_step", s)?,
            None => 1.0 / cluster.smoothness()?,
        };
        Ok(Pgd { x: x0, step })
    }

    pub fn with_step(x0: Vec<f64>, step: f64) -> Result<Self> {
        Ok(Pgd {
            x: x0,
            step: check_positive("pgd_step", step)?,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }
}

impl Optimizer for Pgd {
    fn name(&self) -> &'static str {
        "pgd"
    }

    fn x(&self) -> &[f64] {
        &self.x
    }

    fn step(&mut self, cluster: &mut Cluster) -> Result<StepReport> {
        let g = cluster.aggregate_gradient(&self.x)?;
        for (xi, gi) in self.x.iter_mut().zip(&g) {
            *xi -= self.step * gi;
        }
        if !is_finite(&self.x) {
            return Err(Error::Numerical(
                "non-finite gradient-descent iterate".into(),
            ));
        }
        Ok(StepReport {
            gradient_evals: 1,
            ..StepReport::default()
        })
    }
}
