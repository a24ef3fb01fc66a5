use super::{check_positive, AlgorithmParams, Optimizer, StepReport};
use crate::error::{Error, Result};
use crate::harness::Cluster;
use crate::linalg::is_finite;

/// Nesterov's method with constant momentum:
/// `x⁺ = y − s∇F(y)`, `y⁺ = x⁺ + m(x⁺ − x)`.
#[derive(Debug, Clone)]
pub struct Agd {
    x: Vec<f64>,
    y: Vec<f64>,
    step: f64,
    momentum: f64,
}

impl Agd {
    /// Defaults: `s = 1/L_F`, `m = (√κ_F − 1)/(√κ_F + 1)` with `κ_F = L_F/λ`.
    pub fn new(params: &AlgorithmParams, cluster: &mut Cluster, x0: Vec<f64>) -> Result<Self> {
        let needs_l = params.agd_step.is_none() || params.agd_momentum.is_none();
        let l_f = if needs_l { cluster.smoothness()? } else { 1.0 };
        let step = match params.agd_step {
            Some(s) => check_positive("agd_step", s)?,
            None => 1.0 / l_f,
        };
        let momentum = match params.agd_momentum {
            Some(m) => m,
            None => {
                let k = (l_f / check_positive("lambda", cluster.loss().lambda)?)
                    .max(1.0)
                    .sqrt();
                (k - 1.0) / (k + 1.0)
            }
        };
        Agd::with_params(x0, step, momentum)
    }

    pub fn with_params(x0: Vec<f64>, step: f64, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::arg(
                "agd_momentum",
                format!("must lie in [0, 1), got {momentum}"),
            ));
        }
        Ok(Agd {
            y: x0.clone(),
            x: x0,
            step: check_positive("agd_step", step)?,
            momentum,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }
}

impl Optimizer for Agd {
    fn name(&self) -> &'static str {
        "agd"
    }

    fn x(&self) -> &[f64] {
        &self.x
    }

    fn step(&mut self, cluster: &mut Cluster) -> Result<StepReport> {
        let g = cluster.aggregate_gradient(&self.y)?;
        let x_next: Vec<f64> = self
            .y
            .iter()
            .zip(&g)
            .map(|(y, g)| y - self.step * g)
            .collect();
        if !is_finite(&x_next) {
            return Err(Error::Numerical("non-finite AGD iterate".into()));
        }
        for ((y, xn), x) in self.y.iter_mut().zip(&x_next).zip(&self.x) {
            *y = xn + self.momentum * (xn - x);
        }
        self.x = x_next;
        Ok(StepReport {
            gradient_evals: 1,
            ..StepReport::default()
        })
    }
}
