//! The server's reference function `φ = f₀ + (μ/2)‖·‖²`, its Bregman
//! divergence and the relative smoothness / strong convexity constants of
//! the global objective with respect to it.

use serde::{Deserialize, Serialize};

use crate::data::{PrecondSample, SparseDataset};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::losses::{DataView, RegularizedLoss};

/// `φ = f₀ + (μ/2)‖·‖²` where `f₀` is the regularized loss over the
/// preconditioning sample. `f₀` may be absent, leaving `φ = (μ/2)‖·‖²`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    loss: RegularizedLoss,
    data: Option<SparseDataset>,
    sample: Option<PrecondSample>,
    dim: usize,
    mu: f64,
    sigma_phi: f64,
    l_phi: f64,
}

impl Preconditioner {
    /// Builds `φ` over the sampled rows of `ds`. Rows are summed in ascending
    /// index order regardless of the sample's draw order.
    pub fn new(
        loss: RegularizedLoss,
        ds: &SparseDataset,
        sample: PrecondSample,
        mu: f64,
    ) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::arg("mu", format!("must be >= 0, got {mu}")));
        }
        if sample.indices.iter().any(|&i| i >= ds.n_examples()) {
            return Err(Error::arg("sample", "index out of range"));
        }
        let mut rows = sample.indices.clone();
        rows.sort_unstable();
        let data = ds.select(&rows);
        let l0 = loss.smoothness_upper_bound(DataView::full(&data))?;
        Ok(Preconditioner {
            loss,
            dim: ds.n_features(),
            data: Some(data),
            sample: Some(sample),
            mu,
            sigma_phi: loss.lambda + mu,
            l_phi: l0 + mu,
        })
    }

    /// `φ(x) = (μ/2)‖x‖²` with no data term.
    pub fn euclidean(loss: RegularizedLoss, dim: usize, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::arg(
                "mu",
                format!("must be > 0 without a data term, got {mu}"),
            ));
        }
        Ok(Preconditioner {
            loss,
            data: None,
            sample: None,
            dim,
            mu,
            sigma_phi: mu,
            l_phi: mu,
        })
    }

    /// `φ` whose data term is the given dataset in full (no sampling).
    pub fn from_dataset(loss: RegularizedLoss, ds: &SparseDataset, mu: f64) -> Result<Self> {
        let sample = PrecondSample {
            indices: (0..ds.n_examples()).collect(),
            seed: 0,
        };
        Self::new(loss, ds, sample, mu)
    }

    pub fn loss(&self) -> RegularizedLoss {
        self.loss
    }

    pub fn data(&self) -> Option<&SparseDataset> {
        self.data.as_ref()
    }

    pub fn sample(&self) -> Option<&PrecondSample> {
        self.sample.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma_phi(&self) -> f64 {
        self.sigma_phi
    }

    pub fn l_phi(&self) -> f64 {
        self.l_phi
    }

    /// `κ_φ = L_φ / σ_φ`.
    pub fn kappa_phi(&self) -> f64 {
        self.l_phi / self.sigma_phi
    }

    /// Loss over the sample with ridge `λ + μ`; this is exactly `φ`.
    fn phi_loss(&self) -> RegularizedLoss {
        self.loss.with_lambda(self.loss.lambda + self.mu)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.data {
            Some(ds) => self
                .phi_loss()
                .value(DataView::full(ds), x)
                .expect("non-empty sample"),
            None => 0.5 * self.mu * dot(x, x),
        }
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.data {
            Some(ds) => self
                .phi_loss()
                .gradient_into(DataView::full(ds), x, out)
                .expect("non-empty sample"),
            None => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = self.mu * xi;
                }
            }
        }
    }

    /// `∇φ(x) = ∇f₀(x) + μx`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.grad_into(x, &mut g);
        g
    }

    /// `∇²φ(x) v`.
    pub fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match &self.data {
            Some(ds) => self
                .phi_loss()
                .hessian_vec_product(DataView::full(ds), x, v)
                .expect("non-empty sample"),
            None => v.iter().map(|vi| self.mu * vi).collect(),
        }
    }

    /// `D_φ(x, y) = φ(x) − φ(y) − ∇φ(y)ᵀ(x − y)`.
    pub fn divergence(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.data {
            Some(ds) => self
                .phi_loss()
                .bregman(DataView::full(ds), x, y)
                .expect("non-empty sample"),
            None => {
                let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * self.mu * d
            }
        }
    }
}

pub fn phi_grad(p: &Preconditioner, x: &[f64]) -> Vec<f64> {
    p.grad(x)
}

pub fn bregman_divergence(p: &Preconditioner, x: &[f64], y: &[f64]) -> f64 {
    p.divergence(x, y)
}

/// `L_{F/φ}`, `σ_{F/φ}` and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeConstants {
    pub l_rel: f64,
    pub sigma_rel: f64,
    pub kappa_rel: f64,
}

impl RelativeConstants {
    pub fn new(l_rel: f64, sigma_rel: f64) -> Result<Self> {
        if !(sigma_rel > 0.0 && l_rel >= sigma_rel && l_rel.is_finite()) {
            return Err(Error::InvalidConstants(format!(
                "need L_rel >= sigma_rel > 0, got L_rel={l_rel}, sigma_rel={sigma_rel}"
            )));
        }
        Ok(RelativeConstants {
            l_rel,
            sigma_rel,
            kappa_rel: l_rel / sigma_rel,
        })
    }
}

fn check_lambda_mu(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg("lambda", format!("must be > 0, got {lambda}")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::arg("mu", format!("must be >= 0, got {mu}")));
    }
    Ok(())
}

/// Additive-bound regime: `L = 1`, `σ = λ/(λ + 2μ)`.
pub fn relative_constants(lambda: f64, mu: f64) -> Result<RelativeConstants> {
    check_lambda_mu(lambda, mu)?;
    Ok(RelativeConstants {
        l_rel: 1.0,
        sigma_rel: lambda / (lambda + 2.0 * mu),
        kappa_rel: 1.0 + 2.0 * mu / lambda,
    })
}

/// Multiplicative quadratic regime: `L = 2`, `σ = (3/2 + 2μ/λ)⁻¹`.
pub fn relative_constants_quadratic(lambda: f64, mu: f64) -> Result<RelativeConstants> {
    check_lambda_mu(lambda, mu)?;
    let r = 2.0 * mu / lambda;
    Ok(RelativeConstants {
        l_rel: 2.0,
        sigma_rel: 1.0 / (1.5 + r),
        kappa_rel: 3.0 + 2.0 * r,
    })
}
