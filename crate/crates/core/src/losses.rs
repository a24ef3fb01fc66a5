//! Regularized empirical losses of linear models,
//! `f(x) = (1/|S|) Σ ℓ_i(a_iᵀx) + (λ/2)‖x‖²`, with gradients, Hessian-vector
//! products and numerically stable Bregman divergences.
//!
//! Every reduction runs over the rows in view order, sequentially, so the
//! same inputs always produce bitwise-identical results.

use serde::{Deserialize, Serialize};

use crate::data::{Row, SparseDataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, power_iteration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Squared,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LossKind::Logistic),
            "squared" | "ridge" => Ok(LossKind::Squared),
            other => Err(Error::Unknown {
                kind: "loss",
                name: other.to_string(),
                known: "logistic, squared".into(),
            }),
        }
    }
}

/// Uniform bound `B_ℓ` on `ℓ''` and Lipschitz constant `M_ℓ` of `ℓ''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarLossProfile {
    pub b_ell: f64,
    pub m_ell: f64,
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `e^z − 1 − z` without cancellation near zero.
fn expm1_minus_linear(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let mut term = z * z / 2.0;
        let mut sum = term;
        let mut k = 3.0;
        while term.abs() > 1e-18 * sum.abs() {
            term *= z / k;
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        z.exp_m1() - z
    }
}

impl LossKind {
    /// `ℓ(u)` for label `b`.
    #[inline]
    pub fn value(self, b: f64, u: f64) -> f64 {
        match self {
            LossKind::Logistic => softplus(-b * u),
            LossKind::Squared => 0.5 * (u - b) * (u - b),
        }
    }

    /// `ℓ'(u)`.
    #[inline]
    pub fn derivative(self, b: f64, u: f64) -> f64 {
        match self {
            LossKind::Logistic => -b * sigmoid(-b * u),
            LossKind::Squared => u - b,
        }
    }

    /// `ℓ''(u)`; label-free for `b ∈ {−1, +1}`.
    #[inline]
    pub fn second_derivative(self, u: f64) -> f64 {
        match self {
            LossKind::Logistic => sigmoid(u) * sigmoid(-u),
            LossKind::Squared => 1.0,
        }
    }

    /// `ℓ(w + δ) − ℓ(w) − ℓ'(w) δ`, evaluated without the cancellation of
    /// the naive three-term formula.
    pub fn bregman(self, b: f64, w: f64, delta: f64) -> f64 {
        match self {
            LossKind::Squared => 0.5 * delta * delta,
            LossKind::Logistic => {
                // ℓ(u) = softplus(s) with s = −b u
                let s0 = -b * w;
                let ds = -b * delta;
                let p = sigmoid(s0);
                let q = sigmoid(-s0);
                if ds.abs() <= 30.0 {
                    (q * expm1_minus_linear(-p * ds) + p * expm1_minus_linear(q * ds)).ln_1p()
                } else {
                    (softplus(s0 + ds) - softplus(s0) - p * ds).max(0.0)
                }
            }
        }
    }

    pub fn profile(self) -> ScalarLossProfile {
        match self {
            LossKind::Logistic => ScalarLossProfile {
                b_ell: 0.25,
                m_ell: 1.0,
            },
            LossKind::Squared => ScalarLossProfile {
                b_ell: 1.0,
                m_ell: 0.0,
            },
        }
    }
}

/// `ℓ''(u)` for the given loss.
pub fn scalar_second_derivative(loss: &RegularizedLoss, u: f64) -> f64 {
    loss.kind.second_derivative(u)
}

/// A dataset together with an optional row subset, iterated in subset order.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    ds: &'a SparseDataset,
    subset: Option<&'a [usize]>,
}

impl<'a> DataView<'a> {
    pub fn full(ds: &'a SparseDataset) -> Self {
        DataView { ds, subset: None }
    }

    pub fn subset(ds: &'a SparseDataset, rows: &'a [usize]) -> Self {
        DataView {
            ds,
            subset: Some(rows),
        }
    }

    pub fn len(&self) -> usize {
        self.subset.map_or(self.ds.n_examples(), |s| s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.ds.n_features()
    }

    #[inline]
    fn index(&self, k: usize) -> usize {
        self.subset.map_or(k, |s| s[k])
    }

    #[inline]
    pub(crate) fn row(&self, k: usize) -> (Row<'a>, f64) {
        let i = self.index(k);
        (self.ds.row(i), self.ds.labels()[i])
    }

    fn non_empty(&self) -> Result<usize> {
        match self.len() {
            0 => Err(Error::arg("subset", "empty example subset")),
            n => Ok(n),
        }
    }
}

/// Loss kind plus ridge weight `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedLoss {
    pub kind: LossKind,
    pub lambda: f64,
}

impl RegularizedLoss {
    pub fn new(kind: LossKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::arg("lambda", format!("must be >= 0, got {lambda}")));
        }
        Ok(RegularizedLoss { kind, lambda })
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        RegularizedLoss { lambda, ..self }
    }

    pub fn profile(&self) -> ScalarLossProfile {
        self.kind.profile()
    }

    /// Rejects label sets the loss cannot use (logistic needs ±1).
    pub fn check_labels(&self, ds: &SparseDataset) -> Result<()> {
        if self.kind == LossKind::Logistic && !ds.has_binary_labels() {
            return Err(Error::arg(
                "labels",
                "logistic loss requires labels in {-1, +1} (or {0, 1})",
            ));
        }
        Ok(())
    }

    pub fn value(&self, view: DataView<'_>, x: &[f64]) -> Result<f64> {
        let n = view.non_empty()?;
        let mut acc = 0.0;
        for k in 0..n {
            let (row, b) = view.row(k);
            acc += self.kind.value(b, row.dot(x));
        }
        Ok(acc / n as f64 + 0.5 * self.lambda * dot(x, x))
    }

    /// Writes `∇f(x)` into `out`.
    pub fn gradient_into(&self, view: DataView<'_>, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = view.non_empty()?;
        out.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..n {
            let (row, b) = view.row(k);
            let c = self.kind.derivative(b, row.dot(x));
            row.axpy_into(c, out);
        }
        let inv = 1.0 / n as f64;
        for (g, xi) in out.iter_mut().zip(x) {
            *g = *g * inv + self.lambda * xi;
        }
        Ok(())
    }

    pub fn gradient(&self, view: DataView<'_>, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(view, x, &mut g)?;
        Ok(g)
    }

    /// Writes `∇²f(x) v` into `out`.
    pub fn hvp_into(
        &self,
        view: DataView<'_>,
        x: &[f64],
        v: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let n = view.non_empty()?;
        out.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..n {
            let (row, _) = view.row(k);
            let av = row.dot(v);
            if av == 0.0 {
                continue;
            }
            let h = match self.kind {
                LossKind::Squared => 1.0,
                LossKind::Logistic => self.kind.second_derivative(row.dot(x)),
            };
            row.axpy_into(h * av, out);
        }
        let inv = 1.0 / n as f64;
        for (g, vi) in out.iter_mut().zip(v) {
            *g = *g * inv + self.lambda * vi;
        }
        Ok(())
    }

    pub fn hessian_vec_product(
        &self,
        view: DataView<'_>,
        x: &[f64],
        v: &[f64],
    ) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.hvp_into(view, x, v, &mut out)?;
        Ok(out)
    }

    /// `f(x) − f(y) − ∇f(y)ᵀ(x − y)`, summed term by term in stable form.
    pub fn bregman(&self, view: DataView<'_>, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = view.non_empty()?;
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let mut acc = 0.0;
        for k in 0..n {
            let (row, b) = view.row(k);
            let delta = row.dot(&diff);
            if delta == 0.0 {
                continue;
            }
            acc += self.kind.bregman(b, row.dot(y), delta);
        }
        Ok(acc / n as f64 + 0.5 * self.lambda * dot(&diff, &diff))
    }

    /// `B_ℓ · λ_max((1/|S|) Σ a_i a_iᵀ) + λ`, with the eigenvalue from a
    /// seeded power iteration converged to 1e-6 relative.
    pub fn smoothness_upper_bound(&self, view: DataView<'_>) -> Result<f64> {
        let n = view.non_empty()?;
        let d = view.dim();
        let inv = 1.0 / n as f64;
        let est = power_iteration(
            d,
            |v, out| {
                for k in 0..n {
                    let (row, _) = view.row(k);
                    let av = row.dot(v);
                    row.axpy_into(av * inv, out);
                }
            },
            10_000,
            1e-6,
            0x5eed,
        );
        if !est.converged {
            return Err(Error::Numerical(format!(
                "power iteration for the smoothness bound did not converge in {} iterations",
                est.iterations
            )));
        }
        Ok(self.profile().b_ell * est.value + self.lambda)
    }
}
