//! SPAG and its baselines behind a common [`Optimizer`] trait, plus the
//! rate certificates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bregman::{relative_constants, RelativeConstants};
use crate::error::{Error, Result};
use crate::harness::Cluster;
use crate::inner::{DEFAULT_INNER_TOL, DEFAULT_MAX_PASSES};

mod agd;
mod certificate;
mod dane;
mod pgd;
mod spag;

pub use agd::Agd;
pub use certificate::{
    harmonic_gain, harmonic_lower_bound, lemma3_gain_bound, logistic_hessian_lipschitz,
    theoretical_rate_certificate, RateCertificate,
};
pub use dane::{hb_beta, Dane, HbDane};
pub use pgd::Pgd;
pub use spag::{
    gain_inequality_holds, spag_schedule, spag_y, GainCheck, ScheduleOut, Spag, SpagState,
};

/// What one iteration cost and what it accepted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Accepted gain `G_t` (SPAG only).
    pub gain: Option<f64>,
    pub gain_trials: usize,
    /// Aggregate-gradient calls made by this step.
    pub gradient_evals: usize,
    pub inner_passes: usize,
    /// Inner solves that hit their pass budget.
    pub truncated: usize,
}

/// A distributed first-order method driven one communication-bearing step
/// at a time.
pub trait Optimizer {
    fn name(&self) -> &'static str;

    /// The current iterate `x_t`.
    fn x(&self) -> &[f64];

    fn step(&mut self, cluster: &mut Cluster) -> Result<StepReport>;
}

/// Tunables shared by the registry constructors. `None` picks the default
/// derived from the cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    /// Relative constants; default `L = 1`, `σ = λ/(λ + 2μ)`.
    pub constants: Option<RelativeConstants>,
    pub g_min: f64,
    pub t0: usize,
    pub inner_tol: f64,
    pub max_inner_passes: usize,
    pub dane_eta: Option<f64>,
    pub hb_beta: Option<f64>,
    pub agd_step: Option<f64>,
    pub agd_momentum: Option<f64>,
    pub pgd_step: Option<f64>,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            constants: None,
            g_min: 1.0,
            t0: 50,
            inner_tol: DEFAULT_INNER_TOL,
            max_inner_passes: DEFAULT_MAX_PASSES,
            dane_eta: None,
            hb_beta: None,
            agd_step: None,
            agd_momentum: None,
            pgd_step: None,
        }
    }
}

impl AlgorithmParams {
    pub fn resolve_constants(&self, cluster: &Cluster) -> Result<RelativeConstants> {
        match self.constants {
            Some(c) => RelativeConstants::new(c.l_rel, c.sigma_rel),
            None => relative_constants(cluster.loss().lambda, cluster.precond().mu()),
        }
    }
}

pub type Constructor = fn(&AlgorithmParams, &mut Cluster, Vec<f64>) -> Result<Box<dyn Optimizer>>;

/// Name → constructor table.
#[derive(Clone)]
pub struct AlgorithmRegistry {
    entries: BTreeMap<&'static str, Constructor>,
}

impl Default for AlgorithmRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl AlgorithmRegistry {
    pub fn empty() -> Self {
        AlgorithmRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// `spag`, `dane`, `hb-dane`, `agd` and `pgd`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("spag", |p, c, x0| Ok(Box::new(Spag::new(p, c, x0)?)));
        r.register("dane", |p, c, x0| Ok(Box::new(Dane::new(p, c, x0)?)));
        r.register("hb-dane", |p, c, x0| Ok(Box::new(HbDane::new(p, c, x0)?)));
        r.register("agd", |p, c, x0| Ok(Box::new(Agd::new(p, c, x0)?)));
        r.register("pgd", |p, c, x0| Ok(Box::new(Pgd::new(p, c, x0)?)));
        r
    }

    pub fn register(&mut self, name: &'static str, ctor: Constructor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn create(
        &self,
        name: &str,
        params: &AlgorithmParams,
        cluster: &mut Cluster,
        x0: Vec<f64>,
    ) -> Result<Box<dyn Optimizer>> {
        let ctor = self.entries.get(name).ok_or_else(|| Error::Unknown {
            kind: "algorithm",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        if x0.len() != cluster.dim() {
            return Err(Error::arg("x0", "dimension mismatch"));
        }
        ctor(params, cluster, x0)
    }
}

pub(crate) fn check_positive(field: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::arg(field, format!("must be > 0, got {v}")))
    }
}
