//! Bounds on `μ` that certify the relative condition number of `F` with
//! respect to `φ`, and empirical checks of Hessian concentration.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bregman::{relative_constants, relative_constants_quadratic, RelativeConstants};
use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::linalg::power_iteration;
use crate::losses::{DataView, LossKind, RegularizedLoss};
use crate::newton::dense_hessian;

/// Inputs shared by the bound calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsInput {
    /// Bound on feature norms.
    pub r: f64,
    /// Preconditioning sample size.
    pub n: f64,
    /// Full dataset size.
    pub big_n: f64,
    pub d: f64,
    pub delta: f64,
    pub lambda: f64,
    pub b_ell: f64,
    pub m_ell: f64,
    /// Domain radius.
    pub domain_radius: f64,
    /// Sub-Gaussian parameter.
    pub rho: f64,
    /// Unspecified absolute constant of the sub-Gaussian bound.
    pub c_subg: f64,
}

impl Default for BoundsInput {
    fn default() -> Self {
        BoundsInput {
            r: 1.0,
            n: 1000.0,
            big_n: 100_000.0,
            d: 10.0,
            delta: 0.1,
            lambda: 0.0,
            b_ell: 0.25,
            m_ell: 1.0,
            domain_radius: 1.0,
            rho: 1.0,
            c_subg: 1.0,
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(field, format!("must be >= 0, got {v}")))
    }
}

impl BoundsInput {
    pub fn validate(&self) -> Result<()> {
        positive("R", self.r)?;
        positive("n", self.n)?;
        positive("N", self.big_n)?;
        positive("d", self.d)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::arg(
                "delta",
                format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        non_negative("lambda", self.lambda)?;
        non_negative("B_ell", self.b_ell)?;
        non_negative("M_ell", self.m_ell)?;
        positive("D", self.domain_radius)?;
        positive("rho", self.rho)?;
        non_negative("C_subg", self.c_subg)?;
        if self.n > self.big_n {
            return Err(Error::arg("n", "sample size exceeds N"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub regime: String,
    pub mu: f64,
    /// Implied relative constants; absent when `λ = 0`.
    pub constants: Option<RelativeConstants>,
    pub notes: Vec<String>,
}

fn report(
    regime: &str,
    mu: f64,
    lambda: f64,
    quadratic: bool,
    mut notes: Vec<String>,
) -> BoundReport {
    let constants = if lambda > 0.0 {
        let c = if quadratic {
            relative_constants_quadratic(lambda, mu)
        } else {
            relative_constants(lambda, mu)
        };
        c.ok()
    } else {
        notes.push("lambda = 0: relative constants undefined".into());
        None
    };
    BoundReport {
        regime: regime.into(),
        mu,
        constants,
        notes,
    }
}

/// A closed-form bound on `μ`.
pub trait BoundRule {
    fn name(&self) -> &'static str;

    /// `μ` alone, after validation.
    fn mu(&self, input: &BoundsInput) -> Result<f64>;

    fn compute(&self, input: &BoundsInput) -> Result<BoundReport>;
}

/// Matrix Hoeffding: `μ = (R²/√n)·√(32 ln(d/δ))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hoeffding;

impl BoundRule for Hoeffding {
    fn name(&self) -> &'static str {
        "hoeffding"
    }

    fn mu(&self, i: &BoundsInput) -> Result<f64> {
        i.validate()?;
        Ok(i.r * i.r / i.n.sqrt() * (32.0 * (i.d / i.delta).ln()).sqrt())
    }

    fn compute(&self, i: &BoundsInput) -> Result<BoundReport> {
        let mu = self.mu(i)?;
        Ok(report(self.name(), mu, i.lambda, false, Vec::new()))
    }
}

/// Quadratic losses: `μ = ½((28R²/(3n)) ln(2d/δ) − λ)⁺`, multiplicative
/// sandwich constants.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadratic;

impl Quadratic {
    fn threshold(i: &BoundsInput) -> f64 {
        28.0 / 3.0 * (2.0 * i.d / i.delta).ln()
    }
}

impl BoundRule for Quadratic {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn mu(&self, i: &BoundsInput) -> Result<f64> {
        i.validate()?;
        let raw = 28.0 * i.r * i.r / (3.0 * i.n) * (2.0 * i.d / i.delta).ln() - i.lambda;
        Ok(0.5 * raw.max(0.0))
    }

    fn compute(&self, i: &BoundsInput) -> Result<BoundReport> {
        let mu = self.mu(i)?;
        let mut notes = Vec::new();
        let th = Quadratic::threshold(i);
        if i.n <= th {
            notes.push(format!(
                "sample size n = {} does not exceed {th:.4}; the guarantee does not apply",
                i.n
            ));
        }
        Ok(report(self.name(), mu, i.lambda, true, notes))
    }
}

/// Bounded scalar-loss derivatives on a ball of radius `D`:
/// `μ = √(4π)(R²/√n)(B_ℓ[2 + √(ln(1/δ)/(2π))] + R M_ℓ D)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bounded;

impl BoundRule for Bounded {
    fn name(&self) -> &'static str {
        "bounded"
    }

    fn mu(&self, i: &BoundsInput) -> Result<f64> {
        i.validate()?;
        let pi = std::f64::consts::PI;
        let tail = ((1.0 / i.delta).ln() / (2.0 * pi)).sqrt();
        Ok((4.0 * pi).sqrt() * i.r * i.r / i.n.sqrt()
            * (i.b_ell * (2.0 + tail) + i.r * i.m_ell * i.domain_radius))
    }

    fn compute(&self, i: &BoundsInput) -> Result<BoundReport> {
        let mu = self.mu(i)?;
        let notes = vec![format!(
            "holds uniformly over the ball of radius {}",
            i.domain_radius
        )];
        Ok(report(self.name(), mu, i.lambda, false, notes))
    }
}

/// Sub-Gaussian features with parameter `ρ`:
/// `μ = C(ρ² M_ℓ D/√n)(d + ln(1/δ))[(ρ + B̃)/√d + (ρ + (R²B̃)^{1/3})/√n]`,
/// `B̃ = B_ℓ/(M_ℓ D)`. Evaluated with `M_ℓ D` multiplied through so that
/// `M_ℓ = 0` stays finite.
#[derive(Debug, Clone, Copy, Default)]
pub struct SubGaussian;

impl BoundRule for SubGaussian {
    fn name(&self) -> &'static str {
        "subgaussian"
    }

    fn mu(&self, i: &BoundsInput) -> Result<f64> {
        i.validate()?;
        if i.rho > i.r {
            return Err(Error::arg(
                "rho",
                format!("must not exceed R = {}, got {}", i.r, i.rho),
            ));
        }
        let md = i.m_ell * i.domain_radius;
        let first = (i.rho * md + i.b_ell) / i.d.sqrt();
        let second = (i.rho * md + (i.r * i.r * i.b_ell).cbrt() * md.powf(2.0 / 3.0)) / i.n.sqrt();
        Ok(i.c_subg * i.rho * i.rho / i.n.sqrt() * (i.d + (1.0 / i.delta).ln()) * (first + second))
    }

    fn compute(&self, i: &BoundsInput) -> Result<BoundReport> {
        let mu = self.mu(i)?;
        let notes = vec![format!("constant C = {} is unverified", i.c_subg)];
        Ok(report(self.name(), mu, i.lambda, false, notes))
    }
}

/// Name → bound rule table.
pub struct BoundRegistry {
    rules: BTreeMap<&'static str, Box<dyn BoundRule>>,
}

impl Default for BoundRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl BoundRegistry {
    pub fn builtin() -> Self {
        let mut r = BoundRegistry {
            rules: BTreeMap::new(),
        };
        r.register(Box::new(Hoeffding));
        r.register(Box::new(Quadratic));
        r.register(Box::new(Bounded));
        r.register(Box::new(SubGaussian));
        r
    }

    pub fn register(&mut self, rule: Box<dyn BoundRule>) {
        self.rules.insert(rule.name(), rule);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rules.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn BoundRule> {
        self.rules
            .get(name)
            .map(|r| r.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "regime",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

pub fn mu_hoeffding(input: &BoundsInput) -> Result<BoundReport> {
    Hoeffding.compute(input)
}

pub fn mu_quadratic(input: &BoundsInput) -> Result<BoundReport> {
    Quadratic.compute(input)
}

pub fn mu_bounded(input: &BoundsInput) -> Result<BoundReport> {
    Bounded.compute(input)
}

pub fn mu_subgaussian(input: &BoundsInput) -> Result<BoundReport> {
    SubGaussian.compute(input)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// Largest spectral-norm estimate over the probes.
    pub value: f64,
    pub per_probe: Vec<f64>,
    /// False when some power iteration hit its cap.
    pub converged: bool,
}

pub const GAP_REL_TOL: f64 = 1e-4;

fn is_full_sample(sample: &[usize], n: usize) -> bool {
    if sample.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    sample
        .iter()
        .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

/// Max over probes of `‖H_f(x) − H_F(x)‖₂`, each by power iteration on
/// `v ↦ ∇²f(x)v − ∇²F(x)v`. The ridge term cancels and is ignored.
pub fn empirical_hessian_gap(
    loss: &RegularizedLoss,
    full: &SparseDataset,
    sample: &[usize],
    probes: &[Vec<f64>],
    power_iters: usize,
    seed: u64,
) -> Result<GapEstimate> {
    if probes.is_empty() {
        return Err(Error::arg("probes", "need at least one probe point"));
    }
    if power_iters < 30 {
        return Err(Error::arg(
            "power_iters",
            format!("must be >= 30, got {power_iters}"),
        ));
    }
    if sample.is_empty() || sample.iter().any(|&i| i >= full.n_examples()) {
        return Err(Error::arg("sample", "empty or out of range"));
    }
    let d = full.n_features();
    if probes.iter().any(|p| p.len() != d) {
        return Err(Error::arg("probes", "dimension mismatch"));
    }
    if is_full_sample(sample, full.n_examples()) {
        return Ok(GapEstimate {
            value: 0.0,
            per_probe: vec![0.0; probes.len()],
            converged: true,
        });
    }
    let data_loss = loss.with_lambda(0.0);
    let fv = DataView::subset(full, sample);
    let big = DataView::full(full);
    let mut per_probe = Vec::with_capacity(probes.len());
    let mut converged = true;
    let mut scratch = vec![0.0; d];
    for (k, x) in probes.iter().enumerate() {
        let est = power_iteration(
            d,
            |v, out| {
                data_loss.hvp_into(fv, x, v, out).expect("non-empty sample");
                data_loss
                    .hvp_into(big, x, v, &mut scratch)
                    .expect("non-empty dataset");
                for (o, s) in out.iter_mut().zip(&scratch) {
                    *o -= s;
                }
            },
            power_iters,
            GAP_REL_TOL,
            seed.wrapping_add(k as u64),
        );
        converged &= est.converged;
        per_probe.push(est.value);
    }
    let value = per_probe.iter().copied().fold(0.0, f64::max);
    Ok(GapEstimate {
        value,
        per_probe,
        converged,
    })
}

/// `count` seeded points uniform in the ball of radius `radius`, preceded
/// by the origin and followed by `extra` when given.
pub fn default_probe_points(
    d: usize,
    radius: f64,
    count: usize,
    seed: u64,
    extra: Option<&[f64]>,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; d]];
    for _ in 0..count {
        let mut z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nz = z
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let u: f64 = rng.gen();
        let r = radius * u.powf(1.0 / d as f64);
        z.iter_mut().for_each(|v| *v *= r / nz);
        out.push(z);
    }
    if let Some(e) = extra {
        out.push(e.to_vec());
    }
    out
}

pub const DENSE_CHECK_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub holds: bool,
    /// Smallest eigenvalue of `H_F − σ(H_f + μI)`.
    pub lower_margin: f64,
    /// Smallest eigenvalue of `2(H_f + μI) − H_F`.
    pub upper_margin: f64,
}

pub const SANDWICH_SLACK: f64 = 1e-10;

/// Dense check of `(3/2 + 2μ/λ)⁻¹(H_f + μI) ⪯ H_F ⪯ 2(H_f + μI)` for
/// squared loss.
pub fn sandwich_check_quadratic(
    loss: &RegularizedLoss,
    full: &SparseDataset,
    sample: &[usize],
    mu: f64,
) -> Result<SandwichCheck> {
    let h_big = full_hessian_quadratic(loss, full)?;
    sandwich_check_with(loss, full, &h_big, sample, mu)
}

/// Dense `H_F` for squared loss, for reuse across many sandwich checks.
pub fn full_hessian_quadratic(
    loss: &RegularizedLoss,
    full: &SparseDataset,
) -> Result<DMatrix<f64>> {
    check_dense(loss, full)?;
    let d = full.n_features();
    Ok(dense_hessian(loss, DataView::full(full), &vec![0.0; d]))
}

fn check_dense(loss: &RegularizedLoss, full: &SparseDataset) -> Result<()> {
    if loss.kind != LossKind::Squared {
        return Err(Error::arg("loss", "sandwich check requires squared loss"));
    }
    if full.n_features() > DENSE_CHECK_LIMIT {
        return Err(Error::arg(
            "d",
            format!(
                "dense check limited to d <= {DENSE_CHECK_LIMIT}, got {}; use empirical_hessian_gap",
                full.n_features()
            ),
        ));
    }
    Ok(())
}

/// As [`sandwich_check_quadratic`] with a precomputed `H_F`.
pub fn sandwich_check_with(
    loss: &RegularizedLoss,
    full: &SparseDataset,
    h_big: &DMatrix<f64>,
    sample: &[usize],
    mu: f64,
) -> Result<SandwichCheck> {
    check_dense(loss, full)?;
    let c = relative_constants_quadratic(loss.lambda, mu)?;
    if sample.is_empty() || sample.iter().any(|&i| i >= full.n_examples()) {
        return Err(Error::arg("sample", "empty or out of range"));
    }
    let d = full.n_features();
    let mut h_phi = dense_hessian(loss, DataView::subset(full, sample), &vec![0.0; d]);
    for j in 0..d {
        h_phi[(j, j)] += mu;
    }
    let lower = h_big - &h_phi * c.sigma_rel;
    let upper = &h_phi * 2.0 - h_big;
    let min_eig = |m: DMatrix<f64>| SymmetricEigen::new(m).eigenvalues.min();
    let lower_margin = min_eig(lower);
    let upper_margin = min_eig(upper);
    Ok(SandwichCheck {
        holds: lower_margin >= -SANDWICH_SLACK && upper_margin >= -SANDWICH_SLACK,
        lower_margin,
        upper_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, subsample, SyntheticKind};

    fn spec_input() -> BoundsInput {
        BoundsInput {
            r: 1.0,
            n: 1000.0,
            d: 10.0,
            delta: 0.1,
            lambda: 0.0,
            ..BoundsInput::default()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn hoeffding_values() {
        let i = spec_input();
        assert!(rel(Hoeffding.mu(&i).unwrap(), 0.383882072975046) < 1e-12);
        let n = 32.0 * (10.0f64 / 0.1).ln();
        let j = BoundsInput { n, big_n: 1e6, ..i };
        assert!(rel(Hoeffding.mu(&j).unwrap(), 1.0) < 1e-14);
        let k = BoundsInput { n: 4000.0, ..i };
        assert!(rel(Hoeffding.mu(&k).unwrap(), Hoeffding.mu(&i).unwrap() / 2.0) < 1e-14);
    }

    #[test]
    fn quadratic_values() {
        let i = spec_input();
        assert!(rel(Quadratic.mu(&i).unwrap(), 0.0247254810438908) < 1e-12);
        let j = BoundsInput { n: 2000.0, ..i };
        assert!(rel(Quadratic.mu(&j).unwrap(), Quadratic.mu(&i).unwrap() / 2.0) < 1e-14);
        let big = BoundsInput { lambda: 1.0, ..i };
        let r = Quadratic.compute(&big).unwrap();
        assert_eq!(r.mu, 0.0);
        assert_eq!(r.constants.unwrap().kappa_rel, 3.0);
        let small = BoundsInput { n: 10.0, ..i };
        assert!(!Quadratic.compute(&small).unwrap().notes.is_empty());
    }

    #[test]
    fn bounded_values() {
        let i = BoundsInput {
            n: 1e4,
            ..spec_input()
        };
        assert!(rel(Bounded.mu(&i).unwrap(), 0.0585385305928888) < 1e-12);
        let lim = BoundsInput {
            domain_radius: 1e-300,
            delta: 1.0 - 1e-15,
            ..i
        };
        let expect = (4.0 * std::f64::consts::PI).sqrt() * 2.0 * 0.25 / 100.0;
        assert!(rel(Bounded.mu(&lim).unwrap(), expect) < 1e-6);
    }

    #[test]
    fn subgaussian_values() {
        let i = BoundsInput {
            r: 1.0,
            rho: 1.0,
            d: 1.0,
            n: 1.0,
            delta: (-1.0f64).exp(),
            domain_radius: 1.0,
            ..BoundsInput::default()
        };
        assert!(rel(SubGaussian.mu(&i).unwrap(), 5.75992104989487) < 1e-12);
        let z = BoundsInput { c_subg: 0.0, ..i };
        assert_eq!(SubGaussian.mu(&z).unwrap(), 0.0);
        let sq = BoundsInput {
            m_ell: 0.0,
            b_ell: 1.0,
            ..i
        };
        assert!(SubGaussian.mu(&sq).unwrap().is_finite());
    }

    #[test]
    fn subgaussian_n_dominant_scaling() {
        let d: f64 = 100.0;
        let small = BoundsInput {
            r: 1.0,
            rho: 1.0 / d.sqrt(),
            d,
            n: 1.0,
            big_n: 1e9,
            ..BoundsInput::default()
        };
        let ratio = SubGaussian.mu(&BoundsInput { n: 4.0, ..small }).unwrap()
            / SubGaussian.mu(&small).unwrap();
        assert!((0.25..=0.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn monotone_sweeps() {
        let reg = BoundRegistry::builtin();
        for name in reg.names() {
            let rule = reg.get(name).unwrap();
            let base = BoundsInput {
                rho: 0.5,
                ..spec_input()
            };
            let mut prev = f64::INFINITY;
            for n in [100.0, 1000.0, 10000.0] {
                let v = rule.mu(&BoundsInput { n, ..base }).unwrap();
                assert!(v <= prev, "{name} not monotone in n");
                prev = v;
            }
            let mut prev = 0.0;
            for r in [0.5, 1.0, 2.0] {
                let v = rule.mu(&BoundsInput { r, ..base }).unwrap();
                assert!(v >= prev, "{name} not monotone in R");
                prev = v;
            }
            let mut prev = 0.0;
            for delta in [0.5, 0.1, 0.01] {
                let v = rule.mu(&BoundsInput { delta, ..base }).unwrap();
                assert!(v >= prev, "{name} not monotone in delta");
                prev = v;
            }
        }
    }

    #[test]
    fn quadratic_beats_hoeffding_at_scale() {
        let i = BoundsInput {
            n: 1e4,
            ..spec_input()
        };
        assert!(Quadratic.mu(&i).unwrap() / Hoeffding.mu(&i).unwrap() < 0.05);
    }

    #[test]
    fn validation_rejects_bad_delta() {
        let i = BoundsInput {
            delta: 1.0,
            ..spec_input()
        };
        assert!(Hoeffding.mu(&i).unwrap_err().is_usage());
        assert!(BoundRegistry::builtin().get("chernoff").is_err());
    }

    #[test]
    fn gap_full_sample_is_zero() {
        let ds = make_synthetic(5, 60, SyntheticKind::Logistic, 0.9, 1).unwrap();
        let loss = RegularizedLoss::new(LossKind::Logistic, 0.1).unwrap();
        let all: Vec<usize> = (0..60).rev().collect();
        let g = empirical_hessian_gap(&loss, &ds, &all, &[vec![0.0; 5]], 50, 3).unwrap();
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn gap_quadratic_matches_dense_and_is_probe_invariant() {
        let ds = make_synthetic(10, 400, SyntheticKind::Squared, 0.9, 4).unwrap();
        let loss = RegularizedLoss::new(LossKind::Squared, 0.0).unwrap();
        let s = subsample(400, 40, 9).unwrap().indices;
        let probes = default_probe_points(10, 1.0, 3, 2, None);
        let g = empirical_hessian_gap(&loss, &ds, &s, &probes, 2000, 5).unwrap();
        assert!(g.converged);
        for p in &g.per_probe {
            assert!(rel(*p, g.per_probe[0]) < 10.0 * GAP_REL_TOL);
        }
        let x0 = vec![0.0; 10];
        let hf = dense_hessian(&loss, DataView::subset(&ds, &s), &x0);
        let hb = dense_hessian(&loss, DataView::full(&ds), &x0);
        let eig = SymmetricEigen::new(hf - hb).eigenvalues;
        let exact = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(
            rel(g.value, exact) < 10.0 * GAP_REL_TOL,
            "{} vs {exact}",
            g.value
        );
    }

    #[test]
    fn sandwich_trivial_and_failing() {
        let ds = make_synthetic(10, 300, SyntheticKind::Squared, 1.0, 6).unwrap();
        let loss = RegularizedLoss::new(LossKind::Squared, 1e-3).unwrap();
        let all: Vec<usize> = (0..300).collect();
        assert!(
            sandwich_check_quadratic(&loss, &ds, &all, 0.0)
                .unwrap()
                .holds
        );
        let tiny = subsample(300, 2, 1).unwrap().indices;
        assert!(
            !sandwich_check_quadratic(&loss, &ds, &tiny, 0.0)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn sandwich_refuses_large_d() {
        let ds = make_synthetic(201, 5, SyntheticKind::Squared, 1.0, 6).unwrap();
        let loss = RegularizedLoss::new(LossKind::Squared, 1e-3).unwrap();
        assert!(sandwich_check_quadratic(&loss, &ds, &[0, 1], 0.1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn every_regime_shrinks_with_more_samples(
            n in 10.0f64..1e6,
            d in 1.0f64..1e3,
            delta in 1e-6f64..0.9,
            lambda in 0.0f64..1.0,
        ) {
            let small = BoundsInput { n, big_n: 1e8, d, delta, lambda, ..BoundsInput::default() };
            let large = BoundsInput { n: 4.0 * n, ..small };
            let registry = BoundRegistry::builtin();
            for name in registry.names() {
                let rule = registry.get(name).unwrap();
                let (a, b) = (rule.mu(&small).unwrap(), rule.mu(&large).unwrap());
                proptest::prop_assert!(b >= 0.0 && b <= a * (1.0 + 1e-12), "{}: {} then {}", name, a, b);
            }
        }
    }
}
