use serde::{Deserialize, Serialize};

use crate::bregman::Preconditioner;
use crate::error::{Error, Result};

/// Lower bound on `A_t` with the running products `π± = Π(1 ± γ_τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub a_lower: f64,
    pub pi_plus: f64,
    pub pi_minus: f64,
}

fn certificate(
    sigma_rel: f64,
    gains: &[f64],
    gamma: impl Fn(f64) -> f64,
) -> Result<RateCertificate> {
    if !(sigma_rel > 0.0) {
        return Err(Error::InvalidConstants(format!(
            "sigma_rel must be > 0, got {sigma_rel}"
        )));
    }
    let (mut pp, mut pm) = (1.0, 1.0);
    for &g in gains {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::arg("gains", format!("must be positive, got {g}")));
        }
        let c = gamma(g);
        pp *= 1.0 + c;
        pm *= 1.0 - c;
    }
    let diff = pp - pm;
    Ok(RateCertificate {
        a_lower: diff * diff / (4.0 * sigma_rel),
        pi_plus: pp,
        pi_minus: pm,
    })
}

/// `γ_τ = 1/(2√(κ_rel G_τ))`, `A_lower = (π⁺ − π⁻)²/(4σ_rel)`.
pub fn theoretical_rate_certificate(
    sigma_rel: f64,
    l_rel: f64,
    gains: &[f64],
) -> Result<RateCertificate> {
    let kappa = l_rel / sigma_rel;
    certificate(sigma_rel, gains, |g| 0.5 / (kappa * g).sqrt())
}

/// `G̃` with `G̃^{−1/2}` the mean of `G_τ^{−1/2}`.
pub fn harmonic_gain(gains: &[f64]) -> Option<f64> {
    if gains.is_empty() {
        return None;
    }
    let m = gains.iter().map(|g| g.powf(-0.5)).sum::<f64>() / gains.len() as f64;
    Some(m.powi(-2))
}

/// `t²/(4 L_rel G̃_t)` for `t = gains.len()`.
pub fn harmonic_lower_bound(l_rel: f64, gains: &[f64]) -> f64 {
    match harmonic_gain(gains) {
        None => 0.0,
        Some(g) => {
            let t = gains.len() as f64;
            t * t / (4.0 * l_rel * g)
        }
    }
}

/// `min{κ_φ, 1 + (M/σ_φ) d_t}`.
pub fn lemma3_gain_bound(precond: &Preconditioner, d_t: f64, m: f64) -> Result<f64> {
    if !(d_t >= 0.0 && m >= 0.0) {
        return Err(Error::arg(
            "d_t",
            format!("need d_t >= 0 and M >= 0, got {d_t}, {m}"),
        ));
    }
    Ok(precond.kappa_phi().min(1.0 + m / precond.sigma_phi() * d_t))
}

/// Default Hessian Lipschitz constant `M_ℓ R³` of the data term of `φ`.
pub fn logistic_hessian_lipschitz(precond: &Preconditioner) -> f64 {
    let r = precond.data().map_or(0.0, |d| d.max_row_norm());
    precond.loss().profile().m_ell * r.powi(3)
}
