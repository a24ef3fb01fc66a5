//! Small dense-vector helpers and a seeded power iteration for symmetric
//! operators given only as matrix-vector products.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn is_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Outcome of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    /// Estimated largest-magnitude eigenvalue, in absolute value.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on a symmetric operator `apply(v, out)`.
///
/// Tracks `‖Av‖` for unit `v`, which converges to the spectral norm even when
/// the two extreme eigenvalues have opposite signs and similar magnitude.
/// Stops when the relative change drops below `rel_tol`.
pub fn power_iteration<F>(
    dim: usize,
    mut apply: F,
    max_iters: usize,
    rel_tol: f64,
    seed: u64,
) -> PowerEstimate
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return PowerEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut w = vec![0.0; dim];
    let mut prev = f64::NAN;
    for it in 1..=max_iters {
        w.iter_mut().for_each(|x| *x = 0.0);
        apply(&v, &mut w);
        let nw = norm(&w);
        if nw == 0.0 {
            return PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if prev.is_finite() && ((nw - prev).abs() <= rel_tol * nw) {
            return PowerEstimate {
                value: nw,
                iterations: it,
                converged: true,
            };
        }
        prev = nw;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    PowerEstimate {
        value: prev,
        iterations: max_iters,
        converged: false,
    }
}
