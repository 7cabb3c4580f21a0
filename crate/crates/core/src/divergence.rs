//! Kullback-Leibler and Jensen-Shannon divergences between binned densities.
//!
//! Empty bins are replaced by a small mass `eps` and the occupied bins are
//! shrunk by `alpha = 1 - zeros * eps`, so logarithms stay finite and the total
//! stays one.

use crate::error::{Error, Result};
use crate::spectra::SpectralDensity;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Largest total mass that regularization may move into empty bins.
const MAX_MOVED_MASS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedDensity {
    pub masses: Vec<f64>,
    pub epsilon_used: f64,
    pub alpha: f64,
}

pub fn regularize(density: &SpectralDensity, epsilon: f64) -> Result<RegularizedDensity> {
    regularize_masses(&density.masses, epsilon)
}

pub fn regularize_masses(masses: &[f64], epsilon: f64) -> Result<RegularizedDensity> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", epsilon, "must be positive"));
    }
    if masses.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::param("mass", f64::NAN, "masses must be nonnegative"));
    }
    let zeros = masses.iter().filter(|m| **m == 0.0).count();
    if zeros == masses.len() {
        return Err(Error::DegenerateDensity);
    }
    if epsilon * zeros as f64 >= MAX_MOVED_MASS {
        return Err(Error::RegularizationTooLarge { epsilon, zeros });
    }
    let alpha = 1.0 - zeros as f64 * epsilon;
    let masses = masses
        .iter()
        .map(|&m| if m == 0.0 { epsilon } else { alpha * m })
        .collect();
    Ok(RegularizedDensity {
        masses,
        epsilon_used: epsilon,
        alpha,
    })
}

fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
        .sum::<f64>()
        .max(0.0)
}

pub fn kl(p: &RegularizedDensity, q: &RegularizedDensity) -> Result<f64> {
    if p.masses.len() != q.masses.len() {
        return Err(Error::GridMismatch {
            left: p.masses.len(),
            right: q.masses.len(),
        });
    }
    Ok(kl_slices(&p.masses, &q.masses))
}

/// Jensen-Shannon divergence in nats, `0 <= js <= ln 2`.
pub fn js(p: &SpectralDensity, q: &SpectralDensity, epsilon: f64) -> Result<f64> {
    if p.grid != q.grid {
        return Err(Error::GridMismatch {
            left: p.bins(),
            right: q.bins(),
        });
    }
    js_masses(&p.masses, &q.masses, epsilon)
}

/// [`js`] on raw mass vectors that are known to share a grid.
pub fn js_masses(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::GridMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let p = regularize_masses(p, epsilon)?;
    let q = regularize_masses(q, epsilon)?;
    Ok(js_regularized(&p, &q))
}

pub fn js_regularized(p: &RegularizedDensity, q: &RegularizedDensity) -> f64 {
    // summing the two halves per bin keeps the value exactly symmetric
    let v: f64 = p
        .masses
        .iter()
        .zip(&q.masses)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * (a * (a / m).ln()) + 0.5 * (b * (b / m).ln())
        })
        .sum();
    v.clamp(0.0, std::f64::consts::LN_2)
}
