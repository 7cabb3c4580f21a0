//! Reference factor-count estimators working on the covariance eigenvalues:
//! the Bai-Ng BIC3 criterion, Onatski's edge-distribution (ED) estimator and
//! the Ahn-Horenstein eigenvalue ratio (ER).

use crate::error::{Error, Result};
use crate::spectra::{covariance, symmetric_eigenvalues, ReturnPanel};
use serde::{Deserialize, Serialize};

pub const DEFAULT_K_MAX: usize = 20;

const ED_MAX_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineMethod {
    #[serde(rename = "BIC3")]
    Bic3,
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "ER")]
    Er,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub method: BaselineMethod,
    pub p_hat: usize,
    /// BIC3: criterion for `k = 0..=k_max`. ED: eigenvalue gaps and ER: ratios,
    /// both for `k = 1..=k_max`.
    pub criterion_values: Vec<f64>,
    /// ED hit its iteration cap, or ER had to shorten its range at a zero eigenvalue.
    pub flagged: bool,
}

/// Descending eigenvalues of the covariance of the normalized panel.
pub fn panel_eigenvalues(panel: &ReturnPanel) -> Result<Vec<f64>> {
    let z = panel.normalize()?;
    Ok(symmetric_eigenvalues(&covariance(&z)))
}

fn check_k_max(panel: &ReturnPanel, k_max: usize) -> Result<()> {
    let limit = panel.n().min(panel.t());
    if k_max >= limit {
        return Err(Error::ComponentsOutOfRange { p: k_max, limit });
    }
    Ok(())
}

pub fn bic3(panel: &ReturnPanel, k_max: usize) -> Result<BaselineReport> {
    check_k_max(panel, k_max)?;
    Ok(bic3_from_eigenvalues(&panel_eigenvalues(panel)?, panel.n(), panel.t(), k_max))
}

/// BIC3 on descending eigenvalues of `(1/T) X X^T`. The mean squared p-level
/// residual is the tail eigenvalue sum divided by `N`.
pub fn bic3_from_eigenvalues(eigs: &[f64], n: usize, t: usize, k_max: usize) -> BaselineReport {
    let (nf, tf) = (n as f64, t as f64);
    let nt = nf * tf;
    let v = |k: usize| eigs[k.min(eigs.len())..].iter().map(|x| x.max(0.0)).sum::<f64>() / nf;
    let sigma2 = v(k_max);
    let values: Vec<f64> = (0..=k_max)
        .map(|k| {
            let kf = k as f64;
            v(k) + kf * sigma2 * (nf + tf - kf) * nt.ln() / nt
        })
        .collect();
    let p_hat = argmin_first(&values);
    BaselineReport {
        method: BaselineMethod::Bic3,
        p_hat,
        criterion_values: values,
        flagged: false,
    }
}

pub fn ed(panel: &ReturnPanel, k_max: usize) -> Result<BaselineReport> {
    if k_max + 5 >= panel.n() {
        return Err(Error::ComponentsOutOfRange {
            p: k_max,
            limit: panel.n().saturating_sub(5),
        });
    }
    check_k_max(panel, k_max)?;
    Ok(ed_from_eigenvalues(&panel_eigenvalues(panel)?, k_max))
}

/// Onatski's calibration: `delta` is twice the absolute slope of `lambda_j` on
/// `(j - 1)^{2/3}` over the five eigenvalues following the current estimate.
pub fn ed_from_eigenvalues(eigs: &[f64], k_max: usize) -> BaselineReport {
    // 1-based lambda_k
    let lam = |k: usize| eigs.get(k - 1).copied().unwrap_or(0.0);
    let gaps: Vec<f64> = (1..=k_max).map(|k| lam(k) - lam(k + 1)).collect();
    let mut j = k_max + 1;
    let mut p_hat = 0;
    let mut converged = false;
    for _ in 0..ED_MAX_ITERATIONS {
        let xs: Vec<f64> = (j..j + 5).map(|i| ((i - 1) as f64).powf(2.0 / 3.0)).collect();
        let ys: Vec<f64> = (j..j + 5).map(lam).collect();
        let delta = 2.0 * ols_slope(&xs, &ys).abs();
        p_hat = (1..=k_max).rev().find(|&k| gaps[k - 1] >= delta && gaps[k - 1] > 0.0).unwrap_or(0);
        if p_hat + 1 == j {
            converged = true;
            break;
        }
        j = p_hat + 1;
    }
    BaselineReport {
        method: BaselineMethod::Ed,
        p_hat,
        criterion_values: gaps,
        flagged: !converged,
    }
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn er(panel: &ReturnPanel, k_max: usize) -> Result<BaselineReport> {
    if k_max + 1 > panel.n() {
        return Err(Error::ComponentsOutOfRange {
            p: k_max,
            limit: panel.n(),
        });
    }
    Ok(er_from_eigenvalues(&panel_eigenvalues(panel)?, k_max))
}

/// `argmax_{1 <= k <= k_max} lambda_k / lambda_{k+1}`.
pub fn er_from_eigenvalues(eigs: &[f64], k_max: usize) -> BaselineReport {
    const ZERO: f64 = 1e-12;
    let usable = (1..=k_max)
        .take_while(|&k| eigs.get(k).is_some_and(|&x| x > ZERO))
        .count();
    let ratios: Vec<f64> = (1..=usable).map(|k| eigs[k - 1] / eigs[k]).collect();
    let p_hat = if ratios.is_empty() {
        0
    } else {
        1 + argmax_first(&ratios)
    };
    BaselineReport {
        method: BaselineMethod::Er,
        p_hat,
        criterion_values: ratios,
        flagged: usable < k_max,
    }
}

fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn run(method: BaselineMethod, panel: &ReturnPanel, k_max: usize) -> Result<BaselineReport> {
    match method {
        BaselineMethod::Bic3 => bic3(panel, k_max),
        BaselineMethod::Ed => ed(panel, k_max),
        BaselineMethod::Er => er(panel, k_max),
    }
}
