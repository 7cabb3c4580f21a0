//! Synthetic factor panels with controlled residual auto- and cross-correlation.
//!
//! `X = L F + sqrt(theta) U` where `U = sqrt((1 - rho^2) / (1 + 2 J beta^2)) e` and
//!
//! ```text
//! e[i,t] = rho e[i,t-1] + v[i,t] + beta * sum_{0 < |h - i| <= J} v[h,t]
//! ```
//!
//! with the neighbour range clamped to the panel. All draws are standard normal
//! from a ChaCha20 stream seeded by the config seed.

use crate::error::{Error, Result};
use crate::spectra::ReturnPanel;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub t: usize,
    pub p_true: usize,
    /// Noise level `1/SNR`; the residual scale is `theta = inv_snr * max(p_true, 1)`.
    pub inv_snr: f64,
    pub rho: f64,
    pub beta: f64,
    /// Cross-sectional neighbour range of the residual moving average.
    pub j: usize,
    /// Standard deviation of the weak factors (1 keeps them strong).
    pub sigma_weak: f64,
    pub weak_count: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Strong factors, no residual correlation.
    pub fn new(n: usize, t: usize, p_true: usize, inv_snr: f64) -> Self {
        Self {
            n,
            t,
            p_true,
            inv_snr,
            rho: 0.0,
            beta: 0.0,
            j: 0,
            sigma_weak: 1.0,
            weak_count: 0,
            seed: 0,
        }
    }

    /// Sets `(rho, beta)`; `J` becomes `N / 10` when `beta != 0` and 0 otherwise.
    pub fn with_correlation(mut self, rho: f64, beta: f64) -> Self {
        self.rho = rho;
        self.beta = beta;
        self.j = if beta != 0.0 { self.n / 10 } else { 0 };
        self
    }

    pub fn with_neighbours(mut self, j: usize) -> Self {
        self.j = j;
        self
    }

    pub fn with_weak(mut self, weak_count: usize, sigma_weak: f64) -> Self {
        self.weak_count = weak_count;
        self.sigma_weak = sigma_weak;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn theta(&self) -> f64 {
        self.inv_snr * self.p_true.max(1) as f64
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.n as f64 / self.t as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.t < 2 {
            return Err(Error::PanelTooSmall {
                n: self.n,
                t: self.t,
            });
        }
        if !(self.inv_snr > 0.0 && self.inv_snr.is_finite()) {
            return Err(Error::param("inv_snr", self.inv_snr, "must be positive"));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::param("rho", self.rho, "must satisfy |rho| < 1"));
        }
        if !(self.beta.abs() <= 1.0) {
            return Err(Error::param("beta", self.beta, "must satisfy |beta| <= 1"));
        }
        if self.j >= self.n {
            return Err(Error::param("J", self.j as f64, "must be below N"));
        }
        if !(self.sigma_weak > 0.0) {
            return Err(Error::param("sigma_weak", self.sigma_weak, "must be positive"));
        }
        if self.weak_count > self.p_true {
            return Err(Error::param(
                "weak_count",
                self.weak_count as f64,
                "cannot exceed the number of factors",
            ));
        }
        Ok(())
    }

    /// Discarded start-up samples of the residual recursion.
    pub fn burn_in(&self) -> usize {
        10 * (1.0 / (1.0 - self.rho.abs())).ceil() as usize
    }
}

/// What the generator planted.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub p_true: usize,
    pub theta: f64,
    /// `N x p`.
    pub loadings: DMatrix<f64>,
    /// `p x T`.
    pub factors: DMatrix<f64>,
    /// Unit-variance residuals `U`, `N x T`.
    pub noise: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: ReturnPanel,
    pub truth: GroundTruth,
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticPanel> {
    config.validate()?;
    let (n, t, p) = (config.n, config.t, config.p_true);
    let mut rng = rng_from_seed(config.seed);
    let loadings = DMatrix::from_fn(n, p, |_, _| normal(&mut rng));
    let strong = p - config.weak_count;
    let mut factors = DMatrix::zeros(p, t);
    for k in 0..p {
        let sd = if k < strong { 1.0 } else { config.sigma_weak };
        for s in 0..t {
            factors[(k, s)] = sd * normal(&mut rng);
        }
    }
    let noise = correlated_noise(config, &mut rng);
    let theta = config.theta();
    let x = &loadings * &factors + noise.scale(theta.sqrt());
    Ok(SyntheticPanel {
        panel: ReturnPanel::from_matrix(x)?,
        truth: GroundTruth {
            p_true: p,
            theta,
            loadings,
            factors,
            noise,
        },
    })
}

fn correlated_noise(config: &SyntheticConfig, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    let (n, t, j) = (config.n, config.t, config.j);
    let burn = config.burn_in();
    let scale = ((1.0 - config.rho * config.rho) / (1.0 + 2.0 * j as f64 * config.beta.powi(2))).sqrt();
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut prefix = vec![0.0; n + 1];
    let mut u = DMatrix::zeros(n, t);
    for step in 0..burn + t {
        for vi in v.iter_mut() {
            *vi = normal(rng);
        }
        for i in 0..n {
            prefix[i + 1] = prefix[i] + v[i];
        }
        for i in 0..n {
            let lo = i.saturating_sub(j);
            let hi = (i + j).min(n - 1);
            let neighbours = prefix[hi + 1] - prefix[lo] - v[i];
            e[i] = config.rho * e[i] + v[i] + config.beta * neighbours;
        }
        if step >= burn {
            let s = step - burn;
            for i in 0..n {
                u[(i, s)] = scale * e[i];
            }
        }
    }
    u
}

/// Independent unit-variance AR(1) rows with coefficient `b`, started from the
/// stationary law.
pub fn ar1_panel(n: usize, t: usize, b: f64, seed: u64) -> Result<ReturnPanel> {
    let mut rng = rng_from_seed(seed);
    let coeffs = vec![b; n];
    ReturnPanel::from_matrix(ar1_rows(&coeffs, t, &mut rng)?)
}

fn ar1_rows(coeffs: &[f64], t: usize, rng: &mut ChaCha20Rng) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(coeffs.len(), t);
    for (i, &b) in coeffs.iter().enumerate() {
        if !(b.abs() < 1.0) {
            return Err(Error::param("b", b, "AR(1) coefficient must satisfy |b| < 1"));
        }
        let sd = (1.0 - b * b).sqrt();
        let mut y = normal(rng);
        for s in 0..t {
            if s > 0 {
                y = b * y + sd * normal(rng);
            }
            m[(i, s)] = y;
        }
    }
    Ok(m)
}

/// Heterogeneous AR(1) panel `Y` (coefficients uniform on `[low, high]`) and the
/// homogeneous panel `Z` with coefficient `b_bar`, both with unit variance.
#[derive(Debug, Clone)]
pub struct MeanFieldPair {
    pub y: ReturnPanel,
    pub z: ReturnPanel,
    pub coefficients: Vec<f64>,
}

pub fn generate_meanfield_pair(
    n: usize,
    t: usize,
    low: f64,
    high: f64,
    b_bar: f64,
    seed: u64,
) -> Result<MeanFieldPair> {
    if !(0.0 <= low && low <= high && high <= 1.0) {
        return Err(Error::param("b range", high - low, "need 0 <= low <= high <= 1"));
    }
    let mut rng = rng_from_seed(seed);
    // U[0, 1] is sampled on [0, 1) so every row stays stationary
    let coefficients: Vec<f64> = (0..n)
        .map(|_| if high > low { rng.random_range(low..high) } else { low })
        .collect();
    let y = ar1_rows(&coefficients, t, &mut rng)?;
    let z = ar1_rows(&vec![b_bar; n], t, &mut rng)?;
    Ok(MeanFieldPair {
        y: ReturnPanel::from_matrix(y)?,
        z: ReturnPanel::from_matrix(z)?,
        coefficients,
    })
}
