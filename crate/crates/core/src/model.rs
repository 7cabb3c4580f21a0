//! Limiting eigenvalue density of `C = (1/T) U U^T` for AR(1) residual rows.
//!
//! Rows of `U` are independent unit-variance AR(1) series with coefficient `b`.
//! The moment generating function `M(z) = z G(z) - 1` solves a quartic in `M`
//! whose coefficients depend on `z`, `c = N/T` and `a^2 = 1 - b^2`; the density
//! is recovered from the Green's function through `rho(lambda) = -Im G(lambda +
//! i eps) / pi` at a small fixed `eps`.
//!
//! Only one of the four roots is the physical branch. It is found by anchoring
//! far up the imaginary axis, where `M(z) ~ 1/z`, and continuing the root along
//! a path down to the real axis and then across the grid. Steps are subdivided
//! until the tracked root moves by a small fraction of its distance to the other
//! roots, so the continuation cannot jump branches.

use crate::error::{Error, Result};
use crate::roots::{horner, quartic_roots};
use crate::spectra::{BinGrid, SpectralDensity};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

type C = Complex64;

/// Imaginary offset used in place of the `eps -> 0+` limit.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Densities down to this value count as nonnegative.
pub const DENSITY_FLOOR: f64 = -1e-9;

const MAX_BISECTIONS: u32 = 40;
const STEP_FRACTION: f64 = 0.3;
const DESCENT_STEPS: usize = 48;
const TAIL_STEPS: usize = 64;

/// AR(1) coefficient and aspect ratio of the residual model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    b: f64,
    c: f64,
    a_sq: f64,
}

impl ModelParams {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !(b.abs() < 1.0) {
            return Err(Error::param("b", b, "AR(1) coefficient must satisfy |b| < 1"));
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::param("c", c, "aspect ratio must lie in (0, 1]"));
        }
        Ok(Self {
            b,
            c,
            a_sq: 1.0 - b * b,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Innovation variance `1 - b^2`.
    pub fn a_sq(&self) -> f64 {
        self.a_sq
    }

    /// Upper bound on the support: the Marchenko-Pastur edge times the largest
    /// eigenvalue `(1 + |b|) / (1 - |b|)` of the AR(1) autocovariance.
    pub fn support_bound(&self) -> f64 {
        let edge = (1.0 + self.c.sqrt()).powi(2);
        edge * (1.0 + self.b.abs()) / (1.0 - self.b.abs())
    }
}

/// Coefficients of the moment quartic in `M`, highest degree first.
pub fn quartic_coefficients(params: &ModelParams, z: C) -> [C; 5] {
    let b2 = params.b * params.b;
    let a2 = params.a_sq;
    let a4 = a2 * a2;
    let c = params.c;
    [
        C::new(a4 * c * c, 0.0),
        (-(1.0 + b2) * z + a2 * c) * (2.0 * a2 * c),
        z * z * ((1.0 - b2) * (1.0 - b2)) - z * (2.0 * a2 * c * (1.0 + b2))
            + C::new((c * c - 1.0) * a4, 0.0),
        C::new(-2.0 * a4, 0.0),
        C::new(-a4, 0.0),
    ]
}

/// One solved point of the Green's function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEvaluation {
    pub z: C,
    pub roots: [C; 4],
    /// The physical root `M(z)`.
    pub selected: C,
    /// `G(z) = (M + 1) / z`.
    pub green: C,
    /// `-Im G(z) / pi`.
    pub density: f64,
}

impl GreenEvaluation {
    fn new(z: C, roots: [C; 4], selected: C) -> Self {
        let green = (selected + 1.0) / z;
        Self {
            z,
            roots,
            selected,
            green,
            density: -green.im / PI,
        }
    }

    /// `|poly(M)|` divided by the leading coefficient.
    pub fn quartic_residual(&self, params: &ModelParams) -> f64 {
        let c = quartic_coefficients(params, self.z);
        (horner(&c, self.selected).0 / c[0]).norm()
    }
}

fn density_of(m: C, z: C) -> f64 {
    -((m + 1.0) / z).im / PI
}

/// Solves the quartic at `z` and picks the physical root.
///
/// With `previous`, the root nearest to it among those with nonnegative density
/// is taken (continuity along a path). Without it, the root is found by
/// continuation from the asymptotic regime `M ~ 1/z` high above `Re z`.
pub fn solve_moment_equation(
    params: &ModelParams,
    z: C,
    previous: Option<C>,
) -> Result<GreenEvaluation> {
    if !(z.im > 0.0) {
        return Err(Error::param("Im z", z.im, "must be positive"));
    }
    match previous {
        Some(prev) => {
            let roots = quartic_roots(&quartic_coefficients(params, z));
            roots
                .iter()
                .copied()
                .filter(|&m| density_of(m, z) >= DENSITY_FLOOR)
                .min_by(|a, b| (a - prev).norm().total_cmp(&(b - prev).norm()))
                .map(|m| GreenEvaluation::new(z, roots, m))
                .ok_or(Error::BranchSelection {
                    lambda: z.re,
                    roots,
                })
        }
        None => Ok(BranchTracker::anchored(params, z)?.evaluation()),
    }
}

/// Follows the physical root of the quartic along a path in the upper half plane.
#[derive(Debug, Clone)]
pub struct BranchTracker {
    params: ModelParams,
    z: C,
    roots: [C; 4],
    m: C,
}

impl BranchTracker {
    /// Starts on the physical branch at `z`.
    pub fn anchored(params: &ModelParams, z: C) -> Result<Self> {
        let height = 10.0 * (params.support_bound() + 1.0);
        let top = C::new(z.re, height.max(z.im));
        let roots = quartic_roots(&quartic_coefficients(params, top));
        let asymptote = top.inv();
        let m = nearest(&roots, asymptote);
        let mut tracker = Self {
            params: *params,
            z: top,
            roots,
            m,
        };
        if top.im > z.im {
            let ratio = (z.im / top.im).powf(1.0 / DESCENT_STEPS as f64);
            let mut y = top.im;
            for _ in 0..DESCENT_STEPS - 1 {
                y *= ratio;
                tracker.step_to(C::new(z.re, y))?;
            }
            tracker.step_to(z)?;
        }
        tracker.check()?;
        Ok(tracker)
    }

    pub fn evaluation(&self) -> GreenEvaluation {
        GreenEvaluation::new(self.z, self.roots, self.m)
    }

    pub fn density(&self) -> f64 {
        density_of(self.m, self.z)
    }

    /// Moves to `target`, subdividing the straight segment as needed.
    pub fn advance(&mut self, target: C) -> Result<GreenEvaluation> {
        self.step_to(target)?;
        if self.check().is_err() {
            // lost the branch; start over from the asymptotic anchor
            *self = Self::anchored(&self.params, target)?;
        }
        Ok(self.evaluation())
    }

    fn check(&self) -> Result<()> {
        if self.density() >= DENSITY_FLOOR && self.m.is_finite() {
            Ok(())
        } else {
            Err(Error::BranchSelection {
                lambda: self.z.re,
                roots: self.roots,
            })
        }
    }

    fn step_to(&mut self, target: C) -> Result<()> {
        self.segment(target, 0)
    }

    fn segment(&mut self, target: C, depth: u32) -> Result<()> {
        let sep = self
            .roots
            .iter()
            .map(|r| (r - self.m).norm())
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let roots = quartic_roots(&quartic_coefficients(&self.params, target));
        let m = nearest(&roots, self.m);
        if !m.is_finite() {
            return Err(Error::BranchSelection {
                lambda: target.re,
                roots,
            });
        }
        if (m - self.m).norm() <= STEP_FRACTION * sep || depth >= MAX_BISECTIONS {
            self.z = target;
            self.roots = roots;
            // the tracked value is itself one of the roots
            self.m = m;
            return Ok(());
        }
        let mid = (self.z + target) * 0.5;
        self.segment(mid, depth + 1)?;
        self.segment(target, depth + 1)
    }
}

fn nearest(roots: &[C; 4], to: C) -> C {
    *roots
        .iter()
        .min_by(|a, b| (*a - to).norm().total_cmp(&(*b - to).norm()))
        .expect("four roots")
}

/// How pointwise densities become bin masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Quadrature {
    /// Density at the bin midpoint times the bin width.
    Midpoint,
    /// Composite midpoint rule on `subdivisions` sub-bins. A bin starting at zero
    /// is integrated in `u = sqrt(lambda)` to absorb the `lambda^{-1/2}` edge that
    /// appears when `c = 1`.
    Refined { subdivisions: usize },
}

/// Conversion of a pointwise density into masses on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub quadrature: Quadrature,
    /// Integrate the density beyond the last edge and add it to the last bin, the
    /// same convention histograms use for eigenvalues past the grid.
    pub overflow_to_last: bool,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            quadrature: Quadrature::Midpoint,
            overflow_to_last: false,
        }
    }
}

impl Binning {
    pub fn refined(subdivisions: usize) -> Self {
        Self {
            quadrature: Quadrature::Refined {
                subdivisions: subdivisions.max(1),
            },
            overflow_to_last: true,
        }
    }

    /// Quadrature nodes and weights for every bin, in ascending order.
    fn nodes(&self, grid: &BinGrid) -> Vec<Vec<(f64, f64)>> {
        grid.edges()
            .windows(2)
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let h = hi - lo;
                match self.quadrature {
                    Quadrature::Midpoint => vec![(0.5 * (lo + hi), h)],
                    Quadrature::Refined { subdivisions: s } if lo == 0.0 => {
                        let du = hi.sqrt() / s as f64;
                        (0..s)
                            .map(|j| {
                                let u = (j as f64 + 0.5) * du;
                                (u * u, 2.0 * u * du)
                            })
                            .collect()
                    }
                    Quadrature::Refined { subdivisions: s } => {
                        let dx = h / s as f64;
                        (0..s).map(|j| (lo + (j as f64 + 0.5) * dx, dx)).collect()
                    }
                }
            })
            .collect()
    }
}

fn tail_nodes(from: f64, to: f64) -> Vec<(f64, f64)> {
    if to <= from {
        return Vec::new();
    }
    let dx = (to - from) / TAIL_STEPS as f64;
    (0..TAIL_STEPS)
        .map(|j| (from + (j as f64 + 0.5) * dx, dx))
        .collect()
}

/// Pointwise model density at ascending `lambdas`.
pub fn model_pointwise(params: &ModelParams, lambdas: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    let mut out = Vec::with_capacity(lambdas.len());
    let mut tracker: Option<BranchTracker> = None;
    for &lam in lambdas {
        let z = C::new(lam, epsilon);
        let eval = match tracker.as_mut() {
            Some(t) => t.advance(z)?,
            None => {
                let t = BranchTracker::anchored(params, z)?;
                let e = t.evaluation();
                tracker = Some(t);
                e
            }
        };
        out.push(eval.density);
    }
    Ok(out)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::param("epsilon", epsilon, "must be positive"))
    }
}

/// Model density binned on `grid` with midpoint masses.
pub fn model_density(params: &ModelParams, grid: &BinGrid, epsilon: f64) -> Result<SpectralDensity> {
    model_density_with(params, grid, epsilon, &Binning::default())
}

pub fn model_density_with(
    params: &ModelParams,
    grid: &BinGrid,
    epsilon: f64,
    binning: &Binning,
) -> Result<SpectralDensity> {
    let eval = |lams: &[f64]| model_pointwise(params, lams, epsilon);
    let tail_end = 1.05 * params.support_bound();
    masses_from_pointwise(grid, binning, tail_end, eval)
}

fn masses_from_pointwise(
    grid: &BinGrid,
    binning: &Binning,
    tail_end: f64,
    density: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<SpectralDensity> {
    let nodes = binning.nodes(grid);
    let tail = if binning.overflow_to_last {
        tail_nodes(grid.upper(), tail_end)
    } else {
        Vec::new()
    };
    let lams: Vec<f64> = nodes
        .iter()
        .flatten()
        .chain(&tail)
        .map(|&(x, _)| x)
        .collect();
    let values = density(&lams)?;
    let mut it = values.into_iter();
    let mut masses: Vec<f64> = nodes
        .iter()
        .map(|bin| bin.iter().map(|&(_, w)| w * it.next().unwrap_or(0.0)).sum())
        .collect();
    let overflow: f64 = tail.iter().map(|&(_, w)| w * it.next().unwrap_or(0.0)).sum();
    if let Some(last) = masses.last_mut() {
        *last += overflow;
    }
    for m in masses.iter_mut() {
        if *m < 0.0 && *m >= DENSITY_FLOOR {
            *m = 0.0;
        }
    }
    if let Some(bad) = masses.iter().find(|m| **m < 0.0) {
        return Err(Error::param("bin mass", *bad, "negative model mass"));
    }
    SpectralDensity::from_weights(grid.clone(), masses)
}

/// Marchenko-Pastur edges `(1 -+ sqrt c)^2` for unit variance.
pub fn mp_edges(c: f64) -> (f64, f64) {
    let s = c.sqrt();
    ((1.0 - s).powi(2), (1.0 + s).powi(2))
}

/// Closed-form Marchenko-Pastur density for unit variance and ratio `c <= 1`.
pub fn mp_pointwise(c: f64, lambda: f64) -> f64 {
    let (lo, hi) = mp_edges(c);
    if lambda <= lo || lambda >= hi || lambda <= 0.0 {
        return 0.0;
    }
    ((hi - lambda) * (lambda - lo)).sqrt() / (2.0 * PI * c * lambda)
}

pub fn mp_density(c: f64, grid: &BinGrid) -> Result<SpectralDensity> {
    mp_density_with(c, grid, &Binning::default())
}

pub fn mp_density_with(c: f64, grid: &BinGrid, binning: &Binning) -> Result<SpectralDensity> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::param("c", c, "aspect ratio must lie in (0, 1]"));
    }
    let (_, hi) = mp_edges(c);
    masses_from_pointwise(grid, binning, hi, |lams| {
        Ok(lams.iter().map(|&l| mp_pointwise(c, l)).collect())
    })
}
