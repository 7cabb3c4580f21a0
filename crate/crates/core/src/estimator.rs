//! Joint grid search for the factor count `p` and the residual AR(1)
//! coefficient `b`.
//!
//! For every `p` the residual spectrum (with the `p` zero modes dropped) is
//! histogrammed, for every `b` the model density is binned on the same grid, and
//! the Jensen-Shannon divergence of each pair fills the surface.

use crate::divergence::{self, js_masses};
use crate::error::{Error, Result};
use crate::model::{self, model_density_with, Binning, ModelParams};
use crate::spectra::{empirical_density, BinGrid, ResidualSpectra, ReturnPanel, SpectralDensity};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Candidate values of `p` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    p_max: usize,
    b_values: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self::new(20, 0.95, 0.01).expect("valid default grid")
    }
}

impl SearchGrid {
    /// `p = 0..=p_max` and `b = 0, step, ..., b_max`.
    pub fn new(p_max: usize, b_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::param("b step", step, "must be positive"));
        }
        if !(0.0..1.0).contains(&b_max) {
            return Err(Error::param("b max", b_max, "must lie in [0, 1)"));
        }
        let count = (b_max / step + 1e-9).floor() as usize + 1;
        // index times step, rounded to the step's decimals, avoids drift from summation
        let b_values = (0..count).map(|k| round12(k as f64 * step)).collect();
        Self::with_b_values(p_max, b_values)
    }

    pub fn with_b_values(p_max: usize, b_values: Vec<f64>) -> Result<Self> {
        if b_values.is_empty() {
            return Err(Error::InvalidGrid("empty b grid".into()));
        }
        if let Some(b) = b_values.iter().find(|b| !(b.abs() < 1.0)) {
            return Err(Error::param("b", *b, "must satisfy |b| < 1"));
        }
        Ok(Self { p_max, b_values })
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn p_values(&self) -> Vec<usize> {
        (0..=self.p_max).collect()
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b_values
    }

    fn check(&self, panel: &ReturnPanel) -> Result<()> {
        let limit = panel.n().min(panel.t());
        if self.p_max >= limit {
            return Err(Error::ComponentsOutOfRange {
                p: self.p_max,
                limit,
            });
        }
        Ok(())
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Where the histogram grid comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// One grid for every `p`, spanning the spectrum after `p_max` removals.
    /// Eigenvalues beyond it land in the last bin.
    Common,
    /// A separate grid per `p` spanning that residual spectrum.
    PerP,
}

/// Number of histogram bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinCount {
    Fixed(usize),
    /// `N / 10` clamped to `[10, 100]`.
    Auto,
}

impl BinCount {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            BinCount::Fixed(k) => k,
            BinCount::Auto => (n / 10).clamp(10, 100),
        }
    }
}

/// Aspect ratio used by the model density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelAspect {
    /// `c = N / T`.
    Full,
    /// `c = (N - p) / T`, the rank left after removing `p` components.
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub bins: BinCount,
    pub grid_mode: GridMode,
    /// Rescale residual rows to unit variance after removing components.
    pub restandardize: bool,
    pub aspect: ModelAspect,
    /// Imaginary offset of the model's Green's function.
    pub model_epsilon: f64,
    /// Mass given to empty bins before taking logarithms.
    pub js_epsilon: f64,
    pub binning: Binning,
    /// Relative slack of the parsimony rule: the smallest `p` whose best fit is
    /// within `min + min(parsimony * min, parsimony_cap)` wins. Zero gives the
    /// plain argmin (ties to the smallest `p`, then the smallest `b`).
    pub parsimony: f64,
    /// Absolute ceiling on the parsimony slack.
    pub parsimony_cap: f64,
    /// Re-search `b` on a ten times finer step around the coarse optimum.
    pub refine_b: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            bins: BinCount::Auto,
            grid_mode: GridMode::Common,
            restandardize: true,
            aspect: ModelAspect::Full,
            model_epsilon: model::DEFAULT_EPSILON,
            js_epsilon: divergence::DEFAULT_EPSILON,
            binning: Binning::refined(4),
            parsimony: 3.0,
            parsimony_cap: 0.005,
            refine_b: false,
        }
    }
}

impl EstimatorConfig {
    /// Plain argmin on per-p 100-bin grids with midpoint model masses.
    pub fn literal() -> Self {
        Self {
            bins: BinCount::Fixed(100),
            grid_mode: GridMode::PerP,
            binning: Binning::default(),
            parsimony: 0.0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.bins.resolve(2) == 0 {
            return Err(Error::InvalidGrid("zero bins".into()));
        }
        if !(self.parsimony >= 0.0) {
            return Err(Error::param("parsimony", self.parsimony, "must be nonnegative"));
        }
        if !(self.parsimony_cap >= 0.0) {
            return Err(Error::param("parsimony_cap", self.parsimony_cap, "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub p_hat: usize,
    pub b_hat: f64,
    pub p_values: Vec<usize>,
    pub b_values: Vec<f64>,
    /// `divergence_surface[p][k]` is the divergence at `p_values[p]`, `b_values[k]`.
    pub divergence_surface: Vec<Vec<f64>>,
    pub min_divergence: f64,
    /// Divergence at the reported `(p_hat, b_hat)`.
    pub divergence_at_estimate: f64,
    /// Share of total variance carried by the top `p_hat` components.
    pub explained_variance_at_p_hat: f64,
    pub variance_per_factor: f64,
    pub n: usize,
    pub t: usize,
    pub bins: usize,
}

impl EstimationResult {
    /// Best divergence over `b` for every `p`.
    pub fn profile(&self) -> Vec<f64> {
        self.divergence_surface
            .iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Residual spectra and their histograms, shared by the full search and the
/// single-cell probe.
struct Prepared {
    n: usize,
    t: usize,
    spectra: ResidualSpectra,
    grids: Vec<BinGrid>,
    bins: usize,
}

impl Prepared {
    fn new(panel: &ReturnPanel, search: &SearchGrid, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        search.check(panel)?;
        let panel = if panel.is_normalized() {
            panel.clone()
        } else {
            panel.normalize()?
        };
        let bins = config.bins.resolve(panel.n());
        let spectra = ResidualSpectra::compute(&panel, search.p_max, config.restandardize)?;
        let grid_for = |p: usize| BinGrid::for_eigenvalues(&kept(&spectra.spectra[p], p), bins);
        let grids = match config.grid_mode {
            GridMode::Common => vec![grid_for(search.p_max)?],
            GridMode::PerP => (0..=search.p_max).map(grid_for).collect::<Result<_>>()?,
        };
        Ok(Self {
            n: panel.n(),
            t: panel.t(),
            spectra,
            grids,
            bins,
        })
    }

    fn grid(&self, p: usize) -> &BinGrid {
        if self.grids.len() == 1 {
            &self.grids[0]
        } else {
            &self.grids[p]
        }
    }

    fn empirical(&self, p: usize) -> Result<SpectralDensity> {
        empirical_density(&self.spectra.spectra[p], self.grid(p), p)
    }

    fn params(&self, p: usize, b: f64, aspect: ModelAspect) -> Result<ModelParams> {
        let rows = match aspect {
            ModelAspect::Full => self.n,
            ModelAspect::Reduced => self.n - p,
        };
        ModelParams::new(b.abs(), (rows as f64 / self.t as f64).min(1.0))
    }

    fn model(&self, p: usize, b: f64, config: &EstimatorConfig) -> Result<SpectralDensity> {
        let params = self.params(p, b, config.aspect)?;
        model_density_with(&params, self.grid(p), config.model_epsilon, &config.binning)
    }

    fn explained(&self, p: usize) -> f64 {
        let eig = &self.spectra.panel_eigenvalues;
        let total: f64 = eig.iter().map(|x| x.max(0.0)).sum();
        if total > 0.0 {
            (eig[..p].iter().map(|x| x.max(0.0)).sum::<f64>() / total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Eigenvalues with the `p` zero modes removed (the slice is descending).
fn kept(eigs: &[f64], p: usize) -> Vec<f64> {
    eigs[..eigs.len() - p].to_vec()
}

fn cell_error(p: usize, b: f64) -> impl Fn(Error) -> Error {
    move |e| Error::Cell {
        p,
        b,
        source: Box::new(e),
    }
}

pub fn estimate(
    panel: &ReturnPanel,
    search: &SearchGrid,
    config: &EstimatorConfig,
) -> Result<EstimationResult> {
    let prep = Prepared::new(panel, search, config)?;
    let p_values = search.p_values();
    let b_values = search.b_values().to_vec();
    let empirical: Vec<SpectralDensity> =
        p_values.iter().map(|&p| prep.empirical(p)).collect::<Result<_>>()?;

    // model densities only depend on p through the grid and the aspect ratio
    let shared = prep.grids.len() == 1 && config.aspect == ModelAspect::Full;
    let model_ps: Vec<usize> = if shared { vec![0] } else { p_values.clone() };
    let models: Vec<Vec<SpectralDensity>> = model_ps
        .iter()
        .map(|&p| {
            b_values
                .par_iter()
                .map(|&b| prep.model(p, b, config).map_err(cell_error(p, b)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let surface: Vec<Vec<f64>> = p_values
        .par_iter()
        .map(|&p| {
            let row_models = &models[if shared { 0 } else { p }];
            b_values
                .iter()
                .zip(row_models)
                .map(|(&b, m)| {
                    js_masses(&empirical[p].masses, &m.masses, config.js_epsilon)
                        .map_err(cell_error(p, b))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let (p_idx, b_idx, min_divergence) = select(&surface, config.parsimony, config.parsimony_cap);
    let p_hat = p_values[p_idx];
    let mut b_hat = b_values[b_idx];
    let mut at_estimate = surface[p_idx][b_idx];
    if config.refine_b {
        (b_hat, at_estimate) = refine(&prep, &empirical[p_idx], p_hat, b_hat, at_estimate, &b_values, config)?;
    }
    let explained = prep.explained(p_hat);
    Ok(EstimationResult {
        p_hat,
        b_hat,
        p_values,
        b_values,
        divergence_surface: surface,
        min_divergence,
        divergence_at_estimate: at_estimate,
        explained_variance_at_p_hat: explained,
        variance_per_factor: explained / p_hat.max(1) as f64,
        n: prep.n,
        t: prep.t,
        bins: prep.bins,
    })
}

/// Returns `(p index, b index, global minimum)`.
fn select(surface: &[Vec<f64>], parsimony: f64, cap: f64) -> (usize, usize, f64) {
    let argmin_row = |row: &[f64]| {
        let mut k = 0;
        for (i, v) in row.iter().enumerate() {
            if *v < row[k] {
                k = i;
            }
        }
        k
    };
    let best: Vec<(usize, f64)> = surface
        .iter()
        .map(|row| {
            let k = argmin_row(row);
            (k, row[k])
        })
        .collect();
    let global = best.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let threshold = global + (parsimony * global).min(cap);
    let p_idx = best
        .iter()
        .position(|&(_, v)| v <= threshold)
        .expect("surface has a finite minimum");
    (p_idx, best[p_idx].0, global)
}

fn refine(
    prep: &Prepared,
    empirical: &SpectralDensity,
    p: usize,
    b_hat: f64,
    current: f64,
    b_values: &[f64],
    config: &EstimatorConfig,
) -> Result<(f64, f64)> {
    let step = if b_values.len() > 1 {
        (b_values[1] - b_values[0]).abs()
    } else {
        return Ok((b_hat, current));
    };
    let fine = step / 10.0;
    let mut best = (b_hat, current);
    for k in -9i32..=9 {
        let b = round12(b_hat + k as f64 * fine);
        if k == 0 || !(0.0..1.0).contains(&b) {
            continue;
        }
        let m = prep.model(p, b, config).map_err(cell_error(p, b))?;
        let d = js_masses(&empirical.masses, &m.masses, config.js_epsilon).map_err(cell_error(p, b))?;
        if d < best.1 {
            best = (b, d);
        }
    }
    Ok(best)
}

/// Divergence of a single `(p, b)` cell. Matches the corresponding surface entry
/// of [`estimate`] with the same search grid and config exactly.
pub fn divergence_at(
    panel: &ReturnPanel,
    p: usize,
    b: f64,
    search: &SearchGrid,
    config: &EstimatorConfig,
) -> Result<f64> {
    if p > search.p_max {
        return Err(Error::ComponentsOutOfRange {
            p,
            limit: search.p_max + 1,
        });
    }
    let prep = Prepared::new(panel, search, config)?;
    let emp = prep.empirical(p)?;
    let m = prep.model(p, b, config).map_err(cell_error(p, b))?;
    js_masses(&emp.masses, &m.masses, config.js_epsilon).map_err(cell_error(p, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let g = SearchGrid::default();
        assert_eq!(g.p_values().len(), 21);
        assert_eq!(g.b_values().len(), 96);
        assert_eq!(g.b_values()[37], 0.37);
        assert_eq!(*g.b_values().last().unwrap(), 0.95);
    }

    #[test]
    fn grid_validation() {
        assert!(SearchGrid::new(5, 1.0, 0.1).is_err());
        assert!(SearchGrid::new(5, 0.5, 0.0).is_err());
        assert!(SearchGrid::with_b_values(5, vec![]).is_err());
    }

    #[test]
    fn selection_ties_and_parsimony() {
        let s = vec![vec![0.5, 0.4], vec![0.1, 0.1], vec![0.1, 0.05]];
        assert_eq!(select(&s, 0.0, 1.0), (2, 1, 0.05));
        assert_eq!(select(&s, 1.0, 1.0), (1, 0, 0.05));
        assert_eq!(select(&s, 1.0, 0.01), (2, 1, 0.05));
        let tie = vec![vec![0.2, 0.1, 0.1], vec![0.1, 0.3, 0.3]];
        assert_eq!(select(&tie, 0.0, 1.0), (0, 1, 0.1));
    }

    #[test]
    fn auto_bins() {
        assert_eq!(BinCount::Auto.resolve(30), 10);
        assert_eq!(BinCount::Auto.resolve(200), 20);
        assert_eq!(BinCount::Auto.resolve(5000), 100);
    }
}
