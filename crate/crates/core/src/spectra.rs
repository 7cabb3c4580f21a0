//! Covariance spectra of data panels.
//!
//! A panel is an `N x T` matrix, one row per series. Everything here works on the
//! `N x N` covariance `C = (1/T) U U^T`; principal components are eigenvectors of
//! that matrix, and p-level residuals are what is left after projecting out the
//! top `p` of them.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Eigenvalues below this are treated as numerically zero when counting rank.
pub const ZERO_EIGENVALUE: f64 = 1e-8;

/// An `N x T` observation panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    values: DMatrix<f64>,
    series_ids: Vec<String>,
    normalized: bool,
}

impl ReturnPanel {
    pub fn new(values: DMatrix<f64>, series_ids: Vec<String>) -> Result<Self> {
        let (n, t) = values.shape();
        if n < 2 || t < 2 {
            return Err(Error::PanelTooSmall { n, t });
        }
        if series_ids.len() != n {
            return Err(Error::Shape(format!(
                "{} series ids for {} rows",
                series_ids.len(),
                n
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::Parse {
                row: pos % n,
                col: pos / n,
                msg: "non-finite value".into(),
            });
        }
        Ok(Self {
            values,
            series_ids,
            normalized: false,
        })
    }

    /// Panel with generated ids `s0, s1, ...`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| format!("s{i}")).collect();
        Self::new(values, ids)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_matrix(DMatrix::from_fn(n, t, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn t(&self) -> usize {
        self.values.ncols()
    }

    /// Aspect ratio `N / T`.
    pub fn aspect_ratio(&self) -> f64 {
        self.n() as f64 / self.t() as f64
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Demean each row and scale it to unit variance.
    pub fn normalize(&self) -> Result<Self> {
        normalize_panel(self)
    }

    /// Columns `start..start + len` as a new (unnormalized) panel.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.t() {
            return Err(Error::Shape(format!(
                "window {}..{} exceeds T = {}",
                start,
                start + len,
                self.t()
            )));
        }
        Self::new(
            self.values.columns(start, len).into_owned(),
            self.series_ids.clone(),
        )
    }

    /// Rows reordered so that row `i` of the result is row `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::Shape("permutation length".into()));
        }
        let values = DMatrix::from_fn(self.n(), self.t(), |i, j| self.values[(order[i], j)]);
        let ids = order.iter().map(|&i| self.series_ids[i].clone()).collect();
        Ok(Self {
            values,
            series_ids: ids,
            normalized: self.normalized,
        })
    }
}

/// Row-wise standardization. Variances use the `1/T` divisor, so the diagonal of
/// [`covariance`] of the result is exactly one.
pub fn normalize_panel(panel: &ReturnPanel) -> Result<ReturnPanel> {
    if panel.normalized {
        return Ok(panel.clone());
    }
    let t = panel.t() as f64;
    let mut values = panel.values.clone();
    for (i, mut row) in values.row_iter_mut().enumerate() {
        let mean = row.sum() / t;
        row.add_scalar_mut(-mean);
        let var = row.norm_squared() / t;
        let scale = row.amax();
        // relative test so that rows of tiny but genuine returns survive
        if var <= 0.0 || !var.is_finite() || var.sqrt() <= 1e-12 * scale.max(mean.abs()) {
            return Err(Error::ConstantSeries {
                id: panel.series_ids[i].clone(),
            });
        }
        row /= var.sqrt();
    }
    Ok(ReturnPanel {
        values,
        series_ids: panel.series_ids.clone(),
        normalized: true,
    })
}

/// `C = (1/T) U U^T` for the panel as given.
pub fn covariance(panel: &ReturnPanel) -> DMatrix<f64> {
    let u = &panel.values;
    let mut c = u * u.transpose();
    c /= panel.t() as f64;
    symmetrize(&mut c);
    c
}

fn symmetrize(c: &mut DMatrix<f64>) {
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Column `k` pairs with `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        &self.vectors * d * self.vectors.transpose()
    }
}

pub fn symmetric_eigen(c: &DMatrix<f64>) -> EigenPairs {
    let eig = SymmetricEigen::new(c.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(c.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    EigenPairs { values, vectors }
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues(c: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Panel after removing its top `p` principal components.
#[derive(Debug, Clone)]
pub struct ResidualSet {
    pub residuals: DMatrix<f64>,
    pub p: usize,
    /// `N x p`, equal to `sqrt(N)` times the leading eigenvectors.
    pub loadings: DMatrix<f64>,
    /// `p x T`, `loadings^T R / N`.
    pub factors: DMatrix<f64>,
    /// Leading `p` eigenvalues of the panel covariance, descending.
    pub explained_variance: Vec<f64>,
    /// All eigenvalues of the panel covariance, descending.
    pub panel_eigenvalues: Vec<f64>,
}

impl ResidualSet {
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = &self.residuals * self.residuals.transpose();
        c /= self.residuals.ncols() as f64;
        symmetrize(&mut c);
        c
    }

    /// Share of total panel variance carried by the removed components.
    pub fn explained_fraction(&self) -> f64 {
        let total: f64 = self.panel_eigenvalues.iter().map(|v| v.max(0.0)).sum();
        if total <= 0.0 {
            return 0.0;
        }
        (self.explained_variance.iter().sum::<f64>() / total).clamp(0.0, 1.0)
    }
}

pub fn pca_residuals(panel: &ReturnPanel, p: usize) -> Result<ResidualSet> {
    let limit = panel.n().min(panel.t());
    if p >= limit {
        return Err(Error::ComponentsOutOfRange { p, limit });
    }
    let eig = symmetric_eigen(&covariance(panel));
    let n = panel.n() as f64;
    let r = &panel.values;
    let v = eig.vectors.columns(0, p).into_owned();
    let loadings = &v * n.sqrt();
    let factors = loadings.transpose() * r / n;
    let residuals = if p == 0 {
        r.clone()
    } else {
        r - &loadings * &factors
    };
    Ok(ResidualSet {
        residuals,
        p,
        loadings,
        factors,
        explained_variance: eig.values[..p].to_vec(),
        panel_eigenvalues: eig.values,
    })
}

/// Residual spectra for every `p` in `0..=p_max`, from one eigendecomposition.
///
/// The p-level residual covariance is the deflated matrix
/// `C - sum_{k<p} lambda_k v_k v_k^T`. With `restandardize`, its rows and columns
/// are rescaled so each residual series has unit variance again.
#[derive(Debug, Clone)]
pub struct ResidualSpectra {
    /// `spectra[p]`: all `N` eigenvalues of the p-level residual covariance, descending.
    pub spectra: Vec<Vec<f64>>,
    pub panel_eigenvalues: Vec<f64>,
}

impl ResidualSpectra {
    pub fn compute(panel: &ReturnPanel, p_max: usize, restandardize: bool) -> Result<Self> {
        let limit = panel.n().min(panel.t());
        if p_max >= limit {
            return Err(Error::ComponentsOutOfRange { p: p_max, limit });
        }
        let c = covariance(panel);
        let eig = symmetric_eigen(&c);
        let n = c.nrows();
        let mut deflated = c;
        let mut spectra = Vec::with_capacity(p_max + 1);
        for p in 0..=p_max {
            if p > 0 {
                let k = p - 1;
                let lam = eig.values[k];
                let v = eig.vectors.column(k);
                for j in 0..n {
                    for i in 0..n {
                        deflated[(i, j)] -= lam * v[i] * v[j];
                    }
                }
            }
            let m = if restandardize && p > 0 {
                restandardized(&deflated)
            } else {
                deflated.clone()
            };
            spectra.push(symmetric_eigenvalues(&m));
        }
        Ok(Self {
            spectra,
            panel_eigenvalues: eig.values,
        })
    }
}

/// `D C D` with `D = diag(C)^{-1/2}`; rows with (numerically) no variance left are
/// left unscaled.
fn restandardized(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = c[(i, i)];
            if d > 1e-12 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| c[(i, j)] * scale[i] * scale[j])
}

/// Ascending, strictly increasing, nonnegative bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BinGrid {
    edges: Vec<f64>,
}

impl TryFrom<Vec<f64>> for BinGrid {
    type Error = Error;
    fn try_from(edges: Vec<f64>) -> Result<Self> {
        BinGrid::new(edges)
    }
}

impl From<BinGrid> for Vec<f64> {
    fn from(g: BinGrid) -> Self {
        g.edges
    }
}

impl BinGrid {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidGrid("need at least one bin".into()));
        }
        if edges.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidGrid("edges must be finite and nonnegative".into()));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("edges must be strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    /// `bins` equal-width bins on `[0, upper]`.
    pub fn uniform(upper: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(upper > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "uniform grid needs bins > 0 and upper > 0 (got {bins}, {upper})"
            )));
        }
        let h = upper / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|k| k as f64 * h).collect();
        edges[bins] = upper;
        Self::new(edges)
    }

    /// `bins` bins on `[0, 1.1 * max(eigenvalues)]`.
    pub fn for_eigenvalues(eigenvalues: &[f64], bins: usize) -> Result<Self> {
        let top = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::uniform(1.1 * top, bins)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn upper(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Bin index for `x`; values below the grid land in the first bin, values
    /// beyond it in the last.
    pub fn locate(&self, x: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= x);
        k.saturating_sub(1).min(self.bins() - 1)
    }
}

/// Probability masses on a bin grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    #[serde(rename = "bin_edges")]
    pub grid: BinGrid,
    pub masses: Vec<f64>,
}

impl SpectralDensity {
    /// Normalizes nonnegative `weights` to unit mass.
    pub fn from_weights(grid: BinGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.bins() {
            return Err(Error::GridMismatch {
                left: grid.bins(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidGrid("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateDensity);
        }
        let masses = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { grid, masses })
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass-weighted mean of bin midpoints.
    pub fn mean(&self) -> f64 {
        self.grid
            .midpoints()
            .iter()
            .zip(&self.masses)
            .map(|(x, m)| x * m)
            .sum()
    }
}

/// Histogram of `eigenvalues` on `grid` after discarding the `drop_smallest`
/// smallest ones (the zero modes left by removing that many components).
pub fn empirical_density(
    eigenvalues: &[f64],
    grid: &BinGrid,
    drop_smallest: usize,
) -> Result<SpectralDensity> {
    if drop_smallest >= eigenvalues.len() {
        return Err(Error::EmptySpectrum {
            dropped: drop_smallest,
            count: eigenvalues.len(),
        });
    }
    if let Some(v) = eigenvalues.iter().find(|v| !(**v >= -1e-8)) {
        return Err(Error::param("eigenvalue", *v, "must be nonnegative"));
    }
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut counts = vec![0.0; grid.bins()];
    for &v in &sorted[drop_smallest..] {
        counts[grid.locate(v)] += 1.0;
    }
    SpectralDensity::from_weights(grid.clone(), counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_panel(n: usize, t: usize, seed: u64) -> ReturnPanel {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        ReturnPanel::from_matrix(DMatrix::from_fn(n, t, |_, _| rng.random_range(-1.0..1.0)))
            .unwrap()
    }

    #[test]
    fn normalize_three_points() {
        let p = ReturnPanel::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 5.0, 1.0]]).unwrap();
        let z = p.normalize().unwrap();
        let s = (1.5f64).sqrt();
        assert!((z.values()[(0, 0)] + s).abs() < 1e-12);
        assert!(z.values()[(0, 1)].abs() < 1e-12);
        assert!((z.values()[(0, 2)] - s).abs() < 1e-12);
        for row in z.values().row_iter() {
            assert!(row.mean().abs() < 1e-10);
            assert!((row.norm_squared() / 3.0 - 1.0).abs() < 1e-8);
        }
        assert!(z.is_normalized());
    }

    #[test]
    fn normalize_is_idempotent() {
        let z = random_panel(5, 40, 1).normalize().unwrap();
        assert_eq!(z.normalize().unwrap(), z);
        // recomputing from scratch moves nothing beyond rounding
        let again = normalize_panel(&ReturnPanel::from_matrix(z.values().clone()).unwrap()).unwrap();
        assert!((again.values() - z.values()).amax() < 1e-12);
    }

    #[test]
    fn constant_row_is_rejected_by_id() {
        let p = ReturnPanel::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 4.0, 4.0]),
            vec!["AAA".into(), "BBB".into()],
        )
        .unwrap();
        match p.normalize() {
            Err(Error::ConstantSeries { id }) => assert_eq!(id, "BBB"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn covariance_of_identity_panel() {
        let p = ReturnPanel::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = covariance(&p);
        assert_eq!(c, DMatrix::identity(2, 2) * 0.5);
    }

    #[test]
    fn covariance_matches_double_loop() {
        let p = random_panel(7, 30, 2);
        let c = covariance(&p);
        let u = p.values();
        for i in 0..7 {
            for j in 0..7 {
                let mut s = 0.0;
                for t in 0..30 {
                    s += u[(i, t)] * u[(j, t)];
                }
                assert!((c[(i, j)] - s / 30.0).abs() < 1e-12);
            }
        }
        let eig = symmetric_eigen(&c);
        assert!(eig.values.iter().all(|&v| v >= -1e-10));
        assert!((eig.reconstruct() - &c).norm() / c.norm() < 1e-8);
    }

    #[test]
    fn zero_components_returns_panel() {
        let p = random_panel(6, 20, 3).normalize().unwrap();
        let r = pca_residuals(&p, 0).unwrap();
        assert_eq!(&r.residuals, p.values());
        assert!(r.explained_variance.is_empty());
    }

    #[test]
    fn rank_one_panel_is_fully_explained() {
        let u: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let v: Vec<f64> = (0..15).map(|t| ((t * 7) % 5) as f64 - 2.0).collect();
        let p = ReturnPanel::from_matrix(DMatrix::from_fn(6, 15, |i, t| u[i] * v[t]))
            .unwrap()
            .normalize()
            .unwrap();
        let r = pca_residuals(&p, 1).unwrap();
        assert!(r.residuals.amax() < 1e-10);
    }

    #[test]
    fn p_out_of_range() {
        let p = random_panel(4, 10, 4).normalize().unwrap();
        assert!(matches!(
            pca_residuals(&p, 4),
            Err(Error::ComponentsOutOfRange { p: 4, limit: 4 })
        ));
    }

    #[test]
    fn residual_invariants() {
        let p = random_panel(12, 40, 5).normalize().unwrap();
        let pc = covariance(&p);
        for k in 0..5 {
            let r = pca_residuals(&p, k).unwrap();
            let rebuilt = &r.residuals + &r.loadings * &r.factors;
            assert!((rebuilt - p.values()).amax() < 1e-10);
            let cross = r.loadings.transpose() * &r.loadings;
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        assert!(cross[(i, j)].abs() < 1e-8);
                    }
                }
            }
            assert!(r.explained_variance.windows(2).all(|w| w[0] >= w[1]));
            assert!((r.loadings.transpose() * &r.residuals).amax() < 1e-8);
            let rc = r.covariance();
            let lhs = pc.trace();
            let rhs = rc.trace() + r.explained_variance.iter().sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-8);
            let zeros = symmetric_eigenvalues(&rc)
                .iter()
                .filter(|v| v.abs() < ZERO_EIGENVALUE)
                .count();
            assert_eq!(zeros, k);
        }
    }

    #[test]
    fn deflated_spectra_match_direct_residuals() {
        let p = random_panel(10, 30, 6).normalize().unwrap();
        let rs = ResidualSpectra::compute(&p, 4, false).unwrap();
        for k in 0..=4 {
            let direct = symmetric_eigenvalues(&pca_residuals(&p, k).unwrap().covariance());
            for (a, b) in direct.iter().zip(&rs.spectra[k]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let rs = ResidualSpectra::compute(&p, 4, true).unwrap();
        for k in 1..=4 {
            let trace: f64 = rs.spectra[k].iter().sum();
            assert!((trace - 10.0).abs() < 1e-9);
            let zeros = rs.spectra[k].iter().filter(|v| v.abs() < ZERO_EIGENVALUE).count();
            assert_eq!(zeros, k);
        }
    }

    #[test]
    fn grid_locate_clamps() {
        let g = BinGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.locate(-1e-12), 0);
        assert_eq!(g.locate(0.49), 0);
        assert_eq!(g.locate(0.5), 1);
        assert_eq!(g.locate(2.0), 3);
        assert_eq!(g.locate(50.0), 3);
        assert!(BinGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(BinGrid::new(vec![0.0]).is_err());
    }

    #[test]
    fn point_mass_density() {
        let g = BinGrid::uniform(3.0, 7).unwrap();
        let d = empirical_density(&[1.0; 9], &g, 0).unwrap();
        assert_eq!(d.masses.iter().filter(|&&m| m > 0.0).count(), 1);
        assert!((d.masses[g.locate(1.0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dropped_zero_modes_leave_first_bin_empty() {
        let p = random_panel(20, 60, 7).normalize().unwrap();
        let r = pca_residuals(&p, 3).unwrap();
        let ev = symmetric_eigenvalues(&r.covariance());
        let g = BinGrid::for_eigenvalues(&ev, 50).unwrap();
        let d = empirical_density(&ev, &g, 3).unwrap();
        assert!(ev.iter().rev().skip(3).all(|&v| v > g.edges()[1]));
        assert_eq!(d.masses[0], 0.0);
        assert!(empirical_density(&ev, &g, 20).is_err());
    }
}
