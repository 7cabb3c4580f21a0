//! Data ingestion, rolling-window estimation and file outputs.

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimationResult, EstimatorConfig, SearchGrid};
use crate::spectra::{pca_residuals, BinGrid, ResidualSet, ReturnPanel, SpectralDensity};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Price,
    Return,
}

/// What to do with missing or empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Remove every series with a missing value.
    #[default]
    DropSeries,
    /// Remove every date with a missing value.
    DropDates,
}

/// A panel read from disk with the date label of every column.
#[derive(Debug, Clone)]
pub struct DatedPanel {
    pub panel: ReturnPanel,
    pub dates: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | "null")
}

/// Reads a dates-by-series CSV: a header row of series ids after one date
/// column, then one row per date.
pub fn load_csv(
    reader: impl Read,
    kind: InputKind,
    policy: MissingPolicy,
) -> Result<DatedPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let ids: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_owned).collect();
    if ids.is_empty() {
        return Err(Error::Shape("no series columns".into()));
    }
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // data rows are numbered from 1, after the header
        let row = r + 1;
        if rec.len() != ids.len() + 1 {
            return Err(Error::Parse {
                row,
                col: rec.len(),
                msg: format!("expected {} fields", ids.len() + 1),
            });
        }
        dates.push(rec[0].to_owned());
        let values = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(c, cell)| {
                if is_missing(cell) {
                    Ok(None)
                } else {
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .map(Some)
                        .ok_or_else(|| Error::Parse {
                            row,
                            col: c + 1,
                            msg: format!("not a number: `{cell}`"),
                        })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    let (ids, dates, rows) = apply_policy(ids, dates, rows, policy);
    if ids.is_empty() {
        return Err(Error::Shape("every series has missing values".into()));
    }
    let (dates, matrix) = match kind {
        InputKind::Return => (dates, rows),
        InputKind::Price => {
            if rows.len() < 3 {
                return Err(Error::Shape(format!(
                    "need at least 3 usable price rows, got {}",
                    rows.len()
                )));
            }
            (dates[1..].to_vec(), simple_returns(&rows)?)
        }
    };
    if matrix.len() < 2 {
        return Err(Error::Shape(format!(
            "fewer than 2 usable dates ({})",
            matrix.len()
        )));
    }
    let (n, t) = (ids.len(), matrix.len());
    let values = DMatrix::from_fn(n, t, |i, s| matrix[s][i]);
    Ok(DatedPanel {
        panel: ReturnPanel::new(values, ids)?,
        dates,
    })
}

type Cleaned = (Vec<String>, Vec<String>, Vec<Vec<f64>>);

fn apply_policy(
    ids: Vec<String>,
    dates: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
    policy: MissingPolicy,
) -> Cleaned {
    match policy {
        MissingPolicy::DropSeries => {
            let keep: Vec<usize> = (0..ids.len())
                .filter(|&c| rows.iter().all(|r| r[c].is_some()))
                .collect();
            let rows = rows
                .iter()
                .map(|r| keep.iter().map(|&c| r[c].unwrap_or_default()).collect())
                .collect();
            let ids = keep.iter().map(|&c| ids[c].clone()).collect();
            (ids, dates, rows)
        }
        MissingPolicy::DropDates => {
            let (dates, rows): (Vec<_>, Vec<_>) = dates
                .into_iter()
                .zip(rows)
                .filter(|(_, r)| r.iter().all(Option::is_some))
                .map(|(d, r)| (d, r.into_iter().map(Option::unwrap_or_default).collect()))
                .unzip();
            (ids, dates, rows)
        }
    }
}

/// `(S_t - S_{t-1}) / S_{t-1}` down each column.
fn simple_returns(prices: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    prices
        .windows(2)
        .enumerate()
        .map(|(r, w)| {
            w[0].iter()
                .zip(&w[1])
                .enumerate()
                .map(|(c, (&prev, &cur))| {
                    if prev == 0.0 {
                        Err(Error::Parse {
                            row: r + 1,
                            col: c + 1,
                            msg: "zero price".into(),
                        })
                    } else {
                        Ok((cur - prev) / prev)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn load_path(path: &Path, kind: InputKind, policy: MissingPolicy) -> Result<DatedPanel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv(file, kind, policy)
}

pub fn load_prices_to_returns(path: &Path, policy: MissingPolicy) -> Result<DatedPanel> {
    load_path(path, InputKind::Price, policy)
}

/// Lag-one least-squares coefficients of every residual row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1Fit {
    pub coefficients: Vec<f64>,
    /// Rows without variance, recorded as zero.
    pub flagged: Vec<bool>,
    /// Mean absolute coefficient.
    pub b_ind: f64,
}

pub fn ar1_per_residual(residuals: &ResidualSet) -> Result<Ar1Fit> {
    ar1_rows(&residuals.residuals)
}

/// Regression of `x[t]` on `x[t-1]` with intercept, per row.
pub fn ar1_rows(m: &DMatrix<f64>) -> Result<Ar1Fit> {
    let t = m.ncols();
    if t < 3 {
        return Err(Error::Shape(format!("need at least 3 observations, got {t}")));
    }
    let (coefficients, flagged): (Vec<f64>, Vec<bool>) = m
        .row_iter()
        .map(|row| {
            let x: Vec<f64> = row.iter().copied().collect();
            lag1_ols(&x)
        })
        .unzip();
    let b_ind = coefficients.iter().map(|b| b.abs()).sum::<f64>() / coefficients.len() as f64;
    Ok(Ar1Fit {
        coefficients,
        flagged,
        b_ind,
    })
}

fn lag1_ols(x: &[f64]) -> (f64, bool) {
    let (prev, next) = (&x[..x.len() - 1], &x[1..]);
    let k = prev.len() as f64;
    let mp = prev.iter().sum::<f64>() / k;
    let mn = next.iter().sum::<f64>() / k;
    let sxx: f64 = prev.iter().map(|a| (a - mp) * (a - mp)).sum();
    let sxy: f64 = prev.iter().zip(next).map(|(a, b)| (a - mp) * (b - mn)).sum();
    let scale: f64 = prev.iter().map(|a| a * a).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * scale || sxx == 0.0 {
        (0.0, true)
    } else {
        (sxy / sxx, false)
    }
}

/// Outcome of one window of [`rolling_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub p_hat: usize,
    pub b_hat: f64,
    pub explained_variance: f64,
    pub variance_per_factor: f64,
    pub b_ind: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    /// First column of the window.
    pub start: usize,
    /// Label of the window's last date.
    pub date: String,
    pub estimate: Option<WindowEstimate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSeries {
    pub window: usize,
    pub step: usize,
    pub points: Vec<WindowPoint>,
}

impl WindowSeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn p_hat(&self) -> Vec<Option<usize>> {
        self.points
            .iter()
            .map(|p| p.estimate.as_ref().map(|e| e.p_hat))
            .collect()
    }

    pub fn b_hat(&self) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| p.estimate.as_ref().map(|e| e.b_hat))
            .collect()
    }

    /// CSV with one row per window; failed windows have empty value cells.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "start",
            "date",
            "p_hat",
            "b_hat",
            "explained_variance",
            "variance_per_factor",
            "b_ind",
            "error",
        ])?;
        for p in &self.points {
            let mut rec = vec![p.start.to_string(), p.date.clone()];
            match &p.estimate {
                Some(e) => rec.extend([
                    e.p_hat.to_string(),
                    fmt12(e.b_hat),
                    fmt12(e.explained_variance),
                    fmt12(e.variance_per_factor),
                    fmt12(e.b_ind),
                    String::new(),
                ]),
                None => {
                    rec.extend(std::iter::repeat_n(String::new(), 5));
                    rec.push(p.error.clone().unwrap_or_default());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub const DEFAULT_WINDOW: usize = 378;

/// Estimates on every window `[s, s + window)` for `s = 0, step, ...`, each
/// normalized on its own.
pub fn rolling_estimate(
    panel: &ReturnPanel,
    dates: Option<&[String]>,
    window: usize,
    step: usize,
    search: &SearchGrid,
    config: &EstimatorConfig,
) -> Result<WindowSeries> {
    let t = panel.t();
    if window < 2 || window > t {
        return Err(Error::param("window", window as f64, "must lie in [2, T]"));
    }
    if step == 0 {
        return Err(Error::param("step", 0.0, "must be at least 1"));
    }
    if let Some(d) = dates {
        if d.len() != t {
            return Err(Error::Shape(format!("{} dates for {t} columns", d.len())));
        }
    }
    let starts: Vec<usize> = (0..=t - window).step_by(step).collect();
    let points = starts
        .par_iter()
        .map(|&start| {
            let end = start + window - 1;
            let date = dates.map_or_else(|| end.to_string(), |d| d[end].clone());
            match window_estimate(panel, start, window, search, config) {
                Ok(e) => WindowPoint {
                    start,
                    date,
                    estimate: Some(e),
                    error: None,
                },
                Err(e) => WindowPoint {
                    start,
                    date,
                    estimate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(WindowSeries {
        window,
        step,
        points,
    })
}

fn window_estimate(
    panel: &ReturnPanel,
    start: usize,
    window: usize,
    search: &SearchGrid,
    config: &EstimatorConfig,
) -> Result<WindowEstimate> {
    let sub = panel.window(start, window)?.normalize()?;
    let res = estimate(&sub, search, config)?;
    let b_ind = ar1_per_residual(&pca_residuals(&sub, res.p_hat)?)?.b_ind;
    Ok(WindowEstimate {
        p_hat: res.p_hat,
        b_hat: res.b_hat,
        explained_variance: res.explained_variance_at_p_hat,
        variance_per_factor: res.variance_per_factor,
        b_ind,
    })
}

/// Twelve significant digits in scientific notation.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes the three densities side by side with their bin edges.
pub fn write_densities(
    real: &SpectralDensity,
    model: &SpectralDensity,
    mp: &SpectralDensity,
    out: impl Write,
) -> Result<()> {
    for other in [model, mp] {
        if other.grid != real.grid {
            return Err(Error::GridMismatch {
                left: real.bins(),
                right: other.bins(),
            });
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "rho_real", "rho_model", "rho_mp"])?;
    let e = real.grid.edges();
    for k in 0..real.bins() {
        w.write_record([
            fmt12(e[k]),
            fmt12(e[k + 1]),
            fmt12(real.masses[k]),
            fmt12(model.masses[k]),
            fmt12(mp.masses[k]),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn export_densities(
    real: &SpectralDensity,
    model: &SpectralDensity,
    mp: &SpectralDensity,
    path: &Path,
) -> Result<()> {
    let mut buf = Vec::new();
    write_densities(real, model, mp, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Densities as written by [`write_densities`]: `(real, model, mp)`.
pub fn read_densities(input: impl Read) -> Result<[SpectralDensity; 3]> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut edges = Vec::new();
    let mut cols: [Vec<f64>; 3] = Default::default();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse {
                    row: r + 1,
                    col: c + 1,
                    msg: "expected a number".into(),
                })
        };
        if edges.is_empty() {
            edges.push(num(0)?);
        }
        edges.push(num(1)?);
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(num(2 + k)?);
        }
    }
    let grid = BinGrid::new(edges)?;
    let [a, b, c] = cols;
    Ok([
        SpectralDensity::from_weights(grid.clone(), a)?,
        SpectralDensity::from_weights(grid.clone(), b)?,
        SpectralDensity::from_weights(grid, c)?,
    ])
}

pub fn import_densities(path: &Path) -> Result<[SpectralDensity; 3]> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_densities(file)
}

/// JSON form of an estimate, with the divergence surface only on request.
pub fn estimation_json(result: &EstimationResult, include_surface: bool) -> serde_json::Value {
    let mut v = serde_json::to_value(result).expect("estimation result serializes");
    if !include_surface {
        if let Some(obj) = v.as_object_mut() {
            obj.remove("divergence_surface");
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRICES: &str = "date,AAA,BBB\n\
        d0,100,50\n\
        d1,110,55\n\
        d2,99,44\n\
        d3,99,44\n";

    #[test]
    fn simple_returns_by_formula() {
        let d = load_csv(PRICES.as_bytes(), InputKind::Price, MissingPolicy::DropSeries).unwrap();
        let v = d.panel.values();
        assert_eq!(d.panel.n(), 2);
        assert_eq!(d.panel.t(), 3);
        assert!((v[(0, 0)] - 0.10).abs() < 1e-12);
        assert!((v[(0, 1)] + 0.10).abs() < 1e-12);
        assert!((v[(1, 1)] + 0.20).abs() < 1e-12);
        assert_eq!(d.dates, vec!["d1", "d2", "d3"]);
    }

    #[test]
    fn constant_prices_fail_normalization() {
        let csv = "date,A,B\n1,5,1\n2,5,2\n3,5,4\n";
        let d = load_csv(csv.as_bytes(), InputKind::Price, MissingPolicy::DropSeries).unwrap();
        assert_eq!(d.panel.values().row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert!(matches!(
            d.panel.normalize(),
            Err(Error::ConstantSeries { ref id }) if id == "A"
        ));
    }

    #[test]
    fn missing_cell_policies() {
        let csv = "date,A,B,C\n1,1,2,3\n2,2,,4\n3,3,1,2\n4,1,2,3\n5,2,3,1\n";
        let full = 4;
        let dd = load_csv(csv.as_bytes(), InputKind::Price, MissingPolicy::DropDates).unwrap();
        assert_eq!(dd.panel.t(), full - 1);
        assert_eq!(dd.panel.n(), 3);
        let ds = load_csv(csv.as_bytes(), InputKind::Price, MissingPolicy::DropSeries).unwrap();
        assert_eq!(ds.panel.t(), full);
        assert_eq!(ds.panel.series_ids(), &["A".to_string(), "C".to_string()]);
    }

    #[test]
    fn unparseable_cell_reports_position() {
        let csv = "date,A,B\n1,1,2\n2,abc,3\n3,1,1\n";
        match load_csv(csv.as_bytes(), InputKind::Return, MissingPolicy::DropSeries) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (2, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_dates() {
        let csv = "date,A,B\n1,1,2\n2,2,3\n";
        assert!(load_csv(csv.as_bytes(), InputKind::Price, MissingPolicy::DropSeries).is_err());
    }

    #[test]
    fn exact_ar_sequence() {
        let mut x = vec![1.0];
        for _ in 0..30 {
            x.push(0.9 * x.last().unwrap());
        }
        let m = DMatrix::from_row_slice(1, x.len(), &x);
        let fit = ar1_rows(&m).unwrap();
        assert!((fit.coefficients[0] - 0.9).abs() < 1e-10);
        assert!((fit.b_ind - 0.9).abs() < 1e-10);
    }

    #[test]
    fn zero_variance_row_flagged() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let fit = ar1_rows(&m).unwrap();
        assert_eq!(fit.coefficients[0], 0.0);
        assert_eq!(fit.flagged, vec![true, false]);
    }

    #[test]
    fn densities_round_trip() {
        let g = BinGrid::uniform(3.0, 7).unwrap();
        let d = |w: Vec<f64>| SpectralDensity::from_weights(g.clone(), w).unwrap();
        let a = d(vec![1.0, 2.0, 3.0, 0.0, 1.0 / 3.0, 0.5, 0.1]);
        let b = d(vec![0.2; 7]);
        let c = d(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut buf = Vec::new();
        write_densities(&a, &b, &c, &mut buf).unwrap();
        let [ra, rb, rc] = read_densities(buf.as_slice()).unwrap();
        for (x, y) in [(&a, &ra), (&b, &rb), (&c, &rc)] {
            for (u, v) in x.masses.iter().zip(&y.masses) {
                assert!((u - v).abs() <= 1e-11 * u.abs().max(1e-300));
            }
        }
        assert!(BinGrid::new(vec![]).is_err());
    }

    #[test]
    fn density_export_rejects_mismatched_grids() {
        let a = SpectralDensity::from_weights(BinGrid::uniform(1.0, 2).unwrap(), vec![1.0, 1.0]).unwrap();
        let b = SpectralDensity::from_weights(BinGrid::uniform(2.0, 2).unwrap(), vec![1.0, 1.0]).unwrap();
        assert!(write_densities(&a, &b, &a, Vec::new()).is_err());
    }
}
