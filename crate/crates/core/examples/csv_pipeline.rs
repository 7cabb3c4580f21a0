//! From a price CSV on disk to an estimate and a plot-ready density file.
//!
//! ```bash
//! cargo run --release --example csv_pipeline
//! ```

use spectral_factors::io::{export_densities, load_prices_to_returns, MissingPolicy};
use spectral_factors::model::{model_density_with, mp_density_with, ModelParams};
use spectral_factors::spectra::{empirical_density, BinGrid, ResidualSpectra};
use spectral_factors::synth::{generate, SyntheticConfig};
use spectral_factors::{estimate, EstimatorConfig, SearchGrid};
use std::fmt::Write as _;

fn main() -> spectral_factors::Result<()> {
    let dir = std::env::temp_dir().join("sdfactor-example");
    std::fs::create_dir_all(&dir).map_err(|e| spectral_factors::Error::Io { path: dir.clone(), source: e })?;

    // synthetic returns compounded into prices
    let returns = generate(&SyntheticConfig::new(60, 240, 2, 0.5).with_seed(5))?.panel;
    let mut csv = String::from("date");
    for i in 0..returns.n() {
        write!(csv, ",S{i}").unwrap();
    }
    let mut prices = vec![100.0; returns.n()];
    for t in 0..=returns.t() {
        write!(csv, "\nday{t}").unwrap();
        for (i, p) in prices.iter_mut().enumerate() {
            if t > 0 {
                *p *= 1.0 + 0.01 * returns.values()[(i, t - 1)];
            }
            write!(csv, ",{p:.10}").unwrap();
        }
    }
    let path = dir.join("prices.csv");
    std::fs::write(&path, csv).map_err(|e| spectral_factors::Error::Io { path: path.clone(), source: e })?;

    let data = load_prices_to_returns(&path, MissingPolicy::DropSeries)?;
    let panel = data.panel.normalize()?;
    let config = EstimatorConfig::default();
    let search = SearchGrid::new(8, 0.95, 0.01)?;
    let res = estimate(&panel, &search, &config)?;
    println!("{} series, {} returns: p_hat {}, b_hat {:.2}", panel.n(), panel.t(), res.p_hat, res.b_hat);

    let spectra = ResidualSpectra::compute(&panel, res.p_hat, true)?;
    let eig = &spectra.spectra[res.p_hat];
    let grid = BinGrid::for_eigenvalues(eig, 30)?;
    let c = panel.aspect_ratio();
    let real = empirical_density(eig, &grid, res.p_hat)?;
    let model = model_density_with(&ModelParams::new(res.b_hat, c)?, &grid, config.model_epsilon, &config.binning)?;
    let mp = mp_density_with(c, &grid, &config.binning)?;
    let out = dir.join("densities.csv");
    export_densities(&real, &model, &mp, &out)?;
    println!("densities written to {}", out.display());
    Ok(())
}
