//! Limiting eigenvalue density of AR(1) residual panels against simulation.
//!
//! ```bash
//! cargo run --release --example ar1_model_density
//! ```

use spectral_factors::divergence::js;
use spectral_factors::model::{model_density_with, model_pointwise, Binning, ModelParams, DEFAULT_EPSILON};
use spectral_factors::spectra::{covariance, empirical_density, symmetric_eigenvalues, BinGrid};
use spectral_factors::synth::ar1_panel;

fn main() -> spectral_factors::Result<()> {
    let (n, t) = (500, 1000);
    let c = n as f64 / t as f64;
    for b in [0.0, 0.3, 0.6, 0.9] {
        let params = ModelParams::new(b, c)?;
        let eig = symmetric_eigenvalues(&covariance(&ar1_panel(n, t, b, 1)?.normalize()?));
        let grid = BinGrid::for_eigenvalues(&eig, 50)?;
        let real = empirical_density(&eig, &grid, 0)?;
        let model = model_density_with(&params, &grid, DEFAULT_EPSILON, &Binning::refined(4))?;
        println!(
            "b = {b:.1}: support bound {:6.2}, largest eigenvalue {:6.2}, JS {:.4}, model mean {:.3}",
            params.support_bound(),
            eig[0],
            js(&real, &model, 1e-8)?,
            model.mean()
        );
    }

    // pointwise values along a line, as used for plotting
    let params = ModelParams::new(0.5, c)?;
    let lambdas: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
    let rho = model_pointwise(&params, &lambdas, DEFAULT_EPSILON)?;
    for (l, r) in lambdas.iter().zip(rho) {
        println!("rho({l:.1}) = {r:.5}");
    }
    Ok(())
}
