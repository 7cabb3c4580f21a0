//! Removing principal components from a three-factor panel until the residual
//! spectrum matches the Marchenko-Pastur law.
//!
//! ```bash
//! cargo run --release --example mp_residual_fit
//! ```

use spectral_factors::divergence::js;
use spectral_factors::model::{mp_density_with, mp_edges, Binning};
use spectral_factors::spectra::{empirical_density, BinGrid, ResidualSpectra};
use spectral_factors::synth::{generate, SyntheticConfig};

fn main() -> spectral_factors::Result<()> {
    // factors with standard deviation 0.1 against unit noise
    let config = SyntheticConfig::new(400, 1000, 3, 100.0 / 3.0).with_seed(2015);
    let panel = generate(&config)?.panel.normalize()?;
    let c = config.aspect_ratio();
    let (lo, hi) = mp_edges(c);
    println!("N = {}, T = {}, MP support [{lo:.3}, {hi:.3}]", panel.n(), panel.t());

    let spectra = ResidualSpectra::compute(&panel, 5, true)?;
    let grid = BinGrid::uniform(1.1 * spectra.spectra[0][0].max(hi), 60)?;
    let mp = mp_density_with(c, &grid, &Binning::refined(4))?;
    for (p, eig) in spectra.spectra.iter().enumerate() {
        let real = empirical_density(eig, &grid, p)?;
        let above = eig.iter().filter(|&&l| l > hi * 1.05).count();
        println!(
            "p = {p}: largest {:7.3}, {above} above the edge, JS to MP {:.4}",
            eig[0],
            js(&real, &mp, 1e-8)?
        );
    }
    Ok(())
}
