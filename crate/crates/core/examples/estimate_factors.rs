//! Joint estimate of the factor count and the residual AR(1) coefficient on a
//! synthetic panel, with the divergence profile over `p`.
//!
//! ```bash
//! cargo run --release --example estimate_factors
//! ```

use spectral_factors::estimator::divergence_at;
use spectral_factors::synth::{generate, SyntheticConfig};
use spectral_factors::{estimate, EstimatorConfig, SearchGrid};

fn main() -> spectral_factors::Result<()> {
    let truth = SyntheticConfig::new(200, 200, 4, 0.25)
        .with_correlation(0.5, 0.0)
        .with_seed(7);
    let panel = generate(&truth)?.panel;
    let search = SearchGrid::default();
    let config = EstimatorConfig::default();

    let res = estimate(&panel, &search, &config)?;
    println!("p_hat = {}, b_hat = {:.2}", res.p_hat, res.b_hat);
    println!(
        "explained variance {:.3}, per factor {:.3}",
        res.explained_variance_at_p_hat, res.variance_per_factor
    );
    for (p, d) in res.profile().iter().enumerate().take(8) {
        println!("  p = {p}: best divergence {d:.5}");
    }

    let probe = divergence_at(&panel, res.p_hat, res.b_hat, &search, &config)?;
    assert_eq!(probe, res.divergence_at_estimate);
    println!("single-cell probe agrees: {probe:.6}");
    Ok(())
}
