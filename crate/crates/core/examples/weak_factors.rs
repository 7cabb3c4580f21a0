//! Weak-factor sweep: how each method copes as three of four factors fade.
//!
//! ```bash
//! cargo run --release --example weak_factors
//! ```

use spectral_factors::harness::{run_weak_factor_sweep, ExperimentSpec, Method};
use spectral_factors::synth::SyntheticConfig;

fn main() -> spectral_factors::Result<()> {
    let base = SyntheticConfig::new(100, 100, 4, 0.25).with_correlation(0.5, 0.0);
    let template = ExperimentSpec::new(Vec::new(), 8, Method::ALL.to_vec());
    let report = run_weak_factor_sweep(&base, &[0.2, 0.5, 1.0], &[3], &template)?;
    for row in &report.rows {
        println!(
            "sigma {:.1}  {:5} rmse {:.3}",
            row.config.sigma_weak,
            row.method.name(),
            row.rmse_p
        );
    }
    Ok(())
}
