//! BIC3, ED and ER next to the spectral-distance estimate.
//!
//! ```bash
//! cargo run --release --example baseline_estimators
//! ```

use spectral_factors::baselines::{bic3, ed, er};
use spectral_factors::synth::{generate, SyntheticConfig};
use spectral_factors::{estimate, EstimatorConfig, SearchGrid};

fn main() -> spectral_factors::Result<()> {
    for (label, config) in [
        ("strong", SyntheticConfig::new(200, 200, 4, 0.1)),
        ("weak", SyntheticConfig::new(200, 200, 4, 0.25).with_correlation(0.5, 0.5).with_weak(3, 0.3)),
    ] {
        let panel = generate(&config.with_seed(3))?.panel;
        let sd = estimate(&panel, &SearchGrid::default(), &EstimatorConfig::default())?;
        println!(
            "{label:6}: SD {}  BIC3 {}  ED {}  ER {}",
            sd.p_hat,
            bic3(&panel, 20)?.p_hat,
            ed(&panel, 20)?.p_hat,
            er(&panel, 20)?.p_hat
        );
    }
    Ok(())
}
