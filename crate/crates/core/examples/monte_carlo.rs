//! A small replication study: mean estimates and RMSE per method.
//!
//! ```bash
//! cargo run --release --example monte_carlo
//! ```

use spectral_factors::harness::{run_experiment, ExperimentSpec, Method};
use spectral_factors::synth::SyntheticConfig;

fn main() -> spectral_factors::Result<()> {
    let configs = vec![
        SyntheticConfig::new(100, 100, 4, 0.25),
        SyntheticConfig::new(100, 100, 4, 0.25).with_correlation(0.5, 0.0),
    ];
    let spec = ExperimentSpec::new(configs, 10, Method::ALL.to_vec()).with_seed_base(100);
    let report = run_experiment(&spec)?;
    for row in &report.rows {
        println!(
            "rho {:.1} {:5} mean p {:.2}  rmse {:.3}  mean b {}",
            row.config.rho,
            row.method.name(),
            row.mean_p_hat,
            row.rmse_p,
            row.mean_b_hat.map_or("-".into(), |b| format!("{b:.3}"))
        );
    }
    report.write_csv(std::io::stdout(), false)
}
