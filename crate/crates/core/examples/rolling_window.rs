//! Rolling estimates across a regime change from three to six factors.
//!
//! ```bash
//! cargo run --release --example rolling_window
//! ```

use nalgebra::DMatrix;
use spectral_factors::io::rolling_estimate;
use spectral_factors::synth::{generate, SyntheticConfig};
use spectral_factors::{EstimatorConfig, ReturnPanel, SearchGrid};

fn main() -> spectral_factors::Result<()> {
    let (n, half) = (100, 300);
    let first = generate(&SyntheticConfig::new(n, half, 3, 0.25).with_seed(1))?.panel;
    let second = generate(&SyntheticConfig::new(n, half, 6, 0.25).with_seed(2))?.panel;
    let mut joined = DMatrix::zeros(n, 2 * half);
    joined.columns_mut(0, half).copy_from(first.values());
    joined.columns_mut(half, half).copy_from(second.values());
    let panel = ReturnPanel::from_matrix(joined)?;

    let search = SearchGrid::new(12, 0.95, 0.05)?;
    let series = rolling_estimate(&panel, None, 150, 25, &search, &EstimatorConfig::default())?;
    for point in &series.points {
        let e = point.estimate.as_ref().expect("window estimate");
        println!(
            "window ending {:>3}: p_hat {}  b_hat {:.2}  b_ind {:.3}  explained {:.3}",
            point.date, e.p_hat, e.b_hat, e.b_ind, e.explained_variance
        );
    }
    Ok(())
}
