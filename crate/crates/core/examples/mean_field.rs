//! A panel of AR(1) rows with coefficients spread over [0, 1) has nearly the
//! spectrum of a homogeneous panel with a single mean-field coefficient.
//!
//! ```bash
//! cargo run --release --example mean_field
//! ```

use spectral_factors::harness::run_meanfield_demo;

fn main() -> spectral_factors::Result<()> {
    let candidates: Vec<f64> = (0..=19).map(|k| k as f64 * 0.05).collect();
    let points = run_meanfield_demo(300, 600, &candidates, 11)?;
    let best = points
        .iter()
        .min_by(|a, b| a.js.total_cmp(&b.js))
        .expect("candidates");
    for p in &points {
        println!("b_bar {:.2}  JS {:.4}", p.b_bar, p.js);
    }
    println!("closest homogeneous panel: b_bar = {:.2}", best.b_bar);
    Ok(())
}
