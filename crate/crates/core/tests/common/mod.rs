#![allow(dead_code)]

use nalgebra::DMatrix;
use spectral_factors::synth::{generate, SyntheticConfig};
use spectral_factors::ReturnPanel;

/// Joins a `p_before`-factor panel and a `p_after`-factor panel in time.
pub fn spliced_panel(n: usize, change: usize, t: usize, p_before: usize, p_after: usize, inv_snr: f64, seed: u64) -> ReturnPanel {
    let first = generate(&SyntheticConfig::new(n, change, p_before, inv_snr).with_seed(2 * seed)).unwrap().panel;
    let second = generate(&SyntheticConfig::new(n, t - change, p_after, inv_snr).with_seed(2 * seed + 1)).unwrap().panel;
    let mut joined = DMatrix::zeros(n, t);
    joined.columns_mut(0, change).copy_from(first.values());
    joined.columns_mut(change, t - change).copy_from(second.values());
    ReturnPanel::from_matrix(joined).unwrap()
}

/// Last column of the first window whose estimate leaves the opening plateau
/// and stays off it in the next window.
pub fn detected_change(p_hat: &[usize], window: usize, step: usize) -> Option<usize> {
    let base = *p_hat.first()?;
    (0..p_hat.len().saturating_sub(1))
        .find(|&k| p_hat[k] != base && p_hat[k + 1] != base)
        .map(|k| k * step + window - 1)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
