//! Factor-count and residual-autocorrelation estimation for high-dimensional
//! panels by spectral distance.
//!
//! The number of factors `p` and a common AR(1) coefficient `b` of the residuals
//! are chosen jointly by minimizing the Jensen-Shannon divergence between the
//! eigenvalue histogram of the p-level PCA residual covariance and the limiting
//! density of a panel of independent AR(1) series.

pub mod baselines;
pub mod divergence;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod model;
pub mod roots;
pub mod spectra;
pub mod synth;

pub use divergence::{js, kl, regularize, RegularizedDensity};
pub use error::{Error, Result};
pub use estimator::{divergence_at, estimate, EstimationResult, EstimatorConfig, SearchGrid};
pub use model::{model_density, mp_density, ModelParams};
pub use spectra::{BinGrid, ReturnPanel, SpectralDensity};
pub use synth::{generate, SyntheticConfig};
