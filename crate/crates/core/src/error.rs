use num_complex::Complex64;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("panel must be at least 2x2, got {n}x{t}")]
    PanelTooSmall { n: usize, t: usize },

    #[error("panel shape mismatch: {0}")]
    Shape(String),

    #[error("series `{id}` has zero variance")]
    ConstantSeries { id: String },

    #[error("component count {p} out of range (must be < {limit})")]
    ComponentsOutOfRange { p: usize, limit: usize },

    #[error("no eigenvalues left after dropping {dropped} of {count}")]
    EmptySpectrum { dropped: usize, count: usize },

    #[error("invalid bin grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("no physical branch at lambda = {lambda}: roots {roots:?}")]
    BranchSelection { lambda: f64, roots: [Complex64; 4] },

    #[error("regularization epsilon {epsilon} too large for {zeros} zero bins")]
    RegularizationTooLarge { epsilon: f64, zeros: usize },

    #[error("density has no positive mass")]
    DegenerateDensity,

    #[error("grid mismatch: {left} bins vs {right} bins")]
    GridMismatch { left: usize, right: usize },

    #[error("estimation failed at p = {p}, b = {b}: {source}")]
    Cell {
        p: usize,
        b: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PanelTooSmall { .. } => "panel_too_small",
            Error::Shape(_) => "shape",
            Error::ConstantSeries { .. } => "constant_series",
            Error::ComponentsOutOfRange { .. } => "components_out_of_range",
            Error::EmptySpectrum { .. } => "empty_spectrum",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::BranchSelection { .. } => "branch_selection",
            Error::RegularizationTooLarge { .. } => "regularization_too_large",
            Error::DegenerateDensity => "degenerate_density",
            Error::GridMismatch { .. } => "grid_mismatch",
            Error::Cell { .. } => "estimation_cell",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
