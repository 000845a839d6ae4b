use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("degenerate structure: {message} (residual {residual:e})")]
    DegenerateStructure { message: String, residual: f64 },
    #[error("independence error: rank {rank} but {expected} required")]
    Independence { rank: usize, expected: usize },
    #[error("chart error: {message} (best min |det| {best_det:e})")]
    Chart { message: String, best_det: f64 },
    #[error("fit error: {message} (condition estimate {condition:e})")]
    Fit { message: String, condition: f64 },
    #[error("overlap error: {0}")]
    Overlap(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("inversion error: {0}")]
    Inversion(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown reference: {0}")]
    UnknownReference(String),
}

impl Error {
    /// True for errors that mean the scenario document itself is invalid.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Dimension(_) | Error::UnknownReference(_)
        )
    }

    /// True for failures of the numerical machinery rather than of the
    /// mathematics being checked.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
