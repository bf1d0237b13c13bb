use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dynamical matrix is singular at omega = {omega}")]
    SingularMatrix { omega: Complex64 },

    #[error("invalid window [{lo}, {hi}] with {points} points")]
    InvalidWindow { lo: f64, hi: f64, points: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton system is numerically rank-deficient")]
    JacobianSingular,

    #[error("another pole lies {distance:e} from the contour center (radius {radius:e})")]
    PoleTooClose { distance: f64, radius: f64 },

    #[error("initial parameters have a zero width")]
    DegenerateInit,

    #[error("{points} data points cannot constrain {parameters} free parameters")]
    InsufficientData { points: usize, parameters: usize },

    #[error("model evaluated to a non-finite value and no finite step exists")]
    NonFinite,

    #[error("curve is empty")]
    EmptyCurve,

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("case {label}: {source}")]
    Case { label: String, source: Box<Error> },
}

impl Error {
    /// True for errors that come from a numerical method rather than from
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Case { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::NoConvergence { .. }
                | Error::JacobianSingular
                | Error::PoleTooClose { .. }
                | Error::NonFinite
        )
    }

    pub fn in_case(self, label: &str) -> Self {
        Error::Case {
            label: label.to_string(),
            source: Box::new(self),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
