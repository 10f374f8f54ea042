use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("quadrature on [{a}, {b}] did not converge (estimate {estimate:e}, error estimate {error:e})")]
    Quadrature { a: f64, b: f64, estimate: f64, error: f64 },

    #[error("transition law is a point mass at {atom}; no density exists")]
    NoDensity { atom: f64 },

    #[error("(x, y) = ({x}, {y}) is the singular point of the shifted-lognormal law")]
    SingularPoint { x: f64, y: f64 },

    #[error("(t, x) = ({t}, {x}) lies outside the quantile regularity region")]
    RegularityViolation { t: f64, x: f64 },

    #[error("finite-difference stencil [{lo}, {hi}] crosses coefficient breakpoint {breakpoint}")]
    StencilAcrossBreakpoint { lo: f64, hi: f64, breakpoint: f64 },

    #[error("y = {y} lies on the deterministic image {image} of x; no limit statement applies")]
    DiagonalPoint { y: f64, image: f64 },

    #[error("simulation produced a non-finite state on path {path} at t = {time}")]
    SimulationOverflow { path: usize, time: f64 },

    #[error("not available in closed form: {0}")]
    NotClosedForm(String),

    #[error("model assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("polynomial degree {degree} exceeds the supported maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("simulation scheme unavailable: {0}")]
    SchemeUnavailable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
