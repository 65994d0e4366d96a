use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Time or point outside the range a flow map is defined on.
    Domain(String),
    /// Non-positive Jacobian, inverted triangle or collapsed segment.
    GeometryDegeneracy(String),
    InvalidArgument(String),
    DimensionMismatch { expected: usize, found: usize },
    NoConvergence { iterations: usize, residual: f64 },
    SingularMatrix { pivot: usize },
    /// Surface mesh nodes do not coincide with the bulk boundary cycle.
    Alignment(String),
    SingularLevelSet,
    /// A time step failed; `time` is the target time of the step.
    Step { time: f64, source: Box<Error> },
    /// A refinement level of a convergence study failed.
    Level { level: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::GeometryDegeneracy(msg) => write!(f, "degenerate geometry: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "solver did not converge after {iterations} iterations (relative residual {residual:e})"
            ),
            Error::SingularMatrix { pivot } => write!(f, "singular matrix at pivot {pivot}"),
            Error::Alignment(msg) => write!(f, "mesh alignment error: {msg}"),
            Error::SingularLevelSet => write!(f, "level set gradient vanishes"),
            Error::Step { time, source } => write!(f, "step to t = {time} failed: {source}"),
            Error::Level { level, source } => write!(f, "refinement level {level} failed: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Step { source, .. } | Error::Level { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
