use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidArgument(String),
    /// Mixture with duplicate centers or a zero weight where a
    /// nondegenerate truth is required.
    InvalidModel(String),
    /// Quadrature box excludes more than the allowed tail mass.
    GridTooSmall { tail_mass: f64 },
    /// An integrand overflowed at some node.
    Divergent,
    /// `f` coincides with the reference density on the grid.
    DegenerateWeighting { hellinger: f64 },
    UnsupportedFamily,
    /// Rejection sampling could not reach the requested class.
    BallTooSmall { acceptance_rate: f64 },
    /// Every packing count on the grid was identical.
    InsufficientResolution,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::InvalidModel(m) => write!(f, "invalid model: {m}"),
            Error::GridTooSmall { tail_mass } => {
                write!(f, "quadrature grid too small: excluded tail mass {tail_mass:e} exceeds 1e-10")
            }
            Error::Divergent => f.write_str("integrand diverges on the quadrature grid"),
            Error::DegenerateWeighting { hellinger } => {
                write!(f, "degenerate weighting: hellinger distance {hellinger:e} below tolerance")
            }
            Error::UnsupportedFamily => f.write_str("location family has no closed-form envelope"),
            Error::BallTooSmall { acceptance_rate } => {
                write!(f, "class unreachable by rejection sampling (acceptance rate {acceptance_rate:e})")
            }
            Error::InsufficientResolution => f.write_str("packing counts are constant over the delta grid"),
        }
    }
}

impl core::error::Error for Error {}
