use thiserror::Error;

/// Errors raised by the geometry toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polynomial has non-zero mean {mean:e}; no periodic antiderivative exists")]
    NonZeroMean { mean: f64 },

    #[error("grid of size {grid} is too coarse for degree {degree} (need at least {required})")]
    GridTooCoarse {
        grid: usize,
        degree: usize,
        required: usize,
    },

    #[error("grid size {size} is not a power of two")]
    InvalidGrid { size: usize },

    #[error("density is not positive: value {value:e} at theta = {theta}")]
    NotPositive { theta: f64, value: f64 },

    #[error("density constant coefficient {a0} differs from 1/(2 pi)")]
    NotNormalized { a0: f64 },

    #[error("map is not an orientation-preserving diffeomorphism at node {index} (derivative {derivative:e})")]
    NotDiffeo { index: usize, derivative: f64 },

    #[error("right-hand side has non-zero weighted mean {mean:e}; Poisson problem not solvable")]
    NotSolvable { mean: f64 },

    #[error("Gram matrix is numerically singular (min eigenvalue {min_eigenvalue:e})")]
    SingularGram { min_eigenvalue: f64 },

    #[error("time {t} is past the first characteristic crossing at {shock_time}")]
    ShockReached { t: f64, shock_time: f64 },

    #[error("brute-force transport limited to 10 atoms, got {n}")]
    TooLarge { n: usize },

    #[error("brute-force transport requires equal atom counts and equal masses")]
    UnequalMasses,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonZeroMean { .. } => "NonZeroMean",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::InvalidGrid { .. } => "InvalidGrid",
            Error::NotPositive { .. } => "NotPositive",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NotDiffeo { .. } => "NotDiffeo",
            Error::NotSolvable { .. } => "NotSolvable",
            Error::SingularGram { .. } => "SingularGram",
            Error::ShockReached { .. } => "ShockReached",
            Error::TooLarge { .. } => "TooLarge",
            Error::UnequalMasses => "UnequalMasses",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// Module that raises this error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::NonZeroMean { .. } | Error::GridTooCoarse { .. } | Error::InvalidGrid { .. } => {
                "trigpoly"
            }
            Error::NotPositive { .. } | Error::NotNormalized { .. } | Error::NotDiffeo { .. } => {
                "measure"
            }
            Error::NotSolvable { .. } => "calculus",
            Error::SingularGram { .. } => "connection",
            Error::ShockReached { .. } => "geodesic",
            Error::TooLarge { .. } | Error::UnequalMasses => "transport",
            Error::InvalidArgument(_) => "core",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
