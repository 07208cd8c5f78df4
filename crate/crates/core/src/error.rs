use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hurwitz (max real eigenvalue part {0:e})")]
    NotStable(f64),
    #[error("Schur factorization did not converge")]
    SolverBreakdown,
    #[error("eigenvector matrix is ill conditioned (cond {0:e}); matrix looks defective")]
    NonDiagonalizable(f64),
    #[error("shifted matrix is numerically singular at shift {0}")]
    SingularShift(String),
    #[error("eigenvalue list is not conjugate paired at position {0}")]
    PairingViolation(usize),
    #[error("projected Gram matrix is singular (cond {0:e})")]
    SingularGram(f64),
    #[error("scaling factor must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("fixed-point iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("TQB-IRKA hit the iteration limit ({0})")]
    MaxIterationsExceeded(usize),
    #[error("balanced truncation: {0} of the requested values are below the rank floor")]
    RankDeficient(usize),
    #[error("projector is singular (cond {0:e})")]
    ProjectorSingular(f64),
    #[error("problem too large for the brute-force route (n = {0})")]
    TooLarge(usize),
    #[error("Newton iteration failed at t = {0}")]
    NewtonDivergence(f64),
    #[error("state became non-finite at t = {0}")]
    NonFiniteState(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
