use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("site {site} out of range for a chain of {n_sites} spins")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("inconsistent chain parameters: {0}")]
    InconsistentChain(String),

    #[error("chain of {n_sites} spins exceeds the configured limit of {limit}")]
    TooManySites { n_sites: usize, limit: usize },

    #[error("state norm deviates from one by {0:.3e}")]
    NotNormalized(f64),

    #[error("invalid subsystem selection: {0}")]
    InvalidSubset(String),

    #[error("density matrix has eigenvalue {0:.3e} below the positivity tolerance")]
    NotPositive(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("harmonic {harmonic} is not representable with truncation order {nu_max}")]
    HarmonicBeyondTruncation { harmonic: usize, nu_max: usize },

    #[error("Brillouin zone holds {found} distinct modes instead of {expected}; increase nu_max")]
    BrillouinZoneMiscount { found: usize, expected: usize },

    #[error("Floquet mode {mode} is degenerate with a spectral gap of {gap:.3e}")]
    DegenerateMode { mode: usize, gap: f64 },

    #[error("Hermitian eigendecomposition did not converge")]
    EigenFailed,

    #[error("ODE step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("truncation defect {defect:.3e} still above {tol:.3e} at the cap nu_max = {cap}")]
    TruncationCap { tol: f64, cap: usize, defect: f64 },

    #[error("line search failed after {0} backtracks")]
    LineSearchFailed(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
