use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel is not symmetric (max relative deviation {max_dev:e} at ({i}, {j}))")]
    AsymmetricKernel { i: usize, j: usize, max_dev: f64 },
    #[error("kernel entry ({i}, {j}) is negative: {value}")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("first block of the two-block model is empty (n * delta = {0})")]
    EmptyBlock(f64),
    #[error("dimension {n} exceeds the brute-force limit {max}")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },
    #[error("Newton Jacobian is singular")]
    SingularJacobian,
    #[error("iteration diverged: {0}")]
    Diverged(String),

    #[error("top eigenvalue is degenerate (gap {gap:e})")]
    DegenerateTop { gap: f64 },
    #[error("smallest eigenvalue of B is not isolated (modulus gap {gap:e})")]
    NotIsolated { gap: f64 },
    #[error("spectral gap of F too small ({gap:e})")]
    GapTooSmall { gap: f64 },
    #[error("stability operator B is singular")]
    SingularB,

    #[error("density is below the support threshold everywhere")]
    NoSupport,
    #[error("psi vanishes, gap estimate undefined")]
    ZeroPsi,
    #[error("fit window too small: {0}")]
    WindowTooSmall(String),
    #[error("shape fit diverged: {0}")]
    FitDiverged(String),

    #[error("perturbation norm {norm:e} exceeds the smallness gate {gate:e}")]
    PerturbationTooLarge { norm: f64, gate: f64 },
    #[error("<v> = {avg_v} is above the small-alpha threshold {eps_star}")]
    NotSmallAlpha { avg_v: f64, eps_star: f64 },

    #[error("input must be strictly positive")]
    NonPositiveInput,

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error stems from invalid input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::AsymmetricKernel { .. }
                | Error::NegativeEntry { .. }
                | Error::BadWeights(_)
                | Error::DimensionMismatch(_)
                | Error::EmptyBlock(_)
                | Error::DimensionTooLarge { .. }
                | Error::InvalidInput(_)
                | Error::WindowTooSmall(_)
                | Error::PerturbationTooLarge { .. }
                | Error::NonPositiveInput
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
