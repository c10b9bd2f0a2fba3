use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 16")]
    BadGridSize(usize),
    #[error("grid half-width must be positive, got {0}")]
    BadGridHalfWidth(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    #[error("potential width must be positive, got {0}")]
    BadPotentialWidth(f64),
    #[error("field contains non-finite values: {0}")]
    NonFiniteField(&'static str),
    #[error("lax spec invariant violated: {0}")]
    LaxInvariant(String),
    #[error("spectral parameter k must be positive, got {0}")]
    BadSpectralParameter(f64),
    #[error("resolvent pole must have Re z != 0, got {0}")]
    PoleOnImaginaryAxis(f64),
    #[error("component index {0} out of range (m = {1})")]
    ComponentOutOfRange(usize, usize),
    #[error("smallness violated: k^(-1/2)(|q|+|r|) = {measured} > {delta}; need k >= {required_k}")]
    SmallnessViolated {
        measured: f64,
        delta: f64,
        required_k: f64,
    },
    #[error("Picard iteration did not converge within {0} iterations")]
    PicardDiverged(usize),
    #[error("potential is not compactly supported inside the safe window")]
    SupportTouchesEdge,
    #[error("Hilbert-Schmidt norm {0} >= 1: outside the geometric convergence regime")]
    OutsideSmallnessRegime(f64),
    #[error("operator norm {0} too large for determinant evaluation")]
    KernelTooLarge(f64),
    #[error("singular Jost column set")]
    SingularJostSet,
    #[error("transmission coefficient vanishes; logarithm undefined")]
    VanishingTransmission,
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("evolution blew up at t = {t}: max |q| = {max_abs}")]
    BlowUp { t: f64, max_abs: f64 },
    #[error("NaN detected during evolution at t = {0}")]
    EvolutionNaN(f64),
    #[error("unsupported modulation exponent r = {0} (supported: 1, 2, inf)")]
    UnsupportedModulationExponent(f64),
    #[error("coercivity integral diverges for s = {0} >= 0")]
    CoercivityDivergence(f64),
    #[error("linear solve failed: {0}")]
    LinearSolve(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
