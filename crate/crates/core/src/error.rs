use thiserror::Error;

pub type Result<T, E = KpoError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KpoError {
    #[error("invalid Fock dimension {dim} (need at least {min})")]
    InvalidDimension { dim: usize, min: usize },

    #[error("Fock truncation too small: dim {dim}, need more than {required:.3}")]
    TruncationTooSmall { dim: usize, required: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not Hermitian (relative anti-Hermitian norm {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error(
        "adiabatic tracking failed at p/2pi = {pump} MHz: label {label} best overlap^2 {overlap:.4}"
    )]
    TrackingFailure { pump: f64, label: usize, overlap: f64 },

    #[error("requested {requested} levels but only {available} are available")]
    Subspace { requested: usize, available: usize },

    #[error("steady state is not unique: null-space dimension {dimension}")]
    DegenerateSteadyState { dimension: usize },

    #[error("steady state did not converge: residual {residual:e}")]
    SteadyStateConvergence { residual: f64 },

    #[error("sideband system near-singular at omega/2pi = {omega} MHz (condition {condition:e})")]
    NearSingular { omega: f64, condition: f64 },

    #[error("two-transition determinant vanishes at omega/2pi = {omega} MHz")]
    SingularTwoByTwo { omega: f64 },

    #[error("integration step {step:e} exceeds the stability bound {max:e}")]
    StepTooLarge { step: f64, max: f64 },

    #[error("trace drifted by {drift:e} during integration")]
    TraceDrift { drift: f64 },

    #[error("Fourier window: {0}")]
    Windowing(String),
}
