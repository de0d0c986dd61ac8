use thiserror::Error;

/// Errors raised by lattice algebra, module, and soliton operations.
#[derive(Debug, Clone, Error)]
pub enum NcError {
    #[error("theta = {0} outside the open interval (0,1)")]
    InvalidTheta(f64),

    #[error("operands live on different lattice sides ({0} vs {1})")]
    SideMismatch(&'static str, &'static str),

    #[error("radius {requested} too small to contain support of radius {support}")]
    RadiusTooSmall { requested: i64, support: i64 },

    #[error("element is not self-adjoint: ||a - a*||_1 = {0:.3e}")]
    NotSelfAdjoint(f64),

    #[error("element is not positive: lower spectral bound {0:.3e}")]
    NotPositive(f64),

    #[error("iteration failed to converge within {iterations} steps (last change {last_change:.3e})")]
    IterationDiverged { iterations: usize, last_change: f64 },

    #[error("residual {value:.3e} exceeds tolerance {tol:.3e} in {context}")]
    ResidualTooLarge {
        context: &'static str,
        value: f64,
        tol: f64,
    },

    #[error("quadrature tail bound {0:.3e} exceeds tolerance {1:.3e}")]
    QuadratureTail(f64, f64),

    #[error("window is not a Gabor frame (invertibility margin {0:.3e})")]
    NotAFrame(f64),

    #[error("frame-bound cross-validation failed: Rayleigh quotient {value:.6e} outside [{lo:.6e}, {hi:.6e}]")]
    CrossValidationFailed { value: f64, lo: f64, hi: f64 },

    #[error("gauge element is not invertible (margin {0:.3e})")]
    NotInvertible(f64),

    #[error("energy trace has imaginary part {0:.3e}, expected below {1:.3e}")]
    EnergyNotReal(f64, f64),

    #[error("operation requires a Gaussian window")]
    NonGaussianWindow,

    #[error("invalid window parameters: {0}")]
    InvalidWindow(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
