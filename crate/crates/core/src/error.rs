use thiserror::Error;

/// Errors raised by the kernel, dual-activation and spectrum routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown activation `{name}`; known activations: {known}")]
    UnknownActivation { name: String, known: String },

    #[error("cannot separate the order-{order} derivative jump ({delta:.3e}) from estimator noise ({noise:.3e})")]
    AmbiguousSmoothness { order: usize, delta: f64, noise: f64 },

    #[error("argument {value} lies outside the admissible domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("activation `{0}` is discontinuous at 0 and has no pseudo-derivative")]
    NotPseudoDifferentiable(String),

    #[error("the NTK is undefined for activations of smoothness 0")]
    NtkUndefined,

    #[error("Mercer reconstruction residual {residual:.3e} exceeds {tolerance:.3e}; increase the quadrature size")]
    QuadratureUnderResolved { residual: f64, tolerance: f64 },

    #[error("only {available} eigenvalues above the zero threshold in the fit window (need {required})")]
    InsufficientData { available: usize, required: usize },

    #[error("tail exponent {exponent:.4} is too close to -1 to decide convergence")]
    InconclusiveTail { exponent: f64 },

    #[error("Chebyshev cache error {max_error:.3e} exceeds tolerance {tolerance:.3e}")]
    CacheInaccurate { max_error: f64, tolerance: f64 },

    #[error("dual of the pseudo-derivative disagrees with the differentiated Hermite series (max deviation {0:.3e})")]
    DerivativeMismatch(f64),
}

impl Error {
    /// True for failures caused by numerical quality rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::AmbiguousSmoothness { .. }
                | Error::QuadratureUnderResolved { .. }
                | Error::InsufficientData { .. }
                | Error::InconclusiveTail { .. }
                | Error::CacheInaccurate { .. }
                | Error::DerivativeMismatch(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
