//! Kernels of deep fully connected networks with piecewise-smooth activations.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activations;
pub mod dual;
pub mod error;
pub mod finite_width;
pub mod gp_paths;
pub mod hermite;
pub mod kernels;
pub mod quadrature;
pub mod spectrum;

pub use activations::{ActivationSpec, Parity, PolyDegree, Smoothness, SmoothnessReport};
pub use dual::{Backend, DualActivation, DualOptions};
pub use error::{Error, Result};
pub use finite_width::{estimate, EmpiricalKernel, MLPState};
pub use gp_paths::{sample_path, sobolev_series, SobolevSeries, SphericalBasis, Verdict};
pub use kernels::{build_kernel, DotProductKernel, KernelFunction, KernelKind, KernelOptions, NetworkConfig};
pub use spectrum::{eigenvalues, fit_decay, predict_exponent, DecayFit, ExponentPrediction, FitParity, PredictedDecay, Spectrum};
