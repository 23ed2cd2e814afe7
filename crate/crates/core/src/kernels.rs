//! NNGP and NTK kernels on the sphere by the layer recursion.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::activations::ActivationSpec;
use crate::dual::{dual_at_boundary, DualActivation, DualOptions, DOMAIN_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Nngp,
    Ntk,
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nngp" => Ok(KernelKind::Nngp),
            "ntk" => Ok(KernelKind::Ntk),
            other => Err(Error::InvalidParameter(format!("unknown kernel kind `{other}` (nngp or ntk)"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Nngp => "nngp",
            KernelKind::Ntk => "ntk",
        })
    }
}

/// Depth and initialization variances of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub depth: usize,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub sigma_i2: f64,
}

impl NetworkConfig {
    pub fn new(depth: usize, sigma_w2: f64, sigma_b2: f64, sigma_i2: f64) -> Result<Self> {
        let cfg = NetworkConfig { depth, sigma_w2, sigma_b2, sigma_i2 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// σ_w² = σ_b² = σ_i² = 1.
    pub fn unit(depth: usize) -> Self {
        NetworkConfig { depth, sigma_w2: 1.0, sigma_b2: 1.0, sigma_i2: 1.0 }
    }

    /// σ_w² = 1, no bias.
    pub fn bias_free(depth: usize) -> Self {
        NetworkConfig { depth, sigma_w2: 1.0, sigma_b2: 0.0, sigma_i2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        if !(self.sigma_w2 > 0.0) || !self.sigma_w2.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma_w^2 = {} must be positive", self.sigma_w2)));
        }
        for (name, v) in [("sigma_b^2", self.sigma_b2), ("sigma_i^2", self.sigma_i2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Constant added to the NNGP at every layer, σ_b²σ_i².
    pub fn nngp_offset(&self) -> f64 {
        self.sigma_b2 * self.sigma_i2
    }

    /// Extra constant in the NTK at every layer, σ_b²(1 − σ_i²).
    pub fn ntk_offset(&self) -> f64 {
        self.sigma_b2 * (1.0 - self.sigma_i2)
    }
}

/// Kernel construction options.
#[derive(Debug, Clone, Default)]
pub struct KernelOptions {
    pub dual: DualOptions,
    /// Chebyshev cache (degree, tolerance) per layer dual; a layer whose
    /// cache misses the tolerance falls back to direct evaluation.
    pub cache: Option<(usize, f64)>,
}

/// α_l and the per-layer dual evaluators.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// α_1..α_L with α_l = κ^NNGP_l(1).
    pub alpha: Vec<f64>,
    /// For l = 2..L: dual of x ↦ φ(√α_{l−1} x).
    pub duals: Vec<DualActivation>,
    /// For l = 2..L (NTK only): dual of x ↦ φ′(√α_{l−1} x).
    pub derivative_duals: Vec<DualActivation>,
}

/// Scalar kernel t ↦ κ(t) on [−1, 1].
pub trait DotProductKernel: Sync {
    fn eval(&self, t: f64) -> Result<f64>;
}

/// Wraps a closure as a [`DotProductKernel`].
pub struct FnKernel<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> DotProductKernel for FnKernel<F> {
    fn eval(&self, t: f64) -> Result<f64> {
        if !(t.abs() <= 1.0 + DOMAIN_TOLERANCE) {
            return Err(Error::Domain { value: t, domain: "[-1, 1]" });
        }
        Ok((self.0)(t.clamp(-1.0, 1.0)))
    }
}

/// κ^NNGP_L or κ^NTK_L as a function of the inner product t.
#[derive(Debug, Clone)]
pub struct KernelFunction {
    pub kind: KernelKind,
    pub config: NetworkConfig,
    pub activation: String,
    trace: Arc<LayerTrace>,
}

impl KernelFunction {
    pub fn trace(&self) -> &LayerTrace {
        &self.trace
    }

    /// κ(t), t ∈ [−1, 1].
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t.abs() <= 1.0 + DOMAIN_TOLERANCE) {
            return Err(Error::Domain { value: t, domain: "[-1, 1]" });
        }
        let t = t.clamp(-1.0, 1.0);
        let cfg = &self.config;
        let mut nngp = cfg.nngp_offset() + cfg.sigma_w2 * t;
        let mut ntk = cfg.ntk_offset() + nngp;
        for l in 1..cfg.depth {
            let alpha_prev = self.trace.alpha[l - 1];
            let r = nngp / alpha_prev;
            if r.abs() > 1.0 + 1e-9 {
                return Err(Error::Domain { value: r, domain: "normalized layer correlation in [-1, 1]" });
            }
            let r = r.clamp(-1.0, 1.0);
            let next = cfg.nngp_offset() + cfg.sigma_w2 * self.trace.duals[l - 1].eval(r)?;
            if self.kind == KernelKind::Ntk {
                let dd = self.trace.derivative_duals[l - 1].eval(r)?;
                ntk = cfg.ntk_offset() + next + cfg.sigma_w2 * ntk * dd;
            }
            nngp = next;
        }
        Ok(match self.kind {
            KernelKind::Nngp => nngp,
            KernelKind::Ntk => ntk,
        })
    }

    /// κ(1).
    pub fn value_at_one(&self) -> f64 {
        self.eval(1.0).expect("t = 1 is in the domain")
    }
}

impl DotProductKernel for KernelFunction {
    fn eval(&self, t: f64) -> Result<f64> {
        KernelFunction::eval(self, t)
    }
}

fn build(act: &ActivationSpec, cfg: &NetworkConfig, kind: KernelKind, opts: &KernelOptions) -> Result<KernelFunction> {
    cfg.validate()?;
    let deriv = match kind {
        KernelKind::Ntk => Some(act.pseudo_derivative()?),
        KernelKind::Nngp => None,
    };
    let mut alpha = vec![cfg.nngp_offset() + cfg.sigma_w2];
    let mut duals = Vec::with_capacity(cfg.depth.saturating_sub(1));
    let mut derivative_duals = Vec::new();
    for _ in 1..cfg.depth {
        let a_prev = *alpha.last().unwrap();
        if !(a_prev > 0.0) || !a_prev.is_finite() {
            return Err(Error::InvalidParameter(format!("layer variance alpha = {a_prev} is not positive and finite")));
        }
        let scaled = act.rescale(a_prev.sqrt())?;
        // α from 1-D quadrature, independent of any dual cache
        alpha.push(cfg.nngp_offset() + cfg.sigma_w2 * dual_at_boundary(&scaled, 1.0)?);
        duals.push(layer_dual(&scaled, opts)?);
        if let Some(d) = &deriv {
            derivative_duals.push(layer_dual(&d.rescale(a_prev.sqrt())?, opts)?);
        }
    }
    if let Some(a) = alpha.last() {
        if !(*a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("layer variance alpha = {a} is not positive and finite")));
        }
    }
    Ok(KernelFunction {
        kind,
        config: *cfg,
        activation: act.name().to_string(),
        trace: Arc::new(LayerTrace { alpha, duals, derivative_duals }),
    })
}

fn layer_dual(act: &ActivationSpec, opts: &KernelOptions) -> Result<DualActivation> {
    let dual = DualActivation::new(act, &opts.dual)?;
    Ok(match opts.cache {
        Some((degree, tol)) => dual.cached(degree, tol).unwrap_or(dual),
        None => dual,
    })
}

pub fn build_nngp(act: &ActivationSpec, cfg: &NetworkConfig) -> Result<KernelFunction> {
    build(act, cfg, KernelKind::Nngp, &KernelOptions::default())
}

pub fn build_ntk(act: &ActivationSpec, cfg: &NetworkConfig) -> Result<KernelFunction> {
    build(act, cfg, KernelKind::Ntk, &KernelOptions::default())
}

pub fn build_kernel(
    act: &ActivationSpec,
    cfg: &NetworkConfig,
    kind: KernelKind,
    opts: &KernelOptions,
) -> Result<KernelFunction> {
    build(act, cfg, kind, opts)
}

/// κ on a grid, evaluated in parallel; output order matches `ts`.
pub fn evaluate_kernel<K: DotProductKernel + ?Sized>(k: &K, ts: &[f64]) -> Result<Vec<f64>> {
    ts.par_iter().map(|&t| k.eval(t)).collect()
}

/// `n` evenly spaced points from t0 to t1 inclusive.
pub fn linear_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect(),
    }
}
