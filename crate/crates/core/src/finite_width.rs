//! Monte-Carlo estimates of the NNGP and NTK of randomly initialized
//! finite-width networks.
//!
//! Parametrization: z⁽¹⁾ = σ_w W⁽¹⁾x + σ_b b⁽¹⁾ and
//! z⁽ˡ⁾ = σ_w/√d_{l−1} W⁽ˡ⁾φ(z⁽ˡ⁻¹⁾) + σ_b b⁽ˡ⁾, with W entries N(0, 1) and
//! b entries N(0, σ_i²). The output z⁽ᴸ⁾ is scalar.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::kernels::{build_nngp, build_ntk, NetworkConfig};
use crate::quadrature::pairwise_sum;

/// One sampled network. Layer l (1-based) maps d_{l−1} → d_l; weights are
/// row-major d_l × d_{l−1}.
#[derive(Debug, Clone)]
pub struct MLPState {
    pub widths: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub config: NetworkConfig,
    activation: ActivationSpec,
    derivative: Option<ActivationSpec>,
}

/// Pre-activations z⁽¹⁾..z⁽ᴸ⁾ of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> f64 {
        self.pre.last().map_or(0.0, |z| z[0])
    }
}

impl MLPState {
    /// A network with input dimension `d0`, `depth − 1` hidden layers of
    /// width `width`, and scalar output.
    pub fn sample(act: &ActivationSpec, cfg: &NetworkConfig, d0: usize, width: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        if width < 1 || d0 < 1 {
            return Err(Error::InvalidParameter("widths must be at least 1".into()));
        }
        let mut widths = vec![d0];
        widths.extend(std::iter::repeat_n(width, cfg.depth - 1));
        widths.push(1);
        let bias = Normal::new(0.0, cfg.sigma_i2.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut weights = Vec::with_capacity(cfg.depth);
        let mut biases = Vec::with_capacity(cfg.depth);
        for l in 1..=cfg.depth {
            let (n_in, n_out) = (widths[l - 1], widths[l]);
            weights.push((0..n_in * n_out).map(|_| StandardNormal.sample(rng)).collect());
            biases.push((0..n_out).map(|_| bias.sample(rng)).collect());
        }
        let derivative = if act.is_discontinuous() { None } else { act.pseudo_derivative().ok() };
        Ok(MLPState { widths, weights, biases, config: *cfg, activation: act.clone(), derivative })
    }

    /// Builds a network from explicit parameters.
    pub fn from_parameters(
        act: &ActivationSpec,
        cfg: &NetworkConfig,
        widths: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if widths.len() != cfg.depth + 1 || weights.len() != cfg.depth || biases.len() != cfg.depth {
            return Err(Error::InvalidParameter("parameter shapes do not match the depth".into()));
        }
        for l in 1..=cfg.depth {
            if weights[l - 1].len() != widths[l] * widths[l - 1] || biases[l - 1].len() != widths[l] {
                return Err(Error::InvalidParameter(format!("layer {l} parameters have the wrong size")));
            }
        }
        let derivative = if act.is_discontinuous() { None } else { act.pseudo_derivative().ok() };
        Ok(MLPState { widths, weights, biases, config: *cfg, activation: act.clone(), derivative })
    }

    pub fn depth(&self) -> usize {
        self.config.depth
    }

    fn weight_scale(&self, l: usize) -> f64 {
        let sw = self.config.sigma_w2.sqrt();
        if l == 1 {
            sw
        } else {
            sw / (self.widths[l - 1] as f64).sqrt()
        }
    }

    /// Number of trainable parameters.
    pub fn n_parameters(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Flattened parameters: W⁽¹⁾, b⁽¹⁾, W⁽²⁾, b⁽²⁾, ...
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_parameter(&mut self, mut index: usize, value: f64) {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if index < w.len() {
                w[index] = value;
                return;
            }
            index -= w.len();
            if index < b.len() {
                b[index] = value;
                return;
            }
            index -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.widths[0] {
            return Err(Error::InvalidParameter(format!("input has {} coordinates, expected {}", x.len(), self.widths[0])));
        }
        let sb = self.config.sigma_b2.sqrt();
        let mut pre = Vec::with_capacity(self.depth());
        let mut post = Vec::with_capacity(self.depth());
        let mut h = x.to_vec();
        for l in 1..=self.depth() {
            let (n_in, n_out) = (self.widths[l - 1], self.widths[l]);
            let scale = self.weight_scale(l);
            let w = &self.weights[l - 1];
            let z: Vec<f64> = (0..n_out)
                .map(|i| {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    scale * row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + sb * self.biases[l - 1][i]
                })
                .collect();
            if l < self.depth() {
                h = z.iter().map(|&v| self.activation.evaluate_left(v)).collect();
                post.push(h.clone());
            }
            pre.push(z);
        }
        Ok(ForwardTrace { input: x.to_vec(), pre, post })
    }

    /// δ⁽ˡ⁾ = ∂z⁽ᴸ⁾/∂z⁽ˡ⁾ for l = 1..L, with φ′(0) := φ′(0−).
    fn backward(&self, trace: &ForwardTrace) -> Result<Vec<Vec<f64>>> {
        let depth = self.depth();
        let mut deltas = vec![Vec::new(); depth];
        deltas[depth - 1] = vec![1.0];
        if depth > 1 {
            let dphi = self.derivative.as_ref().ok_or_else(|| Error::NotPseudoDifferentiable(self.activation.name().to_string()))?;
            for l in (2..=depth).rev() {
                let (n_in, n_out) = (self.widths[l - 1], self.widths[l]);
                let scale = self.weight_scale(l);
                let w = &self.weights[l - 1];
                let upper = &deltas[l - 1];
                let mut back = vec![0.0; n_in];
                for (i, &u) in upper.iter().enumerate().take(n_out) {
                    for (b, &wij) in back.iter_mut().zip(&w[i * n_in..(i + 1) * n_in]) {
                        *b += wij * u;
                    }
                }
                for (b, &z) in back.iter_mut().zip(&trace.pre[l - 2]) {
                    *b *= scale * dphi.evaluate_left(z);
                }
                deltas[l - 2] = back;
            }
        }
        Ok(deltas)
    }

    fn layer_input<'a>(&self, trace: &'a ForwardTrace, l: usize) -> &'a [f64] {
        if l == 1 {
            &trace.input
        } else {
            &trace.post[l - 2]
        }
    }

    /// ∇_θ z⁽ᴸ⁾ in the order of [`MLPState::parameters`].
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward(x)?;
        let deltas = self.backward(&trace)?;
        let sb = self.config.sigma_b2.sqrt();
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in 1..=self.depth() {
            let scale = self.weight_scale(l);
            let input = self.layer_input(&trace, l);
            for &d in &deltas[l - 1] {
                out.extend(input.iter().map(|h| scale * d * h));
            }
            out.extend(deltas[l - 1].iter().map(|d| sb * d));
        }
        Ok(out)
    }

    /// (z⁽ᴸ⁾(x), z⁽ᴸ⁾(x̄), ⟨∇_θ z⁽ᴸ⁾(x), ∇_θ z⁽ᴸ⁾(x̄)⟩). The inner product is
    /// accumulated per layer as (scale²⟨h, h̄⟩ + σ_b²)⟨δ, δ̄⟩.
    pub fn ntk_pair(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
        let (tx, ty) = (self.forward(x)?, self.forward(y)?);
        let (dx, dy) = (self.backward(&tx)?, self.backward(&ty)?);
        Ok((tx.output(), ty.output(), self.ntk_from_passes((&tx, &dx), (&ty, &dy))))
    }

    fn ntk_from_passes(&self, (tx, dx): (&ForwardTrace, &[Vec<f64>]), (ty, dy): (&ForwardTrace, &[Vec<f64>])) -> f64 {
        let mut ntk = 0.0;
        for l in 1..=self.depth() {
            let scale = self.weight_scale(l);
            let hh: f64 = self.layer_input(tx, l).iter().zip(self.layer_input(ty, l)).map(|(a, b)| a * b).sum();
            let dd: f64 = dx[l - 1].iter().zip(&dy[l - 1]).map(|(a, b)| a * b).sum();
            ntk += (scale * scale * hh + self.config.sigma_b2) * dd;
        }
        ntk
    }

    /// (z(x)z(y), NTK(x, y)) for every pair, with one forward and backward
    /// pass per distinct point. The NTK entry is NaN when `with_ntk` is false.
    pub fn kernel_pairs<'a>(&self, pairs: &'a [(Vec<f64>, Vec<f64>)], with_ntk: bool) -> Result<Vec<(f64, f64)>> {
        let mut points: Vec<&[f64]> = Vec::new();
        let mut ids = Vec::with_capacity(pairs.len());
        for (x, y) in pairs {
            let mut id = |p: &'a [f64]| match points.iter().position(|q| *q == p) {
                Some(i) => i,
                None => {
                    points.push(p);
                    points.len() - 1
                }
            };
            let i = id(x);
            ids.push((i, id(y)));
        }
        let passes: Vec<(ForwardTrace, Vec<Vec<f64>>)> = points
            .iter()
            .map(|p| {
                let t = self.forward(p)?;
                let d = if with_ntk { self.backward(&t)? } else { Vec::new() };
                Ok((t, d))
            })
            .collect::<Result<_>>()?;
        Ok(ids
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (&passes[i], &passes[j]);
                let ntk = if with_ntk { self.ntk_from_passes((&a.0, &a.1), (&b.0, &b.1)) } else { f64::NAN };
                (a.0.output() * b.0.output(), ntk)
            })
            .collect())
    }
}

/// Monte-Carlo mean and standard error of one kernel at one point pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalKernel {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// ⟨x, y⟩.
    pub t: f64,
    pub n_samples: usize,
    pub nngp_mean: f64,
    pub nngp_se: f64,
    /// `None` when the activation has no pseudo-derivative.
    pub ntk_mean: Option<f64>,
    pub ntk_se: Option<f64>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Network used for sample `index` of a run seeded with `seed`.
pub fn sample_network(act: &ActivationSpec, cfg: &NetworkConfig, d0: usize, width: usize, seed: u64, index: u64) -> Result<MLPState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    MLPState::sample(act, cfg, d0, width, &mut rng)
}

/// MC estimates of NNGP and NTK over `n_samples` independent networks.
/// Points are unit vectors in R^{d+1}. Samples run in parallel; sums are
/// pairwise over sample order, so results do not depend on thread count.
pub fn estimate(
    act: &ActivationSpec,
    cfg: &NetworkConfig,
    d: usize,
    pairs: &[(Vec<f64>, Vec<f64>)],
    width: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<EmpiricalKernel>> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    for (x, y) in pairs {
        for p in [x, y] {
            if p.len() != d + 1 {
                return Err(Error::InvalidParameter(format!("point has {} coordinates, expected {}", p.len(), d + 1)));
            }
        }
    }
    let with_ntk = !act.is_discontinuous() && act.pseudo_derivative().is_ok();
    let per_sample: Vec<Vec<(f64, f64)>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let net = sample_network(act, cfg, d + 1, width, seed, s)?;
            net.kernel_pairs(pairs, with_ntk)
        })
        .collect::<Result<_>>()?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, (x, y))| {
            let nngp: Vec<f64> = per_sample.iter().map(|s| s[k].0).collect();
            let (nngp_mean, nngp_se) = mean_se(&nngp);
            let (ntk_mean, ntk_se) = if with_ntk {
                let ntk: Vec<f64> = per_sample.iter().map(|s| s[k].1).collect();
                let (m, se) = mean_se(&ntk);
                (Some(m), Some(se))
            } else {
                (None, None)
            };
            EmpiricalKernel {
                x: x.clone(),
                y: y.clone(),
                t: x.iter().zip(y).map(|(a, b)| a * b).sum(),
                n_samples,
                nngp_mean,
                nngp_se,
                ntk_mean,
                ntk_se,
            }
        })
        .collect())
}

/// `n` point pairs on S^d: x = e₁ and y at angles kπ/(n−1) from x in the
/// (e₁, e₂) plane, so t runs from 1 down to −1.
pub fn pair_panel(d: usize, n: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if d < 1 || n < 2 {
        return Err(Error::InvalidParameter("pair panel needs d ≥ 1 and n ≥ 2".into()));
    }
    Ok((0..n)
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / (n - 1) as f64;
            let mut x = vec![0.0; d + 1];
            let mut y = vec![0.0; d + 1];
            x[0] = 1.0;
            y[0] = a.cos();
            y[1] = a.sin();
            (x, y)
        })
        .collect())
}

/// Comparison of one empirical estimate against the infinite-width kernels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McComparison {
    pub t: f64,
    pub empirical_nngp: f64,
    pub nngp_se: f64,
    pub analytic_nngp: f64,
    pub nngp_z: f64,
    pub empirical_ntk: Option<f64>,
    pub ntk_se: Option<f64>,
    pub analytic_ntk: Option<f64>,
    pub ntk_z: Option<f64>,
}

/// Runs [`estimate`] and attaches analytic values and z-scores.
pub fn validate(
    act: &ActivationSpec,
    cfg: &NetworkConfig,
    d: usize,
    pairs: &[(Vec<f64>, Vec<f64>)],
    width: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<McComparison>> {
    let nngp = build_nngp(act, cfg)?;
    let ntk = build_ntk(act, cfg).ok();
    let est = estimate(act, cfg, d, pairs, width, n_samples, seed)?;
    est.iter()
        .map(|e| {
            let t = e.t.clamp(-1.0, 1.0);
            let analytic_nngp = nngp.eval(t)?;
            let analytic_ntk = ntk.as_ref().map(|k| k.eval(t)).transpose()?;
            let z = |m: f64, se: f64, a: f64| if se > 0.0 { (m - a) / se } else if m == a { 0.0 } else { f64::INFINITY };
            let ntk_z = match (e.ntk_mean, e.ntk_se, analytic_ntk) {
                (Some(m), Some(se), Some(a)) => Some(z(m, se, a)),
                _ => None,
            };
            Ok(McComparison {
                t: e.t,
                empirical_nngp: e.nngp_mean,
                nngp_se: e.nngp_se,
                analytic_nngp,
                nngp_z: z(e.nngp_mean, e.nngp_se, analytic_nngp),
                empirical_ntk: e.ntk_mean,
                ntk_se: e.ntk_se,
                analytic_ntk,
                ntk_z,
            })
        })
        .collect()
}
