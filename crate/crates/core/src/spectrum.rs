//! Eigenvalues of dot-product kernels on S^d, decay fits and predicted
//! decay rates.
//!
//! With the probability measure on the sphere, κ(t) = Σ_l μ_l N_{l,d} P_{l,d}(t)
//! where P_{l,d} is the Gegenbauer polynomial normalized by P_{l,d}(1) = 1, and
//! μ_l = ∫ κ(t) P_{l,d}(t) w_d(t) dt with w_d ∝ (1 − t²)^{d/2 − 1}.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::activations::{self, parity_of, ActivationSpec, Parity, PolyDegree, Smoothness};
use crate::error::{Error, Result};
use crate::kernels::{DotProductKernel, KernelKind, NetworkConfig};
use crate::quadrature::{gauss_gegenbauer, pairwise_sum};

/// Default quadrature size and degree cutoff.
pub const DEFAULT_N_QUAD: usize = 1000;
pub const DEFAULT_L_MAX: usize = 256;
/// Eigenvalues at or below this fraction of max_l μ_l count as zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// Relative Mercer reconstruction tolerance.
pub const MERCER_TOLERANCE: f64 = 1e-5;

/// P_{l,d}(t) with P_{l,d}(1) = 1.
pub fn gegenbauer_p(l: usize, d: usize, t: f64) -> f64 {
    let mut out = vec![0.0; l + 1];
    gegenbauer_all(d, t, &mut out);
    out[l]
}

/// Fills out[l] = P_{l,d}(t) for l < out.len().
pub fn gegenbauer_all(d: usize, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    let df = d as f64;
    for l in 1..out.len().saturating_sub(1) {
        let lf = l as f64;
        out[l + 1] = ((2.0 * lf + df - 1.0) * t * out[l] - lf * out[l - 1]) / (lf + df - 1.0);
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// N_{l,d}, the dimension of degree-l spherical harmonics on S^d.
pub fn multiplicity(l: usize, d: usize) -> u128 {
    if l == 0 {
        return 1;
    }
    let (l, d) = (l as u64, d as u64);
    binomial(l + d, d) - if l >= 2 { binomial(l + d - 2, d) } else { 0 }
}

/// Parity selector for fits and predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitParity {
    Even,
    Odd,
    All,
}

impl FitParity {
    fn admits(self, l: usize) -> bool {
        match self {
            FitParity::Even => l.is_multiple_of(2),
            FitParity::Odd => l % 2 == 1,
            FitParity::All => true,
        }
    }
}

impl FromStr for FitParity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(FitParity::Even),
            "odd" => Ok(FitParity::Odd),
            "all" => Ok(FitParity::All),
            other => Err(Error::InvalidParameter(format!("unknown parity `{other}` (even, odd or all)"))),
        }
    }
}

impl fmt::Display for FitParity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitParity::Even => "even",
            FitParity::Odd => "odd",
            FitParity::All => "all",
        })
    }
}

/// Eigenvalues μ_0..μ_{l_max} of a dot-product kernel on S^d.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub d: usize,
    pub mu: Vec<f64>,
    pub multiplicities: Vec<f64>,
    pub n_quad: usize,
    /// max |κ(t) − Σ μ_l N_{l,d} P_{l,d}(t)| / κ(1) over the check grid.
    pub mercer_residual: f64,
}

/// Options for [`eigenvalues_with`].
#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Relative tolerance of the Mercer check; `None` skips it.
    pub mercer_tolerance: Option<f64>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { mercer_tolerance: Some(MERCER_TOLERANCE) }
    }
}

impl Spectrum {
    /// A spectrum from given eigenvalues (e.g. read back from CSV).
    pub fn from_eigenvalues(d: usize, mu: Vec<f64>) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParameter("sphere dimension d must be at least 1".into()));
        }
        let multiplicities = (0..mu.len()).map(|l| multiplicity(l, d) as f64).collect();
        Ok(Spectrum { d, mu, multiplicities, n_quad: 0, mercer_residual: f64::NAN })
    }

    pub fn l_max(&self) -> usize {
        self.mu.len().saturating_sub(1)
    }

    /// Largest μ_l of the given parity.
    pub fn parity_max(&self, parity: FitParity) -> f64 {
        self.mu
            .iter()
            .enumerate()
            .filter(|(l, _)| parity.admits(*l))
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    }

    /// Absolute zero threshold, `ZERO_THRESHOLD` times the largest eigenvalue.
    pub fn zero_threshold(&self) -> f64 {
        ZERO_THRESHOLD * self.parity_max(FitParity::All)
    }

    /// Degrees of the given parity whose eigenvalue is numerically zero.
    pub fn zero_set(&self, parity: FitParity) -> Vec<usize> {
        let thr = self.zero_threshold();
        (0..self.mu.len()).filter(|&l| parity.admits(l) && self.mu[l] <= thr).collect()
    }

    /// Σ_{l ≤ l_max} μ_l N_{l,d} P_{l,d}(t).
    pub fn mercer_sum(&self, t: f64) -> f64 {
        let mut p = vec![0.0; self.mu.len()];
        gegenbauer_all(self.d, t, &mut p);
        let terms: Vec<f64> = (0..self.mu.len()).map(|l| self.mu[l] * self.multiplicities[l] * p[l]).collect();
        pairwise_sum(&terms)
    }
}

/// Eigenvalues with the default Mercer check.
pub fn eigenvalues<K: DotProductKernel + ?Sized>(kernel: &K, d: usize, l_max: usize, n_quad: usize) -> Result<Spectrum> {
    eigenvalues_with(kernel, d, l_max, n_quad, &SpectrumOptions::default())
}

/// μ_l by Gauss–Gegenbauer quadrature with `n_quad` nodes.
pub fn eigenvalues_with<K: DotProductKernel + ?Sized>(
    kernel: &K,
    d: usize,
    l_max: usize,
    n_quad: usize,
    opts: &SpectrumOptions,
) -> Result<Spectrum> {
    if d < 1 {
        return Err(Error::InvalidParameter("sphere dimension d must be at least 1".into()));
    }
    if n_quad < 2 * l_max || n_quad < 2 {
        return Err(Error::InvalidParameter(format!("n_quad = {n_quad} must be at least 2 * l_max = {}", 2 * l_max)));
    }
    let rule = gauss_gegenbauer(n_quad, 0.5 * d as f64 - 1.0)?;
    let kappa: Vec<f64> = rule.nodes.par_iter().map(|&t| kernel.eval(t)).collect::<Result<_>>()?;
    // the reconstruction check uses every degree the rule resolves
    let l_ext = l_max.max(n_quad / 2);
    let mu_ext: Vec<f64> = (0..l_ext + 1)
        .into_par_iter()
        .with_min_len(16)
        .map(|l| {
            let terms: Vec<f64> = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .zip(&kappa)
                .map(|((&t, &w), &k)| w * k * gegenbauer_p_fast(l, d, t))
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    let full = Spectrum::from_eigenvalues(d, mu_ext)?;
    let mut residual = f64::NAN;
    if let Some(tol) = opts.mercer_tolerance {
        let k1 = kernel.eval(1.0)?.abs().max(f64::MIN_POSITIVE);
        let checks: Vec<f64> = (0..50).map(|i| -0.9 + 1.8 * i as f64 / 49.0).collect();
        let errs: Vec<f64> = checks
            .par_iter()
            .map(|&t| Ok((kernel.eval(t)? - full.mercer_sum(t)).abs() / k1))
            .collect::<Result<_>>()?;
        residual = errs.iter().cloned().fold(0.0, f64::max);
        if residual > tol {
            return Err(Error::QuadratureUnderResolved { residual, tolerance: tol });
        }
    }
    let mut mu = full.mu;
    mu.truncate(l_max + 1);
    let mut spec = Spectrum::from_eigenvalues(d, mu)?;
    spec.n_quad = n_quad;
    spec.mercer_residual = residual;
    Ok(spec)
}

/// P_{l,d}(t) without allocation.
fn gegenbauer_p_fast(l: usize, d: usize, t: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let df = d as f64;
    let (mut prev, mut cur) = (1.0, t);
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + df - 1.0) * t * cur - kf * prev) / (kf + df - 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Least-squares power law μ_l ≈ e^{intercept} (l+1)^{slope} on one parity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub parity: FitParity,
    pub window: (usize, usize),
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub n_points: usize,
    /// Degrees in the window (and parity) below the zero threshold.
    pub zero_set: Vec<usize>,
}

/// Fit log μ_l against log(l+1) for l in [lo, hi] of the given parity,
/// using only eigenvalues above the zero threshold.
pub fn fit_decay(spec: &Spectrum, parity: FitParity, window: (usize, usize)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(Error::InvalidParameter(format!("empty window {lo}:{hi}")));
    }
    let hi = hi.min(spec.l_max());
    let thr = spec.zero_threshold();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zero_set = Vec::new();
    for l in lo..=hi {
        if !parity.admits(l) {
            continue;
        }
        if spec.mu[l] > thr && spec.mu[l] > 0.0 {
            xs.push(((l + 1) as f64).ln());
            ys.push(spec.mu[l].ln());
        } else {
            zero_set.push(l);
        }
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData { available: xs.len(), required: 5 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit { parity, window: (lo, hi), slope, intercept, max_residual, n_points: xs.len(), zero_set })
}

/// Predicted behaviour of the eigenvalues of one parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredictedDecay {
    /// μ_l ≍ (l+1)^{exponent}; the exponent is negative.
    PowerLaw { exponent: f64 },
    /// All eigenvalues positive, decaying faster than any power.
    Superpolynomial,
    /// μ_l > 0 exactly for l ≤ max_degree; `None` means none are positive.
    FiniteRank { max_degree: Option<u64> },
}

impl PredictedDecay {
    /// Ordering by how slowly the eigenvalues decay.
    fn slowness(&self) -> (u8, f64) {
        match *self {
            PredictedDecay::FiniteRank { max_degree } => (0, max_degree.map_or(-1.0, |m| m as f64)),
            PredictedDecay::Superpolynomial => (1, 0.0),
            PredictedDecay::PowerLaw { exponent } => (2, exponent),
        }
    }
}

/// Which rule produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionCase {
    SingleLayer,
    Discontinuous,
    FiniteSmoothness,
    SmoothNonPolynomial,
    Polynomial,
    ZeroActivation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentPrediction {
    pub kind: KernelKind,
    pub parity: FitParity,
    pub d: usize,
    pub decay: PredictedDecay,
    pub case: PredictionCase,
    /// Smoothness of the simplified activation.
    pub smoothness: Smoothness,
    /// Name of the simplified activation the smoothness is read from.
    pub simplified: String,
}

/// Predicted eigenvalue decay of κ^NNGP_L or κ^NTK_L of one parity on S^d.
/// For `FitParity::All` the slower of the two parities is returned.
pub fn predict_exponent(
    act: &ActivationSpec,
    cfg: &NetworkConfig,
    kind: KernelKind,
    parity: FitParity,
    d: usize,
) -> Result<ExponentPrediction> {
    cfg.validate()?;
    if d < 1 {
        return Err(Error::InvalidParameter("sphere dimension d must be at least 1".into()));
    }
    if kind == KernelKind::Ntk && act.is_discontinuous() {
        return Err(Error::NtkUndefined);
    }
    if parity == FitParity::All {
        let even = predict_exponent(act, cfg, kind, FitParity::Even, d)?;
        let odd = predict_exponent(act, cfg, kind, FitParity::Odd, d)?;
        let mut best = if odd.decay.slowness() > even.decay.slowness() { odd } else { even };
        best.parity = FitParity::All;
        return Ok(best);
    }
    let r = if parity == FitParity::Odd { 1 } else { 0 };
    let sigma = match kind {
        KernelKind::Nngp => cfg.nngp_offset(),
        KernelKind::Ntk => cfg.sigma_b2,
    };
    let base = ExponentPrediction {
        kind,
        parity,
        d,
        decay: PredictedDecay::Superpolynomial,
        case: PredictionCase::SingleLayer,
        smoothness: Smoothness::Infinite,
        simplified: act.name().to_string(),
    };
    if cfg.depth == 1 {
        // κ_1 is affine in t
        let max_degree = match r {
            1 => Some(1),
            _ if sigma > 0.0 => Some(0),
            _ => None,
        };
        return Ok(ExponentPrediction { decay: PredictedDecay::FiniteRank { max_degree }, ..base });
    }

    let has_parity = parity_of(act) != Parity::Neither;
    let simplified = if sigma == 0.0 && (cfg.depth == 2 || has_parity) {
        if r == 0 {
            act.even_part()
        } else {
            act.odd_part()
        }
    } else {
        act.clone()
    };
    let s = activations::smoothness(&simplified, activations::JET_ORDER)?;
    let base = ExponentPrediction { smoothness: s, simplified: simplified.name().to_string(), ..base };
    let df = d as f64;
    match s {
        Smoothness::Finite(0) => match kind {
            KernelKind::Nngp => Ok(ExponentPrediction {
                decay: PredictedDecay::PowerLaw { exponent: -(df + 2f64.powi(2 - cfg.depth as i32)) },
                case: PredictionCase::Discontinuous,
                ..base
            }),
            KernelKind::Ntk => Err(Error::NtkUndefined),
        },
        Smoothness::Finite(s) => {
            let s = s as f64;
            let exponent = match kind {
                KernelKind::Nngp => -(df + 2.0 * s + 1.0),
                KernelKind::Ntk => -(df + 2.0 * s - 1.0),
            };
            Ok(ExponentPrediction { decay: PredictedDecay::PowerLaw { exponent }, case: PredictionCase::FiniteSmoothness, ..base })
        }
        Smoothness::Infinite => match simplified.polynomial_degree() {
            None => Ok(ExponentPrediction { decay: PredictedDecay::Superpolynomial, case: PredictionCase::SmoothNonPolynomial, ..base }),
            Some(PolyDegree::NegInfinity) => {
                let max_degree = if r == 0 && sigma > 0.0 { Some(0) } else { None };
                Ok(ExponentPrediction {
                    decay: PredictedDecay::FiniteRank { max_degree },
                    case: PredictionCase::ZeroActivation,
                    ..base
                })
            }
            Some(PolyDegree::Degree(_)) => {
                let (e, o) = activations::even_odd_parts(&simplified);
                let de = e.polynomial_degree().and_then(PolyDegree::degree);
                let dodd = o.polynomial_degree().and_then(PolyDegree::degree);
                let (n_even, n_odd) = polynomial_rank(de, dodd, cfg.depth, sigma > 0.0);
                let max_degree = if r == 0 { n_even } else { n_odd };
                Ok(ExponentPrediction {
                    decay: PredictedDecay::FiniteRank { max_degree },
                    case: PredictionCase::Polynomial,
                    ..base
                })
            }
        },
    }
}

/// (N_even, N_odd) for a nonzero polynomial with even/odd Hermite degrees
/// `de`, `dodd` (`None` = −∞). `None` in the result means no positive
/// eigenvalue of that parity.
fn polynomial_rank(de: Option<u32>, dodd: Option<u32>, depth: usize, sigma_positive: bool) -> (Option<u64>, Option<u64>) {
    let pow = |m: u32| (m as u64).pow(depth as u32 - 1);
    // −∞ arithmetic on Option<i64>
    let val = |x: Option<u32>| x.map(|v| v as i64);
    let fin = |x: Option<i64>| x.filter(|v| *v >= 0).map(|v| v as u64);
    let even_dominates = val(de) > val(dodd);
    let (m_hi, m_lo) = if even_dominates { (de.unwrap(), val(dodd)) } else { (dodd.unwrap(), val(de)) };
    let top = pow(m_hi) as i64;
    let other = if sigma_positive {
        Some(top - 1)
    } else {
        m_lo.map(|lo| top - m_hi as i64 + lo)
    };
    if even_dominates {
        (Some(top as u64), fin(other))
    } else {
        (fin(other), Some(top as u64))
    }
}
