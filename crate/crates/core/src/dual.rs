//! Dual activations φ̂(t) = E[φ(U)φ(V)] for standard Gaussians U, V with
//! correlation t.
//!
//! Three backends are available: the Hermite power series Σ a_n² tⁿ, a
//! two-dimensional quadrature over the four sign quadrants of (U, V), and
//! closed forms for a handful of activations. Any backend can be wrapped in
//! a validated Chebyshev interpolant for fast repeated evaluation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::hermite::{self, expand, GaussHermiteRule, HermiteSeries};
use crate::quadrature::{gauss_legendre, pairwise_sum};

/// Arguments this close to ±1 are treated as ±1 after rounding.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Hermite,
    Quadrature,
    ClosedForm,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hermite" => Ok(Backend::Hermite),
            "quadrature" => Ok(Backend::Quadrature),
            "closed-form" | "closed_form" | "closedform" => Ok(Backend::ClosedForm),
            other => Err(Error::InvalidParameter(format!(
                "unknown backend `{other}` (expected hermite, quadrature or closed-form)"
            ))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Hermite => "hermite",
            Backend::Quadrature => "quadrature",
            Backend::ClosedForm => "closed-form",
        })
    }
}

/// Known closed-form duals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClosedForm {
    /// s_0 = sgn/2: 1/4 − arccos(t)/(2π).
    S0,
    /// 𝟙_{x>0}: 1/2 − arccos(t)/(2π).
    Step,
    /// ReLU: (√(1−t²) + (π − arccos t) t)/(2π).
    Relu,
    /// x ↦ x: t.
    Identity,
}

impl ClosedForm {
    pub fn eval(self, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        match self {
            ClosedForm::S0 => 0.25 - t.acos() / (2.0 * pi),
            ClosedForm::Step => 0.5 - t.acos() / (2.0 * pi),
            ClosedForm::Relu => ((1.0 - t * t).max(0.0).sqrt() + (pi - t.acos()) * t) / (2.0 * pi),
            ClosedForm::Identity => t,
        }
    }

    /// The closed form matching a registry activation name, if any.
    pub fn for_name(name: &str) -> Option<Self> {
        match name {
            "sk:0" => Some(ClosedForm::S0),
            "heaviside" | "relu'" | "leakyrelu'" => Some(ClosedForm::Step),
            "relu" => Some(ClosedForm::Relu),
            "identity" | "poly:0,1" => Some(ClosedForm::Identity),
            _ => None,
        }
    }
}

/// The App.-F style quadrant rule: cutoff `c` and an n×n Gauss–Legendre grid
/// on each of the two patches of a quadrant.
#[derive(Debug, Clone)]
pub struct QuadrantRule {
    pub c: f64,
    pub n: usize,
    /// Nodes/weights on [0, 1] (weights sum to 1).
    x_nodes: Vec<f64>,
    x_weights: Vec<f64>,
    /// Nodes/weights on [−1, 1] (weights sum to 2); symmetric.
    y_nodes: Vec<f64>,
    y_weights: Vec<f64>,
}

impl QuadrantRule {
    pub fn new(c: f64, n: usize) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("quadrant cutoff c = {c} must be positive")));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("quadrant grid n = {n} must be at least 2")));
        }
        let gl = gauss_legendre(n)?;
        Ok(QuadrantRule {
            c,
            n,
            x_nodes: gl.nodes.iter().map(|x| 0.5 * (1.0 + x)).collect(),
            x_weights: gl.weights.clone(),
            y_nodes: gl.nodes.clone(),
            y_weights: gl.weights.iter().map(|w| 2.0 * w).collect(),
        })
    }
}

impl Default for QuadrantRule {
    fn default() -> Self {
        QuadrantRule::new(12.0, 50).expect("default quadrant rule is valid")
    }
}

/// Points (u, v) and weights of the two patches covering {u > 0, v > 0} for
/// correlation ρ. The v-coordinate of node (i, j) is the u-coordinate of node
/// (i, n−1−j), so only u-values are stored.
struct QuadrantGrid {
    u: Vec<f64>,
    w: Vec<f64>,
    n: usize,
}

impl QuadrantGrid {
    fn new(rule: &QuadrantRule, rho: f64) -> Self {
        let n = rule.n;
        let c = rule.c;
        let sx = (0.5 * (1.0 + rho)).max(0.0).sqrt();
        let sy = (0.5 * (1.0 - rho)).max(0.0).sqrt();
        let mut u = Vec::with_capacity(2 * n * n);
        let mut w = Vec::with_capacity(2 * n * n);
        // patch A: x = cσ_y x', y = (σ_x/σ_y) x y'
        for (&xp, &wx) in rule.x_nodes.iter().zip(&rule.x_weights) {
            for (&yp, &wy) in rule.y_nodes.iter().zip(&rule.y_weights) {
                u.push(c * sx * sy * xp * (1.0 + yp));
                w.push(wx * wy * c * sy * c * sx * xp * pdf(c * sy * xp) * pdf(c * sx * xp * yp));
            }
        }
        // patch B: x = cσ_y + c x'', y = cσ_x y''
        for (&xp, &wx) in rule.x_nodes.iter().zip(&rule.x_weights) {
            for (&yp, &wy) in rule.y_nodes.iter().zip(&rule.y_weights) {
                u.push(c * sx * sy * (1.0 + yp) + c * sx * xp);
                w.push(wx * wy * c * c * sx * pdf(c * sy + c * xp) * pdf(c * sx * yp));
            }
        }
        QuadrantGrid { u, w, n }
    }

    #[inline]
    fn mirror(&self, k: usize) -> usize {
        let row = k / self.n;
        let j = k % self.n;
        row * self.n + (self.n - 1 - j)
    }

    /// Σ w f(u) g(v) with f, g given by their values on the u-grid.
    fn pair_sum(&self, f: &[f64], g: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.u.len()).map(|k| self.w[k] * f[k] * g[self.mirror(k)]).collect();
        pairwise_sum(&terms)
    }
}

/// φ̂(ρ) by quadrant quadrature, ρ ∈ (−1, 1).
pub fn dual_via_quadrature(act: &ActivationSpec, rho: f64, rule: &QuadrantRule) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain { value: rho, domain: "(-1, 1)" });
    }
    Ok(quadrant_dual(act, rho, rule))
}

/// Quadrant assembly; also valid at ρ = ±1 where one patch degenerates.
fn quadrant_dual(act: &ActivationSpec, rho: f64, rule: &QuadrantRule) -> f64 {
    let pos = act.pos_branch();
    let neg = act.neg_branch();
    // (+,+) and (−,−) at correlation ρ
    let grid = QuadrantGrid::new(rule, rho);
    let p: Vec<f64> = grid.u.iter().map(|&u| pos(u)).collect();
    let m: Vec<f64> = grid.u.iter().map(|&u| neg(-u)).collect();
    let same = grid.pair_sum(&p, &p) + grid.pair_sum(&m, &m);
    // (+,−) and (−,+): reflect the negative coordinate, correlation −ρ
    let grid = QuadrantGrid::new(rule, -rho);
    let p: Vec<f64> = grid.u.iter().map(|&u| pos(u)).collect();
    let m: Vec<f64> = grid.u.iter().map(|&u| neg(-u)).collect();
    let mixed = grid.pair_sum(&p, &m) + grid.pair_sum(&m, &p);
    same + mixed
}

/// φ̂(±1): E[φ(X)²] for τ = +1 and E[φ(X)φ(−X)] for τ = −1.
pub fn dual_at_boundary(act: &ActivationSpec, tau: f64) -> Result<f64> {
    dual_at_boundary_with(act, tau, hermite::default_rule())
}

pub fn dual_at_boundary_with(act: &ActivationSpec, tau: f64, rule: &GaussHermiteRule) -> Result<f64> {
    if tau == 1.0 {
        Ok(rule.expect(|x| act.evaluate(x).powi(2)))
    } else if tau == -1.0 {
        Ok(rule.expect(|x| act.evaluate(x) * act.evaluate(-x)))
    } else {
        Err(Error::InvalidParameter(format!("boundary tau must be +1 or -1, got {tau}")))
    }
}

/// E[φ_even(X)²] and E[φ_odd(X)²].
fn parity_energies(act: &ActivationSpec, rule: &GaussHermiteRule) -> [f64; 2] {
    let even = rule.expect(|x| (0.5 * (act.evaluate(x) + act.evaluate(-x))).powi(2));
    let odd = rule.expect(|x| (0.5 * (act.evaluate(x) - act.evaluate(-x))).powi(2));
    [even, odd]
}

// ---------------------------------------------------------------------------
// Hermite backend
// ---------------------------------------------------------------------------

/// Tail model for the squared coefficients of one parity beyond truncation:
/// a_n² ≈ A · n^{c1} · e^{c2/n}. Shape from a least-squares fit to the last
/// computed coefficients, amplitude from Parseval so that the tail carries
/// exactly the missing energy E[φ_p²] − Σ_{n≤N} a_n².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailModel {
    pub parity: usize,
    pub first: usize,
    pub ln_amp: f64,
    pub c1: f64,
    pub c2: f64,
    pub mass: f64,
}

/// Direct summation cap; beyond this an integral remainder is used.
const TAIL_CAP: usize = 1 << 21;
const TAIL_FIT_POINTS: usize = 48;

impl TailModel {
    #[inline]
    fn ln_shape(&self, n: f64) -> f64 {
        self.c1 * n.ln() + self.c2 / n
    }

    /// Σ_{n ≥ first, n ≡ parity} n^{c1} e^{c2/n} r^n for 0 ≤ r ≤ 1 (no amplitude).
    fn shape_sum(&self, r: f64, ln_amp: f64) -> f64 {
        let ln_r = if r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
        let mut total = 0.0;
        let mut n = self.first;
        while n < TAIL_CAP {
            let nf = n as f64;
            let term = (ln_amp + self.ln_shape(nf) + nf * ln_r).exp();
            total += term;
            if term <= 1e-20 * total.max(f64::MIN_POSITIVE) && nf * -ln_r > 40.0 {
                return total;
            }
            n += 2;
        }
        // remainder Σ_{n ≥ cap} ≈ ½ ∫_cap^∞ n^{c1} r^n dn, with n = cap·e^s
        let m = n as f64;
        let s_max = 60.0;
        let rule = gauss_legendre(200).expect("static rule").mapped(0.0, s_max);
        let integral: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&s, &w)| {
                let nn = m * s.exp();
                w * (ln_amp + s + m.ln() + self.ln_shape(nn) + nn * ln_r).exp()
            })
            .sum();
        total + 0.5 * integral
    }

    /// Tail contribution Σ_{n>N} a_n² tⁿ at t ∈ [−1, 1].
    pub fn eval(&self, t: f64) -> f64 {
        let v = self.shape_sum(t.abs(), self.ln_amp);
        if t < 0.0 && self.parity == 1 {
            -v
        } else {
            v
        }
    }

    fn fit(sq: &[f64], parity: usize, missing: f64) -> Option<TailModel> {
        let big_n = sq.len().checked_sub(1)?;
        let idx: Vec<usize> = (0..=big_n).rev().filter(|n| n % 2 == parity && *n > 0).take(TAIL_FIT_POINTS).collect();
        if idx.len() < TAIL_FIT_POINTS {
            return None;
        }
        let window_max = idx.iter().map(|&n| sq[n]).fold(0.0f64, f64::max);
        if !(window_max > 1e-28) || idx.iter().any(|&n| !(sq[n] > 0.0)) {
            return None;
        }
        // normal equations for y = b0 + b1 ln n + b2 / n
        let mut ata = [[0.0f64; 3]; 3];
        let mut aty = [0.0f64; 3];
        for &n in &idx {
            let nf = n as f64;
            let row = [1.0, nf.ln(), 1.0 / nf];
            let y = sq[n].ln();
            for i in 0..3 {
                aty[i] += row[i] * y;
                for j in 0..3 {
                    ata[i][j] += row[i] * row[j];
                }
            }
        }
        let b = solve3(ata, aty)?;
        let max_resid = idx
            .iter()
            .map(|&n| {
                let nf = n as f64;
                (sq[n].ln() - (b[0] + b[1] * nf.ln() + b[2] / nf)).abs()
            })
            .fold(0.0f64, f64::max);
        if !(b[1] < -1.0) || max_resid > 0.05 {
            return None;
        }
        let first = big_n + 1 + (big_n + 1 + parity) % 2;
        let mut model = TailModel { parity, first, ln_amp: 0.0, c1: b[1], c2: b[2], mass: missing };
        // Parseval calibration; fall back on the fitted amplitude if the
        // missing energy is at rounding level
        let shape_total = model.shape_sum(1.0, 0.0);
        let fitted_mass = b[0].exp() * shape_total;
        if missing > 1e-3 * fitted_mass && missing > 0.0 {
            model.ln_amp = missing.ln() - shape_total.ln();
        } else {
            model.ln_amp = b[0];
            model.mass = fitted_mass;
        }
        Some(model)
    }
}

#[allow(clippy::needless_range_loop)] // row elimination reads clearer with indices
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Truncated power series with optional tail models per parity.
#[derive(Debug, Clone)]
pub struct HermiteDual {
    pub squares: Vec<f64>,
    pub tails: [Option<TailModel>; 2],
}

impl HermiteDual {
    fn eval(&self, t: f64) -> f64 {
        let head = self.squares.iter().rev().fold(0.0, |acc, a2| acc * t + a2);
        let tail: f64 = self.tails.iter().flatten().map(|m| m.eval(t)).sum();
        head + tail
    }
}

// ---------------------------------------------------------------------------
// Chebyshev cache
// ---------------------------------------------------------------------------

/// Chebyshev interpolant of φ̂ on [−1, 1].
#[derive(Debug, Clone)]
pub struct ChebyshevCache {
    pub coeffs: Vec<f64>,
    pub max_error: f64,
}

impl ChebyshevCache {
    pub fn eval(&self, t: f64) -> f64 {
        // Clenshaw
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }
}

// ---------------------------------------------------------------------------
// DualActivation
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum Repr {
    Hermite(Arc<HermiteDual>),
    Quadrature { act: ActivationSpec, rule: Arc<QuadrantRule> },
    ClosedForm(ClosedForm),
    Cached { cache: Arc<ChebyshevCache>, inner: Box<Repr> },
}

/// Evaluator for φ̂ on [−1, 1].
#[derive(Clone)]
pub struct DualActivation {
    name: String,
    backend: Backend,
    repr: Repr,
    value_at_one: f64,
    value_at_minus_one: f64,
}

impl fmt::Debug for DualActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DualActivation")
            .field("name", &self.name)
            .field("backend", &self.backend)
            .field("cached", &self.is_cached())
            .field("value_at_one", &self.value_at_one)
            .finish()
    }
}

/// Options for building a dual.
#[derive(Debug, Clone)]
pub struct DualOptions {
    pub backend: Backend,
    pub n_coeffs: usize,
    pub quadrant: QuadrantRule,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions { backend: Backend::Quadrature, n_coeffs: hermite::DEFAULT_N_COEFFS, quadrant: QuadrantRule::default() }
    }
}

impl DualActivation {
    /// Dual of `act` with the chosen backend.
    pub fn new(act: &ActivationSpec, opts: &DualOptions) -> Result<Self> {
        match opts.backend {
            Backend::Hermite => Ok(Self::hermite(act, opts.n_coeffs, hermite::default_rule())),
            Backend::Quadrature => Self::quadrature(act, opts.quadrant.clone()),
            Backend::ClosedForm => {
                let cf = ClosedForm::for_name(act.name()).ok_or_else(|| {
                    Error::InvalidParameter(format!("no closed-form dual for `{}`", act.name()))
                })?;
                Ok(Self::closed_form(cf, act.name()))
            }
        }
    }

    /// Hermite-series dual with Parseval-calibrated tails.
    pub fn hermite(act: &ActivationSpec, n_coeffs: usize, rule: &GaussHermiteRule) -> Self {
        let series = expand(act, n_coeffs, rule);
        let squares: Vec<f64> = series.coeffs.iter().map(|a| a * a).collect();
        let energies = parity_energies(act, rule);
        let tails = [0usize, 1].map(|p| {
            let head: Vec<f64> = squares.iter().enumerate().filter(|(n, _)| n % 2 == p).map(|(_, v)| *v).collect();
            let missing = energies[p] - pairwise_sum(&head);
            TailModel::fit(&squares, p, missing)
        });
        let value_at_one = energies[0] + energies[1];
        let value_at_minus_one = energies[0] - energies[1];
        DualActivation {
            name: act.name().to_string(),
            backend: Backend::Hermite,
            repr: Repr::Hermite(Arc::new(HermiteDual { squares, tails })),
            value_at_one,
            value_at_minus_one,
        }
    }

    /// Plain truncated series Σ_{n≤N} a_n² tⁿ without tail correction.
    pub fn from_series(series: &HermiteSeries) -> Self {
        let squares: Vec<f64> = series.coeffs.iter().map(|a| a * a).collect();
        let value_at_one = pairwise_sum(&squares);
        let signed: Vec<f64> = squares.iter().enumerate().map(|(n, v)| if n % 2 == 0 { *v } else { -v }).collect();
        DualActivation {
            name: series.source.clone(),
            backend: Backend::Hermite,
            repr: Repr::Hermite(Arc::new(HermiteDual { squares, tails: [None, None] })),
            value_at_one,
            value_at_minus_one: pairwise_sum(&signed),
        }
    }

    pub fn quadrature(act: &ActivationSpec, rule: QuadrantRule) -> Result<Self> {
        Ok(DualActivation {
            name: act.name().to_string(),
            backend: Backend::Quadrature,
            value_at_one: dual_at_boundary(act, 1.0)?,
            value_at_minus_one: dual_at_boundary(act, -1.0)?,
            repr: Repr::Quadrature { act: act.clone(), rule: Arc::new(rule) },
        })
    }

    pub fn closed_form(cf: ClosedForm, name: &str) -> Self {
        DualActivation {
            name: name.to_string(),
            backend: Backend::ClosedForm,
            repr: Repr::ClosedForm(cf),
            value_at_one: cf.eval(1.0),
            value_at_minus_one: cf.eval(-1.0),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn is_cached(&self) -> bool {
        matches!(self.repr, Repr::Cached { .. })
    }

    /// φ̂(1) = E[φ(X)²].
    pub fn value_at_one(&self) -> f64 {
        self.value_at_one
    }

    /// φ̂(−1) = E[φ(X)φ(−X)].
    pub fn value_at_minus_one(&self) -> f64 {
        self.value_at_minus_one
    }

    /// The Hermite tail models, if this is a Hermite-backed dual.
    pub fn tail_models(&self) -> Option<[Option<TailModel>; 2]> {
        match &self.repr {
            Repr::Hermite(h) => Some(h.tails),
            _ => None,
        }
    }

    /// φ̂(t) for t ∈ [−1, 1]; arguments within 1e-12 outside are clamped.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t.abs() <= 1.0 + DOMAIN_TOLERANCE) {
            return Err(Error::Domain { value: t, domain: "[-1, 1]" });
        }
        Ok(self.eval_clamped(t.clamp(-1.0, 1.0)))
    }

    fn eval_clamped(&self, t: f64) -> f64 {
        if t == 1.0 {
            return self.value_at_one;
        }
        if t == -1.0 {
            return self.value_at_minus_one;
        }
        eval_repr(&self.repr, t)
    }

    /// Evaluate without the cache, for validation.
    pub fn eval_direct(&self, t: f64) -> Result<f64> {
        match &self.repr {
            Repr::Cached { inner, .. } => {
                if !(t.abs() <= 1.0 + DOMAIN_TOLERANCE) {
                    return Err(Error::Domain { value: t, domain: "[-1, 1]" });
                }
                let t = t.clamp(-1.0, 1.0);
                Ok(if t == 1.0 {
                    self.value_at_one
                } else if t == -1.0 {
                    self.value_at_minus_one
                } else {
                    eval_repr(inner, t)
                })
            }
            _ => self.eval(t),
        }
    }

    /// Wrap in a Chebyshev interpolant of the given degree, validated against
    /// direct evaluation at the midpoints between interpolation nodes.
    pub fn cached(&self, degree: usize, tolerance: f64) -> Result<DualActivation> {
        let base = match &self.repr {
            Repr::Cached { inner, .. } => (**inner).clone(),
            r => r.clone(),
        };
        let m = degree + 1;
        let pi = std::f64::consts::PI;
        let values: Vec<f64> = (0..m).map(|j| eval_repr(&base, (pi * (j as f64 + 0.5) / m as f64).cos())).collect();
        let coeffs: Vec<f64> = (0..m)
            .map(|k| {
                let terms: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (pi * k as f64 * (j as f64 + 0.5) / m as f64).cos())
                    .collect();
                pairwise_sum(&terms) * if k == 0 { 1.0 } else { 2.0 } / m as f64
            })
            .collect();
        let mut cache = ChebyshevCache { coeffs, max_error: 0.0 };
        let scale = self.value_at_one.abs().max(f64::MIN_POSITIVE);
        for j in 0..m.saturating_sub(1) {
            let t = (pi * (j as f64 + 1.0) / m as f64).cos();
            let err = (cache.eval(t) - eval_repr(&base, t)).abs();
            cache.max_error = cache.max_error.max(err);
        }
        if cache.max_error > tolerance * scale {
            return Err(Error::CacheInaccurate { max_error: cache.max_error / scale, tolerance });
        }
        Ok(DualActivation {
            repr: Repr::Cached { cache: Arc::new(cache), inner: Box::new(base) },
            ..self.clone()
        })
    }
}

fn eval_repr(repr: &Repr, t: f64) -> f64 {
    match repr {
        Repr::Hermite(h) => h.eval(t),
        Repr::Quadrature { act, rule } => quadrant_dual(act, t, rule),
        Repr::ClosedForm(cf) => cf.eval(t),
        Repr::Cached { cache, .. } => cache.eval(t),
    }
}

/// φ̂ from a Hermite series (no tail correction).
pub fn dual_from_hermite(series: &HermiteSeries) -> DualActivation {
    DualActivation::from_series(series)
}

/// x ↦ φ(a x).
pub fn rescale(act: &ActivationSpec, a: f64) -> Result<ActivationSpec> {
    act.rescale(a)
}

/// Number of coefficients compared by the derivative-rule check.
const DERIVATIVE_CHECK_TERMS: usize = 64;

/// Dual of the pseudo-derivative φ′, checked against the term-wise derivative
/// of φ̂'s power series: a_{n−1}(φ′)² = n a_n(φ)².
pub fn dual_derivative(act: &ActivationSpec, opts: &DualOptions) -> Result<DualActivation> {
    let deriv = act.pseudo_derivative()?;
    let rule = hermite::default_rule();
    let f = expand(act, DERIVATIVE_CHECK_TERMS, rule);
    let g = expand(&deriv, DERIVATIVE_CHECK_TERMS - 1, rule);
    let scale = g.coeffs.iter().fold(0.0f64, |m, a| m.max(a * a)).max(f64::MIN_POSITIVE);
    let mismatch = (1..=DERIVATIVE_CHECK_TERMS)
        .map(|n| (g.coeffs[n - 1].powi(2) - n as f64 * f.coeffs[n].powi(2)).abs() / scale)
        .fold(0.0f64, f64::max);
    if mismatch > 1e-8 {
        return Err(Error::DerivativeMismatch(mismatch));
    }
    DualActivation::new(&deriv, opts)
}
