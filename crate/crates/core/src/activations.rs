//! Piecewise-smooth activation functions with a single possible
//! non-smoothness at the origin.
//!
//! An [`ActivationSpec`] stores the two smooth branches φ₋ (x < 0) and φ₊
//! (x > 0), optionally the one-sided derivative values at 0 ("jet"), the
//! pseudo-derivative as another spec, and metadata. Derived activations
//! (rescaled, reflected, even/odd parts, sums) carry derived jets, so the
//! smoothness of φ_even and φ_odd is read off exactly rather than estimated.

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub type Branch = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// k ↦ (φ^(k)(0−), φ^(k)(0+)), `None` where the value is not known.
pub type Jet = Arc<dyn Fn(usize) -> Option<(f64, f64)> + Send + Sync>;

/// Standard SELU constants.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

/// Orders up to which registry jets are tabulated for the non-polynomial
/// smooth activations.
pub const JET_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Smoothness {
    Finite(u32),
    Infinite,
}

impl Smoothness {
    pub fn finite(self) -> Option<u32> {
        match self {
            Smoothness::Finite(s) => Some(s),
            Smoothness::Infinite => None,
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Finite(s) => write!(f, "{s}"),
            Smoothness::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Smoothness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Smoothness::Finite(k) => s.serialize_u32(*k),
            Smoothness::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Degree of a polynomial; `NegInfinity` is the zero polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PolyDegree {
    NegInfinity,
    Degree(u32),
}

impl PolyDegree {
    pub fn degree(self) -> Option<u32> {
        match self {
            PolyDegree::NegInfinity => None,
            PolyDegree::Degree(m) => Some(m),
        }
    }
}

impl fmt::Display for PolyDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyDegree::NegInfinity => f.write_str("-inf"),
            PolyDegree::Degree(m) => write!(f, "{m}"),
        }
    }
}

impl Serialize for PolyDegree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PolyDegree::Degree(m) => s.serialize_u32(*m),
            PolyDegree::NegInfinity => s.serialize_str("-inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Neither,
}

/// Smoothness classification of an activation and of its even/odd parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub name: String,
    pub smoothness: Smoothness,
    /// Δ_k = φ^(k)(0+) − φ^(k)(0−) for k = 0..=max_order.
    pub deltas: Vec<f64>,
    pub parity: Parity,
    pub even_smoothness: Smoothness,
    pub odd_smoothness: Smoothness,
    /// `Some` when the function is a polynomial.
    pub polynomial: Option<PolyDegree>,
    pub even_polynomial: Option<PolyDegree>,
    pub odd_polynomial: Option<PolyDegree>,
}

/// A piecewise activation φ with branches φ₋ on x < 0 and φ₊ on x > 0.
///
/// Both branches must be evaluable at 0, where they return their one-sided
/// limits. Cloning is cheap.
#[derive(Clone)]
pub struct ActivationSpec {
    name: String,
    neg: Branch,
    pos: Branch,
    jet: Option<Jet>,
    /// φ₋ and φ₊ are restrictions of one smooth function, so every Δ_k is 0.
    smooth: bool,
    declared_smoothness: Option<Smoothness>,
    /// Coefficients (ascending) of φ₋ and φ₊ when both are polynomials.
    branch_polys: Option<(Vec<f64>, Vec<f64>)>,
    declared_degree: Option<PolyDegree>,
    params: Vec<(String, f64)>,
    derivative: Option<Arc<ActivationSpec>>,
}

impl fmt::Debug for ActivationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActivationSpec")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("smooth", &self.smooth)
            .field("declared_smoothness", &self.declared_smoothness)
            .field("declared_degree", &self.declared_degree)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl ActivationSpec {
    /// An activation from two branch closures. Without a jet, one-sided
    /// derivatives are estimated numerically by `classify`.
    pub fn from_branches<N, P>(name: impl Into<String>, neg: N, pos: P) -> Self
    where
        N: Fn(f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ActivationSpec {
            name: name.into(),
            neg: Arc::new(neg),
            pos: Arc::new(pos),
            jet: None,
            smooth: false,
            declared_smoothness: None,
            branch_polys: None,
            declared_degree: None,
            params: Vec::new(),
            derivative: None,
        }
    }

    /// A function that is smooth on all of ℝ.
    pub fn smooth<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f: Branch = Arc::new(f);
        let mut spec = ActivationSpec::from_branches(name, |_| 0.0, |_| 0.0);
        spec.neg = f.clone();
        spec.pos = f;
        spec.smooth = true;
        spec.declared_smoothness = Some(Smoothness::Infinite);
        spec
    }

    /// Piecewise polynomial with branch coefficients in ascending order.
    pub fn piecewise_polynomial(name: impl Into<String>, neg: Vec<f64>, pos: Vec<f64>) -> Self {
        let (n2, p2) = (neg.clone(), pos.clone());
        let mut spec =
            ActivationSpec::from_branches(name, move |x| horner(&n2, x), move |x| horner(&p2, x));
        let (n3, p3) = (neg.clone(), pos.clone());
        spec.jet = Some(Arc::new(move |k| Some((poly_derivative_at_zero(&n3, k), poly_derivative_at_zero(&p3, k)))));
        spec.branch_polys = Some((neg, pos));
        spec
    }

    pub fn with_jet<J>(mut self, jet: J) -> Self
    where
        J: Fn(usize) -> Option<(f64, f64)> + Send + Sync + 'static,
    {
        self.jet = Some(Arc::new(jet));
        self
    }

    /// Jet of a smooth function from its Taylor derivatives f^(k)(0).
    pub fn with_taylor(self, derivs: Vec<f64>) -> Self {
        self.with_jet(move |k| derivs.get(k).map(|&v| (v, v)))
    }

    pub fn with_derivative(mut self, derivative: ActivationSpec) -> Self {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.push((name.to_string(), value));
        self
    }

    pub fn with_declared_smoothness(mut self, s: Smoothness) -> Self {
        self.declared_smoothness = Some(s);
        self
    }

    pub fn with_polynomial_degree(mut self, degree: PolyDegree) -> Self {
        self.declared_degree = Some(degree);
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn declared_smoothness(&self) -> Option<Smoothness> {
        self.declared_smoothness
    }

    /// φ(x); at 0 the midpoint of the one-sided limits.
    pub fn evaluate(&self, x: f64) -> f64 {
        if x > 0.0 {
            (self.pos)(x)
        } else if x < 0.0 {
            (self.neg)(x)
        } else {
            0.5 * ((self.pos)(0.0) + (self.neg)(0.0))
        }
    }

    /// φ(x) with the left-continuous convention φ(0) := φ(0−).
    pub fn evaluate_left(&self, x: f64) -> f64 {
        if x > 0.0 {
            (self.pos)(x)
        } else {
            (self.neg)(x)
        }
    }

    /// φ₋, evaluable on x ≤ 0.
    pub fn neg_branch(&self) -> &Branch {
        &self.neg
    }

    /// φ₊, evaluable on x ≥ 0.
    pub fn pos_branch(&self) -> &Branch {
        &self.pos
    }

    /// Analytic (φ^(k)(0−), φ^(k)(0+)) if known.
    pub fn one_sided(&self, k: usize) -> Option<(f64, f64)> {
        self.jet.as_ref().and_then(|j| j(k))
    }

    /// Analytic Δ_k(φ), if known.
    pub fn jump(&self, k: usize) -> Option<f64> {
        if self.smooth {
            return Some(0.0);
        }
        self.one_sided(k).map(|(l, r)| r - l)
    }

    /// True when φ is discontinuous at 0, judged from the jet or the branch
    /// limits.
    pub fn is_discontinuous(&self) -> bool {
        let jump = self.jump(0).unwrap_or_else(|| (self.pos)(0.0) - (self.neg)(0.0));
        jump.abs() > 1e-12 * (1.0 + (self.pos)(0.0).abs() + (self.neg)(0.0).abs())
    }

    /// The pseudo-derivative φ′ as an activation.
    pub fn pseudo_derivative(&self) -> Result<ActivationSpec> {
        if self.is_discontinuous() {
            return Err(Error::NotPseudoDifferentiable(self.name.clone()));
        }
        self.derivative
            .as_deref()
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("no derivative available for `{}`", self.name)))
    }

    /// x ↦ φ(a x) for a > 0.
    pub fn rescale(&self, a: f64) -> Result<ActivationSpec> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("rescale factor {a} must be positive")));
        }
        Ok(self.rescaled_unchecked(a))
    }

    fn rescaled_unchecked(&self, a: f64) -> ActivationSpec {
        let (neg, pos) = (self.neg.clone(), self.pos.clone());
        let jet = self.jet.clone().map(|j| -> Jet {
            Arc::new(move |k| j(k).map(|(l, r)| {
                let f = a.powi(k as i32);
                (f * l, f * r)
            }))
        });
        ActivationSpec {
            name: format!("{}(*{a})", self.name),
            neg: Arc::new(move |x| neg(a * x)),
            pos: Arc::new(move |x| pos(a * x)),
            jet,
            smooth: self.smooth,
            declared_smoothness: self.declared_smoothness,
            branch_polys: self.branch_polys.as_ref().map(|(n, p)| (poly_rescale(n, a), poly_rescale(p, a))),
            declared_degree: self.declared_degree,
            params: self.params.clone(),
            derivative: self
                .derivative
                .as_ref()
                .map(|d| Arc::new(d.rescaled_unchecked(a).scaled(a))),
        }
    }

    /// x ↦ λ φ(x).
    pub fn scaled(&self, lambda: f64) -> ActivationSpec {
        let (neg, pos) = (self.neg.clone(), self.pos.clone());
        let jet = self.jet.clone().map(|j| -> Jet {
            Arc::new(move |k| j(k).map(|(l, r)| (lambda * l, lambda * r)))
        });
        let zero = lambda == 0.0;
        ActivationSpec {
            name: format!("{lambda}*{}", self.name),
            neg: Arc::new(move |x| lambda * neg(x)),
            pos: Arc::new(move |x| lambda * pos(x)),
            jet,
            smooth: self.smooth || zero,
            declared_smoothness: if zero { Some(Smoothness::Infinite) } else { self.declared_smoothness },
            branch_polys: self
                .branch_polys
                .as_ref()
                .map(|(n, p)| (n.iter().map(|c| lambda * c).collect(), p.iter().map(|c| lambda * c).collect())),
            declared_degree: if zero { Some(PolyDegree::NegInfinity) } else { self.declared_degree },
            params: self.params.clone(),
            derivative: self.derivative.as_ref().map(|d| Arc::new(d.scaled(lambda))),
        }
    }

    /// x ↦ φ(−x).
    pub fn reflected(&self) -> ActivationSpec {
        let (neg, pos) = (self.neg.clone(), self.pos.clone());
        let jet = self.jet.clone().map(|j| -> Jet {
            Arc::new(move |k| {
                j(k).map(|(l, r)| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    (sign * r, sign * l)
                })
            })
        });
        ActivationSpec {
            name: format!("{}(-x)", self.name),
            neg: Arc::new(move |x| pos(-x)),
            pos: Arc::new(move |x| neg(-x)),
            jet,
            smooth: self.smooth,
            declared_smoothness: self.declared_smoothness,
            branch_polys: self
                .branch_polys
                .as_ref()
                .map(|(n, p)| (poly_rescale(p, -1.0), poly_rescale(n, -1.0))),
            declared_degree: self.declared_degree,
            params: self.params.clone(),
            derivative: self.derivative.as_ref().map(|d| Arc::new(d.reflected().scaled(-1.0))),
        }
    }

    /// x ↦ φ(x) + ψ(x).
    pub fn plus(&self, other: &ActivationSpec) -> ActivationSpec {
        let (n1, p1, n2, p2) = (self.neg.clone(), self.pos.clone(), other.neg.clone(), other.pos.clone());
        let jet = match (&self.jet, &other.jet) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.clone(), b.clone());
                let j: Jet = Arc::new(move |k| match (a(k), b(k)) {
                    (Some((l1, r1)), Some((l2, r2))) => Some((l1 + l2, r1 + r2)),
                    _ => None,
                });
                Some(j)
            }
            _ => None,
        };
        let branch_polys = match (&self.branch_polys, &other.branch_polys) {
            (Some((na, pa)), Some((nb, pb))) => Some((poly_add(na, nb), poly_add(pa, pb))),
            _ => None,
        };
        let derivative = match (&self.derivative, &other.derivative) {
            (Some(a), Some(b)) => Some(Arc::new(a.plus(b))),
            _ => None,
        };
        ActivationSpec {
            name: format!("{}+{}", self.name, other.name),
            neg: Arc::new(move |x| n1(x) + n2(x)),
            pos: Arc::new(move |x| p1(x) + p2(x)),
            jet,
            smooth: self.smooth && other.smooth,
            declared_smoothness: None,
            branch_polys,
            declared_degree: None,
            params: self.params.clone(),
            derivative,
        }
    }

    /// (φ(x) + φ(−x))/2.
    pub fn even_part(&self) -> ActivationSpec {
        self.plus(&self.reflected()).scaled(0.5).renamed(format!("{}_even", self.name))
    }

    /// (φ(x) − φ(−x))/2.
    pub fn odd_part(&self) -> ActivationSpec {
        self.plus(&self.reflected().scaled(-1.0)).scaled(0.5).renamed(format!("{}_odd", self.name))
    }

    /// `Some(degree)` if φ is a polynomial on all of ℝ.
    pub fn polynomial_degree(&self) -> Option<PolyDegree> {
        if let Some(d) = self.declared_degree {
            return Some(d);
        }
        if let Some((n, p)) = &self.branch_polys {
            let scale = n.iter().chain(p).fold(0.0f64, |m, c| m.max(c.abs()));
            let len = n.len().max(p.len());
            let mut degree = PolyDegree::NegInfinity;
            for k in 0..len {
                let a = n.get(k).copied().unwrap_or(0.0);
                let b = p.get(k).copied().unwrap_or(0.0);
                if (a - b).abs() > 1e-13 * scale.max(f64::MIN_POSITIVE) {
                    return None;
                }
                if a.abs() > 1e-13 * scale {
                    degree = PolyDegree::Degree(k as u32);
                }
            }
            return Some(degree);
        }
        detect_polynomial(&|x| self.evaluate(x))
    }
}

/// Even/odd decomposition φ = φ_even + φ_odd.
pub fn even_odd_parts(act: &ActivationSpec) -> (ActivationSpec, ActivationSpec) {
    (act.even_part(), act.odd_part())
}

/// φ(x) with the midpoint convention at 0.
pub fn evaluate(act: &ActivationSpec, x: f64) -> f64 {
    act.evaluate(x)
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn poly_derivative_at_zero(c: &[f64], k: usize) -> f64 {
    c.get(k).map_or(0.0, |&ck| ck * factorial(k))
}

fn poly_rescale(c: &[f64], a: f64) -> Vec<f64> {
    c.iter().enumerate().map(|(k, ck)| ck * a.powi(k as i32)).collect()
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|k| a.get(k).copied().unwrap_or(0.0) + b.get(k).copied().unwrap_or(0.0))
        .collect()
}

fn poly_differentiate(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect()
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Numerical polynomial test through Chebyshev coefficients on [-10, 10]:
/// a polynomial of degree ≤ 16 leaves every higher coefficient at rounding
/// level, while any kink or non-polynomial smooth function does not.
fn detect_polynomial(f: &dyn Fn(f64) -> f64) -> Option<PolyDegree> {
    const N: usize = 128;
    const HALF_WIDTH: f64 = 10.0;
    const MAX_DEGREE: usize = 16;
    let values: Vec<f64> = (0..N)
        .map(|j| {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / N as f64;
            f(HALF_WIDTH * theta.cos())
        })
        .collect();
    let coeffs: Vec<f64> = (0..N)
        .map(|k| {
            let s: f64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / N as f64).cos())
                .sum();
            s * if k == 0 { 1.0 } else { 2.0 } / N as f64
        })
        .collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return None;
    }
    if scale <= 1e-300 {
        return Some(PolyDegree::NegInfinity);
    }
    let tol = 1e-11 * scale;
    if coeffs[MAX_DEGREE + 1..].iter().any(|c| c.abs() > tol) {
        return None;
    }
    let top = coeffs[..=MAX_DEGREE].iter().rposition(|c| c.abs() > tol);
    Some(top.map_or(PolyDegree::NegInfinity, |k| PolyDegree::Degree(k as u32)))
}

/// Sup of |φ| on a reference grid, used as the scale of tolerance tests.
fn magnitude(act: &ActivationSpec) -> f64 {
    parity_grid().fold(0.0f64, |m, x| m.max(act.evaluate(x).abs()).max(act.evaluate(-x).abs()))
}

fn parity_grid() -> impl Iterator<Item = f64> {
    (1..=160).map(|i| i as f64 * 0.05)
}

/// Parity of φ from φ(x) ± φ(−x) on a grid of |x| ≤ 8.
pub fn parity_of(act: &ActivationSpec) -> Parity {
    let scale = magnitude(act).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * (1.0 + scale);
    let even = parity_grid().all(|x| (act.evaluate(x) - act.evaluate(-x)).abs() <= tol);
    let odd = parity_grid().all(|x| (act.evaluate(x) + act.evaluate(-x)).abs() <= tol)
        && act.evaluate(0.0).abs() <= tol;
    match (even, odd) {
        (true, _) => Parity::Even,
        (false, true) => Parity::Odd,
        _ => Parity::Neither,
    }
}

/// Richardson-extrapolated one-sided k-th derivative of `branch` at 0 from
/// one-sided differences on the step ladder 1e-2 … 1e-5; returns the
/// estimate and an error indicator.
fn one_sided_derivative(branch: &Branch, k: usize, side: f64) -> (f64, f64) {
    let steps = [1e-2, 1e-3, 1e-4, 1e-5];
    let raw: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let mut acc = 0.0;
            let mut binom = 1.0;
            for j in 0..=k {
                let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                acc += sign * binom * branch(side * j as f64 * h);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
            // forward difference in the direction `side`
            acc / (side * h).powi(k as i32)
        })
        .collect();
    // Neville table for error O(h), O(h²), ... with step ratio 10
    let mut table = vec![raw.clone()];
    for level in 1..steps.len() {
        let prev = &table[level - 1];
        let factor = 10f64.powi(level as i32);
        let next: Vec<f64> = (0..prev.len() - 1)
            .map(|i| (factor * prev[i + 1] - prev[i]) / (factor - 1.0))
            .collect();
        table.push(next);
    }
    let mut best = (raw[0], f64::INFINITY);
    for level in 1..table.len() {
        for i in 0..table[level].len() {
            let err = (table[level][i] - table[level - 1][i + 1])
                .abs()
                .max((table[level][i] - table[level - 1][i]).abs());
            if err < best.1 {
                best = (table[level][i], err);
            }
        }
    }
    best
}

/// Classify the smoothness of φ, φ_even and φ_odd.
pub fn classify(act: &ActivationSpec, max_order: usize) -> Result<SmoothnessReport> {
    let (smoothness, deltas) = smoothness_with_deltas(act, max_order)?;
    let (even, odd) = even_odd_parts(act);
    let (even_s, _) = smoothness_with_deltas(&even, max_order)?;
    let (odd_s, _) = smoothness_with_deltas(&odd, max_order)?;
    Ok(SmoothnessReport {
        name: act.name.clone(),
        smoothness,
        deltas,
        parity: parity_of(act),
        even_smoothness: even_s,
        odd_smoothness: odd_s,
        polynomial: act.polynomial_degree(),
        even_polynomial: even.polynomial_degree(),
        odd_polynomial: odd.polynomial_degree(),
    })
}

/// Smoothness of φ alone (no even/odd analysis).
pub fn smoothness(act: &ActivationSpec, max_order: usize) -> Result<Smoothness> {
    smoothness_with_deltas(act, max_order).map(|(s, _)| s)
}

fn smoothness_with_deltas(act: &ActivationSpec, max_order: usize) -> Result<(Smoothness, Vec<f64>)> {
    let mut deltas = Vec::with_capacity(max_order + 1);
    let mut first = None;
    for k in 0..=max_order {
        let (delta, nonzero) = if act.smooth {
            (0.0, false)
        } else if let Some((l, r)) = act.one_sided(k) {
            let d = r - l;
            (d, d.abs() > 1e-12 * (1.0 + l.abs().max(r.abs())))
        } else {
            let (r, er) = one_sided_derivative(&act.pos, k, 1.0);
            let (l, el) = one_sided_derivative(&act.neg, k, -1.0);
            let d = r - l;
            let noise = er + el;
            let tol = 1e-4 * (1.0 + l.abs().max(r.abs()));
            if d.abs() > tol && d.abs() > 10.0 * noise {
                (d, true)
            } else if d.abs() <= tol && noise <= tol {
                (d, false)
            } else {
                return Err(Error::AmbiguousSmoothness { order: k, delta: d, noise });
            }
        };
        deltas.push(delta);
        if nonzero && first.is_none() {
            first = Some(k as u32);
        }
    }
    let s = match first {
        Some(k) => Smoothness::Finite(k),
        None => match act.declared_smoothness {
            Some(Smoothness::Finite(s)) if s as usize > max_order => Smoothness::Finite(s),
            _ => Smoothness::Infinite,
        },
    };
    Ok((s, deltas))
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Names accepted by [`from_name`]; `repu:m`, `sk:k` and `poly:c0,c1,...`
/// take an inline argument.
pub const REGISTRY: &[&str] = &[
    "relu", "leakyrelu", "selu", "elu", "celu", "repu:m", "heaviside", "tanh", "sigmoid", "gelu",
    "silu", "rbf", "softplus", "sin", "identity", "sk:k", "poly:c0,c1,...",
];

fn sigmoid_fn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn relu() -> ActivationSpec {
    leaky_relu(0.0).renamed("relu")
}

/// Slope `eps` on the negative half-line: φ(x) = εx for x < 0, x for x ≥ 0.
pub fn leaky_relu(eps: f64) -> ActivationSpec {
    let step = ActivationSpec::piecewise_polynomial("leakyrelu'", vec![eps], vec![1.0]);
    ActivationSpec::piecewise_polynomial("leakyrelu", vec![0.0, eps], vec![0.0, 1.0])
        .with_param("eps", eps)
        .with_declared_smoothness(if eps == 1.0 { Smoothness::Infinite } else { Smoothness::Finite(1) })
        .with_derivative(step)
}

/// Exponential-linear family λ·(α(e^{x/β} − 1)) on x < 0 and λx on x ≥ 0.
/// ELU is (λ, α, β) = (1, α, 1), CELU is (1, α, α), SELU is (λ, α, 1).
fn exp_linear(name: &str, lambda: f64, alpha: f64, beta: f64) -> ActivationSpec {
    let deriv = ActivationSpec::from_branches(
        format!("{name}'"),
        move |x: f64| lambda * alpha / beta * (x / beta).exp(),
        move |_| lambda,
    )
    .with_jet(move |k| {
        let left = lambda * alpha * beta.powi(-(k as i32) - 1);
        Some((left, if k == 0 { lambda } else { 0.0 }))
    });
    ActivationSpec::from_branches(
        name,
        move |x: f64| lambda * alpha * (x / beta).exp_m1(),
        move |x| lambda * x,
    )
    .with_jet(move |k| {
        let left = if k == 0 { 0.0 } else { lambda * alpha * beta.powi(-(k as i32)) };
        let right = if k == 1 { lambda } else { 0.0 };
        Some((left, right))
    })
    .with_derivative(deriv)
}

pub fn selu() -> ActivationSpec {
    exp_linear("selu", SELU_LAMBDA, SELU_ALPHA, 1.0)
        .with_param("lambda", SELU_LAMBDA)
        .with_param("alpha", SELU_ALPHA)
        .with_declared_smoothness(Smoothness::Finite(1))
}

pub fn elu(alpha: f64) -> ActivationSpec {
    let s = if alpha == 1.0 { 2 } else { 1 };
    exp_linear("elu", 1.0, alpha, 1.0)
        .with_param("alpha", alpha)
        .with_declared_smoothness(Smoothness::Finite(s))
}

pub fn celu(alpha: f64) -> ActivationSpec {
    exp_linear("celu", 1.0, alpha, alpha)
        .with_param("alpha", alpha)
        .with_declared_smoothness(Smoothness::Finite(2))
}

/// max(0, x)^m.
pub fn repu(m: u32) -> ActivationSpec {
    let mut pos = vec![0.0; m as usize + 1];
    pos[m as usize] = 1.0;
    let mut spec = ActivationSpec::piecewise_polynomial(format!("repu:{m}"), vec![0.0], pos.clone())
        .with_param("m", m as f64)
        .with_declared_smoothness(Smoothness::Finite(m));
    if m >= 1 {
        spec = spec.with_derivative(repu(m - 1).scaled(m as f64).renamed(format!("repu:{m}'")));
    }
    spec
}

/// ½𝟙_{0} + 𝟙_{(0,∞)}.
pub fn heaviside() -> ActivationSpec {
    ActivationSpec::piecewise_polynomial("heaviside", vec![0.0], vec![1.0])
        .with_declared_smoothness(Smoothness::Finite(0))
}

/// Reference activation s_k(x) = sgn(x) x^k / (2·k!), with Δ_j(s_k) = δ_jk.
pub fn reference_activation(k: u32) -> ActivationSpec {
    let c = 0.5 / factorial(k as usize);
    let mut pos = vec![0.0; k as usize + 1];
    pos[k as usize] = c;
    let neg: Vec<f64> = pos.iter().map(|v| -v).collect();
    let mut spec = ActivationSpec::piecewise_polynomial(format!("sk:{k}"), neg, pos)
        .with_param("k", k as f64)
        .with_declared_smoothness(Smoothness::Finite(k));
    if k >= 1 {
        spec = spec.with_derivative(reference_activation(k - 1));
    }
    spec
}

/// Σ c_i x^i.
pub fn polynomial(coeffs: Vec<f64>) -> ActivationSpec {
    let name = format!(
        "poly:{}",
        coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    );
    let mut spec = ActivationSpec::piecewise_polynomial(name.clone(), coeffs.clone(), coeffs.clone())
        .with_declared_smoothness(Smoothness::Infinite);
    spec.smooth = true;
    let d = poly_differentiate(&coeffs);
    let mut deriv = ActivationSpec::piecewise_polynomial(format!("{name}'"), d.clone(), d.clone());
    deriv.smooth = true;
    let dd = poly_differentiate(&d);
    let mut second = ActivationSpec::piecewise_polynomial(format!("{name}''"), dd.clone(), dd);
    second.smooth = true;
    spec.with_derivative(deriv.with_derivative(second))
}

pub fn identity() -> ActivationSpec {
    polynomial(vec![0.0, 1.0]).renamed("identity")
}

pub fn tanh() -> ActivationSpec {
    let sech2 = ActivationSpec::smooth("tanh'", |x: f64| 1.0 - x.tanh().powi(2))
        .with_taylor(vec![1.0, 0.0, -2.0, 0.0, 16.0, 0.0, -272.0]);
    ActivationSpec::smooth("tanh", f64::tanh)
        .with_taylor(vec![0.0, 1.0, 0.0, -2.0, 0.0, 16.0, 0.0])
        .with_derivative(sech2)
}

pub fn sigmoid() -> ActivationSpec {
    let d = ActivationSpec::smooth("sigmoid'", |x| {
        let s = sigmoid_fn(x);
        s * (1.0 - s)
    })
    .with_taylor(vec![0.25, 0.0, -0.125, 0.0, 0.25, 0.0, -17.0 / 16.0]);
    ActivationSpec::smooth("sigmoid", sigmoid_fn)
        .with_taylor(vec![0.5, 0.25, 0.0, -0.125, 0.0, 0.25, 0.0])
        .with_derivative(d)
}

pub fn gelu() -> ActivationSpec {
    let r = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let d = ActivationSpec::smooth("gelu'", |x| normal_cdf(x) + x * normal_pdf(x))
        .with_taylor(vec![0.5, 2.0 * r, 0.0, -4.0 * r, 0.0, 18.0 * r, 0.0]);
    ActivationSpec::smooth("gelu", |x| x * normal_cdf(x))
        .with_taylor(vec![0.0, 0.5, 2.0 * r, 0.0, -4.0 * r, 0.0, 18.0 * r])
        .with_derivative(d)
}

pub fn silu() -> ActivationSpec {
    let d = ActivationSpec::smooth("silu'", |x| {
        let s = sigmoid_fn(x);
        s * (1.0 + x * (1.0 - s))
    })
    .with_taylor(vec![0.5, 0.5, 0.0, -0.5, 0.0, 1.5, 0.0]);
    ActivationSpec::smooth("silu", |x| x * sigmoid_fn(x))
        .with_taylor(vec![0.0, 0.5, 0.5, 0.0, -0.5, 0.0, 1.5])
        .with_derivative(d)
}

/// exp(−x²).
pub fn rbf() -> ActivationSpec {
    let d = ActivationSpec::smooth("rbf'", |x: f64| -2.0 * x * (-x * x).exp())
        .with_taylor(vec![0.0, -2.0, 0.0, 12.0, 0.0, -120.0, 0.0]);
    ActivationSpec::smooth("rbf", |x: f64| (-x * x).exp())
        .with_taylor(vec![1.0, 0.0, -2.0, 0.0, 12.0, 0.0, -120.0])
        .with_derivative(d)
}

pub fn softplus() -> ActivationSpec {
    let d = ActivationSpec::smooth("softplus'", sigmoid_fn)
        .with_taylor(vec![0.5, 0.25, 0.0, -0.125, 0.0, 0.25, 0.0]);
    ActivationSpec::smooth("softplus", |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p())
        .with_taylor(vec![std::f64::consts::LN_2, 0.5, 0.25, 0.0, -0.125, 0.0, 0.25])
        .with_derivative(d)
}

pub fn sin() -> ActivationSpec {
    let d = ActivationSpec::smooth("sin'", f64::cos).with_taylor(vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0]);
    ActivationSpec::smooth("sin", f64::sin)
        .with_taylor(vec![0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0])
        .with_derivative(d)
}

fn take_param(params: &[(String, f64)], allowed: &[(&str, f64)], act: &str) -> Result<Vec<f64>> {
    for (k, _) in params {
        if !allowed.iter().any(|(a, _)| a == k) {
            return Err(Error::InvalidParameter(format!("`{act}` has no parameter `{k}`")));
        }
    }
    Ok(allowed
        .iter()
        .map(|(name, default)| {
            params.iter().rev().find(|(k, _)| k == name).map_or(*default, |(_, v)| *v)
        })
        .collect())
}

/// Look up a registry activation by its lowercase identifier.
pub fn from_name(name: &str, params: &[(String, f64)]) -> Result<ActivationSpec> {
    let unknown = || Error::UnknownActivation { name: name.to_string(), known: REGISTRY.join(", ") };
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let no_params = |spec: ActivationSpec| -> Result<ActivationSpec> {
        take_param(params, &[], name)?;
        Ok(spec)
    };
    let parse_int = |a: Option<&str>| -> Result<u32> {
        a.ok_or_else(|| Error::InvalidParameter(format!("`{head}` needs an integer argument, e.g. {head}:2")))?
            .trim()
            .parse::<u32>()
            .map_err(|e| Error::InvalidParameter(format!("bad integer in `{name}`: {e}")))
    };
    match (head, arg) {
        ("relu", None) => no_params(relu()),
        ("leakyrelu", None) => {
            let p = take_param(params, &[("eps", 0.01)], name)?;
            Ok(leaky_relu(p[0]))
        }
        ("selu", None) => no_params(selu()),
        ("elu", None) => {
            let p = take_param(params, &[("alpha", 1.0)], name)?;
            Ok(elu(p[0]))
        }
        ("celu", None) => {
            let p = take_param(params, &[("alpha", 1.0)], name)?;
            if !(p[0] > 0.0) {
                return Err(Error::InvalidParameter("celu needs alpha > 0".into()));
            }
            Ok(celu(p[0]))
        }
        ("heaviside", None) => no_params(heaviside()),
        ("tanh", None) => no_params(tanh()),
        ("sigmoid", None) => no_params(sigmoid()),
        ("gelu", None) => no_params(gelu()),
        ("silu", None) => no_params(silu()),
        ("rbf", None) => no_params(rbf()),
        ("softplus", None) => no_params(softplus()),
        ("sin", None) => no_params(sin()),
        ("identity", None) => no_params(identity()),
        ("repu", a) => no_params(repu(parse_int(a)?)),
        ("sk", a) => no_params(reference_activation(parse_int(a)?)),
        ("poly", Some(a)) => {
            let coeffs = a
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("bad coefficient in `{name}`: {e}")))?;
            if coeffs.iter().all(|c| *c == 0.0) {
                return Err(Error::InvalidParameter("the zero function is not an activation".into()));
            }
            no_params(polynomial(coeffs))
        }
        _ => Err(unknown()),
    }
}
