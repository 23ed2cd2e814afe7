//! Normalized probabilist's Hermite polynomials and Hermite expansions of
//! activations in L₂(𝒩(0,1)).

use serde::Serialize;

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, pairwise_sum};

/// Default number of Hermite coefficients.
pub const DEFAULT_N_COEFFS: usize = 512;
/// Default Gauss–Legendre nodes per half-line.
pub const DEFAULT_HALF_NODES: usize = 2000;
/// Half-lines are truncated at this many standard deviations.
pub const DEFAULT_CUTOFF: f64 = 12.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// h_n(x), orthonormal under the standard Gaussian.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[n] = h_n(x)` for n < out.len().
pub fn hermite_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
    }
}

/// Quadrature for E[f(X)], X ~ 𝒩(0,1), split at 0 so that a kink or jump at
/// the origin never sits inside a panel. Each half-line [0, c] carries a
/// Gauss–Legendre rule; nodes are stored negative half first.
#[derive(Debug, Clone)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn split(half_nodes: usize, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff} must be positive")));
        }
        let gl = gauss_legendre(half_nodes)?.mapped(0.0, cutoff);
        let mut nodes = Vec::with_capacity(2 * half_nodes);
        let mut weights = Vec::with_capacity(2 * half_nodes);
        for (x, w) in gl.nodes.iter().zip(&gl.weights).rev() {
            nodes.push(-x);
            weights.push(w * INV_SQRT_2PI * (-0.5 * x * x).exp());
        }
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            nodes.push(*x);
            weights.push(w * INV_SQRT_2PI * (-0.5 * x * x).exp());
        }
        Ok(GaussHermiteRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// E[f(X)].
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

/// Shared instance of the default split rule.
pub fn default_rule() -> &'static GaussHermiteRule {
    static RULE: std::sync::OnceLock<GaussHermiteRule> = std::sync::OnceLock::new();
    RULE.get_or_init(GaussHermiteRule::default)
}

impl Default for GaussHermiteRule {
    fn default() -> Self {
        GaussHermiteRule::split(DEFAULT_HALF_NODES, DEFAULT_CUTOFF).expect("default rule is valid")
    }
}

/// Coefficients a_0..a_N of a function in the basis h_n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteSeries {
    pub coeffs: Vec<f64>,
    pub source: String,
}

impl HermiteSeries {
    pub fn new(coeffs: Vec<f64>, source: impl Into<String>) -> Self {
        HermiteSeries { coeffs, source: source.into() }
    }

    /// Truncation index N.
    pub fn truncation(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Σ a_n².
    pub fn energy(&self) -> f64 {
        let sq: Vec<f64> = self.coeffs.iter().map(|a| a * a).collect();
        pairwise_sum(&sq)
    }

    /// max(|a_{N−1}|, |a_N|) / ‖a‖; the last two are used so that a
    /// parity-forced zero in the final slot does not mask a slow tail.
    pub fn tail_ratio(&self) -> f64 {
        let n = self.coeffs.len();
        let norm = self.energy().sqrt();
        if n == 0 || norm == 0.0 {
            return 0.0;
        }
        let last = self.coeffs[n.saturating_sub(2)..].iter().fold(0.0f64, |m, a| m.max(a.abs()));
        last / norm
    }

    /// The series has not converged at its truncation: |a_N| > 1e-6·‖a‖.
    pub fn truncation_warning(&self) -> bool {
        self.tail_ratio() > 1e-6
    }

    /// Zero out the coefficients of the other parity.
    pub fn parity_part(&self, odd: bool) -> HermiteSeries {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, a)| if (n % 2 == 1) == odd { *a } else { 0.0 })
            .collect();
        HermiteSeries::new(coeffs, format!("{}_{}", self.source, if odd { "odd" } else { "even" }))
    }
}

/// a_n = E[φ(X) h_n(X)] for n = 0..=n_max by split quadrature.
pub fn expand(act: &ActivationSpec, n_max: usize, rule: &GaussHermiteRule) -> HermiteSeries {
    let mut h = vec![0.0; n_max + 1];
    let mut terms = vec![Vec::with_capacity(rule.len()); n_max + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fx = w * act.evaluate(x);
        hermite_all(x, &mut h);
        for (t, hn) in terms.iter_mut().zip(&h) {
            t.push(fx * hn);
        }
    }
    let coeffs = terms.iter().map(|t| pairwise_sum(t)).collect();
    HermiteSeries::new(coeffs, act.name())
}

/// E[φ(X)²] by split quadrature.
pub fn second_moment(act: &ActivationSpec, rule: &GaussHermiteRule) -> f64 {
    rule.expect(|x| act.evaluate(x).powi(2))
}

/// ln(n!!) with the convention n!! = 1 for n ≤ 0.
pub fn ln_double_factorial(n: i64) -> f64 {
    if n <= 0 {
        return 0.0;
    }
    let m = n as f64;
    if n % 2 == 0 {
        // (2k)!! = 2^k k!
        0.5 * m * std::f64::consts::LN_2 + libm::lgamma(0.5 * m + 1.0)
    } else {
        // (2k-1)!! = 2^k Γ(k + 1/2) / √π
        let k = 0.5 * (m + 1.0);
        k * std::f64::consts::LN_2 + libm::lgamma(k + 0.5) - 0.5 * std::f64::consts::PI.ln()
    }
}

/// n!! with n!! = 1 for n ≤ 0.
pub fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        return 1.0;
    }
    (n as f64) * double_factorial(n - 2)
}

/// Exact a_n(s_k) for n = 0..=n_max.
pub fn s_k_coefficients(k: usize, n_max: usize) -> HermiteSeries {
    let coeffs = (0..=n_max)
        .map(|n| {
            let diff = n as i64 - k as i64;
            if diff.rem_euclid(2) == 0 {
                return 0.0;
            }
            let sign = if ((diff.max(1) - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let ln_mag = ln_double_factorial(diff - 2)
                - ln_double_factorial(-diff)
                - 0.5 * ((2.0 * std::f64::consts::PI).ln() + libm::lgamma(n as f64 + 1.0));
            sign * ln_mag.exp()
        })
        .collect();
    HermiteSeries::new(coeffs, format!("sk:{k}"))
}

/// Given the series of a pseudo-derivative g of f, returns a_n(f) = a_{n−1}(g)/√n
/// for n ≥ 1. The a_0 slot depends on f(0) and is set to 0 for the caller to fill.
pub fn shift_by_pseudo_derivative(g: &HermiteSeries) -> HermiteSeries {
    let mut coeffs = Vec::with_capacity(g.coeffs.len() + 1);
    coeffs.push(0.0);
    for (n, a) in g.coeffs.iter().enumerate() {
        coeffs.push(a / ((n + 1) as f64).sqrt());
    }
    HermiteSeries::new(coeffs, format!("int({})", g.source))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{self, polynomial, reference_activation, relu};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn small_rule() -> GaussHermiteRule {
        GaussHermiteRule::split(400, 12.0).unwrap()
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert_eq!(hermite_eval(1, 2.0), 2.0);
        assert_abs_diff_eq!(hermite_eval(2, 0.0), -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        // He_3 = x³ − 3x, normalized by √6
        assert_abs_diff_eq!(hermite_eval(3, 1.5), (1.5f64.powi(3) - 4.5) / 6f64.sqrt(), epsilon = 1e-14);
        let mut all = vec![0.0; 10];
        hermite_all(0.7, &mut all);
        for (n, v) in all.iter().enumerate() {
            assert_abs_diff_eq!(*v, hermite_eval(n, 0.7), epsilon = 1e-14);
        }
    }

    fn assert_gram_identity(rule: &GaussHermiteRule, n: usize) {
        for i in 0..=n {
            for j in 0..=n {
                let g = rule.expect(|x| hermite_eval(i, x) * hermite_eval(j, x));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rule_weights_and_orthonormality() {
        let rule = small_rule();
        assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // beyond degree ~16 the Gaussian tail past 12σ of h_i h_j exceeds 1e-10
        assert_gram_identity(&rule, 16);
        assert_gram_identity(&GaussHermiteRule::split(400, 16.0).unwrap(), 20);
    }

    #[test]
    fn expand_examples() {
        let rule = small_rule();
        let lin = expand(&activations::identity(), 6, &rule);
        for (n, a) in lin.coeffs.iter().enumerate() {
            assert_abs_diff_eq!(*a, if n == 1 { 1.0 } else { 0.0 }, epsilon = 1e-13);
        }
        let sq = expand(&polynomial(vec![0.0, 0.0, 1.0]), 6, &rule);
        let expect = [1.0, 0.0, 2f64.sqrt(), 0.0, 0.0, 0.0, 0.0];
        for (a, e) in sq.coeffs.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-13);
        }
        let r = expand(&relu(), 4, &rule);
        assert_abs_diff_eq!(r.coeffs[0], INV_SQRT_2PI, epsilon = 1e-14);
        assert_abs_diff_eq!(r.coeffs[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial(-3), 1.0);
        assert_eq!(double_factorial(0), 1.0);
        assert_eq!(double_factorial(7), 105.0);
        assert_eq!(double_factorial(8), 384.0);
        for n in -3..30 {
            assert_relative_eq!(ln_double_factorial(n).exp(), double_factorial(n), max_relative = 1e-12);
        }
    }

    #[test]
    fn s_k_closed_form_examples() {
        let s1 = s_k_coefficients(1, 10);
        assert_abs_diff_eq!(s1.coeffs[0], INV_SQRT_2PI, epsilon = 1e-15);
        let s0 = s_k_coefficients(0, 10);
        assert_abs_diff_eq!(s0.coeffs[1], INV_SQRT_2PI, epsilon = 1e-15);
        for k in 0..5 {
            let s = s_k_coefficients(k, 40);
            for n in (k..=40).step_by(2) {
                assert_eq!(s.coeffs[n], 0.0);
            }
        }
    }

    #[test]
    fn s_k_matches_quadrature_for_small_n() {
        // the split rule is exact on each half-line, so this is a direct oracle
        let rule = GaussHermiteRule::split(600, 12.0).unwrap();
        for k in 0..=4 {
            let exact = s_k_coefficients(k, 30);
            let numeric = expand(&reference_activation(k as u32), 30, &rule);
            for (a, b) in exact.coeffs.iter().zip(&numeric.coeffs) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_derivative_shift() {
        let shifted = shift_by_pseudo_derivative(&s_k_coefficients(0, 40));
        let s1 = s_k_coefficients(1, 41);
        for n in 1..=41 {
            assert_abs_diff_eq!(shifted.coeffs[n], s1.coeffs[n], epsilon = 1e-15);
        }
        let one = HermiteSeries::new(vec![1.0, 0.0, 0.0], "one");
        let f = shift_by_pseudo_derivative(&one);
        assert_eq!(f.coeffs[1], 1.0);
        assert!(f.coeffs[2..].iter().all(|a| *a == 0.0));
    }

    #[test]
    fn s_k_decay_rate() {
        // |a_n(s_k)| (n+1)^{3/4 + k/2} is bounded above and below on odd n − k
        for k in 0..=3usize {
            let s = s_k_coefficients(k, 400);
            let scaled: Vec<f64> = (k + 1..=400)
                .step_by(2)
                .map(|n| s.coeffs[n].abs() * ((n + 1) as f64).powf(0.75 + 0.5 * k as f64))
                .collect();
            let lo = scaled[scaled.len() / 4..].iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scaled[scaled.len() / 4..].iter().cloned().fold(0.0, f64::max);
            assert!(hi / lo < 1.1, "k={k}: ratio {}", hi / lo);
        }
    }

    #[test]
    fn parity_of_coefficients() {
        let rule = small_rule();
        let (e, o) = activations::even_odd_parts(&activations::selu());
        let ae = expand(&e, 30, &rule);
        let ao = expand(&o, 30, &rule);
        for n in 0..=30 {
            if n % 2 == 1 {
                assert_abs_diff_eq!(ae.coeffs[n], 0.0, epsilon = 1e-14);
            } else {
                assert_abs_diff_eq!(ao.coeffs[n], 0.0, epsilon = 1e-14);
            }
        }
    }
}
