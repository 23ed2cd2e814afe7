//! Gauss rules for symmetric Jacobi weights.
//!
//! Nodes come from the eigenvalues of the Jacobi matrix (Golub–Welsch, via an
//! implicit-shift QL sweep), are polished by Newton steps on the orthogonal
//! polynomial itself, and the weights use the closed-form Christoffel numbers.
//! All rules here are normalized so that the weights sum to one.

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wᵢ f(xᵢ).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affinely maps a normalized rule on [-1, 1] to [a, b]; the weights then
    /// sum to b - a (Lebesgue measure).
    pub fn mapped(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| (b - a) * w).collect(),
        }
    }
}

/// Gauss–Legendre rule on [-1, 1], weights summing to one.
pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_gegenbauer(n, 0.0)
}

/// Gauss rule for the probability weight ∝ (1 - t²)^a on [-1, 1], a > -1.
///
/// With `a = d/2 - 1` this is the Funk–Hecke weight of the sphere S^d.
pub fn gauss_gegenbauer(n: usize, a: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
    }
    if !(a > -1.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("Jacobi exponent {a} must exceed -1")));
    }
    if n == 1 {
        return Ok(GaussRule { nodes: vec![0.0], weights: vec![1.0] });
    }

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for k in 1..n {
        let kf = k as f64;
        let sq = if k == 1 {
            // (k + 2a) / (2k + 2a - 1) is 0/0 at a = -1/2; this is its limit form
            4.0 * (1.0 + a) * (1.0 + a) / ((2.0 + 2.0 * a).powi(2) * (3.0 + 2.0 * a))
        } else {
            kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0))
        };
        off[k - 1] = sq.sqrt();
    }
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    diag.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut nodes = diag;
    let mut weights = vec![0.0; n];
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..3 {
            let (p, pm1) = jacobi_sym(n, a, *x);
            let dp = (-(n as f64) * *x * p + (n as f64 + a) * pm1) / (1.0 - *x * *x);
            let step = p / dp;
            *x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        // Christoffel number 1/((1 - x²) P_n'(x)²) up to a constant fixed by
        // the normalization below. P_n' is stationary at its roots to leading
        // order, so this is far less sensitive to node error than P_{n-1} alone.
        let (p, pm1) = jacobi_sym(n, a, *x);
        let one_minus_x2 = (1.0 - *x) * (1.0 + *x);
        let q = -(n as f64) * *x * p + (n as f64 + a) * pm1;
        *w = one_minus_x2 / (q * q);
    }

    // enforce exact reflection symmetry so that parity cancellations are exact
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = pairwise_sum(&weights);
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussRule { nodes, weights })
}

/// (P_n, P_{n-1}) of the Jacobi family with α = β = a, standard normalization.
fn jacobi_sym(n: usize, a: f64, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = (a + 1.0) * x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let s = 2.0 * kf + 2.0 * a;
        let c1 = 2.0 * kf * (kf + 2.0 * a) * (s - 2.0);
        let c2 = (s - 1.0) * s * (s - 2.0) * x;
        let c3 = 2.0 * (kf + a - 1.0) * (kf + a - 1.0) * s;
        let next = (c2 * p - c3 * p_prev) / c1;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Eigenvalues of the symmetric tridiagonal matrix (diag, off) by implicit QL.
/// `off[i]` couples rows i and i+1; the result overwrites `diag`.
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::InvalidParameter(
                    "tridiagonal QL iteration failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Pairwise (cascade) summation: result independent of thread count and
/// accurate to O(log n) ulps.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
