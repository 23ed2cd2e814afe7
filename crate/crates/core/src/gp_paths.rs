//! Gaussian-process sample paths on S¹ and S² from a kernel spectrum, and
//! the expected Sobolev-norm series that decides path smoothness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::{multiplicity, Spectrum};

/// Real orthonormal basis of spherical harmonics on S^d, d ∈ {1, 2}, with
/// respect to the uniform probability measure.
///
/// Order within degree l: for d = 1, (cos lθ, sin lθ); for d = 2,
/// m = 0, then (cos mφ, sin mφ) for m = 1..l.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalBasis {
    pub d: usize,
    pub l_max: usize,
}

impl SphericalBasis {
    pub fn new(d: usize, l_max: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidParameter(format!("sample paths support d = 1 or 2, got {d}")));
        }
        Ok(SphericalBasis { d, l_max })
    }

    /// Number of basis functions of degree ≤ l_max.
    pub fn len(&self) -> usize {
        (0..=self.l_max).map(|l| multiplicity(l, self.d) as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All Y_{l,i}(x), grouped by degree. `x` must be a unit vector in R^{d+1}.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.d + 1 {
            return Err(Error::InvalidParameter(format!("point has {} coordinates, expected {}", x.len(), self.d + 1)));
        }
        Ok(match self.d {
            1 => self.eval_circle(x[1].atan2(x[0])),
            _ => self.eval_sphere(x),
        })
    }

    fn eval_circle(&self, theta: f64) -> Vec<Vec<f64>> {
        let s2 = std::f64::consts::SQRT_2;
        (0..=self.l_max)
            .map(|l| {
                if l == 0 {
                    vec![1.0]
                } else {
                    let (s, c) = (l as f64 * theta).sin_cos();
                    vec![s2 * c, s2 * s]
                }
            })
            .collect()
    }

    fn eval_sphere(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let l_max = self.l_max;
        let z = x[2].clamp(-1.0, 1.0);
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let phi = x[1].atan2(x[0]);
        // p[l][m]: associated Legendre functions normalized to unit mean square on [−1, 1]
        let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
        p[0][0] = 1.0;
        for m in 1..=l_max {
            let mf = m as f64;
            p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * rho * p[m - 1][m - 1];
        }
        for m in 0..l_max {
            p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * z * p[m][m];
            for l in m + 2..=l_max {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                p[l][m] = a * (z * p[l - 1][m] - b * p[l - 2][m]);
            }
        }
        let s2 = std::f64::consts::SQRT_2;
        let trig: Vec<(f64, f64)> = (0..=l_max).map(|m| (m as f64 * phi).sin_cos()).collect();
        (0..=l_max)
            .map(|l| {
                let mut row = Vec::with_capacity(2 * l + 1);
                row.push(p[l][0]);
                for m in 1..=l {
                    let (s, c) = trig[m];
                    row.push(s2 * p[l][m] * c);
                    row.push(s2 * p[l][m] * s);
                }
                row
            })
            .collect()
    }
}

/// A sampled path f = Σ_l √μ_l Σ_i ξ_{l,i} Y_{l,i}.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPath {
    pub basis: SphericalBasis,
    /// √μ_l ξ_{l,i}, grouped by degree.
    pub coeffs: Vec<Vec<f64>>,
    pub seed: u64,
}

impl GpPath {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let ys = self.basis.eval(x)?;
        let mut acc = 0.0;
        for (cs, ys) in self.coeffs.iter().zip(&ys) {
            acc += cs.iter().zip(ys).map(|(c, y)| c * y).sum::<f64>();
        }
        Ok(acc)
    }

    /// Values at many points, in parallel.
    pub fn eval_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.eval(x)).collect()
    }
}

/// Standard normal draw for coefficient (l, i): each pair has its own
/// ChaCha stream, so the draw does not depend on evaluation order.
pub fn coefficient_draw(seed: u64, l: usize, i: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((l as u64) << 32) | i as u64);
    StandardNormal.sample(&mut rng)
}

/// Draws a path with covariance equal to the Mercer sum truncated at
/// `basis.l_max`. Eigenvalues at or below the spectrum's zero threshold
/// (quadrature noise) are treated as exact zeros.
pub fn sample_path(spec: &Spectrum, basis: SphericalBasis, seed: u64) -> Result<GpPath> {
    if spec.d != basis.d {
        return Err(Error::InvalidParameter(format!("spectrum is on S^{} but basis on S^{}", spec.d, basis.d)));
    }
    if basis.l_max > spec.l_max() {
        return Err(Error::InvalidParameter(format!(
            "basis l_max = {} exceeds spectrum l_max = {}",
            basis.l_max,
            spec.l_max()
        )));
    }
    let thr = spec.zero_threshold();
    let coeffs = (0..=basis.l_max)
        .into_par_iter()
        .map(|l| {
            let n = multiplicity(l, basis.d) as usize;
            let mu = spec.mu[l];
            if mu <= thr {
                return vec![0.0; n];
            }
            let amp = mu.sqrt();
            (0..n).map(|i| amp * coefficient_draw(seed, l, i)).collect()
        })
        .collect();
    Ok(GpPath { basis, coeffs, seed })
}

/// Convergence verdict of an expected Sobolev-norm series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Convergent => "convergent",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Half-width of the band around −1 in which the tail exponent cannot
/// decide convergence.
pub const INCONCLUSIVE_BAND: f64 = 0.1;

/// Partial sums S_L = Σ_{l≤L} (1+l)^{2r} μ_l N_{l,d}: the expected squared
/// H^r norm of a path, truncated at L.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevSeries {
    pub r: f64,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    /// Fitted exponent of the increments, (1+l)^{tail_exponent}; −∞ when
    /// the tail is identically zero.
    pub tail_exponent: f64,
    /// The r at which the fitted tail exponent crosses −1.
    pub threshold_estimate: f64,
}

/// Fits log increment against log(1+l) over the upper three quarters of
/// the spectrum, skipping numerically zero eigenvalues.
fn tail_fit(spec: &Spectrum, r: f64) -> Result<f64> {
    let l_max = spec.l_max();
    let thr = spec.zero_threshold();
    let lo = (l_max / 4).max(1);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for l in lo..=l_max {
        if spec.mu[l] > thr {
            let x = (1.0 + l as f64).ln();
            xs.push(x);
            ys.push(2.0 * r * x + spec.mu[l].ln() + spec.multiplicities[l].ln());
        }
    }
    if xs.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData { available: xs.len(), required: 5 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// The series at order r with its verdict. A fitted tail exponent inside
/// (−1.1, −0.9) yields `InconclusiveTail`; use [`sobolev_series_lenient`]
/// to get the series with `Verdict::Inconclusive` instead.
pub fn sobolev_series(spec: &Spectrum, r: f64) -> Result<SobolevSeries> {
    let series = sobolev_series_lenient(spec, r)?;
    if series.verdict == Verdict::Inconclusive {
        return Err(Error::InconclusiveTail { exponent: series.tail_exponent });
    }
    Ok(series)
}

/// As [`sobolev_series`], reporting an undecidable tail in the verdict.
pub fn sobolev_series_lenient(spec: &Spectrum, r: f64) -> Result<SobolevSeries> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!("Sobolev order r = {r} must be finite")));
    }
    let mut partial_sums = Vec::with_capacity(spec.mu.len());
    let mut acc = 0.0;
    for (l, (&mu, &n)) in spec.mu.iter().zip(&spec.multiplicities).enumerate() {
        // negative quadrature noise would break monotonicity
        acc += (1.0 + l as f64).powf(2.0 * r) * mu.max(0.0) * n;
        partial_sums.push(acc);
    }
    let tail_exponent = tail_fit(spec, r)?;
    let verdict = if tail_exponent < -1.0 - INCONCLUSIVE_BAND {
        Verdict::Convergent
    } else if tail_exponent > -1.0 + INCONCLUSIVE_BAND {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    // the exponent is affine in r with slope 2
    let threshold_estimate = r + (-1.0 - tail_exponent) / 2.0;
    Ok(SobolevSeries { r, partial_sums, verdict, tail_exponent, threshold_estimate })
}

/// Bisection on r ∈ [lo, hi] for the crossing of the tail exponent through
/// −1, to within `tol`.
pub fn sobolev_threshold(spec: &Spectrum, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("bad bisection bracket [{lo}, {hi}] / tol {tol}")));
    }
    let converges = |r: f64| -> Result<bool> { Ok(tail_fit(spec, r)? < -1.0) };
    if !converges(lo)? {
        return Ok(lo);
    }
    if converges(hi)? {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if converges(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{relu, tanh};
    use crate::kernels::{build_nngp, NetworkConfig};
    use crate::quadrature::gauss_legendre;
    use crate::spectrum::{eigenvalues, gegenbauer_p};
    use approx::assert_abs_diff_eq;

    fn unit(theta: f64, phi: f64) -> Vec<f64> {
        vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
    }

    #[test]
    fn sphere_gram_is_identity() {
        let basis = SphericalBasis::new(2, 12).unwrap();
        let gl = gauss_legendre(20).unwrap();
        let n_phi = 40;
        let n = basis.len();
        let mut gram = vec![0.0; n * n];
        for (&z, &w) in gl.nodes.iter().zip(&gl.weights) {
            for k in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / n_phi as f64;
                let y: Vec<f64> = basis.eval(&unit(z.acos(), phi)).unwrap().concat();
                let wt = w / n_phi as f64;
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += wt * y[i] * y[j];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(gram[i * n + j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn addition_theorem() {
        for d in [1usize, 2] {
            let basis = SphericalBasis::new(d, 20).unwrap();
            let (x, y) = if d == 1 {
                (vec![0.6, 0.8], vec![-0.28, 0.96])
            } else {
                (unit(0.4, 1.1), unit(2.0, -0.7))
            };
            let t: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let (yx, yy) = (basis.eval(&x).unwrap(), basis.eval(&y).unwrap());
            for l in 0..=20 {
                let lhs: f64 = yx[l].iter().zip(&yy[l]).map(|(a, b)| a * b).sum();
                assert_abs_diff_eq!(lhs, multiplicity(l, d) as f64 * gegenbauer_p(l, d, t), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rank_one_path_is_constant() {
        let spec = Spectrum::from_eigenvalues(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let path = sample_path(&spec, SphericalBasis::new(2, 3).unwrap(), 7).unwrap();
        let xi = coefficient_draw(7, 0, 0);
        for x in [unit(0.1, 0.2), unit(2.5, -1.0)] {
            assert_eq!(path.eval(&x).unwrap(), xi);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = Spectrum::from_eigenvalues(1, (0..30).map(|l| ((l + 1) as f64).powi(-3)).collect()).unwrap();
        let basis = SphericalBasis::new(1, 29).unwrap();
        let a = sample_path(&spec, basis, 42).unwrap();
        let b = sample_path(&spec, basis, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_path(&spec, basis, 43).unwrap());
    }

    #[test]
    fn odd_spectrum_gives_odd_paths() {
        let k = build_nngp(&tanh(), &NetworkConfig::bias_free(2)).unwrap();
        let spec = eigenvalues(&k, 2, 40, 200).unwrap();
        let path = sample_path(&spec, SphericalBasis::new(2, 40).unwrap(), 3).unwrap();
        for (th, ph) in [(0.3, 0.1), (1.2, 2.0), (2.9, -2.2)] {
            let x = unit(th, ph);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            assert_abs_diff_eq!(path.eval(&x).unwrap(), -path.eval(&neg).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn p_series_examples() {
        let spec = Spectrum::from_eigenvalues(1, (0..400).map(|l| ((l + 1) as f64).powi(-4)).collect()).unwrap();
        let s = sobolev_series(&spec, 1.0).unwrap();
        assert_eq!(s.verdict, Verdict::Convergent);
        assert_abs_diff_eq!(s.tail_exponent, -2.0, epsilon = 1e-9);
        assert!(s.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        assert_abs_diff_eq!(s.threshold_estimate, 1.5, epsilon = 1e-9);
        assert_eq!(sobolev_series(&spec, 2.0).unwrap().verdict, Verdict::Divergent);
        assert!(matches!(sobolev_series(&spec, 1.5), Err(Error::InconclusiveTail { .. })));
        assert_eq!(sobolev_series_lenient(&spec, 1.5).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn relu_threshold_on_circle() {
        let k = build_nngp(&relu(), &NetworkConfig::unit(2)).unwrap();
        let spec = eigenvalues(&k, 1, 256, 1000).unwrap();
        assert_eq!(sobolev_series(&spec, 1.25).unwrap().verdict, Verdict::Convergent);
        assert_eq!(sobolev_series(&spec, 1.75).unwrap().verdict, Verdict::Divergent);
        let r = sobolev_threshold(&spec, 0.5, 4.0, 1e-3).unwrap();
        assert!((r - 1.5).abs() < 0.1, "threshold {r}");
    }
}
