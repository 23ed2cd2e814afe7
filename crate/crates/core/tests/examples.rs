//! Cross-module examples checked against independent oracles (closed forms,
//! plain Riemann sums, Monte Carlo).

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use nk_core::activations::{from_name, identity, relu, tanh, ActivationSpec};
use nk_core::dual::{dual_at_boundary, dual_derivative, DualActivation, DualOptions, QuadrantRule};
use nk_core::finite_width::{estimate, pair_panel};
use nk_core::gp_paths::{sample_path, SphericalBasis};
use nk_core::hermite::{default_rule, expand};
use nk_core::kernels::{build_kernel, build_nngp, build_ntk, KernelKind, KernelOptions, NetworkConfig};
use nk_core::spectrum::{eigenvalues, gegenbauer_p, multiplicity};

/// ∫ f dγ by a midpoint rule on [−14, 14]; slow but independent of the
/// library's quadrature.
fn gaussian_riemann(f: impl Fn(f64) -> f64) -> f64 {
    let n = 400_000;
    let h = 28.0 / n as f64;
    (0..n)
        .map(|i| {
            let x = -14.0 + (i as f64 + 0.5) * h;
            f(x) * (-0.5 * x * x).exp()
        })
        .sum::<f64>()
        * h
        / (2.0 * PI).sqrt()
}

fn act(name: &str) -> ActivationSpec {
    from_name(name, &[]).unwrap()
}

#[test]
fn relu_hermite_constant_term() {
    let a0 = expand(&relu(), 4, default_rule()).coeffs[0];
    assert_abs_diff_eq!(a0, gaussian_riemann(|x| x.max(0.0)), epsilon = 1e-9);
    assert_abs_diff_eq!(a0, 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-12);
}

#[test]
fn heaviside_dual_by_monte_carlo() {
    let h = act("heaviside");
    let dual = DualActivation::quadrature(&h, QuadrantRule::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000;
    let mut hits_zero = 0usize;
    for _ in 0..n {
        let u: f64 = StandardNormal.sample(&mut rng);
        let v: f64 = StandardNormal.sample(&mut rng);
        if u > 0.0 && v > 0.0 {
            hits_zero += 1;
        }
    }
    let mc = hits_zero as f64 / n as f64;
    let se = (0.25 * 0.75 / n as f64).sqrt();
    assert!((dual.eval(0.0).unwrap() - mc).abs() < 5.0 * se);
    assert_abs_diff_eq!(dual.eval(0.0).unwrap(), 0.25, epsilon = 1e-12);
    assert_abs_diff_eq!(dual_at_boundary(&h, -1.0).unwrap(), 0.0, epsilon = 1e-15);
}

#[test]
fn boundary_values() {
    assert_abs_diff_eq!(dual_at_boundary(&relu(), 1.0).unwrap(), 0.5, epsilon = 1e-13);
    let t1 = dual_at_boundary(&tanh(), 1.0).unwrap();
    assert_abs_diff_eq!(dual_at_boundary(&tanh(), -1.0).unwrap(), -t1, epsilon = 1e-13);
    assert_abs_diff_eq!(t1, gaussian_riemann(|x| x.tanh().powi(2)), epsilon = 1e-9);
}

#[test]
fn relu_dual_derivative_is_step_dual() {
    let d = dual_derivative(&relu(), &DualOptions::default()).unwrap();
    for t in [-0.9, -0.3, 0.0, 0.4, 0.95] {
        assert_abs_diff_eq!(d.eval(t).unwrap(), 0.5 - t.acos() / (2.0 * PI), epsilon = 1e-10);
    }
}

#[test]
fn gelu_dual_derivative_finite_difference() {
    let g = act("gelu");
    let full = DualActivation::new(&g, &DualOptions::default()).unwrap();
    let d = dual_derivative(&g, &DualOptions::default()).unwrap();
    let (t, h) = (0.3, 1e-5);
    let fd = (full.eval(t + h).unwrap() - full.eval(t - h).unwrap()) / (2.0 * h);
    assert_abs_diff_eq!(fd, d.eval(t).unwrap(), epsilon = 1e-6);
}

#[test]
fn heaviside_dual_derivative_is_rejected() {
    assert!(dual_derivative(&act("heaviside"), &DualOptions::default()).is_err());
}

#[test]
fn kernel_base_cases() {
    let cfg = NetworkConfig::unit(1);
    let nngp = build_nngp(&relu(), &cfg).unwrap();
    let ntk = build_ntk(&relu(), &cfg).unwrap();
    for t in [-1.0, -0.2, 0.5, 1.0] {
        assert_abs_diff_eq!(nngp.eval(t).unwrap(), 1.0 + t, epsilon = 1e-15);
        assert_abs_diff_eq!(ntk.eval(t).unwrap(), 1.0 + t, epsilon = 1e-15);
    }
    assert_abs_diff_eq!(nngp.trace().alpha[0], 2.0, epsilon = 1e-15);
    let lin = NetworkConfig::bias_free(2);
    for t in [-0.7, 0.1, 0.9] {
        assert_abs_diff_eq!(build_nngp(&identity(), &lin).unwrap().eval(t).unwrap(), t, epsilon = 1e-12);
        assert_abs_diff_eq!(build_ntk(&identity(), &lin).unwrap().eval(t).unwrap(), 2.0 * t, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(build_nngp(&relu(), &NetworkConfig::unit(2)).unwrap().eval(1.0).unwrap(), 2.0, epsilon = 1e-12);
}

#[test]
fn tanh_bias_free_nngp_is_odd() {
    let k = build_nngp(&tanh(), &NetworkConfig::bias_free(3)).unwrap();
    for t in [0.05, 0.3, 0.77, 0.99] {
        assert_abs_diff_eq!(k.eval(-t).unwrap(), -k.eval(t).unwrap(), epsilon = 1e-9);
    }
}

#[test]
fn mercer_sum_of_quadratic_kernel() {
    // 1 + 2t² = (5/3)·P₀ + (4/3)·P₂ on S², so μ₀ = 5/3 and μ₂·N₂ = 4/3
    let k = build_nngp(&from_name("poly:0,0,1", &[]).unwrap(), &NetworkConfig::bias_free(2)).unwrap();
    let spec = eigenvalues(&k, 2, 20, 60).unwrap();
    assert_abs_diff_eq!(spec.mu[0], 5.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(spec.mu[2] * multiplicity(2, 2) as f64, 4.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(gegenbauer_p(2, 2, 0.4), 0.5 * (3.0 * 0.16 - 1.0), epsilon = 1e-15);
}

#[test]
fn relu_ntk_at_one_matches_finite_width() {
    let cfg = NetworkConfig::unit(3);
    let analytic = build_ntk(&relu(), &cfg).unwrap().eval(1.0).unwrap();
    let x = vec![1.0, 0.0, 0.0];
    let est = estimate(&relu(), &cfg, 2, &[(x.clone(), x)], 256, 300, 77).unwrap();
    let z = (est[0].ntk_mean.unwrap() - analytic) / est[0].ntk_se.unwrap();
    assert!(z.abs() < 4.0, "z = {z}, analytic {analytic}, empirical {:?}", est[0].ntk_mean);
}

#[test]
fn linear_network_ntk_by_monte_carlo() {
    let pairs = pair_panel(2, 4).unwrap();
    let est = estimate(&identity(), &NetworkConfig::bias_free(2), 2, &pairs, 1024, 2000, 3).unwrap();
    for e in est {
        let se = e.ntk_se.unwrap();
        assert!((e.ntk_mean.unwrap() - 2.0 * e.t).abs() < 5.0 * se.max(1e-12), "t={} {:?}", e.t, e.ntk_mean);
    }
}

#[test]
fn tanh_antipodal_nngp_is_negative() {
    let cfg = NetworkConfig::bias_free(2);
    let k1 = build_nngp(&tanh(), &cfg).unwrap().value_at_one();
    let x = vec![0.0, 1.0];
    let y = vec![0.0, -1.0];
    let est = estimate(&tanh(), &cfg, 1, &[(x, y)], 512, 2000, 8).unwrap();
    assert!((est[0].nngp_mean + k1).abs() < 5.0 * est[0].nngp_se);
}

#[test]
fn ntk_error_shrinks_with_width() {
    let cfg = NetworkConfig::unit(2);
    let act = act("gelu");
    let pairs = pair_panel(1, 10).unwrap();
    let ntk = build_kernel(&act, &cfg, KernelKind::Ntk, &KernelOptions::default()).unwrap();
    let mut medians = Vec::new();
    for width in [16, 64, 256, 1024] {
        let est = estimate(&act, &cfg, 1, &pairs, width, 200, 5).unwrap();
        let mut errs: Vec<f64> =
            est.iter().map(|e| (e.ntk_mean.unwrap() - ntk.eval(e.t.clamp(-1.0, 1.0)).unwrap()).abs()).collect();
        errs.sort_by(f64::total_cmp);
        medians.push(0.5 * (errs[4] + errs[5]));
    }
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn path_covariance_matches_mercer_sum() {
    let k = build_nngp(&relu(), &NetworkConfig::unit(2)).unwrap();
    let spec = eigenvalues(&k, 2, 8, 100).unwrap();
    let basis = SphericalBasis::new(2, 8).unwrap();
    let x = [0.0, 0.6, 0.8];
    let y = [0.48, 0.6, -0.64];
    let t: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let n = 5000;
    let prods: Vec<f64> = (0..n as u64)
        .map(|s| {
            let p = sample_path(&spec, basis, s).unwrap();
            p.eval(&x).unwrap() * p.eval(&y).unwrap()
        })
        .collect();
    let mean = prods.iter().sum::<f64>() / n as f64;
    let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    let target = spec.mercer_sum(t);
    assert!((mean - target).abs() < 4.0 * se, "mean {mean} target {target} se {se}");
}
