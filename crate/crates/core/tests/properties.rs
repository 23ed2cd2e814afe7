use proptest::prelude::*;

use nk_core::activations::{from_name, ActivationSpec};
use nk_core::dual::{DualActivation, QuadrantRule};
use nk_core::gp_paths::{sample_path, sobolev_series_lenient, SphericalBasis};
use nk_core::hermite::{default_rule, expand, second_moment};
use nk_core::kernels::{build_kernel, KernelKind, KernelOptions, NetworkConfig};
use nk_core::spectrum::{gegenbauer_p, multiplicity, Spectrum};

const NAMES: &[&str] = &[
    "relu", "leakyrelu", "selu", "elu", "celu", "repu:2", "heaviside", "tanh", "sigmoid", "gelu", "silu", "rbf", "softplus",
    "sin", "identity", "sk:1", "sk:3",
];

fn act(i: usize) -> ActivationSpec {
    from_name(NAMES[i % NAMES.len()], &[]).unwrap()
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dual_bounded_by_modulus(i in 0usize..17, t in -0.999f64..0.999) {
        let d = DualActivation::quadrature(&act(i), QuadrantRule::default()).unwrap();
        let v = d.eval(t).unwrap();
        let at_abs = d.eval(t.abs()).unwrap();
        let slack = 1e-12 * d.value_at_one().max(1.0);
        prop_assert!(v.abs() <= at_abs + slack);
        prop_assert!(at_abs <= d.value_at_one() + slack);
    }

    #[test]
    fn kernel_peaks_at_one(
        i in 0usize..17,
        depth in 1usize..4,
        sw in prop::sample::select(vec![0.5, 1.0, 2.0]),
        sb in prop::sample::select(vec![0.0, 0.5, 1.0]),
        si in prop::sample::select(vec![0.0, 1.0]),
        ntk in any::<bool>(),
        t in -1.0f64..1.0,
    ) {
        let a = act(i);
        let kind = if ntk { KernelKind::Ntk } else { KernelKind::Nngp };
        let cfg = NetworkConfig::new(depth, sw, sb, si).unwrap();
        if let Ok(k) = build_kernel(&a, &cfg, kind, &KernelOptions::default()) {
            let top = k.eval(1.0).unwrap();
            prop_assert!(k.eval(t).unwrap().abs() <= top * (1.0 + 1e-12));
        } else {
            prop_assert!(kind == KernelKind::Ntk && a.is_discontinuous());
        }
    }

    #[test]
    fn bessel_inequality(i in 0usize..17) {
        let a = act(i);
        let s = expand(&a, 128, default_rule());
        prop_assert!(s.energy() <= second_moment(&a, default_rule()) * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn gegenbauer_bounded(l in 0usize..200, d in 1usize..7, t in -1.0f64..1.0) {
        prop_assert!(gegenbauer_p(l, d, t).abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn multiplicity_closed_form(l in 1u64..300, d in 1u64..9) {
        let expect = (2 * l + d - 1) as f64 / (l + d - 1) as f64 * binomial(l + d - 1, l);
        let got = multiplicity(l as usize, d as usize) as f64;
        prop_assert!((got - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn sobolev_partial_sums_nondecreasing(p in 1.5f64..4.0, r in 0.0f64..3.0, d in 1usize..3) {
        let mu: Vec<f64> = (0..200).map(|l| ((l + 1) as f64).powf(-p)).collect();
        let spec = Spectrum::from_eigenvalues(d, mu).unwrap();
        let s = sobolev_series_lenient(&spec, r).unwrap();
        prop_assert!(s.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        // exact power law: the fitted exponent is 2r − p + d − 1 up to the
        // multiplicity's lower-order terms
        prop_assert!((s.tail_exponent - (2.0 * r - p + d as f64 - 1.0)).abs() < 0.05);
    }

    #[test]
    fn paths_are_reproducible(seed in any::<u64>(), d in 1usize..3) {
        let mu: Vec<f64> = (0..12).map(|l| ((l + 1) as f64).powi(-3)).collect();
        let spec = Spectrum::from_eigenvalues(d, mu).unwrap();
        let basis = SphericalBasis::new(d, 11).unwrap();
        prop_assert_eq!(sample_path(&spec, basis, seed).unwrap(), sample_path(&spec, basis, seed).unwrap());
    }
}
