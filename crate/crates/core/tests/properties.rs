use proptest::prelude::*;

use otfluct::branching_system::{Regime, SystemParams, regime_table};
use otfluct::limit_covariance::{QuadratureConfig, subfbm_cov, time_weight};
use otfluct::osrf_fields::{FieldSpec, Which, cov_field, fbm_cov};
use otfluct::rng::StreamKey;
use otfluct::stable_motion::{StabilityVector, chf, operator_scale};
use otfluct::stats::estimate_cov;
use otfluct::test_function::TestFunction;

fn system(alpha: f64, gamma: f64, theta: f64, n: f64) -> SystemParams {
    SystemParams::new(StabilityVector::new(vec![alpha]).unwrap(), gamma, theta, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_factor_is_a_decreasing_survival_weight(
        gamma in 0.5f64..4.0, theta in 0.0f64..3.0, n in 4.0f64..64.0, s in 0.0f64..50.0, ds in 0.0f64..5.0,
    ) {
        let p = system(0.4, gamma, theta, n);
        let f = p.mean_factor_f(s).unwrap();
        prop_assert!(f > 0.0 && f <= 1.0);
        prop_assert!(p.mean_factor_f(s + ds).unwrap() <= f + 1e-15);
        prop_assert!(p.mean_factor_fbar(s).unwrap() >= f);
        // The integral is bracketed by the integrand's extremes.
        let i = p.mean_factor_integral(s).unwrap();
        prop_assert!(i <= s * (1.0 + 1e-12) && i >= s * f * (1.0 - 1e-12));
    }

    #[test]
    fn operator_scaling_is_a_group_action(
        a1 in 0.3f64..2.0, a2 in 0.3f64..0.9, c1 in 0.1f64..10.0, c2 in 0.1f64..10.0,
        x in -5.0f64..5.0, y in -5.0f64..5.0, t in 0.01f64..3.0,
    ) {
        let sv = StabilityVector::new(vec![a1, a2]).unwrap();
        let once = operator_scale(&sv, c1 * c2, &[x, y]).unwrap();
        let twice = operator_scale(&sv, c1, &operator_scale(&sv, c2, &[x, y]).unwrap()).unwrap();
        for (u, v) in once.iter().zip(&twice) {
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
        // ξ_{ct} and c^H ξ_t share their characteristic function.
        let z = [x, y];
        let lhs = chf(&sv, c1 * t, &z).unwrap();
        let rhs = chf(&sv, t, &operator_scale(&sv, c1, &z).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn regime_is_determined_by_alpha_bar(alphas in prop::collection::vec(0.2f64..2.0, 1..4)) {
        let Ok(sv) = StabilityVector::new(alphas) else { return Ok(()); };
        let row = regime_table(&sv).unwrap();
        let abar = sv.alpha_bar();
        let want = if abar > 2.0 + 1e-9 { Regime::Large } else if abar >= 2.0 - 1e-9 { Regime::Critical } else { Regime::Intermediate };
        prop_assert_eq!(row.regime, want.name());
    }

    #[test]
    fn subfbm_is_self_similar_and_symmetric(s in 0.0f64..3.0, t in 0.0f64..3.0, c in 0.1f64..10.0, abar in 1.01f64..1.99) {
        let base = subfbm_cov(s, t, abar);
        prop_assert!((subfbm_cov(t, s, abar) - base).abs() <= 1e-12 * base.abs().max(1e-300));
        let scaled = subfbm_cov(c * s, c * t, abar);
        prop_assert!((scaled - c.powf(3.0 - abar) * base).abs() <= 1e-10 * scaled.abs().max(1e-12));
    }

    #[test]
    fn fbm_covariance_is_self_similar(u in 0.0f64..3.0, v in 0.0f64..3.0, c in 0.1f64..10.0, h in 0.05f64..0.95) {
        let base = fbm_cov(h, u, v).unwrap();
        let scaled = fbm_cov(h, c * u, c * v).unwrap();
        prop_assert!((scaled - c.powf(2.0 * h) * base).abs() <= 1e-10 * scaled.abs().max(1e-12));
        // Cauchy-Schwarz.
        prop_assert!(base * base <= fbm_cov(h, u, u).unwrap() * fbm_cov(h, v, v).unwrap() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn time_weight_is_increasing_and_bounded(theta in 0.0f64..10.0, m in 0.0f64..5.0, dm in 0.0f64..1.0) {
        let w = time_weight(theta, m);
        prop_assert!(w <= m + 1e-15 && w >= 0.0);
        prop_assert!(time_weight(theta, m + dm) >= w);
    }

    #[test]
    fn combination_fourier_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -2.0f64..2.0, z in -4.0f64..4.0) {
        let f = TestFunction::gaussian(vec![c], vec![0.7]).unwrap();
        let g = TestFunction::mollified_box(vec![0.0], vec![1.0], vec![0.3]).unwrap();
        let h = TestFunction::combination(vec![(a, f.clone()), (b, g.clone())]).unwrap();
        let (fr, fi) = f.fourier(&[z]);
        let (gr, gi) = g.fourier(&[z]);
        let (hr, hi) = h.fourier(&[z]);
        prop_assert!((hr - (a * fr + b * gr)).abs() <= 1e-12);
        prop_assert!((hi - (a * fi + b * gi)).abs() <= 1e-12);
        prop_assert!((h.integral() - (a * f.integral() + b * g.integral())).abs() <= 1e-12);
        // |φ̂| ≤ ∫|φ| = ∫φ for nonnegative φ.
        prop_assert!(fr.hypot(fi) <= f.integral() * (1.0 + 1e-12));
        prop_assert!(gr.hypot(gi) <= g.integral() * (1.0 + 1e-12));
    }

    #[test]
    fn estimate_cov_is_symmetric_and_bilinear(
        x in prop::collection::vec(-10.0f64..10.0, 3..40), a in -3.0f64..3.0, seed in 0u64..1000,
    ) {
        let y: Vec<f64> = x.iter().rev().cloned().collect();
        let key = StreamKey::new(seed, 0);
        let xy = estimate_cov(&x, &y, 1.0, key).unwrap();
        let yx = estimate_cov(&y, &x, 1.0, key).unwrap();
        prop_assert!((xy.estimate - yx.estimate).abs() <= 1e-9 * xy.estimate.abs().max(1.0));
        let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
        let axy = estimate_cov(&ax, &y, 1.0, key).unwrap();
        prop_assert!((axy.estimate - a * xy.estimate).abs() <= 1e-9 * xy.estimate.abs().max(1.0));
        prop_assert!(xy.se >= 0.0);
        prop_assert_eq!(xy.replicates, x.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn field_covariance_symmetric_and_vanishes_on_axes(u in 0.0f64..2.0, v in 0.0f64..2.0, w in 0.0f64..2.0) {
        let qc = QuadratureConfig::default();
        let spec = FieldSpec::new(Which::Y1, StabilityVector::new(vec![0.3, 0.4]).unwrap(), 1.0, 1.0).unwrap();
        let a = cov_field(&spec, &[u, w], &[v, 1.0], &qc).unwrap().value;
        let b = cov_field(&spec, &[v, 1.0], &[u, w], &qc).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
        let zero = cov_field(&spec, &[0.0, w], &[v, 1.0], &qc).unwrap().value;
        prop_assert!(zero.abs() <= 1e-14);
        // Variance is nonnegative.
        prop_assert!(cov_field(&spec, &[u, w], &[u, w], &qc).unwrap().value >= 0.0);
    }
}
