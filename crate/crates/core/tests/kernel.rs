use proptest::prelude::*;
use resonance_core::airy::Sign;
use resonance_core::kernel::{self, KernelError, ModelParams};
use resonance_core::solver;
use resonance_core::Complex64;

fn reference_params(field: f64) -> ModelParams {
    ModelParams::with_separation(-2.8, -2.0, 5.0, field).unwrap()
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (-4.0..-1.0f64, 0.3..1.0f64, 1.0..8.0f64, 0.05..0.5f64)
        .prop_map(|(a1, frac, a, f)| ModelParams::with_separation(a1, a1 * frac, a, f).unwrap())
}

// Deep below the real axis (relative to F) the continued kernel grows exponentially
// and finite differences lose the digits these checks need; resonances of
// interest sit at |Im z| well under 0.1.
fn energy_strategy() -> impl Strategy<Value = Complex64> {
    (-4.0..1.0f64, -0.1..0.5f64).prop_map(|(re, im)| Complex64::new(re, im))
}

/// `∂ₓf(x+ε) - ∂ₓf(x-ε)` with central differences of step `ε/4`.
fn derivative_jump<F: Fn(f64) -> Complex64>(f: &F, x: f64, eps: f64) -> Complex64 {
    let h = eps / 4.0;
    let d = |at: f64| (f(at + h) - f(at - h)) / (2.0 * h);
    d(x + eps) - d(x - eps)
}

/// Jump with the `O(ε)` smooth-part contribution removed by Richardson extrapolation.
fn extrapolated_jump<F: Fn(f64) -> Complex64>(f: &F, x: f64, eps: f64) -> Complex64 {
    2.0 * derivative_jump(f, x, eps / 2.0) - derivative_jump(f, x, eps)
}

#[test]
fn kmatrix_at_table_point_is_regular() {
    let p = reference_params(0.17);
    let k = kernel::kmatrix(&p, Complex64::new(-1.96, -1e-4), Sign::Plus).unwrap();
    for j in 0..2 {
        for l in 0..2 {
            let v = k.get(j, l);
            assert!(v.re.is_finite() && v.im.is_finite() && v.norm() > 0.0);
        }
    }
    assert_eq!(k.get(0, 1), k.get(1, 0));
}

#[test]
fn d_tends_to_inverse_strength_product_far_up() {
    let p = reference_params(0.17);
    let limit = 1.0 / (p.alpha1 * p.alpha2);
    let mut last = f64::INFINITY;
    for s in [1e2, 1e3, 1e4] {
        let d = kernel::d_function(&p, Complex64::new(-2.0, s), Sign::Plus).unwrap();
        let gap = (d - limit).norm();
        assert!(gap < last, "not decreasing at Im z = {s}");
        last = gap;
    }
    assert!(last < 0.05 * limit);
}

#[test]
fn large_coupling_limit() {
    // as α → -∞ the correction tends to -Σ K₀(x, x_n) [k⁻¹]_{nm} K₀(x_m, y)
    let p = ModelParams::with_separation(-1e7, -0.9e7, 5.0, 0.17).unwrap();
    let z = Complex64::new(-1.3, 0.2);
    let k = kernel::kmatrix(&p, z, Sign::Plus).unwrap();
    let det = k.get(0, 0) * k.get(1, 1) - k.get(0, 1) * k.get(1, 0);
    let inv = [[k.get(1, 1) / det, -k.get(0, 1) / det], [-k.get(1, 0) / det, k.get(0, 0) / det]];
    let (x, y) = (1.3, -0.7);
    let sites = p.sites();
    let mut expected = Complex64::new(0.0, 0.0);
    for n in 0..2 {
        for m in 0..2 {
            expected -= kernel::k0(x, sites[n], z, &p, Sign::Plus).unwrap()
                * inv[n][m]
                * kernel::k0(sites[m], y, z, &p, Sign::Plus).unwrap();
        }
    }
    let correction = kernel::full_kernel(x, y, &p, z, Sign::Plus).unwrap() - kernel::k0(x, y, z, &p, Sign::Plus).unwrap();
    assert!((correction - expected).norm() < 1e-5 * expected.norm(), "{correction} vs {expected}");
}

#[test]
fn full_kernel_has_a_simple_pole_at_the_resonance() {
    let p = reference_params(0.17);
    let e1 = solver::find_pair(&p).unwrap().0.energy;
    let mean_abs = |r: f64| {
        (0..16)
            .map(|k| {
                let z = e1 + Complex64::from_polar(r, 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 16.0);
                kernel::full_kernel(0.0, 0.0, &p, z, Sign::Plus).unwrap().norm()
            })
            .sum::<f64>()
            / 16.0
    };
    let radii = [1e-4, 1e-5, 1e-6];
    let values: Vec<f64> = radii.iter().map(|&r| mean_abs(r)).collect();
    for w in values.windows(2) {
        let slope = (w[1] / w[0]).log10();
        assert!((slope - 1.0).abs() < 0.02, "growth exponent {slope}");
    }
    assert!(matches!(
        kernel::full_kernel(0.0, 0.0, &p, e1, Sign::Plus),
        Err(KernelError::Pole { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn k0_is_symmetric(p in params_strategy(), z in energy_strategy(), x in -3.0..8.0f64, y in -3.0..8.0f64) {
        let a = kernel::k0(x, y, z, &p, Sign::Plus).unwrap();
        let b = kernel::k0(y, x, z, &p, Sign::Plus).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn k0_derivative_jump_is_minus_one(p in params_strategy(), z in energy_strategy(), y in -3.0..8.0f64) {
        let f = |x: f64| kernel::k0(x, y, z, &p, Sign::Plus).unwrap();
        let jump = extrapolated_jump(&f, y, 1e-4);
        prop_assert!((jump + 1.0).norm() < 1e-6, "jump {}", jump);
    }

    #[test]
    fn k0_solves_the_free_equation(p in params_strategy(), z in energy_strategy(), x in -3.0..8.0f64, y in -3.0..8.0f64) {
        prop_assume!((x - y).abs() > 0.05);
        let h = 1e-3;
        let f = |x: f64| kernel::k0(x, y, z, &p, Sign::Plus).unwrap();
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let residual = -d2 - (p.field * x + z) * f(x);
        let scale = f(x).norm() * (1.0 + (p.field * x + z).norm());
        prop_assert!(residual.norm() < 1e-5 * scale, "residual {}", residual);
    }

    #[test]
    fn kmatrix_matches_direct_calls(p in params_strategy(), z in energy_strategy()) {
        let k = kernel::kmatrix(&p, z, Sign::Plus).unwrap();
        let s = p.sites();
        for j in 0..2 {
            for l in 0..2 {
                let direct = kernel::k0(s[j], s[l], z, &p, Sign::Plus).unwrap();
                prop_assert!((k.get(j, l) - direct).norm() <= 1e-14 * direct.norm());
            }
        }
    }

    #[test]
    fn d_is_a_determinant(p in params_strategy(), z in energy_strategy()) {
        let k = kernel::kmatrix(&p, z, Sign::Plus).unwrap();
        let det = (1.0 / p.alpha1 + k.get(0, 0)) * (1.0 / p.alpha2 + k.get(1, 1)) - k.get(0, 1) * k.get(1, 0);
        let d = kernel::d_function(&p, z, Sign::Plus).unwrap();
        prop_assert!((d - det).norm() <= 1e-12 * det.norm().max(1e-3));
        let m = kernel::m_matrix(&p, z, Sign::Plus).unwrap();
        prop_assert_eq!(m[0][1], m[1][0]);
    }

    #[test]
    fn schwarz_reflection_of_d(p in params_strategy(), z in energy_strategy()) {
        let plus = kernel::d_function(&p, z, Sign::Plus).unwrap();
        let minus = kernel::d_function(&p, z.conj(), Sign::Minus).unwrap();
        // D is built from sums that cancel near its zeros; bound by the summands
        let k = kernel::kmatrix(&p, z, Sign::Plus).unwrap();
        let (a1, a2) = (p.alpha1.abs(), p.alpha2.abs());
        let scale = (1.0 + a1 * k.get(0, 0).norm()) * (1.0 + a2 * k.get(1, 1).norm()) / (a1 * a2)
            + (k.get(0, 1) * k.get(1, 0)).norm();
        prop_assert!((minus - plus.conj()).norm() <= 1e-13 * scale);
        let kp = kernel::full_kernel(0.4, 2.0, &p, z, Sign::Plus);
        let km = kernel::full_kernel(0.4, 2.0, &p, z.conj(), Sign::Minus);
        if let (Ok(kp), Ok(km)) = (kp, km) {
            // the resolvent can be a near cancellation of terms of size |K0|
            let scale = kp.norm().max(kernel::k0(0.4, 2.0, z, &p, Sign::Plus).unwrap().norm());
            prop_assert!((km - kp.conj()).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn full_kernel_is_symmetric(p in params_strategy(), z in energy_strategy(), x in -3.0..8.0f64, y in -3.0..8.0f64) {
        let a = kernel::full_kernel(x, y, &p, z, Sign::Plus);
        let b = kernel::full_kernel(y, x, &p, z, Sign::Plus);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-12));
        }
    }

    #[test]
    fn full_kernel_jumps_at_the_interaction_sites(
        p in params_strategy(), z in energy_strategy(), y in -3.0..8.0f64, site in 0usize..2
    ) {
        // [∂ₓK](x_j) = α_j K(x_j, y)
        let xj = p.sites()[site];
        prop_assume!((xj - y).abs() > 0.05);
        let f = |x: f64| kernel::full_kernel(x, y, &p, z, Sign::Plus).unwrap();
        let jump = extrapolated_jump(&f, xj, 1e-4);
        let expected = p.alphas()[site] * f(xj);
        prop_assert!((jump - expected).norm() < 1e-6 * (1.0 + expected.norm()), "{} vs {}", jump, expected);
    }
}
