use std::f64::consts::PI;

use resonance_core::quadrature::{integrate, QuadratureError, QuadratureOptions};
use resonance_core::survival::GaussianState;
use resonance_core::Complex64;

/// `∫∫ ψ₀(x) U₀(x, y; t) ψ₀(y) dx dy` with
/// `U₀ = exp(i[(x - y)²/(4t) + Ft(x + y)/2 - F²t³/12]) / √(4πit)`.
pub fn free_term_by_quadrature(st: &GaussianState, field: f64, t: f64) -> Complex64 {
    let half = 14.0 * st.sigma;
    let (a, b) = (st.center - half, st.center + half);
    let opts = QuadratureOptions { rel_tol: 1e-12, abs_tol: 1e-13, max_intervals: 4000 };
    let norm = (Complex64::new(0.0, 4.0 * PI * t)).sqrt();
    let outer = integrate::<QuadratureError, _>(
        |x| {
            let inner = integrate::<QuadratureError, _>(
                |y| {
                    let phase = (x - y).powi(2) / (4.0 * t) + field * t * (x + y) / 2.0 - field * field * t.powi(3) / 12.0;
                    Ok(Complex64::from_polar(st.value(y), phase))
                },
                a,
                b,
                &[x],
                &opts,
            )?;
            Ok(inner.value * st.value(x))
        },
        a,
        b,
        &[st.center],
        &opts,
    )
    .unwrap();
    outer.value / norm
}
