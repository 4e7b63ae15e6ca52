//! Survival amplitude `A(t) = ⟨ψ₀|e^{-itH}ψ₀⟩` of a Gaussian initial state,
//! approximated for large `t` by the free evolution plus the two resonance
//! contributions,
//!
//! ```text
//! A(t) ≈ ⟨ψ₀|e^{-itH₀}ψ₀⟩ + c₁ e^{-itE₁} + c₂ e^{-itE₂}
//! c_j = R_j Σ_{n,m} M⁺_{nm}(E_j) q_{n,j} p_{m,j}
//! ```
//!
//! with `q_{n,j} = ∫ K₀⁺(x, x_n; E_j) ψ₀(x) dx` and `p_{m,j}` the same
//! integral with the kernel arguments swapped.

use std::f64::consts::PI;

use log::debug;
use num_complex::Complex64;
use thiserror::Error;

use crate::airy::Sign;
use crate::kernel::{self, KernelError, ModelParams, ParamError};
use crate::quadrature::{self, QuadratureError, QuadratureOptions};
use crate::solver::{self, Resonance, SolveError, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurvivalError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("Gaussian width must be positive and finite (got {0})")]
    Width(f64),
    #[error("q and p integrals disagree: {q} vs {p}")]
    Asymmetry { q: Complex64, p: Complex64 },
    #[error("truncation window did not converge (last relative change {change:.3e})")]
    Window { change: f64 },
    #[error("window [{t0}, {t1}] holds fewer than 3 samples")]
    EmptyWindow { t0: f64, t1: f64 },
    #[error("window of length {span} spans fewer than two pseudo-periods ({period})")]
    WindowTooShort { span: f64, period: f64 },
}

/// `ψ₀(x) = (2πσ²)^{-1/4} exp(-(x - center)²/(4σ²))`, normalized to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub center: f64,
    pub sigma: f64,
}

impl GaussianState {
    pub fn new(center: f64, sigma: f64) -> Result<Self, SurvivalError> {
        if !(sigma > 0.0 && sigma.is_finite()) || !center.is_finite() {
            return Err(SurvivalError::Width(sigma));
        }
        Ok(GaussianState { center, sigma })
    }

    pub fn value(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (2.0 * PI * s2).powf(-0.25) * (-(x - self.center).powi(2) / (4.0 * s2)).exp()
    }
}

/// Kernel overlaps with the initial state at one resonance energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlaps {
    pub q: [Complex64; 2],
    pub p: [Complex64; 2],
    /// Half-width of the integration window, in units of `σ`.
    pub window: f64,
}

const START_WINDOW: f64 = 8.0;
const WINDOW_STEP: f64 = 4.0;
const MAX_WINDOW: f64 = 40.0;
const WINDOW_TOLERANCE: f64 = 1e-10;

fn overlap_integrals(
    params: &ModelParams,
    energy: Complex64,
    state: &GaussianState,
    half_width: f64,
) -> Result<Overlaps, SurvivalError> {
    let (a, b) = (state.center - half_width * state.sigma, state.center + half_width * state.sigma);
    let sites = params.sites();
    let opts = QuadratureOptions { rel_tol: 1e-12, ..Default::default() };
    let mut q = [Complex64::new(0.0, 0.0); 2];
    let mut p = q;
    for n in 0..2 {
        let xn = sites[n];
        q[n] = quadrature::integrate::<SurvivalError, _>(
            |x| Ok(kernel::k0(x, xn, energy, params, Sign::Plus)? * state.value(x)),
            a,
            b,
            &sites,
            &opts,
        )?
        .value;
        p[n] = quadrature::integrate::<SurvivalError, _>(
            |y| Ok(kernel::k0(xn, y, energy, params, Sign::Plus)? * state.value(y)),
            a,
            b,
            &sites,
            &opts,
        )?
        .value;
        // ψ₀ is real and K₀ symmetric, so the two must agree
        if (q[n] - p[n]).norm() > 1e-12 * q[n].norm().max(1e-300) {
            return Err(SurvivalError::Asymmetry { q: q[n], p: p[n] });
        }
    }
    Ok(Overlaps { q, p, window: half_width })
}

/// Overlaps on the fixed window `center ± half_width·σ`.
pub fn qp_integrals_on(
    params: &ModelParams,
    energy: Complex64,
    state: &GaussianState,
    half_width: f64,
) -> Result<Overlaps, SurvivalError> {
    overlap_integrals(params, energy, state, half_width)
}

/// Overlaps `q_{n}` and `p_{n}` at `energy`. The window starts at `±8σ`
/// and widens by `4σ` until the values change by less than `1e-10`
/// (relative).
pub fn qp_integrals(params: &ModelParams, energy: Complex64, state: &GaussianState) -> Result<Overlaps, SurvivalError> {
    let mut current = overlap_integrals(params, energy, state, START_WINDOW)?;
    let mut width = START_WINDOW;
    loop {
        width += WINDOW_STEP;
        let next = overlap_integrals(params, energy, state, width)?;
        let change = (0..2)
            .map(|n| (next.q[n] - current.q[n]).norm() / next.q[n].norm().max(1e-300))
            .fold(0.0, f64::max);
        debug!("overlap window ±{width}σ: relative change {change:.3e}");
        current = next;
        if change < WINDOW_TOLERANCE {
            return Ok(current);
        }
        if width >= MAX_WINDOW {
            return Err(SurvivalError::Window { change });
        }
    }
}

/// `c_j` for one resonance.
pub fn coefficient(params: &ModelParams, resonance: &Resonance, state: &GaussianState) -> Result<Complex64, SurvivalError> {
    let m = kernel::m_matrix(params, resonance.energy, Sign::Plus)?;
    let ov = qp_integrals(params, resonance.energy, state)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..2 {
        for l in 0..2 {
            sum += m[n][l] * ov.q[n] * ov.p[l];
        }
    }
    Ok(resonance.residue * sum)
}

/// `(c₁, c₂)` for a resonance pair.
pub fn coefficients(
    params: &ModelParams,
    resonances: (&Resonance, &Resonance),
    state: &GaussianState,
) -> Result<(Complex64, Complex64), SurvivalError> {
    Ok((coefficient(params, resonances.0, state)?, coefficient(params, resonances.1, state)?))
}

/// `⟨ψ₀|e^{-itH₀}ψ₀⟩` for `H₀ = -d²/dx² - F x`, in closed form:
///
/// ```text
/// (1 + it/(2σ²))^{-1/2} exp(-F²σ²t²/2 + iF·center·t - iF²t³/12)
/// ```
pub fn free_term(state: &GaussianState, field: f64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let s2 = state.sigma * state.sigma;
    let spread = Complex64::new(1.0, t / (2.0 * s2)).sqrt().inv();
    let f2 = field * field;
    let phase = Complex64::new(-f2 * s2 * t * t / 2.0, field * state.center * t - f2 * t.powi(3) / 12.0);
    spread * phase.exp()
}

/// `c₁e^{-itE₁} + c₂e^{-itE₂}`.
pub fn resonance_sum(energies: (Complex64, Complex64), coefficients: (Complex64, Complex64), t: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    coefficients.0 * (-i * t * energies.0).exp() + coefficients.1 * (-i * t * energies.1).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalSeries {
    pub times: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub resonance_part: Vec<Complex64>,
    pub free_part: Vec<Complex64>,
    pub coefficients: (Complex64, Complex64),
    pub resonances: (Resonance, Resonance),
}

impl SurvivalSeries {
    /// `2π/|Re E₂ - Re E₁|`.
    pub fn pseudo_period(&self) -> f64 {
        pseudo_period(&self.resonances)
    }
}

pub fn pseudo_period(resonances: &(Resonance, Resonance)) -> f64 {
    2.0 * PI / (resonances.1.energy.re - resonances.0.energy.re).abs()
}

/// `n` points spaced evenly in `log t` over `[t0, t1]`.
pub fn log_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    let (l0, l1) = (t0.ln(), t1.ln());
    let mut v: Vec<f64> = (0..n).map(|k| (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp()).collect();
    v[0] = t0;
    v[n - 1] = t1;
    v
}

pub fn linear_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()
}

/// 2000 log-spaced points on `[10², 10⁴]`.
pub fn default_times() -> Vec<f64> {
    log_spaced(1e2, 1e4, 2000)
}

/// Series from known resonances and coefficients.
pub fn assemble(
    state: &GaussianState,
    field: f64,
    resonances: (Resonance, Resonance),
    coefficients: (Complex64, Complex64),
    times: &[f64],
) -> SurvivalSeries {
    let energies = (resonances.0.energy, resonances.1.energy);
    let free_part: Vec<Complex64> = times.iter().map(|&t| free_term(state, field, t)).collect();
    let resonance_part: Vec<Complex64> = times.iter().map(|&t| resonance_sum(energies, coefficients, t)).collect();
    let amplitude = free_part.iter().zip(&resonance_part).map(|(f, r)| f + r).collect();
    SurvivalSeries { times: times.to_vec(), amplitude, resonance_part, free_part, coefficients, resonances }
}

/// Survival amplitude at `params.field`. Resonances are labelled
/// adiabatically in `F` ([`solver::continued_pair`]).
pub fn amplitude(params: &ModelParams, state: &GaussianState, times: &[f64]) -> Result<SurvivalSeries, SurvivalError> {
    let resonances = solver::continued_pair(params)?;
    let coefficients = coefficients(params, (&resonances.0, &resonances.1), state)?;
    Ok(assemble(state, params.field, resonances, coefficients, times))
}

/// As [`amplitude`], with resonances found from the given seeds.
pub fn amplitude_from_seeds(
    params: &ModelParams,
    state: &GaussianState,
    seeds: (Complex64, Complex64),
    times: &[f64],
) -> Result<SurvivalSeries, SurvivalError> {
    let resonances = solver::find_pair_from(params, seeds, &SolverOptions::default())?;
    let coefficients = coefficients(params, (&resonances.0, &resonances.1), state)?;
    Ok(assemble(state, params.field, resonances, coefficients, times))
}

/// `e^{-t|Im E₁|} |c₁ + c₂e^{-iωt}|` with `ω = Re E₂ - Re E₁`.
pub fn beat_envelope(resonances: (Complex64, Complex64), coefficients: (Complex64, Complex64), t: f64) -> f64 {
    let omega = resonances.1.re - resonances.0.re;
    let beat = coefficients.0 + coefficients.1 * Complex64::from_polar(1.0, -omega * t);
    (-t * resonances.0.im.abs()).exp() * beat.norm()
}

fn window_samples(series: &SurvivalSeries, window: (f64, f64)) -> Result<Vec<(f64, f64)>, SurvivalError> {
    let samples: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.amplitude)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, a)| (*t, a.norm()))
        .collect();
    if samples.len() < 3 {
        return Err(SurvivalError::EmptyWindow { t0: window.0, t1: window.1 });
    }
    Ok(samples)
}

/// Least-squares slope of `log|A|` against `t` over `window`.
pub fn decay_rate(series: &SurvivalSeries, window: (f64, f64)) -> Result<f64, SurvivalError> {
    let samples = window_samples(series, window)?;
    Ok(-fit_line(&samples).1)
}

/// `(intercept, slope)` of the least-squares line through `(t, ln y)`.
fn fit_line(samples: &[(f64, f64)]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean_t = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for &(t, y) in samples {
        stt += (t - mean_t).powi(2);
        sty += (t - mean_t) * (y.ln() - mean_y);
    }
    let slope = sty / stt;
    (mean_y - slope * mean_t, slope)
}

/// Beating contrast `(max s - min s)/mean s` of `s(t) = |A(t)| e^{rt}`, `r` the
/// fitted decay rate over `window`. The mean is the plain sample average.
pub fn oscillation_metric(series: &SurvivalSeries, window: (f64, f64)) -> Result<f64, SurvivalError> {
    let period = series.pseudo_period();
    let span = window.1 - window.0;
    if period.is_finite() && span < 2.0 * period {
        return Err(SurvivalError::WindowTooShort { span, period });
    }
    let samples = window_samples(series, window)?;
    let (_, slope) = fit_line(&samples);
    let s: Vec<f64> = samples.iter().map(|&(t, y)| y * (-slope * (t - window.0)).exp()).collect();
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    Ok((max - min) / mean)
}

/// Times of the local minima of `|A(t)|` inside `window`, each refined by a
/// parabola through the neighbouring samples.
pub fn local_minima(series: &SurvivalSeries, window: (f64, f64)) -> Result<Vec<f64>, SurvivalError> {
    let s = window_samples(series, window)?;
    let mut minima = Vec::new();
    for k in 1..s.len() - 1 {
        let ((t0, y0), (t1, y1), (t2, y2)) = (s[k - 1], s[k], s[k + 1]);
        if y1 < y0 && y1 <= y2 {
            // vertex of the parabola through the three points
            let num = (t1 - t0).powi(2) * (y1 - y2) - (t1 - t2).powi(2) * (y1 - y0);
            let den = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0);
            let vertex = if den != 0.0 { t1 - 0.5 * num / den } else { t1 };
            minima.push(if vertex > t0 && vertex < t2 { vertex } else { t1 });
        }
    }
    Ok(minima)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Branch;

    fn res(e: Complex64) -> Resonance {
        Resonance { energy: e, residue: Complex64::new(1.0, 0.0), label: Branch::One }
    }

    #[test]
    fn state_is_normalized() {
        let st = GaussianState::new(0.3, 0.5).unwrap();
        let norm = quadrature::integrate::<QuadratureError, _>(
            |x| Ok(Complex64::new(st.value(x).powi(2), 0.0)),
            -10.0,
            10.0,
            &[],
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert!((norm.value.re - 1.0).abs() < 1e-12);
        assert!(GaussianState::new(0.0, 0.0).is_err());
    }

    #[test]
    fn free_term_limits() {
        let st = GaussianState::new(0.0, 0.5).unwrap();
        assert_eq!(free_term(&st, 0.19, 0.0), Complex64::new(1.0, 0.0));
        assert!((free_term(&st, 0.19, 1e-9) - 1.0).norm() < 1e-8);
        for t in [0.1, 1.0, 37.0] {
            let spread = (1.0 + t * t / (4.0 * 0.5f64.powi(4))).powf(-0.25);
            assert!((free_term(&st, 0.0, t).norm() - spread).abs() < 1e-15);
        }
    }

    #[test]
    fn envelope_algebra() {
        let c = Complex64::new(0.3, 0.1);
        let e = (Complex64::new(-2.0, -1e-3), Complex64::new(-1.9, -1e-3));
        let omega = 0.1;
        assert!(beat_envelope(e, (c, c), PI / omega) < 1e-15);
        let t = 2.0 * PI / omega * 3.0;
        let expected = (-t * 1e-3f64).exp() * (c + c).norm();
        assert!((beat_envelope(e, (c, c), t) - expected).abs() < 1e-12);
    }

    #[test]
    fn single_exponential_has_no_contrast() {
        let e = (Complex64::new(-2.0, -1e-3), Complex64::new(-1.0, -5.0));
        let st = GaussianState::new(0.0, 0.5).unwrap();
        let mut s = assemble(&st, 0.1, (res(e.0), res(e.1)), (Complex64::new(0.7, 0.0), Complex64::new(0.0, 0.0)), &default_times());
        s.amplitude = s.resonance_part.clone();
        assert!(oscillation_metric(&s, (1e2, 1e4)).unwrap() < 1e-9);
    }

    #[test]
    fn two_tone_contrast() {
        // |1 + e^{-iωt}| = 2|cos(ωt/2)|: max 2, min 0, mean 4/π
        let e = (Complex64::new(-2.0, -1e-3), Complex64::new(-1.9, -1e-3));
        let c = Complex64::new(0.5, 0.0);
        let st = GaussianState::new(0.0, 0.5).unwrap();
        let times = linear_spaced(1e2, 1e4, 200_000);
        let mut s = assemble(&st, 0.1, (res(e.0), res(e.1)), (c, c), &times);
        s.amplitude = s.resonance_part.clone();
        let contrast = oscillation_metric(&s, (1e2, 1e4)).unwrap();
        assert!((contrast - PI / 2.0).abs() < 1e-3, "{contrast}");
        assert!(matches!(oscillation_metric(&s, (1e2, 1.5e2)), Err(SurvivalError::WindowTooShort { .. })));
    }

    #[test]
    fn minima_refinement() {
        let e = (Complex64::new(-2.0, 0.0), Complex64::new(-1.9, 0.0));
        let st = GaussianState::new(0.0, 0.5).unwrap();
        let c = (Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0));
        let mut s = assemble(&st, 0.1, (res(e.0), res(e.1)), c, &linear_spaced(0.0, 200.0, 401));
        s.amplitude = s.resonance_part.clone();
        let minima = local_minima(&s, (0.0, 200.0)).unwrap();
        // |1 + 0.5e^{-iωt}| is smallest at ωt = π (mod 2π)
        let period = 2.0 * PI / 0.1;
        for (k, t) in minima.iter().enumerate() {
            assert!((t - (k as f64 + 0.5) * period).abs() < 0.05, "{t}");
        }
        assert_eq!(minima.len(), 3);
    }

    #[test]
    fn grids() {
        let g = log_spaced(1e2, 1e4, 3);
        assert_eq!((g[0], g[2]), (1e2, 1e4));
        assert!((g[1] - 1e3).abs() < 1e-9);
        assert_eq!(default_times().len(), 2000);
        assert_eq!(linear_spaced(0.0, 1.0, 2), vec![0.0, 1.0]);
    }
}
