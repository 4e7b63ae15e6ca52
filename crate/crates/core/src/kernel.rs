//! Resolvent kernels for `H = -d²/dx² + α₁δ(x - x₁) + α₂δ(x - x₂) - F x`.
//!
//! The free Stark kernel is
//!
//! ```text
//! K₀±(x, y; z) = π F^{-1/3} Ci±(s(max(x, y))) Ai(s(min(x, y))),   s(x) = -(F x + z) / F^{2/3}
//! ```
//!
//! and the point interactions enter through the 2×2 matrix of kernel values
//! at the interaction sites, `k±_{jℓ}(z) = K₀±(x_j, x_ℓ; z)`.
//!
//! Analytic continuation: `Ai` and `Ci±` are entire, so the formula for
//! `K₀⁺` written down for `Im z > 0` is already its continuation to the whole
//! plane. Evaluating `D⁺` at `Im z < 0` is just evaluating the same
//! expression there; no sheet bookkeeping is needed, and resonances are plain
//! zeros of an entire function.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::airy::{self, AiryError, AiryScaled, Sign};

/// `|D| below this` is treated as sitting on a pole of the full resolvent.
pub const POLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("delta strengths must satisfy alpha1 <= alpha2 < 0 (got alpha1 = {alpha1}, alpha2 = {alpha2})")]
    Strengths { alpha1: f64, alpha2: f64 },
    #[error("positions must satisfy x1 < x2 (got x1 = {x1}, x2 = {x2})")]
    Positions { x1: f64, x2: f64 },
    #[error("field strength must be positive (got {0})")]
    Field(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Airy(#[from] AiryError),
    #[error("z = {z} is numerically a resonance (|D| = {d_abs:.3e})")]
    Pole { z: Complex64, d_abs: f64 },
}

/// Physical parameters of the two-delta Stark Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub x1: f64,
    pub x2: f64,
    pub field: f64,
}

impl ModelParams {
    pub fn new(alpha1: f64, alpha2: f64, x1: f64, x2: f64, field: f64) -> Result<Self, ParamError> {
        let p = ModelParams { alpha1, alpha2, x1, x2, field };
        p.validate()?;
        Ok(p)
    }

    /// Wells at `x₁ = 0` and `x₂ = a`.
    pub fn with_separation(alpha1: f64, alpha2: f64, a: f64, field: f64) -> Result<Self, ParamError> {
        Self::new(alpha1, alpha2, 0.0, a, field)
    }

    /// Checks the parameter invariants. `alpha1 == alpha2` is accepted as the
    /// degenerate symmetric configuration.
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("x1", self.x1),
            ("x2", self.x2),
            ("field", self.field),
        ] {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
        }
        if !(self.alpha1 <= self.alpha2 && self.alpha2 < 0.0) {
            return Err(ParamError::Strengths { alpha1: self.alpha1, alpha2: self.alpha2 });
        }
        if !(self.x1 < self.x2) {
            return Err(ParamError::Positions { x1: self.x1, x2: self.x2 });
        }
        if !(self.field > 0.0) {
            return Err(ParamError::Field(self.field));
        }
        Ok(())
    }

    pub fn with_field(&self, field: f64) -> Result<Self, ParamError> {
        Self::new(self.alpha1, self.alpha2, self.x1, self.x2, field)
    }

    pub fn separation(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn alphas(&self) -> [f64; 2] {
        [self.alpha1, self.alpha2]
    }

    pub fn sites(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    /// External potential `V_e(x) = -F x`; this is `V` off the delta supports.
    pub fn external_potential(&self, x: f64) -> f64 {
        -self.field * x
    }

    fn prefactor(&self) -> f64 {
        PI / self.field.cbrt()
    }

    fn airy_argument(&self, x: f64, z: Complex64) -> Complex64 {
        -(z + self.field * x) / self.field.powf(2.0 / 3.0)
    }
}

/// The four values `k_{jℓ} = K₀(x_j, x_ℓ; z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMatrix {
    pub entries: [[Complex64; 2]; 2],
}

impl KMatrix {
    /// Entry with zero-based indices.
    pub fn get(&self, j: usize, l: usize) -> Complex64 {
        self.entries[j][l]
    }
}

fn product(params: &ModelParams, outer: &AiryScaled, inner: &AiryScaled, z: Complex64) -> Result<Complex64, AiryError> {
    airy::unscale(params.prefactor() * outer.value * inner.value, outer.exponent + inner.exponent, z)
}

/// Free Stark resolvent kernel `K₀±(x, y; z)`.
pub fn k0(x: f64, y: f64, z: Complex64, params: &ModelParams, sign: Sign) -> Result<Complex64, KernelError> {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    let outer = airy::ci_scaled(params.airy_argument(hi, z), sign)?;
    let inner = airy::ai_scaled(params.airy_argument(lo, z))?;
    Ok(product(params, &outer, &inner, z)?)
}

/// Kernel values at the interaction sites. Uses four Airy evaluations: `Ci`
/// and `Ai` at each of the two site arguments.
pub fn kmatrix(params: &ModelParams, z: Complex64, sign: Sign) -> Result<KMatrix, KernelError> {
    let s1 = params.airy_argument(params.x1, z);
    let s2 = params.airy_argument(params.x2, z);
    let ci1 = airy::ci_scaled(s1, sign)?;
    let ci2 = airy::ci_scaled(s2, sign)?;
    let ai1 = airy::ai_scaled(s1)?;
    let ai2 = airy::ai_scaled(s2)?;
    let k11 = product(params, &ci1, &ai1, z)?;
    let k22 = product(params, &ci2, &ai2, z)?;
    // x1 < x2, so the outgoing factor sits at x2
    let k12 = product(params, &ci2, &ai1, z)?;
    Ok(KMatrix { entries: [[k11, k12], [k12, k22]] })
}

fn d_from(params: &ModelParams, k: &KMatrix) -> Complex64 {
    let (a1, a2) = (params.alpha1, params.alpha2);
    (1.0 + a1 * k.get(0, 0)) * (1.0 + a2 * k.get(1, 1)) / (a1 * a2) - k.get(0, 1) * k.get(1, 0)
}

fn m_from(params: &ModelParams, k: &KMatrix) -> [[Complex64; 2]; 2] {
    [
        [1.0 / params.alpha2 + k.get(1, 1), -k.get(0, 1)],
        [-k.get(1, 0), 1.0 / params.alpha1 + k.get(0, 0)],
    ]
}

/// Krein determinant `D±(z) = [1 + α₁k₁₁][1 + α₂k₂₂]/(α₁α₂) - k₁₂k₂₁`.
pub fn d_function(params: &ModelParams, z: Complex64, sign: Sign) -> Result<Complex64, KernelError> {
    Ok(d_from(params, &kmatrix(params, z, sign)?))
}

/// `M±(z) = [[1/α₂ + k₂₂, -k₁₂], [-k₂₁, 1/α₁ + k₁₁]]`, the adjugate of
/// `diag(1/α) + k`.
pub fn m_matrix(params: &ModelParams, z: Complex64, sign: Sign) -> Result<[[Complex64; 2]; 2], KernelError> {
    Ok(m_from(params, &kmatrix(params, z, sign)?))
}

/// Full resolvent kernel of `H`,
/// `K(x, y; z) = K₀(x, y; z) - Σ K₀(x, x_n) M_{nm} K₀(x_m, y) / D(z)`.
///
/// Fails with [`KernelError::Pole`] when `|D(z)| < POLE_TOLERANCE`.
pub fn full_kernel(x: f64, y: f64, params: &ModelParams, z: Complex64, sign: Sign) -> Result<Complex64, KernelError> {
    let k = kmatrix(params, z, sign)?;
    let d = d_from(params, &k);
    if d.norm() < POLE_TOLERANCE {
        return Err(KernelError::Pole { z, d_abs: d.norm() });
    }
    let m = m_from(params, &k);
    let sites = params.sites();
    let left = [k0(x, sites[0], z, params, sign)?, k0(x, sites[1], z, params, sign)?];
    let right = [k0(sites[0], y, z, params, sign)?, k0(sites[1], y, z, params, sign)?];
    let mut correction = Complex64::new(0.0, 0.0);
    for n in 0..2 {
        for l in 0..2 {
            correction += left[n] * m[n][l] * right[l];
        }
    }
    Ok(k0(x, y, z, params, sign)? - correction / d)
}
