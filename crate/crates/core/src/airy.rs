//! Airy functions of complex argument.
//!
//! `Ai` is evaluated on the whole plane by one of three routes, chosen from
//! `ζ = (2/3) z^{3/2}`:
//!
//! * Maclaurin series when the series does not lose more than a few digits
//!   to cancellation (`|ζ| + Re ζ` small) and `|z|` is below the asymptotic
//!   radius;
//! * the large-argument expansion in the sector `|arg z| ≤ 2π/3` for
//!   `|z| ≥ ASYMPTOTIC_RADIUS`;
//! * Taylor integration of `w'' = z w` inward from the asymptotic region,
//!   along the path on which `Re ζ` decreases monotonically, so that `Ai`
//!   is the growing solution in the direction of integration.
//!
//! Outside `|arg z| ≤ 2π/3` the connection formula
//! `Ai(z) = -ω Ai(ωz) - ω² Ai(ω² z)` maps both terms back into the sector.
//! `Bi` and the outgoing combinations `Ci± = Bi ± i Ai` follow from
//! `Ci±(z) = 2 e^{±iπ/6} Ai(e^{±2πi/3} z)`, which evaluates `Ci±` with a
//! single `Ai` call and no cancellation between `Bi` and `i Ai`.
//!
//! Every evaluation is carried internally as `mantissa · e^{exponent}` so that
//! products such as `Ci(u) Ai(v)` stay representable when the factors do not.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

/// Ai(0).
pub const AI_ZERO: f64 = 0.355_028_053_887_817_24;
/// -Ai'(0).
pub const NEG_AI_PRIME_ZERO: f64 = 0.258_819_403_792_806_8;

const ASYMPTOTIC_RADIUS: f64 = 9.0;
// Largest |ζ| + Re ζ for which the Maclaurin series is used; the series
// loses roughly exp() of this many units in the last place.
const SERIES_LOSS_LIMIT: f64 = 4.0;
const INTEGRATION_STEP: f64 = 0.5;
const LN_MAX: f64 = 709.0;

/// Selects `Ci⁺ = Bi + i Ai` or `Ci⁻ = Bi - i Ai`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AiryError {
    #[error("Airy argument {0} is not finite")]
    NonFinite(Complex64),
    #[error("Airy function at {z} is out of floating-point range (ln|value| = {ln_magnitude:.1})")]
    OutOfRange { z: Complex64, ln_magnitude: f64 },
}

/// A function value and derivative sharing a common scale:
/// `f = value · e^{exponent}`, `f' = deriv · e^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryScaled {
    pub value: Complex64,
    pub deriv: Complex64,
    pub exponent: f64,
}

impl AiryScaled {
    fn unscaled(value: Complex64, deriv: Complex64) -> Self {
        AiryScaled { value, deriv, exponent: 0.0 }
    }

    fn times(self, c: Complex64) -> Self {
        AiryScaled { value: self.value * c, deriv: self.deriv * c, exponent: self.exponent }
    }

    /// `a·self + b·other`, with the result carried at the larger exponent.
    fn combine(self, a: Complex64, other: AiryScaled, b: Complex64) -> Self {
        let exponent = self.exponent.max(other.exponent);
        let s = (self.exponent - exponent).exp();
        let t = (other.exponent - exponent).exp();
        AiryScaled {
            value: a * self.value * s + b * other.value * t,
            deriv: a * self.deriv * s + b * other.deriv * t,
            exponent,
        }
    }

    /// `ln |f|`, or `-inf` for an exact zero.
    pub fn ln_abs_value(&self) -> f64 {
        self.value.norm().ln() + self.exponent
    }

    pub fn value_at(&self, z: Complex64) -> Result<Complex64, AiryError> {
        unscale(self.value, self.exponent, z)
    }

    pub fn deriv_at(&self, z: Complex64) -> Result<Complex64, AiryError> {
        unscale(self.deriv, self.exponent, z)
    }
}

/// `mantissa · e^{exponent}` as a plain complex number; underflow goes to zero.
pub(crate) fn unscale(mantissa: Complex64, exponent: f64, z: Complex64) -> Result<Complex64, AiryError> {
    let norm = mantissa.norm();
    if norm == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let ln_magnitude = norm.ln() + exponent;
    if ln_magnitude > LN_MAX {
        return Err(AiryError::OutOfRange { z, ln_magnitude });
    }
    if exponent.abs() < 600.0 {
        Ok(mantissa * exponent.exp())
    } else {
        // split so neither factor over- or underflows on its own
        let half = 0.5 * exponent;
        Ok(mantissa * half.exp() * half.exp())
    }
}

fn check_finite(z: Complex64) -> Result<(), AiryError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(AiryError::NonFinite(z))
    }
}

fn omega() -> Complex64 {
    Complex64::new(-0.5, 0.5 * 3f64.sqrt())
}

fn zeta_of(z: Complex64) -> Complex64 {
    z * z.sqrt() * (2.0 / 3.0)
}

fn series_is_accurate(z: Complex64, zeta: Complex64) -> bool {
    z.norm() <= ASYMPTOTIC_RADIUS && zeta.norm() + zeta.re <= SERIES_LOSS_LIMIT
}

fn ai_maclaurin(z: Complex64) -> AiryScaled {
    let z3 = z * z * z;
    // f = Σ 3^k (1/3)_k z^{3k}/(3k)!,  g = Σ 3^k (2/3)_k z^{3k+1}/(3k+1)!
    let mut tf = Complex64::new(1.0, 0.0);
    let mut tg = z;
    let mut tdf = z * z * 0.5;
    let mut tdg = Complex64::new(1.0, 0.0);
    let mut f = tf;
    let mut g = tg;
    let mut df = tdf;
    let mut dg = tdg;
    for k in 1..200 {
        let kf = k as f64;
        tf *= z3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        tg *= z3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        tdg *= z3 / ((3.0 * kf) * (3.0 * kf - 2.0));
        if k > 1 {
            tdf *= z3 / ((3.0 * kf - 1.0) * (3.0 * kf - 3.0));
        }
        f += tf;
        g += tg;
        dg += tdg;
        if k > 1 {
            df += tdf;
        }
        let small = tf.norm() + tg.norm() <= 1e-17 * (f.norm() + g.norm())
            && tdf.norm() + tdg.norm() <= 1e-17 * (df.norm() + dg.norm());
        if small {
            break;
        }
    }
    AiryScaled::unscaled(AI_ZERO * f - NEG_AI_PRIME_ZERO * g, AI_ZERO * df - NEG_AI_PRIME_ZERO * dg)
}

/// Large-|z| expansion of `Ai`, valid for `|arg z| ≤ 2π/3` (and a little beyond).
fn ai_asymptotic(z: Complex64) -> AiryScaled {
    let sqrt_z = z.sqrt();
    let zeta = z * sqrt_z * (2.0 / 3.0);
    let inv = 1.0 / zeta;

    let mut sum_u = Complex64::new(1.0, 0.0);
    let mut sum_v = Complex64::new(1.0, 0.0);
    let mut u = 1.0;
    let mut power = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        power *= -inv;
        let term_u = power * u;
        let size = term_u.norm();
        // stop at the smallest term of the divergent series
        if size > last {
            break;
        }
        sum_u += term_u;
        sum_v += power * v;
        if size < 1e-17 {
            break;
        }
        last = size;
    }

    let quarter = sqrt_z.sqrt();
    let phase = Complex64::from_polar(1.0, -zeta.im);
    let norm = 0.5 / PI.sqrt();
    AiryScaled {
        value: phase * sum_u * norm / quarter,
        deriv: -phase * quarter * sum_v * norm,
        exponent: -zeta.re,
    }
}

/// One Taylor step of `w'' = z w` from `z0` to `z0 + h`.
fn taylor_step(w: Complex64, dw: Complex64, z0: Complex64, h: Complex64) -> (Complex64, Complex64) {
    let mut a_prev = w; // a_{n-1}
    let mut a_cur = dw; // a_n
    let mut value = w + dw * h;
    let mut deriv = dw;
    let mut hp = h; // h^n
    let mut a_next = z0 * w * 0.5; // a_2
    let mut n = 1usize;
    let mut quiet = 0;
    while n < 200 {
        // a_next = a_{n+1}
        let nf = n as f64;
        let hp_next = hp * h;
        let term = a_next * hp_next;
        value += term;
        deriv += a_next * hp * (nf + 1.0);
        if term.norm() <= 1e-18 * value.norm() && (a_next * hp * (nf + 1.0)).norm() <= 1e-18 * deriv.norm() {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        // a_{n+2} = (z0 a_n + a_{n-1}) / ((n+2)(n+1))
        let a_after = (z0 * a_cur + a_prev) / ((nf + 2.0) * (nf + 1.0));
        a_prev = a_cur;
        a_cur = a_next;
        a_next = a_after;
        hp = hp_next;
        n += 1;
    }
    (value, deriv)
}

/// Integrates inward from the asymptotic region along `ζ(s) = ζ_z + s`.
fn ai_integrated(z: Complex64, zeta: Complex64) -> AiryScaled {
    let target = (2.0 / 3.0) * ASYMPTOTIC_RADIUS.powf(1.5) + 0.5;
    let reach = (target * target - zeta.im * zeta.im).max(0.0).sqrt();
    let shift = (reach - zeta.re).max(0.0);
    let path = |s: f64| -> Complex64 { ((zeta + s) * 1.5).powf(2.0 / 3.0) };

    let far = path(shift);
    let start = ai_asymptotic(far);
    // carry the result at exponent -Re ζ_z
    let rescale = (start.exponent + zeta.re).exp();
    let mut w = start.value * rescale;
    let mut dw = start.deriv * rescale;

    let steps = (shift / INTEGRATION_STEP).ceil().max(1.0) as usize;
    let mut here = far;
    for k in (0..steps).rev() {
        let next = if k == 0 { z } else { path(shift * k as f64 / steps as f64) };
        let (nw, ndw) = taylor_step(w, dw, here, next - here);
        w = nw;
        dw = ndw;
        here = next;
    }
    AiryScaled { value: w, deriv: dw, exponent: -zeta.re }
}

/// Ai for `|arg z| ≤ 2π/3`.
fn ai_in_sector(z: Complex64) -> AiryScaled {
    let zeta = zeta_of(z);
    if series_is_accurate(z, zeta) {
        ai_maclaurin(z)
    } else if z.norm() >= ASYMPTOTIC_RADIUS {
        ai_asymptotic(z)
    } else {
        ai_integrated(z, zeta)
    }
}

fn ai_parts(z: Complex64) -> AiryScaled {
    let zeta = zeta_of(z);
    if series_is_accurate(z, zeta) {
        return ai_maclaurin(z);
    }
    if z.arg().abs() <= 2.0 * PI / 3.0 {
        return ai_in_sector(z);
    }
    let w = omega();
    let w2 = w * w;
    let first = ai_in_sector(w * z);
    let second = ai_in_sector(w2 * z);
    // Ai(z) = -ω Ai(ωz) - ω² Ai(ω²z); the derivative picks up one more factor
    let value = first.combine(-w, second, -w2);
    let deriv = first.combine(-w2, second, -w);
    AiryScaled { value: value.value, deriv: deriv.deriv, exponent: value.exponent }
}

/// `Ai(z)` and `Ai'(z)` in scaled form.
pub fn ai_scaled(z: Complex64) -> Result<AiryScaled, AiryError> {
    check_finite(z)?;
    Ok(ai_parts(z))
}

/// `Ci±(z)` and its derivative in scaled form.
pub fn ci_scaled(z: Complex64, sign: Sign) -> Result<AiryScaled, AiryError> {
    check_finite(z)?;
    let rot = match sign {
        Sign::Plus => omega(),
        Sign::Minus => omega().conj(),
    };
    let pref = Complex64::from_polar(2.0, sign.as_f64() * PI / 6.0);
    let a = ai_parts(rot * z);
    Ok(AiryScaled { value: a.value * pref, deriv: a.deriv * pref * rot, exponent: a.exponent })
}

/// `Bi(z)` and `Bi'(z)` in scaled form, as `(Ci⁺ + Ci⁻)/2`.
pub fn bi_scaled(z: Complex64) -> Result<AiryScaled, AiryError> {
    let plus = ci_scaled(z, Sign::Plus)?;
    let minus = ci_scaled(z, Sign::Minus)?;
    let half = Complex64::new(0.5, 0.0);
    Ok(plus.times(half).combine(Complex64::new(1.0, 0.0), minus, half))
}

pub fn airy_ai(z: Complex64) -> Result<Complex64, AiryError> {
    ai_scaled(z)?.value_at(z)
}

pub fn airy_ai_prime(z: Complex64) -> Result<Complex64, AiryError> {
    ai_scaled(z)?.deriv_at(z)
}

pub fn airy_bi(z: Complex64) -> Result<Complex64, AiryError> {
    bi_scaled(z)?.value_at(z)
}

pub fn airy_bi_prime(z: Complex64) -> Result<Complex64, AiryError> {
    bi_scaled(z)?.deriv_at(z)
}

/// `Ci±(z) = Bi(z) ± i Ai(z)`.
pub fn ci(z: Complex64, sign: Sign) -> Result<Complex64, AiryError> {
    ci_scaled(z, sign)?.value_at(z)
}

pub fn ci_prime(z: Complex64, sign: Sign) -> Result<Complex64, AiryError> {
    ci_scaled(z, sign)?.deriv_at(z)
}
