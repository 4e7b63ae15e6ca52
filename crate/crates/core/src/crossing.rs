//! Crossing classification and the critical field.
//!
//! Between the wells the potential is `-F x`, so the Agmon lengths of the
//! inner barrier `[x₁, x₂]` and the outer barrier `[x₂, -E/F]` have closed
//! forms:
//!
//! ```text
//! ρ_i = 2/(3F) [(-E - F x₁)^{3/2} - (-E - F x₂)^{3/2}]
//! ρ_e = 2/(3F) (-E - F x₂)^{3/2}
//! ```
//!
//! A type I crossing (imaginary parts cross, real parts avoid) is expected
//! when `ρ_i < 2ρ_e`; at the semiclassical critical field and `E = -α₁²/4`
//! this is the ratio rule `|α₁/α₂| < 3^{1/3}`.

use log::{debug, info};
use num_complex::Complex64;
use thiserror::Error;

use crate::kernel::{ModelParams, ParamError};
use crate::solver::{self, BranchTrack, Resonance, SolveError, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrossingError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("no outer barrier at E = {energy}: need E <= {threshold}")]
    NoBarrier { energy: f64, threshold: f64 },
    #[error("critical field needs |alpha1| > |alpha2|")]
    NonPositiveField,
    #[error("{component} E1 - E2 does not change sign on [{f_lo}, {f_hi}]")]
    NoSignChange { component: &'static str, f_lo: f64, f_hi: f64 },
    #[error("inconclusive: Im(E1 - E2) changes sign {im_changes} time(s), Re(E1 - E2) {re_changes} time(s); widen or refine the sweep")]
    Inconclusive { im_changes: usize, re_changes: usize },
    #[error("branch tracking failed at F = {field}: {reason}")]
    TrackingFailed { field: f64, reason: String },
    #[error("invalid bracket [{0}, {1}]")]
    Bracket(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingType {
    /// Imaginary parts cross, real parts avoid.
    TypeI,
    /// Real parts cross, imaginary parts avoid.
    TypeII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Semiclassical,
    Numeric,
}

/// `(ρ_i, ρ_e)` at real energy `energy`.
///
/// `energy` must lie at or below the top of the outer barrier, `-F x₂`.
pub fn agmon_lengths(params: &ModelParams, energy: f64) -> Result<(f64, f64), CrossingError> {
    let f = params.field;
    let threshold = -f * params.x2;
    if !(energy <= threshold) {
        return Err(CrossingError::NoBarrier { energy, threshold });
    }
    let depth = |x: f64| (-energy - f * x).max(0.0).powf(1.5);
    let scale = 2.0 / (3.0 * f);
    Ok((scale * (depth(params.x1) - depth(params.x2)), scale * depth(params.x2)))
}

/// Field at which the single-well levels `-α₁²/4` and `-α₂²/4 - F a` meet,
/// `(α₁² - α₂²)/(4a)`. Zero for equal strengths.
pub fn semiclassical_fc(params: &ModelParams) -> f64 {
    (params.alpha1 * params.alpha1 - params.alpha2 * params.alpha2) / (4.0 * params.separation())
}

/// Ratio `|α₁/α₂|` separating the two crossing types in the semiclassical limit.
pub fn threshold_ratio() -> f64 {
    3f64.cbrt()
}

/// Relative width of the band around [`threshold_ratio`] where the
/// semiclassical verdict is flagged as unreliable.
pub const NEAR_THRESHOLD_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalVerdict {
    pub crossing_type: CrossingType,
    /// `|α₁/α₂|`.
    pub ratio: f64,
    pub near_threshold: bool,
    pub f_critical: f64,
    pub rho_inner: f64,
    pub rho_outer: f64,
}

/// Compares `ρ_i` with `2ρ_e` at `E = -α₁²/4` and the semiclassical critical field.
pub fn classify_semiclassical(params: &ModelParams) -> Result<SemiclassicalVerdict, CrossingError> {
    let fc = semiclassical_fc(params);
    if !(fc > 0.0) {
        return Err(CrossingError::NonPositiveField);
    }
    let at_fc = ModelParams { field: fc, ..*params };
    let (rho_inner, rho_outer) = agmon_lengths(&at_fc, -params.alpha1 * params.alpha1 / 4.0 - fc * params.x1)?;
    let ratio = (params.alpha1 / params.alpha2).abs();
    let crossing_type = if rho_inner < 2.0 * rho_outer { CrossingType::TypeI } else { CrossingType::TypeII };
    Ok(SemiclassicalVerdict {
        crossing_type,
        ratio,
        near_threshold: (ratio / threshold_ratio() - 1.0).abs() <= NEAR_THRESHOLD_BAND,
        f_critical: fc,
        rho_inner,
        rho_outer,
    })
}

fn sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut count = 0;
    let mut last: Option<f64> = None;
    for v in values {
        if v == 0.0 {
            continue;
        }
        if let Some(prev) = last {
            if prev.signum() != v.signum() {
                count += 1;
            }
        }
        last = Some(v);
    }
    count
}

/// Classifies a branch track by which part of `E₁ - E₂` changes sign.
pub fn classify_numeric(track: &BranchTrack) -> Result<CrossingType, CrossingError> {
    let diffs: Vec<Complex64> = track.pairs().map(|(_, e1, e2)| e1 - e2).collect();
    let im_changes = sign_changes(diffs.iter().map(|d| d.im));
    let re_changes = sign_changes(diffs.iter().map(|d| d.re));
    match (im_changes > 0, re_changes > 0) {
        (true, false) => Ok(CrossingType::TypeI),
        (false, true) => Ok(CrossingType::TypeII),
        _ => Err(CrossingError::Inconclusive { im_changes, re_changes }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub crossing_type: CrossingType,
    /// Field at which the crossing component of `E₁ - E₂` vanishes.
    pub f_critical: f64,
    /// Both resonances at `f_critical`.
    pub e_common: (Resonance, Resonance),
    /// Agmon lengths at `E = Re E₁(f_critical)`.
    pub rho_inner: f64,
    pub rho_outer: f64,
    pub semiclassical_fc: f64,
    pub method: Method,
}

/// Which part of `E₁ - E₂` to drive to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Imaginary,
    Real,
}

impl Component {
    fn of(self, z: Complex64) -> f64 {
        match self {
            Component::Imaginary => z.im,
            Component::Real => z.re,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Component::Imaginary => "Im",
            Component::Real => "Re",
        }
    }
}

/// Grid points used to bracket the sign change before refinement.
const COARSE_POINTS: usize = 41;
const FIELD_TOLERANCE: f64 = 1e-8;
const MAX_REFINEMENTS: usize = 100;

struct Sample {
    f: f64,
    pair: (Resonance, Resonance),
}

impl Sample {
    fn g(&self, component: Component) -> f64 {
        component.of(self.pair.0.energy - self.pair.1.energy)
    }
}

/// Solves at `f`, seeding by linear extrapolation from the two known samples
/// closest in `F`, and checks that neither root jumped to the other branch.
fn solve_near(params: &ModelParams, f: f64, known: &[Sample], opts: &SolverOptions) -> Result<Sample, CrossingError> {
    let mut nearest: Vec<&Sample> = known.iter().collect();
    nearest.sort_by(|a, b| (a.f - f).abs().total_cmp(&(b.f - f).abs()));
    let (s0, s1) = (nearest[0], nearest[1]);
    let t = (f - s0.f) / (s1.f - s0.f);
    let lerp = |a: Complex64, b: Complex64| a + (b - a) * t;
    let seeds = (
        lerp(s0.pair.0.energy, s1.pair.0.energy),
        lerp(s0.pair.1.energy, s1.pair.1.energy),
    );
    let pair = solver::find_pair_from(&params.with_field(f)?, seeds, opts)?;
    let spacing = (seeds.0 - seeds.1).norm();
    if (pair.0.energy - seeds.0).norm() > 0.5 * spacing || (pair.1.energy - seeds.1).norm() > 0.5 * spacing {
        return Err(CrossingError::TrackingFailed { field: f, reason: "branch labels jumped during refinement".into() });
    }
    Ok(Sample { f, pair })
}

/// Locates the field in `bracket` where `component` of `E₁(F) - E₂(F)`
/// vanishes. Branches are labelled adiabatically (see [`solver::continued_pair`]),
/// bracketed on a coarse track and refined by secant steps safeguarded with
/// bisection.
pub fn locate_crossing(
    params: &ModelParams,
    bracket: (f64, f64),
    component: Component,
) -> Result<(f64, (Resonance, Resonance)), CrossingError> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(CrossingError::Bracket(lo, hi));
    }
    let opts = SolverOptions::default();
    let start = solver::continued_pair(&params.with_field(lo)?)?;
    let grid: Vec<f64> = (0..COARSE_POINTS).map(|k| lo + (hi - lo) * k as f64 / (COARSE_POINTS - 1) as f64).collect();
    let track = solver::track_branches_from(params, &grid, Some((start.0.energy, start.1.energy)), &opts)?;
    if let Some((k, reason)) = track.failures.first() {
        return Err(CrossingError::TrackingFailed { field: grid[*k], reason: reason.clone() });
    }
    let samples: Vec<Sample> = (0..grid.len())
        .map(|k| Sample { f: grid[k], pair: (track.branches[0][k].unwrap(), track.branches[1][k].unwrap()) })
        .collect();
    let k = (1..samples.len())
        .find(|&k| samples[k - 1].g(component).signum() != samples[k].g(component).signum())
        .ok_or(CrossingError::NoSignChange { component: component.name(), f_lo: lo, f_hi: hi })?;

    let mut known = vec![
        Sample { f: samples[k - 1].f, pair: samples[k - 1].pair },
        Sample { f: samples[k].f, pair: samples[k].pair },
    ];
    let (mut a, mut b) = (0usize, 1usize);
    for iteration in 0..MAX_REFINEMENTS {
        let (fa, ga) = (known[a].f, known[a].g(component));
        let (fb, gb) = (known[b].f, known[b].g(component));
        let width = fb - fa;
        if width.abs() < FIELD_TOLERANCE {
            break;
        }
        let secant = fb - gb * (fb - fa) / (gb - ga);
        let inside = secant > fa.min(fb) + 0.05 * width.abs() && secant < fa.max(fb) - 0.05 * width.abs();
        let f = if inside { secant } else { 0.5 * (fa + fb) };
        let sample = solve_near(params, f, &known, &opts)?;
        let g = sample.g(component);
        debug!("crossing refinement {iteration}: F = {f:.12}, g = {g:.3e}");
        known.push(sample);
        let new = known.len() - 1;
        if g == 0.0 {
            a = new;
            b = new;
            break;
        }
        if g.signum() == ga.signum() {
            a = new;
        } else {
            b = new;
        }
    }
    // the endpoint with the smaller |g|
    let best = if known[a].g(component).abs() <= known[b].g(component).abs() { a } else { b };
    info!("crossing of {} parts at F = {:.10}", component.name(), known[best].f);
    Ok((known[best].f, known[best].pair))
}

/// Critical field of a type I configuration, where `Im E₁ = Im E₂`.
pub fn critical_field(params: &ModelParams, bracket: (f64, f64)) -> Result<CrossingReport, CrossingError> {
    let (f_critical, pair) = locate_crossing(params, bracket, Component::Imaginary)?;
    let at = params.with_field(f_critical)?;
    let (rho_inner, rho_outer) = agmon_lengths(&at, pair.0.energy.re)?;
    Ok(CrossingReport {
        crossing_type: CrossingType::TypeI,
        f_critical,
        e_common: pair,
        rho_inner,
        rho_outer,
        semiclassical_fc: semiclassical_fc(params),
        method: Method::Numeric,
    })
}

/// Bracket of ±`width` (relative) around the semiclassical critical field.
pub fn default_bracket(params: &ModelParams, width: f64) -> Result<(f64, f64), CrossingError> {
    let fc = semiclassical_fc(params);
    if !(fc > 0.0) {
        return Err(CrossingError::NonPositiveField);
    }
    Ok((fc * (1.0 - width), fc * (1.0 + width)))
}
