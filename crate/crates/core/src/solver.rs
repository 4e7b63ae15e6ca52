//! Resonance search: zeros of the continued Krein determinant `D⁺` in the
//! lower half-plane.
//!
//! Roots are polished with Newton's method, the derivative taken by central
//! differences, falling back to Muller's method when Newton keeps failing to
//! reduce `|D⁺|`. The second resonance of a pair is searched on the deflated
//! function `D⁺(z)/(z - E₁)`, because the two roots can differ by many orders
//! of magnitude in width and sit close together in the complex plane.

use std::f64::consts::PI;

use log::{debug, warn};
use num_complex::Complex64;
use thiserror::Error;

use crate::airy::Sign;
use crate::kernel::{self, KernelError, ModelParams, ParamError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("no convergence from seed {seed} after {iterations} iterations (last iterate {last})")]
    NoConvergence { seed: Complex64, iterations: usize, last: Complex64 },
    #[error("iteration converged to {energy} in the upper half-plane; the seed is not near a resonance")]
    UpperHalfPlane { energy: Complex64 },
    #[error("derivative of D+ nearly vanishes at {energy} (|D+'| = {derivative:.3e}); near-double zero")]
    Degenerate { energy: Complex64, derivative: f64 },
    #[error("resonances {first} and {second} coincide; exact degeneracy candidate")]
    CoincidentRoots { first: Complex64, second: Complex64 },
    #[error("D+ vanishes on the counting contour (after {retries} jittered retries)")]
    ContourThroughZero { retries: usize },
    #[error("invalid field grid: {0}")]
    InvalidGrid(String),
}

/// Which of the two resonance branches a root belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    pub fn index(self) -> usize {
        match self {
            Branch::One => 0,
            Branch::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// A pole of the continued resolvent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    /// `Re` is the level position, `-Im` the half-width.
    pub energy: Complex64,
    /// Residue of `1/D⁺` at `energy`.
    pub residue: Complex64,
    pub label: Branch,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Convergence when the Newton step `|D/D'|` drops below `tolerance · max(1, |z|)`.
    pub tolerance: f64,
    /// Relative step of the central difference for `D'`.
    pub fd_step: f64,
    /// Imaginary offset of the initial guesses.
    pub seed_offset: f64,
    /// Newton steps that fail to decrease `|D|` before switching to Muller.
    pub newton_failures: usize,
    /// `|D'|` below this at a root is reported as a near-double zero.
    pub degeneracy_threshold: f64,
    /// Roots closer than this are reported as coincident.
    pub coincidence: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 100,
            tolerance: 1e-13,
            fd_step: 1e-7,
            seed_offset: 1e-3,
            newton_failures: 3,
            degeneracy_threshold: 1e-10,
            coincidence: 1e-8,
        }
    }
}

/// Roots with `Im E` above this (relative) are rejected as upper half-plane;
/// roots inside the band are numerically real, which happens as `F → 0`.
const REAL_AXIS_BAND: f64 = 1e-13;

/// Seeds at the single-well ground states, `-α₁²/4 - F x₁` and `-α₂²/4 - F x₂`,
/// pushed below the real axis by `offset`.
pub fn initial_guesses_with_offset(params: &ModelParams, offset: f64) -> (Complex64, Complex64) {
    let level = |alpha: f64, x: f64| Complex64::new(-alpha * alpha / 4.0 - params.field * x, -offset);
    (level(params.alpha1, params.x1), level(params.alpha2, params.x2))
}

pub fn initial_guesses(params: &ModelParams) -> (Complex64, Complex64) {
    initial_guesses_with_offset(params, SolverOptions::default().seed_offset)
}

/// Resonance of the well at `site` alone: zero of `1 + α k(x, x; z)` near
/// `-α²/4 - F x`. A refined seed for that well's branch.
pub fn single_well_seed(params: &ModelParams, site: Branch) -> Result<Complex64, SolveError> {
    let opts = SolverOptions::default();
    let (alpha, x) = match site {
        Branch::One => (params.alpha1, params.x1),
        Branch::Two => (params.alpha2, params.x2),
    };
    let seed = Complex64::new(-alpha * alpha / 4.0 - params.field * x, -opts.seed_offset);
    polish(|z| Ok(1.0 + alpha * kernel::k0(x, x, z, params, Sign::Plus)?), seed, &opts)
}

fn d_plus(params: &ModelParams, z: Complex64) -> Result<Complex64, KernelError> {
    kernel::d_function(params, z, Sign::Plus)
}

fn derivative<F>(g: &F, z: Complex64, rel_step: f64) -> Result<Complex64, SolveError>
where
    F: Fn(Complex64) -> Result<Complex64, SolveError>,
{
    let h = rel_step * z.norm().max(1.0);
    Ok((g(z + h)? - g(z - h)?) / (2.0 * h))
}

fn muller_step(z: [Complex64; 3], f: [Complex64; 3]) -> Option<Complex64> {
    let q = (z[2] - z[1]) / (z[1] - z[0]);
    let a = q * f[2] - q * (1.0 + q) * f[1] + q * q * f[0];
    let b = (2.0 * q + 1.0) * f[2] - (1.0 + q) * (1.0 + q) * f[1] + q * q * f[0];
    let c = (1.0 + q) * f[2];
    let disc = (b * b - 4.0 * a * c).sqrt();
    let den = if (b + disc).norm() >= (b - disc).norm() { b + disc } else { b - disc };
    if den.norm() == 0.0 || !den.re.is_finite() {
        return None;
    }
    Some(z[2] - (z[2] - z[1]) * 2.0 * c / den)
}

/// Finds a zero of `g` near `seed`.
fn polish<F>(g: F, seed: Complex64, opts: &SolverOptions) -> Result<Complex64, SolveError>
where
    F: Fn(Complex64) -> Result<Complex64, SolveError>,
{
    let converged = |step: f64, z: Complex64| step <= opts.tolerance * z.norm().max(1.0);
    let mut z = seed;
    let mut gz = g(z)?;
    let mut failures = 0;
    let mut history: Vec<(Complex64, Complex64)> = vec![(z, gz)];

    for iteration in 0..opts.max_iterations {
        if failures < opts.newton_failures {
            let dg = derivative(&g, z, opts.fd_step)?;
            if dg.norm() == 0.0 {
                failures = opts.newton_failures;
                continue;
            }
            let mut step = gz / dg;
            if converged(step.norm(), z) {
                // one more step at the rounding level
                let z_new = z - step;
                debug!("newton converged to {z_new} after {iteration} iterations");
                return Ok(z_new);
            }
            let mut accepted = false;
            for _ in 0..6 {
                let trial = z - step;
                let g_trial = g(trial)?;
                if g_trial.norm() < gz.norm() {
                    z = trial;
                    gz = g_trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                failures += 1;
                // take the full step anyway; Newton can legitimately climb out of a shallow basin
                z -= step * 64.0;
                gz = g(z)?;
            }
            history.push((z, gz));
        } else {
            if history.len() < 3 {
                let h = 1e-3 * z.norm().max(1.0);
                let a = z + h;
                let b = z - Complex64::new(0.0, h);
                history = vec![(a, g(a)?), (b, g(b)?), (z, gz)];
            }
            let n = history.len();
            let pts = [history[n - 3].0, history[n - 2].0, history[n - 1].0];
            let vals = [history[n - 3].1, history[n - 2].1, history[n - 1].1];
            let next = match muller_step(pts, vals) {
                Some(v) => v,
                None => break,
            };
            let step = (next - z).norm();
            z = next;
            gz = g(z)?;
            history.push((z, gz));
            if converged(step, z) {
                debug!("muller converged to {z} after {iteration} iterations");
                return Ok(z);
            }
        }
    }
    Err(SolveError::NoConvergence { seed, iterations: opts.max_iterations, last: z })
}

/// Residue of `1/D⁺` at a simple zero, `1/D⁺'(E)`.
pub fn residue(params: &ModelParams, energy: Complex64, opts: &SolverOptions) -> Result<Complex64, SolveError> {
    let g = |z: Complex64| Ok(d_plus(params, z)?);
    let dg = derivative(&g, energy, opts.fd_step)?;
    if dg.norm() < opts.degeneracy_threshold {
        return Err(SolveError::Degenerate { energy, derivative: dg.norm() });
    }
    Ok(1.0 / dg)
}

fn solve(params: &ModelParams, seed: Complex64, deflate: Option<Complex64>, opts: &SolverOptions) -> Result<Complex64, SolveError> {
    let energy = match deflate {
        None => polish(|z| Ok(d_plus(params, z)?), seed, opts)?,
        Some(known) => polish(|z| Ok(d_plus(params, z)? / (z - known)), seed, opts)?,
    };
    if energy.im > REAL_AXIS_BAND * energy.norm().max(1.0) {
        return Err(SolveError::UpperHalfPlane { energy });
    }
    Ok(energy)
}

/// Converged zero of `D⁺` near `seed`, labelled [`Branch::One`].
pub fn find_resonance(params: &ModelParams, seed: Complex64) -> Result<Resonance, SolveError> {
    find_resonance_with(params, seed, &SolverOptions::default())
}

pub fn find_resonance_with(params: &ModelParams, seed: Complex64, opts: &SolverOptions) -> Result<Resonance, SolveError> {
    let energy = solve(params, seed, None, opts)?;
    Ok(Resonance { energy, residue: residue(params, energy, opts)?, label: Branch::One })
}

/// The two narrow resonances from the single-well seeds.
pub fn find_pair(params: &ModelParams) -> Result<(Resonance, Resonance), SolveError> {
    let opts = SolverOptions::default();
    find_pair_from(params, initial_guesses_with_offset(params, opts.seed_offset), &opts)
}

/// Two distinct resonances from the given seeds, the second found on the
/// deflated determinant. Labels go to the seed assignment with the smaller
/// total distance.
pub fn find_pair_from(
    params: &ModelParams,
    seeds: (Complex64, Complex64),
    opts: &SolverOptions,
) -> Result<(Resonance, Resonance), SolveError> {
    let first = solve(params, seeds.0, None, opts)?;
    let second = solve(params, seeds.1, Some(first), opts)?;
    if (first - second).norm() < opts.coincidence {
        return Err(SolveError::CoincidentRoots { first, second });
    }
    let straight = (first - seeds.0).norm() + (second - seeds.1).norm();
    let crossed = (first - seeds.1).norm() + (second - seeds.0).norm();
    let (e1, e2) = if straight <= crossed { (first, second) } else { (second, first) };
    Ok((
        Resonance { energy: e1, residue: residue(params, e1, opts)?, label: Branch::One },
        Resonance { energy: e2, residue: residue(params, e2, opts)?, label: Branch::Two },
    ))
}

/// Axis-aligned box in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rect { re_min, re_max, im_min, im_max }
    }

    /// Square of half-side `r` around `c`.
    pub fn around(c: Complex64, r: f64) -> Self {
        Rect::new(c.re - r, c.re + r, c.im - r, c.im + r)
    }

    fn grown(&self, d: f64) -> Self {
        Rect::new(self.re_min - d, self.re_max + d, self.im_min - d, self.im_max + d)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

const CONTOUR_SAMPLES: usize = 128;
const MAX_ARG_STEP: f64 = PI / 4.0;

enum Winding {
    Turns(f64),
    ThroughZero,
}

fn winding<F>(f: &F, rect: &Rect) -> Result<Winding, SolveError>
where
    F: Fn(Complex64) -> Result<Complex64, SolveError>,
{
    let corners = rect.corners();
    let size = (rect.re_max - rect.re_min).max(rect.im_max - rect.im_min);
    let min_len = 1e-15 * size.max(1.0);
    let mut total = 0.0;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let mut prev_z = a;
        let mut prev_f = f(a)?;
        for i in 1..=CONTOUR_SAMPLES {
            let z = a + (b - a) * (i as f64 / CONTOUR_SAMPLES as f64);
            let fz = f(z)?;
            // refine a segment until the phase moves by less than MAX_ARG_STEP
            let mut stack = vec![(prev_z, prev_f, z, fz)];
            while let Some((za, fa, zb, fb)) = stack.pop() {
                if fa.norm() == 0.0 || fb.norm() == 0.0 {
                    return Ok(Winding::ThroughZero);
                }
                let dphase = (fb / fa).arg();
                let zm = 0.5 * (za + zb);
                let fm = f(zm)?;
                if fm.norm() == 0.0 {
                    return Ok(Winding::ThroughZero);
                }
                // accept only where f is nearly linear compared with its distance
                // from zero, otherwise a full turn may hide between samples
                let split = (fm / fa).arg() + (fb / fm).arg();
                let bend = (fm - 0.5 * (fa + fb)).norm();
                let floor = fa.norm().min(fb.norm()).min(fm.norm());
                if dphase.abs() <= MAX_ARG_STEP && (split - dphase).abs() < 1e-3 && bend < 0.25 * floor {
                    total += dphase;
                    continue;
                }
                if (zb - za).norm() < min_len {
                    return Ok(Winding::ThroughZero);
                }
                // push the right half first so the left half is processed first
                stack.push((zm, fm, zb, fb));
                stack.push((za, fa, zm, fm));
            }
            prev_z = z;
            prev_f = fz;
        }
    }
    Ok(Winding::Turns(total / (2.0 * PI)))
}

/// Number of zeros of `D⁺` inside `rect`, by the argument principle.
pub fn count_zeros(params: &ModelParams, rect: Rect) -> Result<i64, SolveError> {
    let f = |z: Complex64| Ok(d_plus(params, z)?);
    let retries = 4;
    let scale = (rect.re_max - rect.re_min).max(rect.im_max - rect.im_min);
    for attempt in 0..=retries {
        let r = if attempt == 0 { rect } else { rect.grown(1e-7 * scale * attempt as f64) };
        match winding(&f, &r)? {
            Winding::Turns(t) if (t - t.round()).abs() < 0.05 => return Ok(t.round() as i64),
            Winding::Turns(t) => warn!("non-integer winding {t} on {r:?}, jittering"),
            Winding::ThroughZero => warn!("D+ vanishes on contour {r:?}, jittering"),
        }
    }
    Err(SolveError::ContourThroughZero { retries })
}

/// Resonance branches followed along a grid of field strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTrack {
    pub f_grid: Vec<f64>,
    /// `branches[b][k]`: branch `b` at `f_grid[k]`, `None` where the solve failed.
    pub branches: [Vec<Option<Resonance>>; 2],
    /// Grid indices where a branch jumped by more than the continuity bound
    /// (or follows a failed point).
    pub continuity_gaps: Vec<usize>,
    /// Grid indices where the solver failed, with the reason.
    pub failures: Vec<(usize, String)>,
}

impl BranchTrack {
    pub fn len(&self) -> usize {
        self.f_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_grid.is_empty()
    }

    pub fn energy(&self, branch: Branch, k: usize) -> Option<Complex64> {
        self.branches[branch.index()][k].map(|r| r.energy)
    }

    /// `(E₁, E₂)` at every grid point where both branches were found.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, Complex64, Complex64)> + '_ {
        (0..self.len()).filter_map(move |k| {
            Some((self.f_grid[k], self.energy(Branch::One, k)?, self.energy(Branch::Two, k)?))
        })
    }

    pub fn is_broken_at(&self, k: usize) -> bool {
        self.continuity_gaps.contains(&k) || self.failures.iter().any(|(i, _)| *i == k)
    }
}

/// Multiple of the median step used as the continuity bound.
const CONTINUITY_FACTOR: f64 = 50.0;

fn check_grid(f_grid: &[f64]) -> Result<(), SolveError> {
    if f_grid.is_empty() {
        return Err(SolveError::InvalidGrid("empty grid".into()));
    }
    if f_grid.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(SolveError::InvalidGrid("field strengths must be positive and finite".into()));
    }
    if f_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolveError::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Follows both resonances along `f_grid`, starting from the single-well seeds.
pub fn track_branches(params_base: &ModelParams, f_grid: &[f64]) -> Result<BranchTrack, SolveError> {
    track_branches_from(params_base, f_grid, None, &SolverOptions::default())
}

/// Grid indices where either branch jumps by more than `CONTINUITY_FACTOR`
/// times its median step, or resumes after a missing point.
pub fn continuity_gaps(branches: &[Vec<Option<Complex64>>; 2]) -> Vec<usize> {
    let mut gaps = Vec::new();
    for branch in branches {
        let n = branch.len();
        let steps: Vec<(usize, f64)> = (1..n).filter_map(|k| Some((k, (branch[k]? - branch[k - 1]?).norm()))).collect();
        let mut sizes: Vec<f64> = steps.iter().map(|s| s.1).collect();
        sizes.sort_by(|a, b| a.total_cmp(b));
        let median = if sizes.is_empty() { 0.0 } else { sizes[sizes.len() / 2] };
        for &(k, step) in &steps {
            if step > CONTINUITY_FACTOR * median && median > 0.0 {
                gaps.push(k);
            }
        }
        for k in 1..n {
            if branch[k].is_some() && branch[k - 1].is_none() {
                gaps.push(k);
            }
        }
    }
    gaps.sort_unstable();
    gaps.dedup();
    gaps
}

/// As [`track_branches`], with explicit seeds for the first grid point.
pub fn track_branches_from(
    params_base: &ModelParams,
    f_grid: &[f64],
    start: Option<(Complex64, Complex64)>,
    opts: &SolverOptions,
) -> Result<BranchTrack, SolveError> {
    check_grid(f_grid)?;
    let n = f_grid.len();
    let mut branches: [Vec<Option<Resonance>>; 2] = [vec![None; n], vec![None; n]];
    let mut failures = Vec::new();
    // last two successful points: (F, E₁, E₂)
    let mut recent: Vec<(f64, Complex64, Complex64)> = Vec::new();

    for (k, &f) in f_grid.iter().enumerate() {
        let params = params_base.with_field(f)?;
        let seeds = match recent.as_slice() {
            [] => start.unwrap_or_else(|| initial_guesses_with_offset(&params, opts.seed_offset)),
            [.., (f0, a0, b0), (f1, a1, b1)] => {
                // linear extrapolation in F
                let t = (f - f1) / (f1 - f0);
                (a1 + (a1 - a0) * t, b1 + (b1 - b0) * t)
            }
            [(_, a, b)] => (*a, *b),
        };
        match find_pair_from(&params, seeds, opts) {
            Ok((r1, r2)) => {
                recent.push((f, r1.energy, r2.energy));
                if recent.len() > 2 {
                    recent.remove(0);
                }
                branches[0][k] = Some(r1);
                branches[1][k] = Some(r2);
            }
            Err(e) => {
                warn!("tracking failed at F = {f}: {e}");
                failures.push((k, e.to_string()));
            }
        }
    }

    let energies = branches.each_ref().map(|b| b.iter().map(|r| r.map(|r| r.energy)).collect::<Vec<_>>());
    let gaps = continuity_gaps(&energies);

    Ok(BranchTrack { f_grid: f_grid.to_vec(), branches, continuity_gaps: gaps, failures })
}

/// Largest grid step used by [`continued_pair`].
const CONTINUATION_STEP: f64 = 2e-3;

/// The pair at `params.field`, labelled by continuity in `F` from a weak field
/// where the single-well seeds are unambiguous: branch one is the state that
/// starts in the first well. Above an avoided crossing this differs from the
/// nearest-seed labelling of [`find_pair`].
pub fn continued_pair(params: &ModelParams) -> Result<(Resonance, Resonance), SolveError> {
    let opts = SolverOptions::default();
    let (a1, a2) = (params.alpha1, params.alpha2);
    let f_sc = (a1 * a1 - a2 * a2) / (4.0 * params.separation());
    let f_ref = 0.5 * f_sc;
    if !(f_ref > 0.0) || params.field <= f_ref {
        return find_pair(params);
    }
    let steps = ((params.field - f_ref) / CONTINUATION_STEP).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| f_ref + (params.field - f_ref) * k as f64 / steps as f64).collect();
    let track = track_branches_from(params, &grid, None, &opts)?;
    if let Some((_, reason)) = track.failures.first() {
        warn!("continuation to F = {} hit a failed point: {reason}", params.field);
    }
    let last = grid.len() - 1;
    match (track.branches[0][last], track.branches[1][last]) {
        (Some(r1), Some(r2)) => Ok((r1, r2)),
        _ => find_pair(params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(f: f64) -> ModelParams {
        ModelParams::with_separation(-2.8, -2.0, 5.0, f).unwrap()
    }

    #[test]
    fn seeds_follow_single_well_levels() {
        let (s1, s2) = initial_guesses(&params(0.17));
        assert!((s1 - Complex64::new(-1.96, -1e-3)).norm() < 1e-12);
        assert!((s2 - Complex64::new(-1.85, -1e-3)).norm() < 1e-12);
        let sym = ModelParams::with_separation(-2.0, -2.0, 5.0, 0.1).unwrap();
        let (s1, s2) = initial_guesses(&sym);
        assert!((s1.re + 1.0).abs() < 1e-15 && (s2.re + 1.5).abs() < 1e-15);
    }

    #[test]
    fn muller_finds_quadratic_roots() {
        let f = |z: Complex64| z * z + 1.0;
        let pts = [Complex64::new(0.5, 0.3), Complex64::new(0.2, 0.8), Complex64::new(0.1, 1.1)];
        let mut p = pts;
        let next = muller_step(p, [f(p[0]), f(p[1]), f(p[2])]).unwrap();
        p = [p[1], p[2], next];
        assert!((next - Complex64::new(0.0, 1.0)).norm() < 1e-12, "{next} {p:?}");
    }

    #[test]
    fn grid_validation() {
        let p = params(0.17);
        assert!(track_branches(&p, &[]).is_err());
        assert!(track_branches(&p, &[0.2, 0.1]).is_err());
        assert!(track_branches(&p, &[-0.1, 0.1]).is_err());
    }

    #[test]
    fn upper_half_plane_seed_is_rejected_or_moves_down() {
        // a seed far up in the upper half-plane has nowhere to go
        let p = params(0.17);
        match find_resonance(&p, Complex64::new(-1.0, 1.5)) {
            Ok(r) => assert!(r.energy.im <= 0.0),
            Err(e) => assert!(matches!(e, SolveError::UpperHalfPlane { .. } | SolveError::NoConvergence { .. })),
        }
    }
}
