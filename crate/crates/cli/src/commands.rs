use std::thread;

use anyhow::{Context, Result};
use log::{info, warn};
use resonance_core::airy::Sign;
use resonance_core::crossing::{self, Component, CrossingError, CrossingType};
use resonance_core::kernel::{self, ModelParams};
use resonance_core::solver::{self, BranchTrack, SolverOptions};
use resonance_core::survival;
use resonance_core::Complex64;

use crate::config::{ConfigError, RunConfig};
use crate::report::{Item, Report};

/// Relative half-width of the classify sweep around the semiclassical
/// critical field when the config has no [sweep].
const DEFAULT_BRACKET: f64 = 0.2;
const DEFAULT_SWEEP_POINTS: usize = 41;

/// Grid points each parallel chunk shares with its predecessor.
const OVERLAP: usize = 2;
/// Overlap points from two chunks must agree to this (relative) accuracy.
const STITCH_TOLERANCE: f64 = 1e-8;

pub fn resonances(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let (r1, r2) = solver::continued_pair(&p)?;
    let mut report = Report::default();
    report.push("field", Item::Number(p.field));
    report.push("E1", Item::Complex(r1.energy));
    report.push("E2", Item::Complex(r2.energy));
    report.columns = vec!["branch", "reE", "imE", "reResidue", "imResidue", "absD"];
    for r in [r1, r2] {
        let d = kernel::d_function(&p, r.energy, Sign::Plus)?;
        report.rows.push(vec![
            r.label.number() as f64,
            r.energy.re,
            r.energy.im,
            r.residue.re,
            r.residue.im,
            d.norm(),
        ]);
    }
    Ok(report)
}

/// Track over `grid`, starting from the adiabatically labelled pair at its
/// first point.
fn track(base: &ModelParams, grid: &[f64], diagnostics: &mut Vec<String>) -> Result<BranchTrack> {
    let first = base.with_field(grid[0])?;
    let start = match solver::continued_pair(&first) {
        Ok((r1, r2)) => Some((r1.energy, r2.energy)),
        Err(e) => {
            let msg = format!("no continued pair at F = {}: {e}; seeding from single-well levels", grid[0]);
            warn!("{msg}");
            diagnostics.push(msg);
            None
        }
    };
    Ok(solver::track_branches_from(base, grid, start, &SolverOptions::default())?)
}

#[derive(Debug, Clone, Copy)]
struct Row {
    field: f64,
    pair: Option<(Complex64, Complex64)>,
    flagged: bool,
}

/// Rows of a track; `with_gaps` also flags the track's own continuity gaps.
fn rows_of(t: &BranchTrack, with_gaps: bool) -> Vec<Row> {
    (0..t.len())
        .map(|k| {
            let pair = t.branches[0][k].zip(t.branches[1][k]).map(|(a, b)| (a.energy, b.energy));
            let broken = if with_gaps { t.is_broken_at(k) } else { t.failures.iter().any(|f| f.0 == k) };
            Row { field: t.f_grid[k], pair, flagged: pair.is_none() || broken }
        })
        .collect()
}

fn log_failures(t: &BranchTrack, diagnostics: &mut Vec<String>) {
    for (k, reason) in &t.failures {
        diagnostics.push(format!("F = {}: {reason}", t.f_grid[*k]));
    }
}

fn log_gaps(grid: &[f64], gaps: &[usize], diagnostics: &mut Vec<String>) {
    for &k in gaps {
        diagnostics.push(format!("F = {}: continuity gap", grid[k]));
    }
}

fn sequential_rows(base: &ModelParams, grid: &[f64], diagnostics: &mut Vec<String>) -> Result<Vec<Row>> {
    let t = track(base, grid, diagnostics)?;
    log_failures(&t, diagnostics);
    log_gaps(grid, &t.continuity_gaps, diagnostics);
    Ok(rows_of(&t, true))
}

/// Splits the grid into `jobs` chunks tracked on separate threads. Each chunk
/// repeats the last `OVERLAP` points of the one before; those are compared to
/// fix the labels and to confirm both chunks follow the same roots. Continuity
/// gaps are judged on the stitched grid, as in a sequential sweep.
fn parallel_rows(base: &ModelParams, grid: &[f64], jobs: usize, diagnostics: &mut Vec<String>) -> Result<Vec<Row>> {
    let n = grid.len();
    let jobs = jobs.min(n / (OVERLAP + 2)).max(1);
    if jobs == 1 {
        return sequential_rows(base, grid, diagnostics);
    }
    let bounds: Vec<usize> = (0..=jobs).map(|k| k * n / jobs).collect();
    let starts: Vec<usize> = (0..jobs).map(|k| bounds[k].saturating_sub(OVERLAP)).collect();
    info!("sweep split into {jobs} chunks at {:?}", &bounds[1..jobs]);
    let chunks: Vec<Result<(Vec<Row>, Vec<String>)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|k| {
                let slice = &grid[starts[k]..bounds[k + 1]];
                s.spawn(move || {
                    let mut notes = Vec::new();
                    let t = track(base, slice, &mut notes)?;
                    log_failures(&t, &mut notes);
                    Ok((rows_of(&t, false), notes))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut rows: Vec<Row> = Vec::with_capacity(n);
    for (k, chunk) in chunks.into_iter().enumerate() {
        let (mut chunk, notes) = chunk?;
        diagnostics.extend(notes);
        let overlap = bounds[k] - starts[k];
        let (mut same, mut swapped, mut scale, mut compared) = (0.0, 0.0, 0.0f64, 0);
        for j in 0..overlap {
            if let (Some((a1, a2)), Some((b1, b2))) = (rows[starts[k] + j].pair, chunk[j].pair) {
                same += (a1 - b1).norm() + (a2 - b2).norm();
                swapped += (a1 - b2).norm() + (a2 - b1).norm();
                scale = scale.max(a1.norm()).max(a2.norm());
                compared += 1;
            }
        }
        if swapped < same {
            for r in &mut chunk {
                r.pair = r.pair.map(|(a, b)| (b, a));
            }
            std::mem::swap(&mut same, &mut swapped);
        }
        if overlap > 0 && (compared == 0 || same > STITCH_TOLERANCE * scale) {
            let msg = format!(
                "chunk starting at F = {} does not reproduce the overlap points (mismatch {same:.3e})",
                grid[bounds[k]]
            );
            warn!("{msg}");
            diagnostics.push(msg);
            chunk[overlap].flagged = true;
        }
        rows.extend_from_slice(&chunk[overlap..]);
    }
    let energies = [
        rows.iter().map(|r| r.pair.map(|p| p.0)).collect(),
        rows.iter().map(|r| r.pair.map(|p| p.1)).collect(),
    ];
    let gaps = solver::continuity_gaps(&energies);
    log_gaps(grid, &gaps, diagnostics);
    for k in gaps {
        rows[k].flagged = true;
    }
    Ok(rows)
}

pub fn sweep(cfg: &RunConfig, jobs: usize) -> Result<Report> {
    let sw = cfg.sweep.ok_or_else(|| ConfigError {
        origin: None,
        message: "the sweep command needs a [sweep] section with f_min and f_max".into(),
    })?;
    let grid = sw.grid();
    let base = cfg.model.params(grid[0])?;
    let mut report = Report::default();
    let rows = if jobs > 1 {
        parallel_rows(&base, &grid, jobs, &mut report.diagnostics)?
    } else {
        sequential_rows(&base, &grid, &mut report.diagnostics)?
    };
    report.columns = vec!["F", "reE1", "imE1", "reE2", "imE2", "branch_gap_flag"];
    let nan = Complex64::new(f64::NAN, f64::NAN);
    for r in &rows {
        let (e1, e2) = r.pair.unwrap_or((nan, nan));
        report.rows.push(vec![r.field, e1.re, e1.im, e2.re, e2.im, if r.flagged { 1.0 } else { 0.0 }]);
    }
    let flagged = rows.iter().filter(|r| r.flagged).count();
    report.push("points", Item::Number(rows.len() as f64));
    report.push("flagged", Item::Number(flagged as f64));
    Ok(report)
}

/// First interval of the track where `component` of `E₁ - E₂` changes sign.
fn sign_change_bracket(t: &BranchTrack, component: Component) -> Option<(f64, f64)> {
    let diff: Vec<(f64, f64)> = t
        .pairs()
        .map(|(f, a, b)| {
            let d = a - b;
            (f, if component == Component::Real { d.re } else { d.im })
        })
        .collect();
    diff.windows(2).find(|w| w[0].1.signum() != w[1].1.signum()).map(|w| (w[0].0, w[1].0))
}

pub struct Classification {
    pub report: Report,
    /// Set when the numeric verdict could not be reached.
    pub failure: Option<String>,
}

pub fn classify(cfg: &RunConfig) -> Result<Classification> {
    let mut report = Report::default();
    let mut failure = None;
    let fc_semi = crossing::semiclassical_fc(&cfg.model.params(cfg.model.field.unwrap_or(1.0))?);
    let base = cfg.model.params(cfg.model.field.unwrap_or(if fc_semi > 0.0 { fc_semi } else { 1.0 }))?;

    match crossing::classify_semiclassical(&base) {
        Ok(v) => {
            report.push("semiclassical_type", Item::Text(type_name(v.crossing_type).into()));
            report.push("strength_ratio", Item::Number(v.ratio));
            report.push("threshold_ratio", Item::Number(crossing::threshold_ratio()));
            report.push("near_threshold", Item::Flag(v.near_threshold));
            report.push("f_critical_semiclassical", Item::Number(v.f_critical));
            report.push("agmon_inner_semiclassical", Item::Number(v.rho_inner));
            report.push("agmon_outer_semiclassical", Item::Number(v.rho_outer));
            if v.near_threshold {
                report.diagnostics.push("strength ratio is within 2% of the type threshold; the semiclassical verdict is unreliable".into());
            }
        }
        Err(e) => {
            report.push("semiclassical_type", Item::Text("undetermined".into()));
            report.diagnostics.push(format!("semiclassical verdict unavailable: {e}"));
        }
    }

    let grid = match cfg.sweep {
        Some(sw) => sw.grid(),
        None => {
            let (lo, hi) = crossing::default_bracket(&base, DEFAULT_BRACKET).context(
                "no [sweep] section and no semiclassical critical field to centre a default sweep on",
            )?;
            info!("classifying on the default sweep [{lo}, {hi}]");
            (0..DEFAULT_SWEEP_POINTS)
                .map(|k| lo + (hi - lo) * k as f64 / (DEFAULT_SWEEP_POINTS - 1) as f64)
                .collect()
        }
    };
    report.push("sweep_f_min", Item::Number(grid[0]));
    report.push("sweep_f_max", Item::Number(grid[grid.len() - 1]));
    let base = base.with_field(grid[0])?;
    let t = track(&base, &grid, &mut report.diagnostics)?;
    log_failures(&t, &mut report.diagnostics);

    match crossing::classify_numeric(&t) {
        Ok(kind) => {
            report.push("numeric_type", Item::Text(type_name(kind).into()));
            let component = if kind == CrossingType::TypeI { Component::Imaginary } else { Component::Real };
            let bracket = sign_change_bracket(&t, component).expect("classified track has a sign change");
            match kind {
                CrossingType::TypeI => {
                    let r = crossing::critical_field(&base, bracket)?;
                    report.push("f_critical_numeric", Item::Number(r.f_critical));
                    report.push("E1_at_f_critical", Item::Complex(r.e_common.0.energy));
                    report.push("E2_at_f_critical", Item::Complex(r.e_common.1.energy));
                    report.push("agmon_inner_numeric", Item::Number(r.rho_inner));
                    report.push("agmon_outer_numeric", Item::Number(r.rho_outer));
                }
                CrossingType::TypeII => {
                    let (f, (r1, r2)) = crossing::locate_crossing(&base, bracket, Component::Real)?;
                    report.push("f_critical_numeric", Item::Text("none".into()));
                    report.push("f_real_crossing", Item::Number(f));
                    report.push("E1_at_real_crossing", Item::Complex(r1.energy));
                    report.push("E2_at_real_crossing", Item::Complex(r2.energy));
                }
            }
        }
        Err(e @ CrossingError::Inconclusive { .. }) => {
            report.push("numeric_type", Item::Text("inconclusive".into()));
            let msg = format!(
                "{e}; widen the sweep (currently [{}, {}]) or add points",
                grid[0],
                grid[grid.len() - 1]
            );
            report.diagnostics.push(msg.clone());
            failure = Some(msg);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(Classification { report, failure })
}

fn type_name(t: CrossingType) -> &'static str {
    match t {
        CrossingType::TypeI => "I",
        CrossingType::TypeII => "II",
    }
}

pub fn survival(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let series = survival::amplitude(&p, &cfg.state, &cfg.times())?;
    let mut report = Report::default();
    let (r1, r2) = series.resonances;
    report.push("field", Item::Number(p.field));
    report.push("E1", Item::Complex(r1.energy));
    report.push("E2", Item::Complex(r2.energy));
    report.push("c1", Item::Complex(series.coefficients.0));
    report.push("c2", Item::Complex(series.coefficients.1));
    report.push("T", Item::Number(series.pseudo_period()));
    let contrast = match survival::oscillation_metric(&series, (cfg.time.t_min, cfg.time.t_max)) {
        Ok(c) => c,
        Err(e) => {
            report.diagnostics.push(format!("no oscillation contrast: {e}"));
            f64::NAN
        }
    };
    report.push("contrast", Item::Number(contrast));
    report.columns = vec!["t", "absA", "reA", "imA", "abs_free", "abs_resonance"];
    for k in 0..series.times.len() {
        let a = series.amplitude[k];
        report.rows.push(vec![
            series.times[k],
            a.norm(),
            a.re,
            a.im,
            series.free_part[k].norm(),
            series.resonance_part[k].norm(),
        ]);
    }
    Ok(report)
}
