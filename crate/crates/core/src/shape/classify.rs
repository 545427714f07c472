//! Classification of the points where the density is small.
//!
//! A coarse grid at `η_floor` locates the support and the candidate regions
//! (sub-threshold gaps and shallow local minima). Each candidate is resolved
//! on a fine grid with the `η`-exponent test: a run of points where `<v>`
//! scales like `η` is a gap, whose edges are then bisected; otherwise the
//! minimum is located by golden-section search and called a cusp when
//! `<v(γ)>` is below the resolution `5 η_floor^{1/3}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_shape, gap_estimate, ShapeFit, ShapeKind};
use super::profile::{avg_v_at, default_threshold, detect_support, eta_exponent, golden_min, is_outside, refine_edge, SupportProfile, OUTSIDE_EXPONENT};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::{solve, solve_grid, uniform_grid, SolverConfig};
use crate::spectral::{analyze, AnalyzeOptions, DEFAULT_EPS_STAR};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ClassifyConfig {
    pub coarse_step: f64,
    /// Grid covers `[-Σ - margin, Σ + margin]`.
    pub margin: f64,
    pub fine_step: f64,
    /// Half-width of the fine scan around a coarse candidate.
    pub fine_half_width: f64,
    /// Coarse minima with `<v>` above this are ignored.
    pub eps_star: f64,
    /// Cusp when `<v(γ)> < cusp_factor · η_floor^{1/3}`.
    pub cusp_factor: f64,
    pub edge_tol: f64,
    pub solver: SolverConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            coarse_step: 0.01,
            margin: 0.5,
            fine_step: 1e-4,
            fine_half_width: 0.015,
            eps_star: DEFAULT_EPS_STAR,
            cusp_factor: 5.0,
            edge_tol: 1e-9,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSide {
    /// Density vanishes to the left.
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Singularity {
    Edge { tau: f64, side: EdgeSide },
    Cusp { tau: f64, avg_v: f64 },
    NonzeroMin { tau: f64, avg_v: f64 },
}

impl Singularity {
    pub fn tau(&self) -> f64 {
        match self {
            Singularity::Edge { tau, .. } | Singularity::Cusp { tau, .. } | Singularity::NonzeroMin { tau, .. } => *tau,
        }
    }

    pub fn kind(&self) -> ShapeKind {
        match self {
            Singularity::Edge { .. } => ShapeKind::Edge,
            Singularity::Cusp { .. } => ShapeKind::Cusp,
            Singularity::NonzeroMin { .. } => ShapeKind::NonzeroMin,
        }
    }
}

/// Support structure with classified singular points.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShapeReport {
    pub eta: f64,
    pub threshold: f64,
    pub profile: SupportProfile,
    pub singularities: Vec<Singularity>,
    /// Step of the scan that resolved the interior structure.
    pub fine_step: f64,
}

impl ShapeReport {
    pub fn cusps(&self) -> impl Iterator<Item = &Singularity> {
        self.singularities.iter().filter(|s| matches!(s, Singularity::Cusp { .. }))
    }

    pub fn nonzero_minima(&self) -> impl Iterator<Item = &Singularity> {
        self.singularities.iter().filter(|s| matches!(s, Singularity::NonzeroMin { .. }))
    }
}

enum Local {
    Gaps(Vec<(f64, f64)>),
    Min { tau: f64, avg_v: f64 },
}

/// Walks from `start` in steps of `dir·step` until the outside test equals `want`.
fn walk_until(model: &ModelSpec, start: f64, dir: f64, step: f64, want: bool, eta: f64, cfg: &SolverConfig) -> Result<f64> {
    let mut t = start;
    for _ in 0..200 {
        if is_outside(model, t, eta, cfg)? == want {
            return Ok(t);
        }
        t += dir * step;
    }
    Err(Error::Diverged(format!("no support edge found near {start}")))
}

fn bracket_and_refine(model: &ModelSpec, inside_guess: f64, dir: f64, step: f64, c: &ClassifyConfig) -> Result<f64> {
    let eta = c.solver.eta_floor;
    // `dir` points from the support towards the outside.
    let inside = walk_until(model, inside_guess, -dir, step, false, eta, &c.solver)?;
    let outside = walk_until(model, inside + dir * step, dir, step, true, eta, &c.solver)?;
    let inside = if (outside - inside).abs() > step * 1.5 { outside - dir * step } else { inside };
    refine_edge(model, inside, outside, eta, c.edge_tol, &c.solver)
}

fn resolve_region(model: &ModelSpec, lo: f64, hi: f64, c: &ClassifyConfig) -> Result<Local> {
    let eta = c.solver.eta_floor;
    let taus = uniform_grid(lo, hi, c.fine_step);
    let samples: Vec<(f64, f64)> = taus
        .par_iter()
        .map(|&t| {
            let v = avg_v_at(model, t, eta, &c.solver)?;
            let v10 = avg_v_at(model, t, 10.0 * eta, &c.solver)?;
            Ok(((v10 / v).log10(), v))
        })
        .collect::<Result<_>>()?;
    let outside: Vec<bool> = samples.iter().map(|s| s.0 > OUTSIDE_EXPONENT).collect();
    if outside.iter().any(|o| *o) {
        let mut gaps = Vec::new();
        let mut k = 0;
        while k < taus.len() {
            if !outside[k] {
                k += 1;
                continue;
            }
            let start = k;
            while k + 1 < taus.len() && outside[k + 1] {
                k += 1;
            }
            if start == 0 || k + 1 == taus.len() {
                return Err(Error::Diverged(format!("gap near [{}, {}] reaches the scan boundary", taus[start], taus[k])));
            }
            let left = refine_edge(model, taus[start - 1], taus[start], eta, c.edge_tol, &c.solver)?;
            let right = refine_edge(model, taus[k + 1], taus[k], eta, c.edge_tol, &c.solver)?;
            gaps.push((left, right));
            k += 1;
        }
        return Ok(Local::Gaps(gaps));
    }
    let i = (0..samples.len()).min_by(|&a, &b| samples[a].1.total_cmp(&samples[b].1)).unwrap_or(0);
    let a = taus[i.saturating_sub(1)];
    let b = taus[(i + 1).min(taus.len() - 1)];
    let (tau, avg_v) = golden_min(a, b, 1e-9, |t| avg_v_at(model, t, eta, &c.solver))?;
    Ok(Local::Min { tau, avg_v })
}

/// Re-minimizes `<v>` at [`GAP_EVAL_ETA`] within `±10η` of a cusp found at `η`.
///
/// At `η` the minimum is smeared over `~η`; a location error `ε` leaves
/// `<v> ~ ε^{1/3}` at the nominal cusp and biases local exponents.
fn sharpen_cusp(model: &ModelSpec, tau: f64, eta: f64, cfg: &SolverConfig) -> Result<f64> {
    let w = 10.0 * eta;
    golden_min(tau - w, tau + w, 1e-15, |t| avg_v_at(model, t, GAP_EVAL_ETA, cfg)).map(|(t, _)| t)
}

/// Runs the classification pipeline at `η = config.solver.eta_floor`.
pub fn classify(model: &ModelSpec, c: &ClassifyConfig) -> Result<ShapeReport> {
    c.solver.validate()?;
    let eta = c.solver.eta_floor;
    let sigma = model.sigma_bound();
    let grid = uniform_grid(-sigma - c.margin, sigma + c.margin, c.coarse_step);
    let coarse = solve_grid(model, &grid, eta, &c.solver)?;
    let max = coarse.avg_density.iter().cloned().fold(0.0, f64::max);
    let threshold = default_threshold(eta, max);
    let profile = detect_support(&coarse, threshold, c.eps_star / PI)?;
    let h = c.coarse_step;

    let first = profile.intervals.first().map(|i| i.0).ok_or(Error::NoSupport)?;
    let last = profile.intervals.last().map(|i| i.1).ok_or(Error::NoSupport)?;
    let outer_left = bracket_and_refine(model, first + 0.5 * h, -1.0, h, c)?;
    let outer_right = bracket_and_refine(model, last - 0.5 * h, 1.0, h, c)?;

    let mut regions: Vec<(f64, f64)> = profile.minima.iter().map(|(g, _)| (g - c.fine_half_width, g + c.fine_half_width)).collect();
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for &(l, r, _) in &profile.gaps {
        let mid = 0.5 * (l + r);
        if is_outside(model, mid, eta, &c.solver)? {
            let left = bracket_and_refine(model, l - 0.5 * h, 1.0, h, c)?;
            let right = bracket_and_refine(model, r + 0.5 * h, -1.0, h, c)?;
            gaps.push((left, right));
        } else {
            regions.push((l - c.fine_half_width, r + c.fine_half_width));
        }
    }

    let locals: Vec<Local> = regions.par_iter().map(|&(lo, hi)| resolve_region(model, lo, hi, c)).collect::<Result<_>>()?;
    let mut minima = Vec::new();
    let mut singularities = Vec::new();
    for local in locals {
        match local {
            Local::Gaps(g) => gaps.extend(g),
            Local::Min { tau, avg_v } => {
                minima.push((tau, avg_v / PI));
                if avg_v < c.cusp_factor * eta.cbrt() {
                    let tau = sharpen_cusp(model, tau, eta, &c.solver).unwrap_or(tau);
                    singularities.push(Singularity::Cusp { tau, avg_v });
                } else {
                    singularities.push(Singularity::NonzeroMin { tau, avg_v });
                }
            }
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    gaps.dedup_by(|a, b| (a.0 - b.0).abs() < 10.0 * c.edge_tol.max(1e-12));
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut edges = vec![outer_left];
    for &(l, r) in &gaps {
        edges.push(l);
        edges.push(r);
    }
    edges.push(outer_right);
    let intervals: Vec<(f64, f64)> = edges.chunks(2).map(|p| (p[0], p[1])).collect();
    for &(a, b) in &intervals {
        singularities.push(Singularity::Edge { tau: a, side: EdgeSide::Left });
        singularities.push(Singularity::Edge { tau: b, side: EdgeSide::Right });
    }
    singularities.sort_by(|a, b| a.tau().total_cmp(&b.tau()));
    let gaps = intervals.windows(2).map(|w| (w[0].1, w[1].0, w[1].0 - w[0].1)).collect();
    Ok(ShapeReport {
        eta,
        threshold,
        profile: SupportProfile { intervals, minima, gaps },
        singularities,
        fine_step: c.fine_step,
    })
}

/// Measured gap against the spectral prediction at each of its edges.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapLaw {
    pub left: f64,
    pub right: f64,
    pub delta: f64,
    pub delta_hat_left: Option<f64>,
    pub delta_hat_right: Option<f64>,
    pub ratio_left: Option<f64>,
    pub ratio_right: Option<f64>,
    /// Gap spans at least 20 steps of the resolving scan.
    pub resolved: bool,
}

/// Imaginary part used to re-locate gap edges before the prediction is evaluated.
pub const GAP_EDGE_ETA: f64 = 1e-10;
/// Imaginary part at which `σ`, `ψ` and `<|m| f>` are evaluated on an edge.
pub const GAP_EVAL_ETA: f64 = 1e-12;

fn delta_hat_at(model: &ModelSpec, tau: f64, cfg: &SolverConfig) -> Result<f64> {
    let s = solve(model, Complex64::new(tau, GAP_EVAL_ETA), cfg)?;
    let d = analyze(model, &s, AnalyzeOptions { bad_direction: false, binv: false })?;
    gap_estimate(&d)
}

/// Re-bisects an edge at [`GAP_EDGE_ETA`]; `dir` points into the gap.
///
/// `σ` is only 1/3-Hölder in `τ`, so an edge misplaced by `~η_floor` shifts
/// `|σ|³` by a visible fraction once the gap is small.
fn sharpen_edge(model: &ModelSpec, edge: f64, dir: f64, width: f64, coarse_eta: f64, cfg: &SolverConfig) -> f64 {
    let w = (100.0 * coarse_eta).min(0.25 * width);
    let (inside, outside) = (edge - dir * w, edge + dir * w);
    let ok = |t: f64, want: bool| is_outside(model, t, GAP_EDGE_ETA, cfg).map(|o| o == want).unwrap_or(false);
    if ok(inside, false) && ok(outside, true) {
        refine_edge(model, inside, outside, GAP_EDGE_ETA, 1e-13, cfg).unwrap_or(edge)
    } else {
        edge
    }
}

/// Measures every gap against `Δ̂` at its two edges.
pub fn gap_law(model: &ModelSpec, report: &ShapeReport, cfg: &SolverConfig) -> Vec<GapLaw> {
    report
        .profile
        .gaps
        .par_iter()
        .map(|&(l, r, width)| {
            let left = sharpen_edge(model, l, 1.0, width, report.eta, cfg);
            let right = sharpen_edge(model, r, -1.0, width, report.eta, cfg);
            let delta = right - left;
            let hl = delta_hat_at(model, left, cfg).ok();
            let hr = delta_hat_at(model, right, cfg).ok();
            GapLaw {
                left,
                right,
                delta,
                delta_hat_left: hl,
                delta_hat_right: hr,
                ratio_left: hl.map(|x| delta / x),
                ratio_right: hr.map(|x| delta / x),
                resolved: delta >= 20.0 * report.fine_step,
            }
        })
        .collect()
}

/// A fit attempt for one singular point; failures keep the error text.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitOutcome {
    pub singularity: Singularity,
    pub fit: Option<ShapeFit>,
    pub error: Option<String>,
}

/// Fits every classified point with the default windows.
///
/// Edges use `[Δ/10, min(3Δ, L/4)]` with `Δ` the adjacent gap (or `2Σ` at the
/// extreme edges) and `L` the interval length; cusps use `[1e-4, 1e-2]`;
/// minima use `[ρ³/10, 10ρ³]` clipped to `[10 η^{1/3}·..., 0.05]` with `ρ = <v(γ)>`.
pub fn fit_all(model: &ModelSpec, report: &ShapeReport, cfg: &SolverConfig) -> Vec<FitOutcome> {
    let ivs = &report.profile.intervals;
    let sigma = model.sigma_bound();
    report
        .singularities
        .par_iter()
        .map(|s| {
            let eta = report.eta;
            let res = match *s {
                Singularity::Edge { tau, side } => {
                    let k = ivs.iter().position(|iv| iv.0 == tau || iv.1 == tau).unwrap_or(0);
                    let len = ivs[k].1 - ivs[k].0;
                    let gap = match side {
                        EdgeSide::Left if k > 0 => tau - ivs[k - 1].1,
                        EdgeSide::Right if k + 1 < ivs.len() => ivs[k + 1].0 - tau,
                        _ => 2.0 * sigma,
                    };
                    let hi = (3.0 * gap).min(0.25 * len);
                    let lo = (0.1 * gap).min(0.1 * hi);
                    let dir = if side == EdgeSide::Left { 1.0 } else { -1.0 };
                    fit_shape(model, tau, ShapeKind::Edge, gap, (lo, hi), dir, eta, cfg)
                }
                Singularity::Cusp { tau, .. } => fit_shape(model, tau, ShapeKind::Cusp, 0.0, (1e-4, 1e-2), 0.0, eta, cfg),
                Singularity::NonzeroMin { tau, avg_v } => {
                    let r3 = avg_v.powi(3);
                    fit_shape(model, tau, ShapeKind::NonzeroMin, avg_v, ((0.1 * r3).max(1e-5), (10.0 * r3).clamp(1e-4, 0.05)), 0.0, eta, cfg)
                }
            };
            match res {
                Ok(fit) => FitOutcome { singularity: s.clone(), fit: Some(fit), error: None },
                Err(e) => FitOutcome { singularity: s.clone(), fit: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

/// `η`-exponent at `tau`, exposed for diagnostics.
pub fn exponent_at(model: &ModelSpec, tau: f64, cfg: &SolverConfig) -> Result<f64> {
    eta_exponent(model, tau, cfg.eta_floor, cfg)
}
