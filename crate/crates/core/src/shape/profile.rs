//! Support intervals, gaps and interior minima of the averaged density.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::{solve, GridSolution, SolverConfig};

/// Support structure read off a density profile.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct SupportProfile {
    /// Disjoint, ordered `(α_i, β_i)`.
    pub intervals: Vec<(f64, f64)>,
    /// Interior minima `(γ_k, <v(γ_k)>/π)`.
    pub minima: Vec<(f64, f64)>,
    /// `(β_i, α_{i+1}, α_{i+1} - β_i)`.
    pub gaps: Vec<(f64, f64, f64)>,
}

impl SupportProfile {
    fn from_intervals(intervals: Vec<(f64, f64)>, minima: Vec<(f64, f64)>) -> Self {
        let gaps = intervals.windows(2).map(|w| (w[0].1, w[1].0, w[1].0 - w[0].1)).collect();
        SupportProfile { intervals, minima, gaps }
    }
}

/// Default support threshold `3 η_floor^{1/3} · max density`.
pub fn default_threshold(eta_floor: f64, max_density: f64) -> f64 {
    3.0 * eta_floor.cbrt() * max_density
}

/// Reads the support from grid densities.
///
/// Runs of grid points with density above `threshold` become intervals; each
/// interval end is placed halfway to the neighbouring sub-threshold point.
/// Strict interior local minima with density below `min_eps` become minima.
pub fn detect_support(grid: &GridSolution, threshold: f64, min_eps: f64) -> Result<SupportProfile> {
    let tau = &grid.tau_grid;
    let dens = &grid.avg_density;
    let above: Vec<bool> = dens.iter().map(|d| *d > threshold).collect();
    if !above.iter().any(|a| *a) {
        return Err(Error::NoSupport);
    }
    let mut intervals = Vec::new();
    let mut k = 0;
    while k < tau.len() {
        if !above[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < tau.len() && above[k + 1] {
            k += 1;
        }
        let lo = if start == 0 { tau[0] } else { 0.5 * (tau[start - 1] + tau[start]) };
        let hi = if k + 1 == tau.len() { tau[k] } else { 0.5 * (tau[k] + tau[k + 1]) };
        intervals.push((lo, hi));
        k += 1;
    }
    let minima = (1..tau.len().saturating_sub(1))
        .filter(|&i| above[i - 1] && above[i] && above[i + 1])
        .filter(|&i| dens[i] < dens[i - 1] && dens[i] < dens[i + 1] && dens[i] < min_eps)
        .map(|i| (tau[i], dens[i]))
        .collect();
    Ok(SupportProfile::from_intervals(intervals, minima))
}

/// `<v(τ + iη)>` via a continuation solve.
pub fn avg_v_at(model: &ModelSpec, tau: f64, eta: f64, config: &SolverConfig) -> Result<f64> {
    Ok(solve(model, Complex64::new(tau, eta), config)?.avg_v(model))
}

/// Local `η`-exponent `log₁₀(<v(τ + 10iη)> / <v(τ + iη)>)`.
///
/// Close to 1 outside the support (`v ~ η`), close to 0 in the bulk, and
/// 1/3 at a cusp.
pub fn eta_exponent(model: &ModelSpec, tau: f64, eta: f64, config: &SolverConfig) -> Result<f64> {
    let lo = avg_v_at(model, tau, eta, config)?;
    let hi = avg_v_at(model, tau, 10.0 * eta, config)?;
    Ok((hi / lo).log10())
}

/// Exponent above which a point counts as outside the support.
pub const OUTSIDE_EXPONENT: f64 = 2.0 / 3.0;

pub fn is_outside(model: &ModelSpec, tau: f64, eta: f64, config: &SolverConfig) -> Result<bool> {
    Ok(eta_exponent(model, tau, eta, config)? > OUTSIDE_EXPONENT)
}

/// Bisects for the support edge between a point `inside` and a point `outside`.
pub fn refine_edge(
    model: &ModelSpec,
    mut inside: f64,
    mut outside: f64,
    eta: f64,
    tol: f64,
    config: &SolverConfig,
) -> Result<f64> {
    while (outside - inside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if is_outside(model, mid, eta, config)? {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Golden-section minimization of `g` on `[a, b]`.
pub fn golden_min(mut a: f64, mut b: f64, tol: f64, mut g: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    while (b - a).abs() > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d)?;
        }
    }
    Ok(if gc < gd { (c, gc) } else { (d, gd) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_grid, uniform_grid};

    #[test]
    fn semicircle_single_interval() {
        let model = ModelSpec::semicircle(2).unwrap();
        let step = 0.01;
        let grid = uniform_grid(-2.5, 2.5, step);
        let g = solve_grid(&model, &grid, 1e-6, &SolverConfig::default()).unwrap();
        let max = g.avg_density.iter().cloned().fold(0.0, f64::max);
        let p = detect_support(&g, default_threshold(1e-6, max), 0.05).unwrap();
        assert_eq!(p.intervals.len(), 1);
        let (a, b) = p.intervals[0];
        assert!((a + 2.0).abs() <= step && (b - 2.0).abs() <= step, "{a} {b}");
        assert!(p.gaps.is_empty() && p.minima.is_empty());
    }

    #[test]
    fn flat_zero_density_has_no_support() {
        let model = ModelSpec::semicircle(1).unwrap();
        let grid = uniform_grid(3.0, 4.0, 0.1);
        let g = solve_grid(&model, &grid, 1e-6, &SolverConfig::default()).unwrap();
        assert!(matches!(detect_support(&g, 1e-3, 0.1), Err(Error::NoSupport)));
    }

    #[test]
    fn eta_exponent_separates_bulk_and_outside() {
        let model = ModelSpec::semicircle(1).unwrap();
        let cfg = SolverConfig::default();
        assert!(eta_exponent(&model, 0.5, 1e-6, &cfg).unwrap().abs() < 0.01);
        assert!((eta_exponent(&model, 2.5, 1e-6, &cfg).unwrap() - 1.0).abs() < 0.01);
        let edge = refine_edge(&model, 1.9, 2.1, 1e-6, 1e-7, &cfg).unwrap();
        assert!((edge - 2.0).abs() < 1e-5, "{edge}");
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_min(-1.0, 3.0, 1e-10, |x| Ok((x - 0.7) * (x - 0.7) + 2.0)).unwrap();
        assert!((x - 0.7).abs() < 1e-7 && (fx - 2.0).abs() < 1e-12);
    }
}
