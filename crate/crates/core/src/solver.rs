//! Solving `-1/m = z + a + Sm` on the upper half-plane.
//!
//! Plain iteration of `m ↦ -1/(z + a + Sm)` is a contraction for `Im z`
//! bounded away from zero. Closer to the real axis the solver walks `Im z`
//! down geometrically and polishes each level with damped Newton steps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);
const MAX_NEWTON_STEPS: usize = 60;
const MAX_REFINEMENTS: usize = 24;

/// The solution vector `m(z)` at one spectral parameter.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Solution {
    pub z: Complex64,
    pub m: Vec<Complex64>,
    /// `‖m + 1/(z + a + Sm)‖∞`
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Solution {
    /// `v = Im m`
    pub fn v(&self) -> Vec<f64> {
        self.m.iter().map(|x| x.im).collect()
    }

    pub fn avg_v(&self, model: &ModelSpec) -> f64 {
        model.avg(&self.v())
    }

    /// Averaged density `<v>/π`.
    pub fn density(&self, model: &ModelSpec) -> f64 {
        self.avg_v(model) / PI
    }

    pub fn abs_m(&self) -> Vec<f64> {
        self.m.iter().map(|x| x.norm()).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.m.iter().fold(0.0, |a: f64, x| a.max(x.norm()))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub eta_floor: f64,
    pub continuation_factor: f64,
    pub newton: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-12, max_iter: 1_000_000, eta_floor: 1e-6, continuation_factor: 0.5, newton: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.eta_floor > 0.0) {
            return Err(Error::InvalidInput("tol and eta_floor must be positive".into()));
        }
        if !(self.continuation_factor > 0.0 && self.continuation_factor < 1.0) {
            return Err(Error::InvalidInput("continuation_factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Densities on a grid of real parts at a fixed imaginary part.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSolution {
    pub tau_grid: Vec<f64>,
    pub eta: f64,
    pub solutions: Vec<Solution>,
    /// `<v(τ + iη)>/π`
    pub avg_density: Vec<f64>,
}

impl GridSolution {
    pub fn failure_mask(&self) -> Vec<bool> {
        self.solutions.iter().map(|s| !s.converged).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.solutions.iter().all(|s| s.converged)
    }

    /// `<v>` (not divided by π) at every grid point.
    pub fn avg_v(&self) -> Vec<f64> {
        self.avg_density.iter().map(|d| d * PI).collect()
    }
}

fn u_vec(model: &ModelSpec, z: Complex64, m: &[Complex64]) -> Vec<Complex64> {
    let sm = model.apply_s(m);
    model.a().iter().zip(sm).map(|(a, s)| z + a + s).collect()
}

/// `‖m + 1/(z + a + Sm)‖∞`
pub fn residual(model: &ModelSpec, z: Complex64, m: &[Complex64]) -> f64 {
    u_vec(model, z, m)
        .iter()
        .zip(m)
        .map(|(u, mi)| (mi + 1.0 / u).norm())
        .fold(0.0, f64::max)
}

fn check_init(model: &ModelSpec, init: &[Complex64]) -> Result<()> {
    if init.len() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "initial vector has length {}, model has {}",
            init.len(),
            model.n()
        )));
    }
    if init.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite initial vector".into()));
    }
    Ok(())
}

/// Iterates `m ↦ -1/(z + a + Sm)` until the residual drops below `config.tol`.
pub fn solve_fixed_point(
    model: &ModelSpec,
    z: Complex64,
    init: Option<&[Complex64]>,
    config: &SolverConfig,
) -> Result<Solution> {
    if !(z.im > 0.0) {
        return Err(Error::InvalidInput("fixed-point iteration needs Im z > 0".into()));
    }
    let mut m = match init {
        Some(v) => {
            check_init(model, v)?;
            if v.iter().any(|x| x.im <= 0.0) {
                return Err(Error::InvalidInput("initial vector must lie in the upper half-plane".into()));
            }
            v.to_vec()
        }
        None => vec![I; model.n()],
    };
    let mut res = f64::INFINITY;
    for it in 0..config.max_iter {
        let next: Vec<Complex64> = u_vec(model, z, &m).iter().map(|u| -1.0 / u).collect();
        m = next;
        res = residual(model, z, &m);
        if res <= config.tol {
            return Ok(Solution { z, m, residual: res, iterations: it + 1, converged: true });
        }
    }
    Err(Error::MaxIterExceeded { iterations: config.max_iter, residual: res })
}

/// `D(ζ, ω) = |ζ - ω|² / (Im ζ Im ω)`, a monotone function of the hyperbolic distance.
pub fn hyperbolic_d(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm_sqr() / (a.im * b.im)
}

/// Per-step contraction ratios `sup_x D(m⁽ᵏ⁺¹⁾, m⁽ᵏ⁾) / sup_x D(m⁽ᵏ⁾, m⁽ᵏ⁻¹⁾)`
/// of the first `steps` plain iterations from `i·e`.
///
/// Steps whose distances have reached rounding level are skipped.
pub fn contraction_ratios(model: &ModelSpec, z: Complex64, steps: usize) -> Vec<f64> {
    let sup_d = |a: &[Complex64], b: &[Complex64]| {
        a.iter().zip(b).map(|(x, y)| hyperbolic_d(*x, *y)).fold(0.0, f64::max)
    };
    let mut m = vec![I; model.n()];
    let mut prev = None;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next: Vec<Complex64> = u_vec(model, z, &m).iter().map(|u| -1.0 / u).collect();
        let d = sup_d(&next, &m);
        if let Some(p) = prev {
            if p > 1e-22 && d > 1e-22 {
                out.push(d / p);
            }
        }
        prev = Some(d);
        m = next;
    }
    out
}

/// Guaranteed rate `(1 + η₀²/‖S‖)^{-2}` in the metric of [`hyperbolic_d`], valid for
/// `η₀ < min(1, 1/‖a‖)`, `Im z > η₀` and `|z| < 1/η₀`.
pub fn contraction_rate(model: &ModelSpec, eta: f64) -> f64 {
    (1.0 + eta * eta / model.norm_s_bb()).powi(-2)
}

/// Damped Newton iteration on `r(m) = m + 1/(z + a + Sm)`.
///
/// For `Im z > 0` every accepted iterate stays in the upper half-plane. For
/// `Im z = 0` the limit must not leave the closed upper half-plane.
pub fn solve_newton(
    model: &ModelSpec,
    z: Complex64,
    init: &[Complex64],
    config: &SolverConfig,
) -> Result<Solution> {
    check_init(model, init)?;
    if z.im < 0.0 {
        return Err(Error::InvalidInput("Im z must be nonnegative".into()));
    }
    if init.iter().any(|x| x.im < 0.0) {
        return Err(Error::Diverged("initial vector leaves the upper half-plane".into()));
    }
    let n = model.n();
    let k = model.kernel();
    let mut m = init.to_vec();
    let mut u = u_vec(model, z, &m);
    let mut r: Vec<Complex64> = m.iter().zip(&u).map(|(mi, ui)| mi + 1.0 / ui).collect();
    let mut res = r.iter().fold(0.0_f64, |a, x| a.max(x.norm()));
    for it in 0..MAX_NEWTON_STEPS {
        if res <= config.tol {
            if z.im == 0.0 && m.iter().any(|x| x.im < -config.tol) {
                return Err(Error::Diverged("real-axis limit left the upper half-plane".into()));
            }
            return Ok(Solution { z, m, residual: res, iterations: it, converged: true });
        }
        let jac = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            d - k[(i, j)] / (u[i] * u[i])
        });
        let rhs = DVector::from_iterator(n, r.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        if step.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let cand: Vec<Complex64> = m.iter().zip(step.iter()).map(|(mi, s)| mi + s * t).collect();
            let ok_domain = z.im == 0.0 || cand.iter().all(|x| x.im > 0.0);
            if ok_domain {
                let cu = u_vec(model, z, &cand);
                let cr: Vec<Complex64> = cand.iter().zip(&cu).map(|(mi, ui)| mi + 1.0 / ui).collect();
                let cres = cr.iter().fold(0.0_f64, |a, x| a.max(x.norm()));
                if cres.is_finite() && (cres < (1.0 - 1e-4 * t) * res || cres <= config.tol) {
                    m = cand;
                    u = cu;
                    r = cr;
                    res = cres;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Diverged(format!("line search stalled at residual {res:e}")));
        }
    }
    Err(Error::Diverged(format!("no convergence in {MAX_NEWTON_STEPS} Newton steps (residual {res:e})")))
}

/// Solves at `z` by fixed-point iteration at `Im z = max(1, Im z)` followed by
/// geometric continuation in `Im z` with Newton warm starts.
pub fn solve(model: &ModelSpec, z: Complex64, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    if z.im < 0.0 || !z.is_finite() {
        return Err(Error::InvalidInput(format!("spectral parameter {z} is not in the closed upper half-plane")));
    }
    let tau = z.re;
    let start = z.im.max(1.0);
    let mut sol = solve_fixed_point(model, Complex64::new(tau, start), None, config)?;
    let mut total = sol.iterations;
    let mut eta = start;
    while eta > z.im {
        let mut factor = config.continuation_factor;
        let mut refinements = 0;
        loop {
            let next = if eta * factor <= z.im || (z.im > 0.0 && eta * factor < z.im * 1.000001) {
                z.im
            } else if z.im == 0.0 && eta * factor < config.eta_floor * 1e-3 {
                0.0
            } else {
                eta * factor
            };
            let zn = Complex64::new(tau, next);
            let attempt = if config.newton {
                solve_newton(model, zn, &sol.m, config)
            } else {
                solve_fixed_point(model, zn, Some(&sol.m), config)
            };
            match attempt {
                Ok(s) => {
                    total += s.iterations;
                    sol = s;
                    eta = next;
                    break;
                }
                Err(e) if refinements >= MAX_REFINEMENTS => return Err(e),
                Err(_) => {
                    refinements += 1;
                    factor = factor.sqrt();
                }
            }
        }
    }
    sol.iterations = total;
    Ok(sol)
}

/// Solves on every `τ` of `tau_grid` at `Im z = eta`, in parallel.
///
/// Each point is continued independently from `Im z = 1`, so the result does
/// not depend on scheduling. Failed points carry `converged = false` and a NaN
/// density.
pub fn solve_grid(model: &ModelSpec, tau_grid: &[f64], eta: f64, config: &SolverConfig) -> Result<GridSolution> {
    config.validate()?;
    if eta < config.eta_floor {
        return Err(Error::InvalidInput(format!("eta {eta:e} is below the floor {:e}", config.eta_floor)));
    }
    let solutions: Vec<Solution> = tau_grid
        .par_iter()
        .map(|&tau| {
            let z = Complex64::new(tau, eta);
            solve(model, z, config).unwrap_or_else(|e| Solution {
                z,
                m: vec![Complex64::new(f64::NAN, f64::NAN); model.n()],
                residual: match e {
                    Error::MaxIterExceeded { residual, .. } => residual,
                    _ => f64::INFINITY,
                },
                iterations: 0,
                converged: false,
            })
        })
        .collect();
    let avg_density = solutions
        .iter()
        .map(|s| if s.converged { s.density(model).max(0.0) } else { f64::NAN })
        .collect();
    Ok(GridSolution { tau_grid: tau_grid.to_vec(), eta, solutions, avg_density })
}

/// Uniform grid `start, start + step, ..` up to and including `end` (up to rounding).
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return Vec::new();
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| start + k as f64 * step).collect()
}

/// Trapezoid rule for samples `ys` on the abscissae `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Outcome of the a priori checks on a solution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BoundsReport {
    /// `|m_x| ≤ 1/Im z`
    pub trivial_bound: bool,
    /// `‖m‖₂ ≤ 2/|z|`; only for `a = 0`.
    pub l2_bound: Option<bool>,
    /// Outside `[-Σ, Σ]`: `v_x ≤ π η / dist(τ, [-Σ, Σ])²`.
    pub support_bound: Option<bool>,
    /// `m(-z̄) = -conj(m(z))`; only for `a = 0` with a paired solution.
    pub symmetry: Option<bool>,
}

impl BoundsReport {
    pub fn all_ok(&self) -> bool {
        self.trivial_bound
            && self.l2_bound.unwrap_or(true)
            && self.support_bound.unwrap_or(true)
            && self.symmetry.unwrap_or(true)
    }
}

/// Checks the a priori bounds. `mirror` is the solution at `-z̄`, if available.
pub fn check_structural_bounds(solution: &Solution, model: &ModelSpec, mirror: Option<&Solution>) -> BoundsReport {
    let z = solution.z;
    let slack = 1e-9;
    let trivial_bound = z.im == 0.0 || solution.sup_norm() <= (1.0 + slack) / z.im;
    let l2_bound = model
        .has_zero_a()
        .then(|| model.l2_norm(&solution.m) <= 2.0 / z.norm() * (1.0 + slack));
    let sigma = model.sigma_bound();
    let support_bound = (z.re.abs() > sigma).then(|| {
        let dist = z.re.abs() - sigma;
        let bound = PI * z.im / (dist * dist);
        solution.v().iter().all(|v| *v <= bound * (1.0 + slack) + 1e-12)
    });
    let symmetry = match mirror {
        Some(other) if model.has_zero_a() => {
            let target = -z.conj();
            let close = (other.z - target).norm() <= 1e-14 * (1.0 + z.norm());
            let dev = solution
                .m
                .iter()
                .zip(&other.m)
                .map(|(a, b)| (b + a.conj()).norm())
                .fold(0.0, f64::max);
            Some(close && dev <= 1e-9)
        }
        _ => None,
    };
    BoundsReport { trivial_bound, l2_bound, support_bound, symmetry }
}

/// Closed-form Stieltjes transform of the semicircle law, `m² + zm + 1 = 0` with `Im m > 0`.
pub fn semicircle_stieltjes(z: Complex64) -> Complex64 {
    let root = (z * z - 4.0).sqrt();
    let c1 = (-z + root) / 2.0;
    let c2 = (-z - root) / 2.0;
    // on the real axis outside [-2, 2] pick the root of modulus < 1
    if z.im > 0.0 {
        if c1.im > c2.im {
            c1
        } else {
            c2
        }
    } else if (z.re.abs() <= 2.0) && c1.im >= 0.0 {
        c1.max_im(c2)
    } else if c1.norm() < c2.norm() {
        c1
    } else {
        c2
    }
}

trait MaxIm {
    fn max_im(self, other: Self) -> Self;
}

impl MaxIm for Complex64 {
    fn max_im(self, other: Self) -> Self {
        if self.im >= other.im {
            self
        } else {
            other
        }
    }
}

/// Semicircle density `(1/2π) √max(0, 4 - τ²)`.
pub fn semicircle_density(tau: f64) -> f64 {
    (4.0 - tau * tau).max(0.0).sqrt() / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::two_block;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fixed_point_semicircle_at_i() {
        let model = ModelSpec::semicircle(4).unwrap();
        let s = solve_fixed_point(&model, I, None, &SolverConfig::default()).unwrap();
        let g = (5.0_f64.sqrt() - 1.0) / 2.0;
        for mi in &s.m {
            assert!((mi - c(0.0, g)).norm() < 1e-12);
        }
        assert!(s.residual <= 1e-12);
    }

    #[test]
    fn fixed_point_rejects_real_axis() {
        let model = ModelSpec::semicircle(2).unwrap();
        assert!(solve_fixed_point(&model, c(0.5, 0.0), None, &SolverConfig::default()).is_err());
    }

    #[test]
    fn fixed_point_gives_up_near_axis() {
        let model = ModelSpec::semicircle(2).unwrap();
        let cfg = SolverConfig { max_iter: 200, ..Default::default() };
        let err = solve_fixed_point(&model, c(0.5, 1e-6), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::MaxIterExceeded { iterations: 200, .. }));
    }

    #[test]
    fn semicircle_near_zero() {
        let model = ModelSpec::semicircle(3).unwrap();
        let s = solve(&model, c(0.0, 1e-4), &SolverConfig::default()).unwrap();
        for mi in &s.m {
            assert!(mi.re.abs() < 1e-12);
            assert!((mi.im - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn newton_in_bulk_matches_closed_form() {
        let model = ModelSpec::semicircle(2).unwrap();
        let cfg = SolverConfig::default();
        let warm = solve(&model, c(0.5, 1e-4), &cfg).unwrap();
        let s = solve_newton(&model, c(0.5, 1e-8), &warm.m, &cfg).unwrap();
        let exact = c(-0.25, 3.75_f64.sqrt() / 2.0);
        assert!((s.m[0] - exact).norm() < 1e-7);
        assert!((semicircle_stieltjes(c(0.5, 1e-8)) - s.m[0]).norm() < 1e-12);
    }

    #[test]
    fn newton_outside_support_is_real() {
        let model = ModelSpec::semicircle(2).unwrap();
        let s = solve(&model, c(3.0, 1e-8), &SolverConfig::default()).unwrap();
        assert_relative_eq!(s.m[0].re, (-3.0 + 5.0_f64.sqrt()) / 2.0, epsilon = 1e-10);
        assert!(s.m[0].im < 1e-8);
        let real = solve(&model, c(3.0, 0.0), &SolverConfig::default()).unwrap();
        assert_relative_eq!(real.m[0].re, (-3.0 + 5.0_f64.sqrt()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn newton_rejects_lower_half_plane_init() {
        let model = ModelSpec::semicircle(2).unwrap();
        let err = solve_newton(&model, c(0.0, 0.1), &[c(0.0, -1.0), c(0.0, 1.0)], &SolverConfig::default());
        assert!(matches!(err, Err(Error::Diverged(_))));
    }

    /// Independent Newton solve of the reduced two-dimensional system
    /// `-1/μ = z + (1-δ)λν`, `-1/ν = z + λδμ + (1-δ)ν`.
    fn two_block_reduced(lambda: f64, delta: f64, z: Complex64) -> (Complex64, Complex64) {
        let (mut mu, mut nu) = (c(0.0, 1.0), c(0.0, 1.0));
        // plain iteration is a contraction at Im z = 2
        for _ in 0..2000 {
            let mu_n = -1.0 / (z + (1.0 - delta) * lambda * nu);
            let nu_n = -1.0 / (z + lambda * delta * mu + (1.0 - delta) * nu);
            mu = mu_n;
            nu = nu_n;
        }
        (mu, nu)
    }

    #[test]
    fn two_block_matches_reduced_system() {
        let model = two_block(3.0, 0.5, 2).unwrap();
        let z = c(0.0, 2.0);
        let s = solve_fixed_point(&model, z, None, &SolverConfig::default()).unwrap();
        let (mu, nu) = two_block_reduced(3.0, 0.5, z);
        assert!((s.m[0] - mu).norm() < 1e-12);
        assert!((s.m[1] - nu).norm() < 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn contraction_rate_holds() {
        let model = two_block(3.0, 0.3, 5).unwrap();
        for eta in [0.1, 0.5, 0.9] {
            let rate = contraction_rate(&model, eta);
            let ratios = contraction_ratios(&model, c(0.4, eta), 400);
            let tail = &ratios[ratios.len().saturating_sub(20)..];
            assert!(tail.iter().all(|r| *r <= rate + 0.05), "eta {eta}: {tail:?} vs {rate}");
        }
    }

    #[test]
    fn grid_reproduces_semicircle() {
        let model = ModelSpec::semicircle(1).unwrap();
        let grid = uniform_grid(-3.0, 3.0, 0.01);
        let g = solve_grid(&model, &grid, 1e-6, &SolverConfig::default()).unwrap();
        assert!(g.all_converged());
        for (t, d) in grid.iter().zip(&g.avg_density) {
            assert!((d - semicircle_density(*t)).abs() < 2e-3, "tau {t}: {d}");
        }
    }

    #[test]
    fn empty_grid() {
        let model = ModelSpec::semicircle(1).unwrap();
        let g = solve_grid(&model, &[], 1e-3, &SolverConfig::default()).unwrap();
        assert!(g.solutions.is_empty() && g.avg_density.is_empty());
    }

    #[test]
    fn grid_is_deterministic() {
        let model = two_block(3.0, 0.2, 5).unwrap();
        let grid = uniform_grid(-2.0, 2.0, 0.1);
        let cfg = SolverConfig::default();
        let a = solve_grid(&model, &grid, 1e-3, &cfg).unwrap();
        let b = solve_grid(&model, &grid, 1e-3, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mass_is_one() {
        let model = two_block(3.0, 0.25, 4).unwrap();
        let sigma = model.sigma_bound();
        let grid = uniform_grid(-sigma - 1.0, sigma + 1.0, 2e-4);
        let g = solve_grid(&model, &grid, 1e-4, &SolverConfig::default()).unwrap();
        for x in 0..model.n() {
            let vx: Vec<f64> = g.solutions.iter().map(|s| s.m[x].im / PI).collect();
            assert_relative_eq!(trapezoid(&grid, &vx), 1.0, epsilon = 0.01);
        }
    }

    #[test]
    fn structural_bounds() {
        let model = ModelSpec::semicircle(2).unwrap();
        let cfg = SolverConfig::default();
        let s = solve(&model, I, &cfg).unwrap();
        let r = check_structural_bounds(&s, &model, None);
        assert!(r.trivial_bound && r.l2_bound == Some(true));

        let a = solve(&model, c(0.7, 0.1), &cfg).unwrap();
        let b = solve(&model, c(-0.7, 0.1), &cfg).unwrap();
        assert_eq!(check_structural_bounds(&a, &model, Some(&b)).symmetry, Some(true));

        let out = solve(&model, c(2.5, 1e-6), &cfg).unwrap();
        assert!(out.avg_v(&model) < 1e-4);
        assert_eq!(check_structural_bounds(&out, &model, None).support_bound, Some(true));
    }

    #[test]
    fn imaginary_part_positive_and_bounded() {
        let model = two_block(3.0, 0.1, 6).unwrap();
        let cfg = SolverConfig::default();
        for tau in [-3.0, -1.0, 0.0, 0.5, 2.2] {
            for eta in [1e-3, 0.1, 3.0] {
                let s = solve(&model, c(tau, eta), &cfg).unwrap();
                assert!(s.m.iter().all(|x| x.im > 0.0));
                assert!(s.sup_norm() <= 1.0 / eta + 1e-9);
            }
        }
    }
}
