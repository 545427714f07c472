//! The perturbed equation `-1/g = z + a + Sg + d` and its stability bounds.
//!
//! `g - m` is split along the bad direction `b` of `B`: with `u = (g - m)/|m|`,
//! `Θ = <b u>/<b²>` and `r = Qu`. `Θ` solves the cubic with coefficients
//! `μ₁, μ₂, μ₃` up to a remainder of order `|Θ|⁴ + ‖d‖² + |Θ|‖d‖`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::shape::SupportProfile;
use crate::solver::{solve, GridSolution, Solution, SolverConfig};
use crate::spectral::{binv_norms, smallest_eigenpair_b, top_eigenpair, unit, BadDirection, Operators, SpectralData};

const MAX_NEWTON_STEPS: usize = 60;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn sup(w: &[Complex64]) -> f64 {
    w.iter().fold(0.0, |a: f64, x| a.max(x.norm()))
}

/// Constants of the analyticity ball: `ε = 1/(3Σ + 9‖S‖ΦΨ)`, `δ = ε/(8Φ²Ψ)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SmallnessGate {
    /// `‖m‖∞`
    pub phi: f64,
    /// `max(1, ‖B⁻¹‖)`
    pub psi: f64,
    pub eps: f64,
    pub delta: f64,
}

pub fn smallness_gate(model: &ModelSpec, solution: &Solution) -> Result<SmallnessGate> {
    let ops = Operators::new(model, solution);
    let (bb, _) = binv_norms(&ops)?;
    let phi = solution.sup_norm();
    let psi = bb.max(1.0);
    let eps = 1.0 / (3.0 * model.sigma_bound() + 9.0 * model.norm_s_bb() * phi * psi);
    Ok(SmallnessGate { phi, psi, eps, delta: eps / (8.0 * phi * phi * psi) })
}

/// Outcome of one perturbed solve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerturbationResult {
    pub z: Complex64,
    pub d: Vec<Complex64>,
    pub g: Vec<Complex64>,
    /// Unperturbed solution `m(z)`.
    pub m: Vec<Complex64>,
    /// `u = (g - m)/|m|`
    pub u: Vec<Complex64>,
    pub theta: Complex64,
    /// `‖Qu‖∞`
    pub r_norm: f64,
    /// Residual of the perturbed equation at `g`.
    pub residual: f64,
    /// `|μ₃Θ³ + μ₂Θ² + μ₁Θ + <|m| b d>|` when `β` is isolated.
    pub cubic_residual: Option<f64>,
    /// Observed/predicted ratios, by bound name.
    pub bound_ratios: BTreeMap<String, f64>,
}

fn newton_perturbed(model: &ModelSpec, z: Complex64, d: &[Complex64], init: &[Complex64], tol: f64) -> Result<(Vec<Complex64>, f64)> {
    let n = model.n();
    let k = model.kernel();
    let u_of = |g: &[Complex64]| -> Vec<Complex64> {
        let sg = model.apply_s(g);
        (0..n).map(|i| z + model.a()[i] + sg[i] + d[i]).collect()
    };
    let res_of = |g: &[Complex64], u: &[Complex64]| -> Vec<Complex64> { g.iter().zip(u).map(|(gi, ui)| gi + 1.0 / ui).collect() };
    let mut g = init.to_vec();
    let mut u = u_of(&g);
    let mut r = res_of(&g, &u);
    let mut res = sup(&r);
    for _ in 0..MAX_NEWTON_STEPS {
        if res <= tol {
            return Ok((g, res));
        }
        let jac = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { Complex64::new(1.0, 0.0) } else { ZERO };
            id - k[(i, j)] / (u[i] * u[i])
        });
        let rhs = DVector::from_iterator(n, r.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        let mut t = 1.0;
        loop {
            let cand: Vec<Complex64> = g.iter().zip(step.iter()).map(|(a, s)| a + s * t).collect();
            let cu = u_of(&cand);
            let cr = res_of(&cand, &cu);
            let cres = sup(&cr);
            if cres.is_finite() && (cres < (1.0 - 1e-4 * t) * res || cres <= tol) {
                g = cand;
                u = cu;
                r = cr;
                res = cres;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(Error::Diverged(format!("perturbed Newton stalled at residual {res:e}")));
            }
        }
    }
    Err(Error::Diverged(format!("perturbed Newton did not converge (residual {res:e})")))
}

/// `<e, w> = 2<b A(b, Rw)> + <b² |m| e^{-iq} w>`, with `R w = B⁻¹Q(|m| w)` and
/// `A(h, w) = e^{-iq}(h Fw + (Fh) w)/2`.
pub fn e_functional(ops: &Operators, bad: &BadDirection, w: &[Complex64]) -> Result<Complex64> {
    let n = ops.n();
    let b = &bad.b;
    let e1 = &ops.phase_conj;
    let mw: Vec<Complex64> = (0..n).map(|i| w[i] * ops.abs_m[i]).collect();
    let rw = bad.binv_q(ops, &mw)?;
    let frw = ops.apply_f(&rw);
    let fb = ops.apply_f(b);
    let a_term = ops.avg((0..n).map(|i| b[i] * e1[i] * (b[i] * frw[i] + fb[i] * rw[i])));
    let direct = ops.avg((0..n).map(|i| b[i] * b[i] * ops.abs_m[i] * e1[i] * w[i]));
    Ok(a_term + direct)
}

/// The vector `e` with `<e, w> = Σ π conj(e) w`.
pub fn e_vector(ops: &Operators, bad: &BadDirection) -> Result<Vec<Complex64>> {
    (0..ops.n())
        .map(|k| Ok((e_functional(ops, bad, &unit(ops.n(), k))? / ops.weights[k]).conj()))
        .collect()
}

fn bad_direction(model: &ModelSpec, m: &Solution) -> Result<(Operators, BadDirection)> {
    let ops = Operators::new(model, m);
    let (_, f_tilde, _) = top_eigenpair(&ops.f_tilde)?;
    let f: Vec<f64> = (0..ops.n()).map(|i| f_tilde[i] / ops.sqrt_w[i]).collect();
    let bad = smallest_eigenpair_b(&ops, &f)?;
    Ok((ops, bad))
}

/// Solves the perturbed equation from `base` (= `m(z)`); `gate` enforces `‖d‖∞ ≤ δ`.
pub fn solve_perturbed_from(model: &ModelSpec, base: &Solution, d: &[Complex64], config: &SolverConfig, gate: bool) -> Result<PerturbationResult> {
    let n = model.n();
    if d.len() != n {
        return Err(Error::DimensionMismatch(format!("perturbation has length {}, model has {n}", d.len())));
    }
    let dn = sup(d);
    if gate {
        let g = smallness_gate(model, base)?;
        if dn > g.delta {
            return Err(Error::PerturbationTooLarge { norm: dn, gate: g.delta });
        }
    }
    let (g, residual) = newton_perturbed(model, base.z, d, &base.m, config.tol)?;
    let abs_m = base.abs_m();
    let u: Vec<Complex64> = (0..n).map(|i| (g[i] - base.m[i]) / abs_m[i]).collect();
    let diff = sup(&(0..n).map(|i| g[i] - base.m[i]).collect::<Vec<_>>());
    let mut bound_ratios = BTreeMap::new();
    let avg_v = base.avg_v(model);
    if dn > 0.0 {
        bound_ratios.insert("rough_sup".to_string(), diff / (dn / (avg_v * avg_v)));
    }
    let (theta, r_norm, cubic_residual) = match bad_direction(model, base) {
        Ok((ops, bad)) => {
            let pu = bad.project(&ops, &u);
            let bt = ops.avg(bad.b.iter().map(|x| x * x));
            let theta = ops.avg(bad.b.iter().zip(&u).map(|(b, x)| b * x)) / bt;
            let r: Vec<Complex64> = u.iter().zip(&pu).map(|(a, b)| a - b).collect();
            let mut cubic = None;
            if let Ok(mu) = crate::spectral::cubic_coefficients_exact(&ops, &bad) {
                let forcing = ops.avg((0..n).map(|i| abs_m[i] * bad.b[i] * d[i]));
                cubic = Some((mu[2] * theta.powi(3) + mu[1] * theta * theta + mu[0] * theta + forcing).norm());
            }
            let md: Vec<Complex64> = (0..n).map(|i| d[i] * abs_m[i]).collect();
            if let Ok(rd) = bad.binv_q(&ops, &md) {
                let scale = theta.norm_sqr() + dn * dn;
                if scale > 0.0 {
                    let dev = sup(&r.iter().zip(&rd).map(|(a, b)| a - b).collect::<Vec<_>>());
                    bound_ratios.insert("r_second_order".to_string(), dev / scale);
                }
            }
            (theta, sup(&r), cubic)
        }
        Err(_) => (Complex64::new(f64::NAN, f64::NAN), f64::NAN, None),
    };
    Ok(PerturbationResult { z: base.z, d: d.to_vec(), g, m: base.m.clone(), u, theta, r_norm, residual, cubic_residual, bound_ratios })
}

/// Solves `m(z)` and then the gated perturbed equation.
pub fn solve_perturbed(model: &ModelSpec, z: Complex64, d: &[Complex64], config: &SolverConfig) -> Result<PerturbationResult> {
    let base = solve(model, z, config)?;
    solve_perturbed_from(model, &base, d, config, true)
}

/// Verdict of the cubic relation for one perturbation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CubicCheck {
    pub residual: f64,
    /// `|Θ|⁴ + ‖d‖² + |Θ|‖d‖`
    pub scale: f64,
    pub constant: f64,
    pub pass: bool,
}

pub const DEFAULT_CUBIC_CONSTANT: f64 = 100.0;

/// Checks `|μ₃Θ³ + μ₂Θ² + μ₁Θ + <|m| b d>| ≤ C(|Θ|⁴ + ‖d‖² + |Θ|‖d‖)`.
pub fn cubic_check(model: &ModelSpec, result: &PerturbationResult, spectral: &SpectralData, eps_star: f64, constant: f64) -> Result<CubicCheck> {
    if !spectral.in_small_alpha_regime(eps_star) {
        return Err(Error::NotSmallAlpha { avg_v: spectral.avg_v, eps_star });
    }
    let (b, mu) = match (&spectral.b, &spectral.mu) {
        (Some(b), Some(mu)) => (b, mu),
        _ => return Err(Error::NotIsolated { gap: f64::NAN }),
    };
    let w = model.weights();
    let avg = |it: &mut dyn Iterator<Item = Complex64>| -> Complex64 { it.zip(w).map(|(x, p)| x * *p).sum() };
    let theta = avg(&mut b.iter().zip(&result.u).map(|(b, u)| b * u)) / avg(&mut b.iter().map(|x| x * x));
    let forcing = avg(&mut (0..b.len()).map(|i| result.m[i].norm() * b[i] * result.d[i]));
    let residual = (mu[2] * theta.powi(3) + mu[1] * theta * theta + mu[0] * theta + forcing).norm();
    let dn = sup(&result.d);
    let t = theta.norm();
    let scale = t.powi(4) + dn * dn + t * dn;
    Ok(CubicCheck { residual, scale, constant, pass: residual <= constant * scale })
}

/// Control parameters of the refined bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct StabilityParams {
    /// `dist(z, supp v)`
    pub varpi: f64,
    /// `<v(Re z)>`
    pub rho: f64,
    /// `‖d‖² + |<t¹, d>| + |<t², d>|`
    pub delta: f64,
    pub upsilon: f64,
}

/// `min{δ/ρ², δ/ϖ^{2/3}, δ^{1/3}}`, dropping branches with a zero denominator.
pub fn upsilon(delta: f64, rho: f64, varpi: f64) -> f64 {
    let mut u = delta.cbrt();
    if rho > 0.0 {
        u = u.min(delta / (rho * rho));
    }
    if varpi > 0.0 {
        u = u.min(delta / varpi.powf(2.0 / 3.0));
    }
    u
}

/// Distance from `z` to the union of the support intervals.
pub fn distance_to_support(z: Complex64, profile: &SupportProfile) -> f64 {
    profile
        .intervals
        .iter()
        .map(|&(a, b)| {
            let dx = if z.re < a { a - z.re } else if z.re > b { z.re - b } else { 0.0 };
            dx.hypot(z.im)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `t¹ = |m| b̄` and `t² = e` at `z`, paired with `d`; `ρ` uses `Re z + iη_floor`.
pub fn stability_params(model: &ModelSpec, profile: &SupportProfile, z: Complex64, d: &[Complex64], config: &SolverConfig) -> Result<StabilityParams> {
    let varpi = distance_to_support(z, profile);
    let rho = solve(model, Complex64::new(z.re, config.eta_floor), config)?.avg_v(model);
    let dn = sup(d);
    let mut delta = dn * dn;
    if dn > 0.0 {
        let m = solve(model, z, config)?;
        let (ops, bad) = bad_direction(model, &m)?;
        let n = model.n();
        let t1 = ops.avg((0..n).map(|i| ops.abs_m[i] * bad.b[i] * d[i]));
        let t2 = e_functional(&ops, &bad, d)?;
        delta += t1.norm() + t2.norm();
    }
    Ok(StabilityParams { varpi, rho, delta, upsilon: upsilon(delta, rho, varpi) })
}

/// Largest `‖m(z₁) - m(z₂)‖∞ / |z₁ - z₂|^{1/3}` over adjacent grid points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HolderReport {
    pub worst_ratio: f64,
    /// Midpoint of the worst pair.
    pub at: f64,
}

pub fn holder_check(grid: &GridSolution) -> HolderReport {
    let s = &grid.solutions;
    let mut best = HolderReport { worst_ratio: 0.0, at: f64::NAN };
    for w in s.windows(2) {
        let dz = (w[1].z - w[0].z).norm();
        if !(dz > 0.0) || !w[0].converged || !w[1].converged {
            continue;
        }
        let dm = w[0].m.iter().zip(&w[1].m).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let ratio = dm / dz.cbrt();
        if ratio > best.worst_ratio {
            best = HolderReport { worst_ratio: ratio, at: 0.5 * (w[0].z.re + w[1].z.re) };
        }
    }
    best
}
