//! Spectral data of the stability operators at a solved spectral parameter.
//!
//! `F w = |m| S(|m| w)` is self-adjoint on `L²(π)`; `B = e^{-2iq} - F` with
//! `e^{iq} = m/|m|` is complex symmetric. Both are conjugated by `diag(√π)`
//! so that dense symmetric / general eigensolvers apply directly. Vectors in
//! public fields are always in function coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::Solution;

/// Spectral gaps below this count as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-13;
/// Modulus separation required of the eigenvalue of `B` closest to zero.
pub const ISOLATION_GAP: f64 = 1e-10;
/// Default upper bound on `<v>` for the expanded cubic coefficients.
pub const DEFAULT_EPS_STAR: f64 = 0.15;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Everything [`analyze`] extracts at one `z`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectralData {
    pub z: Complex64,
    /// `‖F‖_{L²→L²}`
    pub lambda: f64,
    pub f: Vec<f64>,
    pub gap: f64,
    /// `<f, v/|m|>`
    pub alpha: f64,
    /// `<f |m|>`
    pub f_abs_m: f64,
    pub avg_v: f64,
    /// `|λ - (1 - (Im z/α) <f|m|>)|`; `None` at `Im z = 0`.
    pub f_identity_residual: Option<f64>,
    pub p: Vec<f64>,
    pub sigma: f64,
    pub psi: f64,
    /// Eigenvalue of `B` of least modulus, when isolated.
    pub beta: Option<Complex64>,
    /// Its eigenvector, normalized by `<f, b> = 1`.
    pub b: Option<Vec<Complex64>>,
    /// `(μ₁, μ₂, μ₃)` from `B`, `β`, `b`.
    pub mu: Option<[Complex64; 3]>,
    /// `(μ₁, μ₂, μ₃)` to leading orders in `α` and `η`.
    pub mu_expanded: [Complex64; 3],
    pub binv_norm_bb: Option<f64>,
    pub binv_norm_l2: Option<f64>,
}

impl SpectralData {
    pub fn in_small_alpha_regime(&self, eps_star: f64) -> bool {
        self.avg_v <= eps_star
    }
}

/// Dense representations of `F` and `B` in `L²(π)`-orthonormal coordinates.
#[derive(Debug, Clone)]
pub struct Operators {
    pub(crate) sqrt_w: Vec<f64>,
    pub(crate) weights: Vec<f64>,
    pub(crate) abs_m: Vec<f64>,
    /// `e^{-iq} = conj(m)/|m|`
    pub(crate) phase_conj: Vec<Complex64>,
    pub(crate) f_tilde: DMatrix<f64>,
    pub(crate) b_tilde: DMatrix<Complex64>,
}

impl Operators {
    pub fn new(model: &ModelSpec, solution: &Solution) -> Self {
        let n = model.n();
        let sqrt_w: Vec<f64> = model.weights().iter().map(|w| w.sqrt()).collect();
        let abs_m = solution.abs_m();
        let phase_conj: Vec<Complex64> = solution.m.iter().map(|m| m.conj() / m.norm()).collect();
        let s = model.s();
        let f_tilde = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * abs_m[i] * s[(i, j)] * abs_m[j] * sqrt_w[j]);
        let b_tilde = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { phase_conj[i] * phase_conj[i] } else { Complex64::new(0.0, 0.0) };
            d - f_tilde[(i, j)]
        });
        Operators { sqrt_w, weights: model.weights().to_vec(), abs_m, phase_conj, f_tilde, b_tilde }
    }

    pub fn n(&self) -> usize {
        self.abs_m.len()
    }

    /// `F` in orthonormal coordinates (symmetric).
    pub fn f_matrix(&self) -> &DMatrix<f64> {
        &self.f_tilde
    }

    /// `B` in orthonormal coordinates (complex symmetric).
    pub fn b_matrix(&self) -> &DMatrix<Complex64> {
        &self.b_tilde
    }

    pub(crate) fn to_ortho(&self, w: &[Complex64]) -> DVector<Complex64> {
        DVector::from_iterator(self.n(), w.iter().zip(&self.sqrt_w).map(|(x, s)| x * *s))
    }

    pub(crate) fn from_ortho(&self, w: &DVector<Complex64>) -> Vec<Complex64> {
        w.iter().zip(&self.sqrt_w).map(|(x, s)| x / *s).collect()
    }

    /// `Fw` in function coordinates.
    pub fn apply_f(&self, w: &[Complex64]) -> Vec<Complex64> {
        let wt = self.to_ortho(w);
        let ft = self.f_tilde.map(|x| Complex64::new(x, 0.0));
        self.from_ortho(&(ft * wt))
    }

    /// Bilinear average `<x> = Σ π_i x_i` of a product.
    pub(crate) fn avg(&self, x: impl IntoIterator<Item = Complex64>) -> Complex64 {
        x.into_iter().zip(&self.weights).map(|(v, p)| v * *p).sum()
    }
}

/// `F` in orthonormal coordinates.
pub fn build_f(model: &ModelSpec, solution: &Solution) -> DMatrix<f64> {
    Operators::new(model, solution).f_tilde
}

/// Top eigenpair of `F̃` (orthonormal coordinates) and `Gap(F)`.
///
/// Returns `(λ, f̃, gap)` with `f̃ ≥ 0`, `‖f̃‖ = 1`.
pub fn top_eigenpair(f_tilde: &DMatrix<f64>) -> Result<(f64, DVector<f64>, f64)> {
    let n = f_tilde.nrows();
    let eig = f_tilde.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let lambda = eig.eigenvalues[top];
    // second largest eigenvalue of |F|
    let second = order[1..]
        .iter()
        .map(|&k| eig.eigenvalues[k].abs())
        .fold(0.0, f64::max);
    let gap = lambda - second;
    if gap < DEGENERATE_GAP {
        return Err(Error::DegenerateTop { gap });
    }
    let mut f = eig.eigenvectors.column(top).into_owned();
    if f.sum() < 0.0 {
        f = -f;
    }
    // Perron–Frobenius: entries are nonnegative up to rounding
    f.apply(|x| *x = x.abs());
    let norm = f.norm();
    Ok((lambda, f / norm, gap))
}

/// `|λ - (1 - (Im z/α)<f|m|>)|`.
pub fn verify_f_identity(lambda: f64, alpha: f64, f_abs_m: f64, eta: f64) -> f64 {
    (lambda - (1.0 - eta / alpha * f_abs_m)).abs()
}

/// The eigenvalue of `B` of least modulus and its eigenvector.
#[derive(Debug, Clone)]
pub struct BadDirection {
    pub beta: Complex64,
    /// Function coordinates, `<f, b> = 1`.
    pub b: Vec<Complex64>,
    b_tilde: DVector<Complex64>,
    shift: f64,
    // LU of B̃ + s P̃, used for B⁻¹Q
    shifted: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Eigenvalues of a general complex matrix.
///
/// faer is fast but has been seen to return all zeros on exactly structured
/// inputs, so its output is checked against `tr A` and `tr A²` and replaced
/// by a Schur decomposition when either disagrees.
pub(crate) fn complex_eigenvalues(a: &DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    let fast = faer::Mat::from_fn(n, n, |i, j| a[(i, j)]).eigenvalues().ok();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let trace = a.trace();
    let trace_sq: Complex64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] * a[(j, i)]).sum();
    let tol = 1e-10 * n as f64;
    let consistent = |e: &[Complex64]| {
        let s1: Complex64 = e.iter().sum();
        let s2: Complex64 = e.iter().map(|x| x * x).sum();
        e.iter().all(|x| x.is_finite()) && (s1 - trace).norm() <= tol * scale && (s2 - trace_sq).norm() <= tol * scale * scale
    };
    match fast {
        Some(e) if consistent(&e) => Some(e),
        _ => {
            let e: Vec<Complex64> = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 10_000)?.eigenvalues()?.iter().copied().collect();
            consistent(&e).then_some(e)
        }
    }
}

/// Extracts `(β, b)` from `B̃`, normalizing `b` against `f` (function coordinates).
pub fn smallest_eigenpair_b(ops: &Operators, f: &[f64]) -> Result<BadDirection> {
    let n = ops.n();
    let eigs = complex_eigenvalues(&ops.b_tilde).ok_or(Error::NotIsolated { gap: f64::NAN })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigs[a].norm().total_cmp(&eigs[b].norm()));
    let beta = eigs[order[0]];
    if n > 1 {
        let gap = eigs[order[1]].norm() - beta.norm();
        if gap < ISOLATION_GAP {
            return Err(Error::NotIsolated { gap });
        }
    }
    let shifted = &ops.b_tilde - DMatrix::from_diagonal_element(n, n, beta);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let k = (0..n)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap_or(0);
    let mut b_tilde = DVector::from_iterator(n, v_t.row(k).iter().map(|x| x.conj()));
    // normalize <f, b> = Σ π f b = Σ f̃ b̃ to one
    let pairing: Complex64 = b_tilde
        .iter()
        .zip(f.iter().zip(&ops.sqrt_w))
        .map(|(bt, (fi, s))| bt * (fi * s))
        .sum();
    if pairing.norm() < 1e-300 {
        return Err(Error::NotIsolated { gap: 0.0 });
    }
    b_tilde /= pairing;
    let b = ops.from_ortho(&b_tilde);

    // P̃ = b̃ b̃ᵀ / (b̃ᵀ b̃); shift so the eigenvalue β + s stays away from zero
    let shift = if (beta + 1.0).norm() >= 1.0 { 1.0 } else { -1.0 };
    let btb: Complex64 = b_tilde.iter().map(|x| x * x).sum();
    let proj = &b_tilde * b_tilde.transpose() / btb;
    let shifted = (&ops.b_tilde + proj * Complex64::new(shift, 0.0)).lu();
    Ok(BadDirection { beta, b, b_tilde, shift, shifted })
}

impl BadDirection {
    /// `P w = (<b w> / <b²>) b` (bilinear averages), the spectral projector for `β`.
    pub fn project(&self, ops: &Operators, w: &[Complex64]) -> Vec<Complex64> {
        let wt = ops.to_ortho(w);
        let coeff = self.b_tilde.transpose() * &wt;
        let btb: Complex64 = self.b_tilde.iter().map(|x| x * x).sum();
        let c = coeff[(0, 0)] / btb;
        self.b.iter().map(|x| x * c).collect()
    }

    /// `B⁻¹ Q w` with `Q = 1 - P`.
    pub fn binv_q(&self, ops: &Operators, w: &[Complex64]) -> Result<Vec<Complex64>> {
        let pw = self.project(ops, w);
        let qw: Vec<Complex64> = w.iter().zip(&pw).map(|(a, b)| a - b).collect();
        let x = self.shifted.solve(&ops.to_ortho(&qw)).ok_or(Error::SingularB)?;
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::SingularB);
        }
        Ok(ops.from_ortho(&x))
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

/// `p = sign Re m`, with `sign 0 = +1`.
pub fn sign_vector(solution: &Solution) -> Vec<f64> {
    solution.m.iter().map(|m| if m.re < 0.0 { -1.0 } else { 1.0 }).collect()
}

/// `σ = <p f³>` and `ψ = <Q⁰(pf²), ((1+λ)(1-F)⁻¹ - 1) Q⁰(pf²)>`.
///
/// `(1 - F)⁻¹` on the complement of `f` is evaluated by solving with the
/// rank-one deflation `1 - F + f<f, ·>`.
pub fn sigma_psi(ops: &Operators, lambda: f64, f_tilde: &DVector<f64>, gap: f64, p: &[f64]) -> Result<(f64, f64)> {
    if gap < 1e-10 {
        return Err(Error::GapTooSmall { gap });
    }
    let (q0, x) = deflated_solve(ops, f_tilde, p)?;
    let sigma = (0..ops.n())
        .map(|i| ops.weights[i] * p[i] * (f_tilde[i] / ops.sqrt_w[i]).powi(3))
        .sum();
    let psi = q0.dot(&((1.0 + lambda) * &x - &q0));
    Ok((sigma, psi))
}

/// Returns `(Q⁰(pf²), (1 - F)⁻¹ Q⁰(pf²))` in orthonormal coordinates.
fn deflated_solve(ops: &Operators, f_tilde: &DVector<f64>, p: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = ops.n();
    // pf² in function coordinates, then to orthonormal coordinates
    let pf2 = DVector::from_fn(n, |i, _| {
        let fi = f_tilde[i] / ops.sqrt_w[i];
        p[i] * fi * fi * ops.sqrt_w[i]
    });
    let q0 = &pf2 - f_tilde * f_tilde.dot(&pf2);
    let system = DMatrix::identity(n, n) - &ops.f_tilde + f_tilde * f_tilde.transpose();
    let x = system.lu().solve(&q0).ok_or(Error::GapTooSmall { gap: 0.0 })?;
    Ok((q0, x))
}

/// `2i (1 - F)⁻¹ Q⁰(pf²) α + f`, the first-order prediction for `b` (function coordinates).
pub fn b_expansion(ops: &Operators, f_tilde: &DVector<f64>, p: &[f64], alpha: f64) -> Result<Vec<Complex64>> {
    let (_, x) = deflated_solve(ops, f_tilde, p)?;
    Ok((0..ops.n())
        .map(|i| Complex64::new(f_tilde[i], 2.0 * alpha * x[i]) / ops.sqrt_w[i])
        .collect())
}

/// `β ≈ <f|m|>η/α - 2iσα + 2(ψ - σ²)α²`.
pub fn beta_expansion(f_abs_m: f64, eta: f64, alpha: f64, sigma: f64, psi: f64) -> Complex64 {
    Complex64::new(eta_over(eta, alpha) * f_abs_m + 2.0 * (psi - sigma * sigma) * alpha * alpha, -2.0 * sigma * alpha)
}

fn eta_over(eta: f64, alpha: f64) -> f64 {
    if eta == 0.0 {
        0.0
    } else {
        eta / alpha
    }
}

/// Cubic coefficients computed from `B`, `β` and `b`.
pub fn cubic_coefficients_exact(ops: &Operators, bad: &BadDirection) -> Result<[Complex64; 3]> {
    let n = ops.n();
    let beta = bad.beta;
    let b = &bad.b;
    let e1 = &ops.phase_conj;
    let e2: Vec<Complex64> = e1.iter().map(|x| x * x).collect();
    let mu1 = -beta * ops.avg(b.iter().map(|x| x * x));
    let mu2 = ops.avg((0..n).map(|i| (e2[i] * e1[i] - beta * e1[i]) * b[i].powi(3)));
    let rhs: Vec<Complex64> = (0..n).map(|i| b[i] * b[i] * e1[i] * (e2[i] - beta)).collect();
    let y = bad.binv_q(ops, &rhs)?;
    let fy = ops.apply_f(&y);
    let mu3 = ops.avg((0..n).map(|i| b[i] * b[i] * e1[i] * (fy[i] + (e2[i] - beta) * y[i])));
    Ok([mu1, mu2, mu3])
}

/// Cubic coefficients expanded in `α` and `η`.
pub fn cubic_coefficients_expanded(f_abs_m: f64, eta: f64, alpha: f64, sigma: f64, psi: f64) -> [Complex64; 3] {
    let t = eta_over(eta, alpha) * f_abs_m;
    let mu1 = Complex64::new(-t - 2.0 * (psi - sigma * sigma) * alpha * alpha, 2.0 * sigma * alpha);
    let mu2 = Complex64::new((1.0 - t) * sigma, (3.0 * psi - sigma * sigma) * alpha);
    let mu3 = Complex64::new((1.0 - t) * psi, 0.0);
    [mu1, mu2, mu3]
}

/// `(‖B⁻¹‖_{B→B}, ‖B⁻¹‖_{L²→L²})`.
pub fn binv_norms(ops: &Operators) -> Result<(f64, f64)> {
    let n = ops.n();
    let svals = ops.b_tilde.singular_values();
    let smax = svals.max();
    let smin = svals.min();
    if !(smin > 1e-14 * smax.max(1.0)) {
        return Err(Error::SingularB);
    }
    let inv = ops.b_tilde.clone().try_inverse().ok_or(Error::SingularB)?;
    // function coordinates: M_ij = B̃⁻¹_ij √π_j / √π_i
    let bb = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| inv[(i, j)].norm() * ops.sqrt_w[j] / ops.sqrt_w[i])
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    Ok((bb, 1.0 / smin))
}

/// Options for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    /// Compute `β`, `b` and the exact cubic coefficients.
    pub bad_direction: bool,
    /// Compute `‖B⁻¹‖`.
    pub binv: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { bad_direction: true, binv: true }
    }
}

/// Collects the spectral data of `F` and `B` at `solution.z`.
///
/// Failures in the `B`-dependent parts (non-isolated `β`, singular `B`) leave
/// the corresponding fields `None`; a degenerate top eigenvalue of `F` or a
/// vanishing gap is an error.
pub fn analyze(model: &ModelSpec, solution: &Solution, opts: AnalyzeOptions) -> Result<SpectralData> {
    let ops = Operators::new(model, solution);
    let (lambda, f_tilde, gap) = top_eigenpair(&ops.f_tilde)?;
    let f: Vec<f64> = (0..ops.n()).map(|i| f_tilde[i] / ops.sqrt_w[i]).collect();
    let v = solution.v();
    let alpha = model.avg(&(0..ops.n()).map(|i| f[i] * v[i] / ops.abs_m[i]).collect::<Vec<_>>());
    let f_abs_m = model.avg(&(0..ops.n()).map(|i| f[i] * ops.abs_m[i]).collect::<Vec<_>>());
    let eta = solution.z.im;
    let f_identity_residual = (eta > 0.0).then(|| verify_f_identity(lambda, alpha, f_abs_m, eta));
    let p = sign_vector(solution);
    let (sigma, psi) = sigma_psi(&ops, lambda, &f_tilde, gap, &p)?;
    let mu_expanded = cubic_coefficients_expanded(f_abs_m, eta, alpha, sigma, psi);

    let (mut beta, mut b, mut mu) = (None, None, None);
    if opts.bad_direction {
        if let Ok(bad) = smallest_eigenpair_b(&ops, &f) {
            mu = cubic_coefficients_exact(&ops, &bad).ok();
            beta = Some(bad.beta);
            b = Some(bad.b);
        }
    }
    let (binv_norm_bb, binv_norm_l2) = match opts.binv.then(|| binv_norms(&ops)) {
        Some(Ok((bb, l2))) => (Some(bb), Some(l2)),
        _ => (None, None),
    };
    Ok(SpectralData {
        z: solution.z,
        lambda,
        f,
        gap,
        alpha,
        f_abs_m,
        avg_v: solution.avg_v(model),
        f_identity_residual,
        p,
        sigma,
        psi,
        beta,
        b,
        mu,
        mu_expanded,
        binv_norm_bb,
        binv_norm_l2,
    })
}

/// Unit vector helper used by callers building functionals.
pub(crate) fn unit(n: usize, k: usize) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    e[k] = ONE;
    e
}
