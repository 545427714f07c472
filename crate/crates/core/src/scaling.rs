//! Symmetric scaling `v (η + Sv) = 1` on the imaginary axis and at `z = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_fully_indecomposable, ModelSpec};

/// Largest dimension handled by [`diagnose_scalability`].
pub const DIAGNOSE_MAX_DIM: usize = 12;
/// `‖v‖∞` above which the iteration is declared to blow up.
pub const BLOW_UP_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ScalingStatus {
    Unique,
    NonUnique,
    NotScalable,
    Undetermined,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScalingResult {
    pub v: Option<Vec<f64>>,
    /// `‖v (η + Sv) - 1‖∞` at the last iterate.
    pub residual: f64,
    pub status: ScalingStatus,
    pub j_value: Option<f64>,
    pub iterations: usize,
    pub eta: f64,
    /// Why a solution is absent or the status undetermined.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ScalingConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `θ` in `v ← (1-θ)v + θ/(η + Sv)`.
    pub theta: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig { tol: 1e-12, max_iter: 200_000, theta: 0.5 }
    }
}

fn residual(model: &ModelSpec, v: &[f64], eta: f64) -> f64 {
    let sv = model.apply_s_real(v);
    v.iter().zip(&sv).map(|(a, s)| (a * (eta + s) - 1.0).abs()).fold(0.0, f64::max)
}

/// One Newton step on `v (η + Sv) - 1`; `None` if it fails to help.
fn newton_polish(model: &ModelSpec, v: &[f64], eta: f64, res: f64) -> Option<(Vec<f64>, f64)> {
    let n = v.len();
    let k = model.kernel();
    let sv = model.apply_s_real(v);
    let jac = DMatrix::from_fn(n, n, |i, j| if i == j { eta + sv[i] } else { 0.0 } + v[i] * k[(i, j)]);
    let rhs = DVector::from_fn(n, |i, _| 1.0 - v[i] * (eta + sv[i]));
    let step = jac.lu().solve(&rhs)?;
    let cand: Vec<f64> = (0..n).map(|i| v[i] + step[i]).collect();
    if cand.iter().any(|x| !(*x > 0.0)) {
        return None;
    }
    let r = residual(model, &cand, eta);
    (r < res).then_some((cand, r))
}

/// Damped iteration for `1/v = η + Sv` (requires `a = 0`).
///
/// `θ` halves whenever the residual grows. At `η = 0` the pattern diagnosis
/// decides between `unique` and `non_unique`; a blow-up of `‖v‖∞` means
/// `not_scalable`.
pub fn scale_symmetric(model: &ModelSpec, eta: f64, config: &ScalingConfig) -> Result<ScalingResult> {
    if !model.has_zero_a() {
        return Err(Error::InvalidInput("scaling requires a = 0".into()));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput("eta must be nonnegative".into()));
    }
    let n = model.n();
    let mut v = vec![1.0; n];
    let mut res = residual(model, &v, eta);
    let mut theta = config.theta;
    let mut iterations = 0;
    let mut norm_hist = v.iter().cloned().fold(0.0, f64::max);
    let mut growing = 0usize;
    while res > config.tol && iterations < config.max_iter {
        iterations += 1;
        if res < 1e-4 {
            if let Some((cand, r)) = newton_polish(model, &v, eta, res) {
                v = cand;
                res = r;
                continue;
            }
        }
        let sv = model.apply_s_real(&v);
        let next: Vec<f64> = (0..n).map(|i| (1.0 - theta) * v[i] + theta / (eta + sv[i])).collect();
        let r = residual(model, &next, eta);
        if !r.is_finite() {
            return Ok(blown_up(eta, res, iterations, "iterate left the positive cone"));
        }
        if r > res && theta > 1e-3 {
            theta *= 0.5;
        }
        v = next;
        res = r;
        let norm = v.iter().cloned().fold(0.0, f64::max);
        if norm > BLOW_UP_NORM {
            return Ok(blown_up(eta, res, iterations, &format!("‖v‖∞ = {norm:e} exceeds {BLOW_UP_NORM:e}")));
        }
        if iterations % 1000 == 0 {
            growing = if norm > 1.5 * norm_hist { growing + 1 } else { 0 };
            norm_hist = norm;
        }
    }
    if res > config.tol {
        if growing >= 3 {
            return Ok(blown_up(eta, res, iterations, "‖v‖∞ grows without bound"));
        }
        return Ok(ScalingResult {
            v: None,
            residual: res,
            status: ScalingStatus::Undetermined,
            j_value: None,
            iterations,
            eta,
            note: Some(format!("no convergence in {} iterations", config.max_iter)),
        });
    }
    let (status, note) = if eta > 0.0 {
        (ScalingStatus::Unique, None)
    } else {
        match diagnose_scalability(&model.pattern()) {
            Ok(ScalingStatus::NotScalable) => (ScalingStatus::Undetermined, Some("converged although the pattern has no total support".into())),
            Ok(s) => (s, None),
            Err(e) => (ScalingStatus::Undetermined, Some(e.to_string())),
        }
    };
    let j_value = j_functional(model, &v, eta).ok();
    Ok(ScalingResult { v: Some(v), residual: res, status, j_value, iterations, eta, note })
}

fn blown_up(eta: f64, residual: f64, iterations: usize, why: &str) -> ScalingResult {
    ScalingResult {
        v: None,
        residual,
        status: ScalingStatus::NotScalable,
        j_value: None,
        iterations,
        eta,
        note: Some(why.to_string()),
    }
}

/// `J_η(w) = <w, Sw> - 2<log w> + 2η<w>`.
pub fn j_functional(model: &ModelSpec, w: &[f64], eta: f64) -> Result<f64> {
    if w.len() != model.n() {
        return Err(Error::DimensionMismatch(format!("vector of length {} for n = {}", w.len(), model.n())));
    }
    if w.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::NonPositiveInput);
    }
    let sw = model.apply_s_real(w);
    let quad = model.avg(&w.iter().zip(&sw).map(|(a, b)| a * b).collect::<Vec<_>>());
    let logs = model.avg(&w.iter().map(|x| x.ln()).collect::<Vec<_>>());
    Ok(quad - 2.0 * logs + 2.0 * eta * model.avg(w))
}

/// Kuhn's augmenting-path matching on the pattern with row `skip.0` and column `skip.1` removed.
fn has_perfect_matching(pattern: &[Vec<bool>], skip: Option<(usize, usize)>) -> bool {
    let n = pattern.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, p: &[Vec<bool>], skip: Option<(usize, usize)>, seen: &mut [bool], mc: &mut [Option<usize>]) -> bool {
        for j in 0..p.len() {
            if !p[i][j] || seen[j] || skip.is_some_and(|s| s.1 == j) {
                continue;
            }
            seen[j] = true;
            if mc[j].map_or(true, |k| augment(k, p, skip, seen, mc)) {
                mc[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..n {
        if skip.is_some_and(|s| s.0 == i) {
            continue;
        }
        let mut seen = vec![false; n];
        if !augment(i, pattern, skip, &mut seen, &mut match_col) {
            return false;
        }
    }
    true
}

/// `true` iff every nonzero entry lies on a permutation with all entries nonzero.
pub fn has_total_support(pattern: &[Vec<bool>]) -> bool {
    let n = pattern.len();
    if !has_perfect_matching(pattern, None) {
        return false;
    }
    (0..n).all(|i| (0..n).all(|j| !pattern[i][j] || has_perfect_matching(pattern, Some((i, j)))))
}

/// `unique` iff fully indecomposable, `non_unique` iff total support without
/// full indecomposability, `not_scalable` otherwise.
pub fn diagnose_scalability(pattern: &[Vec<bool>]) -> Result<ScalingStatus> {
    let n = pattern.len();
    if n > DIAGNOSE_MAX_DIM {
        return Err(Error::DimensionTooLarge { n, max: DIAGNOSE_MAX_DIM });
    }
    if pattern.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("pattern must be square".into()));
    }
    if !has_total_support(pattern) {
        return Ok(ScalingStatus::NotScalable);
    }
    let (fid, _) = is_fully_indecomposable(pattern)?;
    Ok(if fid { ScalingStatus::Unique } else { ScalingStatus::NonUnique })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, two_block};
    use crate::solver::{solve, SolverConfig};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pat(rows: &[&[u8]]) -> Vec<Vec<bool>> {
        rows.iter().map(|r| r.iter().map(|x| *x != 0).collect()).collect()
    }

    #[test]
    fn ones_scale_to_constant() {
        let model = ModelSpec::semicircle(5).unwrap();
        let r = scale_symmetric(&model, 0.0, &ScalingConfig::default()).unwrap();
        assert_eq!(r.status, ScalingStatus::Unique);
        assert!(r.v.unwrap().iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert!((r.j_value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antidiagonal_is_non_unique() {
        let model = build_model(vec![0.0; 2], DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), None).unwrap();
        let r = scale_symmetric(&model, 0.0, &ScalingConfig::default()).unwrap();
        assert_eq!(r.status, ScalingStatus::NonUnique);
        let v = r.v.unwrap();
        // π₂ v₁ v₂ = 1 with π = 1/2
        assert!((0.5 * v[0] * v[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_block_past_half_blows_up() {
        let model = two_block(3.0, 0.6, 5).unwrap();
        let r = scale_symmetric(&model, 0.0, &ScalingConfig::default()).unwrap();
        assert_eq!(r.status, ScalingStatus::NotScalable, "{r:?}");
        assert!(r.v.is_none());
    }

    #[test]
    fn imaginary_axis_matches_solver() {
        let model = two_block(3.0, 0.3, 4).unwrap();
        let r = scale_symmetric(&model, 0.01, &ScalingConfig::default()).unwrap();
        let m = solve(&model, Complex64::new(0.0, 0.01), &SolverConfig::default()).unwrap();
        let v = r.v.unwrap();
        let dev = v.iter().zip(&m.m).map(|(a, b)| (a - b.im).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn diagnosis_examples() {
        assert_eq!(diagnose_scalability(&pat(&[&[1, 1], &[1, 1]])).unwrap(), ScalingStatus::Unique);
        assert_eq!(diagnose_scalability(&pat(&[&[0, 1], &[1, 0]])).unwrap(), ScalingStatus::NonUnique);
        assert_eq!(diagnose_scalability(&pat(&[&[0, 0, 1], &[0, 0, 1], &[1, 1, 1]])).unwrap(), ScalingStatus::NotScalable);
        assert!(matches!(diagnose_scalability(&vec![vec![true; 13]; 13]), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn j_functional_values() {
        let model = ModelSpec::semicircle(3).unwrap();
        assert!((j_functional(&model, &[1.0; 3], 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((j_functional(&model, &[1.0; 3], 0.25).unwrap() - 1.5).abs() < 1e-15);
        assert!(matches!(j_functional(&model, &[1.0, 0.0, 1.0], 0.0), Err(Error::NonPositiveInput)));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..3.0)).collect();
            assert!(j_functional(&model, &w, 0.0).unwrap() >= 1.0 - 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn minimizer_against_positive_perturbations(seed in 0u64..1000, eta in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4;
            let s = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.1..2.0));
            let s = (&s + s.transpose()) * 0.5;
            let model = build_model(vec![0.0; n], s, None).unwrap();
            let r = scale_symmetric(&model, eta, &ScalingConfig::default()).unwrap();
            let v = r.v.unwrap();
            let j0 = r.j_value.unwrap();
            for _ in 0..10 {
                let w: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..0.05)).collect();
                prop_assert!(j_functional(&model, &w, eta).unwrap() >= j0 - 1e-12);
            }
        }
    }
}
