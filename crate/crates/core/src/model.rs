//! Discrete QVE models `(a, S, π)` and their structural constants.
//!
//! A model lives on the finite set `{0, .., n-1}` equipped with a probability
//! measure `π` (the weights). The kernel acts by `(Sw)_i = Σ_j S_ij w_j π_j`
//! and averages are `<u, w> = Σ_i conj(u_i) w_i π_i`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the kernel symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Brute-force limit for [`is_fully_indecomposable`].
pub const FID_MAX_DIM: usize = 20;

/// On-disk model description.
///
/// `{ "n": int, "a": [..], "S": [[..]], "weights": [..] }`, weights optional
/// (uniform when absent).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub n: usize,
    pub a: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// A validated discrete model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    weights: Vec<f64>,
    a: Vec<f64>,
    s: DMatrix<f64>,
    // S · diag(π), so that (Sw) = kernel * w
    kernel: DMatrix<f64>,
}

/// Structural constants of a model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StructuralReport {
    pub sigma_bound: f64,
    pub norm_s_bb: f64,
    pub norm_s_l2_to_b: f64,
    /// `(L, ρ)` with `(S^L u)_x ≥ ρ <u>` for nonnegative `u`.
    pub primitivity: Option<(usize, f64)>,
    /// Full indecomposability of the kernel pattern; `None` above [`FID_MAX_DIM`].
    pub fid: Option<bool>,
    pub fid_witness: Option<(Vec<usize>, Vec<usize>)>,
}

/// Validates `(a, S, weights)` and builds a model. Uniform weights when `weights` is `None`.
pub fn build_model(a: Vec<f64>, s: DMatrix<f64>, weights: Option<Vec<f64>>) -> Result<ModelSpec> {
    let n = a.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty model".into()));
    }
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "a has length {n} but S is {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) || s.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite entry in a or S".into()));
    }
    let weights = match weights {
        None => vec![1.0 / n as f64; n],
        Some(w) => {
            if w.len() != n {
                return Err(Error::BadWeights(format!("expected {n} weights, got {}", w.len())));
            }
            if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::BadWeights(format!("weight {bad} is not positive")));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::BadWeights(format!("weights sum to {total}, not 1")));
            }
            w.into_iter().map(|x| x / total).collect()
        }
    };

    let scale = s.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let mut worst = (0, 0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if s[(i, j)] < 0.0 {
                return Err(Error::NegativeEntry { i, j, value: s[(i, j)] });
            }
            let dev = (s[(i, j)] - s[(j, i)]).abs() / scale;
            if dev > worst.2 {
                worst = (i, j, dev);
            }
        }
    }
    if worst.2 > SYMMETRY_TOL {
        return Err(Error::AsymmetricKernel { i: worst.0, j: worst.1, max_dev: worst.2 });
    }
    let s = (&s + s.transpose()) * 0.5;
    Ok(ModelSpec::from_parts(a, s, weights))
}

impl ModelSpec {
    fn from_parts(a: Vec<f64>, s: DMatrix<f64>, weights: Vec<f64>) -> Self {
        let n = a.len();
        let kernel = DMatrix::from_fn(n, n, |i, j| s[(i, j)] * weights[j]);
        ModelSpec { weights, a, s, kernel }
    }

    /// `a = 0`, `S = c · ones`, uniform weights on `n` points: the scaled semicircle model.
    pub fn semicircle(n: usize) -> Result<Self> {
        Self::scaled_semicircle(n, 1.0)
    }

    pub fn scaled_semicircle(n: usize, c: f64) -> Result<Self> {
        if n == 0 || !(c > 0.0) {
            return Err(Error::InvalidInput("semicircle model needs n >= 1 and c > 0".into()));
        }
        build_model(vec![0.0; n], DMatrix::from_element(n, n, c), None)
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.s.len() != file.n || file.a.len() != file.n {
            return Err(Error::DimensionMismatch(format!(
                "n = {} but a has {} entries and S has {} rows",
                file.n,
                file.a.len(),
                file.s.len()
            )));
        }
        if let Some(row) = file.s.iter().find(|r| r.len() != file.n) {
            return Err(Error::DimensionMismatch(format!("S row of length {}", row.len())));
        }
        let s = DMatrix::from_fn(file.n, file.n, |i, j| file.s[i][j]);
        build_model(file.a, s, file.weights)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn to_file(&self) -> ModelFile {
        let n = self.n();
        ModelFile {
            n,
            a: self.a.clone(),
            s: (0..n).map(|i| (0..n).map(|j| self.s[(i, j)]).collect()).collect(),
            weights: Some(self.weights.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// `S · diag(π)`: the matrix of `w ↦ Sw` in function coordinates.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn has_zero_a(&self) -> bool {
        self.a.iter().all(|x| *x == 0.0)
    }

    pub fn has_uniform_weights(&self) -> bool {
        let u = 1.0 / self.n() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= 1e-14)
    }

    pub fn apply_s(&self, w: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| w[j] * self.kernel[(i, j)]).sum())
            .collect()
    }

    pub fn apply_s_real(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| w[j] * self.kernel[(i, j)]).sum())
            .collect()
    }

    /// `<w> = Σ_i w_i π_i`
    pub fn avg(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.weights).map(|(x, p)| x * p).sum()
    }

    pub fn avg_c(&self, w: &[Complex64]) -> Complex64 {
        w.iter().zip(&self.weights).map(|(x, p)| x * *p).sum()
    }

    /// `‖w‖₂ = <|w|²>^{1/2}` in `L²(π)`.
    pub fn l2_norm(&self, w: &[Complex64]) -> f64 {
        w.iter()
            .zip(&self.weights)
            .map(|(x, p)| x.norm_sqr() * p)
            .sum::<f64>()
            .sqrt()
    }

    /// `‖S‖` as an operator on bounded functions: the largest weighted row sum.
    pub fn norm_s_bb(&self) -> f64 {
        self.kernel
            .row_iter()
            .map(|r| r.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖S‖_{L²→B} = max_x (Σ_y S_xy² π_y)^{1/2}`.
    pub fn norm_s_l2_to_b(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.s[(i, j)].powi(2) * self.weights[j])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn norm_a(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `Σ = ‖a‖ + 2 ‖S‖^{1/2}`; the support of the generating measure lies in `[-Σ, Σ]`.
    pub fn sigma_bound(&self) -> f64 {
        self.norm_a() + 2.0 * self.norm_s_bb().sqrt()
    }

    /// `Γ(τ) = min_x (Σ_y π_y (1/τ + |a_y - a_x| + ‖S_y - S_x‖₂)^{-2})^{1/2}`.
    pub fn gamma_function(&self, tau: f64) -> f64 {
        assert!(tau > 0.0, "gamma_function needs tau > 0");
        let n = self.n();
        let row_dist = |x: usize, y: usize| -> f64 {
            (0..n)
                .map(|w| (self.s[(y, w)] - self.s[(x, w)]).powi(2) * self.weights[w])
                .sum::<f64>()
                .sqrt()
        };
        (0..n)
            .map(|x| {
                (0..n)
                    .map(|y| {
                        let d = 1.0 / tau + (self.a[y] - self.a[x]).abs() + row_dist(x, y);
                        self.weights[y] / (d * d)
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest `L ≤ l_max` such that the `π`-kernel of `S^L` is strictly positive,
    /// together with its minimum entry.
    pub fn primitivity_constants(&self, l_max: usize) -> Option<(usize, f64)> {
        let mut power = self.s.clone();
        for l in 1..=l_max {
            if l > 1 {
                power = &power * &self.kernel;
            }
            let min = power.iter().cloned().fold(f64::INFINITY, f64::min);
            if min > 0.0 {
                return Some((l, min));
            }
        }
        None
    }

    /// Nonzero pattern of the kernel.
    pub fn pattern(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.s[(i, j)] > 0.0).collect()).collect()
    }

    pub fn structural_report(&self, l_max: usize) -> StructuralReport {
        let (fid, fid_witness) = match is_fully_indecomposable(&self.pattern()) {
            Ok((flag, witness)) => (Some(flag), witness),
            Err(_) => (None, None),
        };
        StructuralReport {
            sigma_bound: self.sigma_bound(),
            norm_s_bb: self.norm_s_bb(),
            norm_s_l2_to_b: self.norm_s_l2_to_b(),
            primitivity: self.primitivity_constants(l_max),
            fid,
            fid_witness,
        }
    }

    /// Collapses a block-constant model onto its blocks.
    ///
    /// `labels[i]` is the block of point `i`; labels must be `0..k` without holes.
    /// Fails unless `a` is constant on blocks and `S` on pairs of blocks; the
    /// block weights are the block measures, so the reduced QVE has the block
    /// values of the full solution as its solution.
    pub fn reduce(&self, labels: &[usize]) -> Result<ModelSpec> {
        let n = self.n();
        if labels.len() != n {
            return Err(Error::DimensionMismatch("one label per point required".into()));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut rep = vec![None; k];
        for (i, &l) in labels.iter().enumerate() {
            rep[l].get_or_insert(i);
        }
        let rep: Vec<usize> = rep
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidInput("block labels must be contiguous".into()))?;
        for i in 0..n {
            if self.a[i] != self.a[rep[labels[i]]] {
                return Err(Error::InvalidInput(format!("a is not constant on block {}", labels[i])));
            }
            for j in 0..n {
                if self.s[(i, j)] != self.s[(rep[labels[i]], rep[labels[j]])] {
                    return Err(Error::InvalidInput("S is not block constant".into()));
                }
            }
        }
        let mut w = vec![0.0; k];
        for (i, &l) in labels.iter().enumerate() {
            w[l] += self.weights[i];
        }
        let a = rep.iter().map(|&r| self.a[r]).collect();
        let s = DMatrix::from_fn(k, k, |p, q| self.s[(rep[p], rep[q])]);
        Ok(ModelSpec::from_parts(a, s, w))
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let file = ModelFile::deserialize(de)?;
        ModelSpec::from_file(file).map_err(serde::de::Error::custom)
    }
}

/// The two-block model: `S = [[0, λ], [λ, 1]]` on blocks of measure `δ` and `1 - δ`.
///
/// The first `⌈δn⌉` points form the first block. Point weights are adjusted so
/// that the block measures are exactly `δ` and `1 - δ`.
pub fn two_block(lambda: f64, delta: f64, n: usize) -> Result<ModelSpec> {
    if !(lambda > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "two-block model needs lambda > 0 and delta in (0, 1), got ({lambda}, {delta})"
        )));
    }
    let k = ((delta * n as f64).ceil() as usize).max(1);
    if n < 2 || k >= n {
        return Err(Error::EmptyBlock(delta * n as f64));
    }
    let weights: Vec<f64> = (0..n)
        .map(|i| if i < k { delta / k as f64 } else { (1.0 - delta) / (n - k) as f64 })
        .collect();
    let s = DMatrix::from_fn(n, n, |i, j| match (i < k, j < k) {
        (true, true) => 0.0,
        (true, false) | (false, true) => lambda,
        (false, false) => 1.0,
    });
    Ok(ModelSpec::from_parts(vec![0.0; n], s, weights))
}

/// Block labels (0 for the first block, 1 for the second) of a [`two_block`] model.
pub fn two_block_labels(delta: f64, n: usize) -> Vec<usize> {
    let k = ((delta * n as f64).ceil() as usize).max(1);
    (0..n).map(|i| usize::from(i >= k)).collect()
}

/// Critical coupling at which the two-block model (`λ > 2`) develops a pair of cusps.
pub fn critical_delta(lambda: f64) -> f64 {
    (lambda - 2.0).powi(3) / (2.0 * lambda.powi(3) - 3.0 * lambda.powi(2) + 15.0 * lambda - 7.0)
}

/// Location `±τ₀` where the first component of the two-block solution blows up as `δ → 0`.
pub fn blow_up_point(lambda: f64) -> f64 {
    2.0 * lambda / (lambda * lambda - (lambda - 2.0).powi(2)).sqrt()
}

/// Brute-force full indecomposability test.
///
/// Returns `(true, None)` when every submatrix indexed by nonempty `I × J` with
/// `|I| + |J| ≥ n` has a nonzero entry, otherwise `(false, Some((I, J)))` with
/// a zero block. `n` is capped at [`FID_MAX_DIM`].
pub fn is_fully_indecomposable(
    pattern: &[Vec<bool>],
) -> Result<(bool, Option<(Vec<usize>, Vec<usize>)>)> {
    let n = pattern.len();
    if n > FID_MAX_DIM {
        return Err(Error::DimensionTooLarge { n, max: FID_MAX_DIM });
    }
    if pattern.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("pattern must be square".into()));
    }
    if n == 0 {
        return Ok((true, None));
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    // zero_cols[i]: columns j with pattern[i][j] == false
    let zero_cols: Vec<u32> = pattern
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &p)| !p)
                .fold(0u32, |m, (j, _)| m | (1 << j))
        })
        .collect();
    for rows in 1..=full {
        let mut cols = full;
        for (i, zc) in zero_cols.iter().enumerate() {
            if rows & (1 << i) != 0 {
                cols &= zc;
            }
        }
        if cols != 0 && (rows.count_ones() + cols.count_ones()) as usize >= n {
            let set = |mask: u32| (0..n).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>();
            return Ok((false, Some((set(rows), set(cols)))));
        }
    }
    Ok((true, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pat(rows: &[&[u8]]) -> Vec<Vec<bool>> {
        rows.iter().map(|r| r.iter().map(|&x| x != 0).collect()).collect()
    }

    #[test]
    fn ones_kernel_has_unit_norm() {
        let m = build_model(vec![0.0; 4], DMatrix::from_element(4, 4, 1.0), None).unwrap();
        assert_relative_eq!(m.norm_s_bb(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.sigma_bound(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let mut s = DMatrix::zeros(2, 2);
        s[(0, 1)] = 1.0;
        let err = build_model(vec![0.0; 2], s, None).unwrap_err();
        assert!(matches!(err, Error::AsymmetricKernel { .. }));
    }

    #[test]
    fn negative_entry_and_bad_weights_rejected() {
        let mut s = DMatrix::from_element(2, 2, 1.0);
        s[(0, 0)] = -0.5;
        assert!(matches!(build_model(vec![0.0; 2], s, None), Err(Error::NegativeEntry { .. })));
        let s = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            build_model(vec![0.0; 2], s.clone(), Some(vec![0.5, 0.6])),
            Err(Error::BadWeights(_))
        ));
        assert!(matches!(
            build_model(vec![0.0; 2], s, Some(vec![1.0, 0.0])),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn sigma_bound_examples() {
        assert_relative_eq!(ModelSpec::scaled_semicircle(3, 4.0).unwrap().sigma_bound(), 4.0);
        let m = build_model(vec![1.0, -0.5], DMatrix::from_element(2, 2, 1.0), None).unwrap();
        assert_relative_eq!(m.sigma_bound(), 3.0);
    }

    #[test]
    fn two_block_small_case() {
        let m = two_block(3.0, 0.5, 4).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(m.s()[(0, 1)], 0.0);
        assert_eq!(m.s()[(0, 2)], 3.0);
        assert_eq!(m.s()[(3, 2)], 1.0);
        let r = m.reduce(&two_block_labels(0.5, 4)).unwrap();
        assert_eq!(r.weights(), &[0.5, 0.5]);
        assert_eq!(r.s(), &DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 1.0]));
    }

    #[test]
    fn two_block_weights_hit_block_measure() {
        let m = two_block(3.0, 0.25, 8).unwrap();
        let first: f64 = m.weights()[..2].iter().sum();
        assert_relative_eq!(first, 0.25, epsilon = 1e-15);
        // uneven split: 3 points carry 0.3
        let m = two_block(3.0, 0.3, 7).unwrap();
        let first: f64 = m.weights()[..3].iter().sum();
        assert_relative_eq!(first, 0.3, epsilon = 1e-15);
        // largest row average is the first block: λ(1 - δ)
        assert_relative_eq!(m.norm_s_bb(), 3.0 * 0.7, epsilon = 1e-14);
    }

    #[test]
    fn two_block_rejects_degenerate_splits() {
        assert!(matches!(two_block(3.0, 0.9, 2), Err(Error::EmptyBlock(_))));
        assert!(matches!(two_block(3.0, 0.5, 1), Err(Error::EmptyBlock(_))));
        assert!(two_block(3.0, 1.5, 4).is_err());
        // a tiny first block is kept as one point of measure δ
        let m = two_block(3.0, 1e-3, 2).unwrap();
        assert_relative_eq!(m.weights()[0], 1e-3);
    }

    #[test]
    fn gamma_of_constant_model_is_identity() {
        let m = ModelSpec::semicircle(5).unwrap();
        for tau in [0.1, 1.0, 7.5] {
            assert_relative_eq!(m.gamma_function(tau), tau, max_relative = 1e-14);
        }
    }

    #[test]
    fn gamma_two_block_bounds() {
        let m = two_block(3.0, 0.25, 8).unwrap();
        let g = m.gamma_function(1.0);
        assert!(g > 0.0 && g <= 1.0);
        // the δ → 0 bound at τ = 10, δ = 0.01
        let m = two_block(3.0, 0.01, 100).unwrap();
        assert!(m.gamma_function(10.0) <= (1.0_f64 + 0.01 * 100.0).sqrt());
    }

    #[test]
    fn gamma_increasing_in_tau() {
        let m = two_block(3.0, 0.2, 10).unwrap();
        let vals: Vec<f64> = (1..60).map(|k| m.gamma_function(0.1 * k as f64)).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fid_examples() {
        assert_eq!(is_fully_indecomposable(&pat(&[&[1, 1], &[1, 1]])).unwrap(), (true, None));
        assert_eq!(
            is_fully_indecomposable(&pat(&[&[1, 1], &[1, 0]])).unwrap(),
            (false, Some((vec![1], vec![1])))
        );
        assert_eq!(
            is_fully_indecomposable(&pat(&[&[0, 1], &[1, 0]])).unwrap(),
            (false, Some((vec![0], vec![0])))
        );
        let big = vec![vec![true; 21]; 21];
        assert!(matches!(is_fully_indecomposable(&big), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn primitivity_examples() {
        assert_eq!(ModelSpec::semicircle(3).unwrap().primitivity_constants(4), Some((1, 1.0)));
        let cyc = build_model(
            vec![0.0; 2],
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            None,
        )
        .unwrap();
        assert_eq!(cyc.primitivity_constants(6), None);
        let (l, rho) = two_block(3.0, 0.25, 8).unwrap().primitivity_constants(6).unwrap();
        assert_eq!(l, 2);
        assert!(rho > 0.0);
    }

    #[test]
    fn structural_report_invariants() {
        let m = two_block(3.0, 0.25, 8).unwrap();
        let r = m.structural_report(4);
        assert!(r.norm_s_l2_to_b >= r.norm_s_bb);
        assert_relative_eq!(r.sigma_bound, 2.0 * r.norm_s_bb.sqrt());
        assert_eq!(r.fid, Some(true));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let text = r#"{"n": 2, "a": [0.0, 0.5], "S": [[1.0, 2.0], [2.0, 0.0]]}"#;
        let m = ModelSpec::from_json(text).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"n": 2, "a": [0.0], "S": [[1.0, 2.0], [2.0, 0.0]]}"#;
        assert!(ModelSpec::from_json(bad).is_err());
    }

    fn random_pattern(n: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
        proptest::collection::vec(proptest::collection::vec(prop::bool::weighted(0.6), n), n)
    }

    proptest! {
        #[test]
        fn fid_is_permutation_invariant(
            p in random_pattern(6),
            perm_r in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
            perm_c in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let q: Vec<Vec<bool>> = (0..6)
                .map(|i| (0..6).map(|j| p[perm_r[i]][perm_c[j]]).collect())
                .collect();
            let a = is_fully_indecomposable(&p).unwrap().0;
            let b = is_fully_indecomposable(&q).unwrap().0;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn sigma_at_least_twice_root_of_min_row_average(
            entries in proptest::collection::vec(0.0f64..3.0, 15)
        ) {
            let n = 5;
            let mut s = DMatrix::zeros(n, n);
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    s[(i, j)] = entries[k];
                    s[(j, i)] = entries[k];
                    k += 1;
                }
            }
            let m = build_model(vec![0.0; n], s, None).unwrap();
            let min_row = m.kernel().row_iter().map(|r| r.iter().sum::<f64>()).fold(f64::INFINITY, f64::min);
            prop_assert!(m.sigma_bound() >= 2.0 * min_row.sqrt() - 1e-12);
        }
    }
}
