//! Wigner-type random matrices with a variance profile taken from a model.
//!
//! Index `i ∈ {0..N}` is assigned to model component `x(i)` in proportion to
//! the weights; the profile is `s_ij = S_{x(i) x(j)} / N` and the diagonal
//! mean is `-a_{x(i)}`, so that the diagonal of the resolvent tracks `m_{x(i)}`.
//! Each row draws from its own ChaCha8 stream, so samples are reproducible
//! bit for bit and independent of thread count.

use faer::Side;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::{GridSolution, Solution};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    RealSymmetric,
    ComplexHermitian,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub symmetry: Symmetry,
    pub seed: u64,
}

/// Largest-remainder assignment of `n` indices to model components.
pub fn component_map(model: &ModelSpec, n: usize) -> Vec<usize> {
    let w = model.weights();
    let mut counts: Vec<usize> = w.iter().map(|p| (p * n as f64).floor() as usize).collect();
    let mut rest: Vec<(usize, f64)> = w.iter().enumerate().map(|(k, p)| (k, p * n as f64 - counts[k] as f64)).collect();
    rest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let missing = n - counts.iter().sum::<usize>();
    for (k, _) in rest.into_iter().take(missing) {
        counts[k] += 1;
    }
    counts.iter().enumerate().flat_map(|(k, c)| std::iter::repeat(k).take(*c)).collect()
}

/// A sampled hermitian matrix.
#[derive(Debug, Clone)]
pub enum Sample {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl Sample {
    pub fn n(&self) -> usize {
        match self {
            Sample::Real(h) => h.nrows(),
            Sample::Complex(h) => h.nrows(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            Sample::Real(h) => Complex64::new(h[(i, j)], 0.0),
            Sample::Complex(h) => h[(i, j)],
        }
    }
}

fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// Draws `H` with independent centred Gaussian entries `E|h_ij|² = s_ij` (`i ≤ j`).
pub fn sample(spec: &EnsembleSpec, model: &ModelSpec) -> Result<Sample> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    let comp = component_map(model, n);
    let s = model.s();
    let a = model.a();
    let var = |i: usize, j: usize| s[(comp[i], comp[j])] / n as f64;
    // row i holds the entries (i, j) for j ≥ i
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = row_rng(spec.seed, i);
            (i..n)
                .map(|j| {
                    let sd = var(i, j).sqrt();
                    let x: f64 = StandardNormal.sample(&mut rng);
                    match spec.symmetry {
                        Symmetry::RealSymmetric => Complex64::new(sd * x, 0.0),
                        Symmetry::ComplexHermitian if i == j => Complex64::new(sd * x, 0.0),
                        Symmetry::ComplexHermitian => {
                            let y: f64 = StandardNormal.sample(&mut rng);
                            Complex64::new(x, y) * (sd / 2f64.sqrt())
                        }
                    }
                })
                .collect()
        })
        .collect();
    let entry = |i: usize, j: usize| -> Complex64 {
        let (r, c, conj) = if i <= j { (i, j, false) } else { (j, i, true) };
        let mut h = rows[r][c - r];
        if conj {
            h = h.conj();
        }
        if i == j {
            h -= a[comp[i]];
        }
        h
    };
    Ok(match spec.symmetry {
        Symmetry::RealSymmetric => Sample::Real(DMatrix::from_fn(n, n, |i, j| entry(i, j).re)),
        Symmetry::ComplexHermitian => Sample::Complex(DMatrix::from_fn(n, n, entry)),
    })
}

/// Spectral decomposition `H = U Λ U*`, from which resolvents are assembled.
pub struct Resolvent {
    pub eigenvalues: Vec<f64>,
    vectors: Sample,
}

impl Resolvent {
    /// Dense Hermitian eigendecomposition; sequential, hence bit-reproducible.
    pub fn new(h: &Sample) -> Result<Self> {
        let n = h.n();
        let fail = |e| Error::Diverged(format!("eigendecomposition failed: {e:?}"));
        match h {
            Sample::Real(m) => {
                let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
                let e = a.self_adjoint_eigen(Side::Lower).map_err(fail)?;
                let (s, u) = (e.S(), e.U());
                Ok(Resolvent {
                    eigenvalues: (0..n).map(|k| s[k]).collect(),
                    vectors: Sample::Real(DMatrix::from_fn(n, n, |i, k| u[(i, k)])),
                })
            }
            Sample::Complex(m) => {
                let a = faer::Mat::<Complex64>::from_fn(n, n, |i, j| m[(i, j)]);
                let e = a.self_adjoint_eigen(Side::Lower).map_err(fail)?;
                let (s, u) = (e.S(), e.U());
                Ok(Resolvent {
                    eigenvalues: (0..n).map(|k| s[k].re).collect(),
                    vectors: Sample::Complex(DMatrix::from_fn(n, n, |i, k| u[(i, k)])),
                })
            }
        }
    }

    /// Sorted eigenvalues.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut e = self.eigenvalues.clone();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Diagonal of `G(z)` only: `G_ii = Σ_k |U_ik|² / (λ_k - z)`, O(N²).
    pub fn diagonal(&self, z: Complex64) -> Vec<Complex64> {
        let w: Vec<Complex64> = self.eigenvalues.iter().map(|l| 1.0 / (l - z)).collect();
        let n = self.eigenvalues.len();
        match &self.vectors {
            Sample::Real(u) => (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|k| w[k] * u[(i, k)] * u[(i, k)]).sum())
                .collect(),
            Sample::Complex(u) => (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|k| w[k] * u[(i, k)].norm_sqr()).sum())
                .collect(),
        }
    }

    /// `G(z) = (H - z)⁻¹ = U diag(1/(λ - z)) U*`.
    pub fn at(&self, z: Complex64) -> DMatrix<Complex64> {
        let w: Vec<Complex64> = self.eigenvalues.iter().map(|l| 1.0 / (l - z)).collect();
        match &self.vectors {
            Sample::Real(u) => {
                let scaled_re = DMatrix::from_fn(u.nrows(), u.ncols(), |i, k| u[(i, k)] * w[k].re);
                let scaled_im = DMatrix::from_fn(u.nrows(), u.ncols(), |i, k| u[(i, k)] * w[k].im);
                let ut = u.transpose();
                let re = scaled_re * &ut;
                let im = scaled_im * &ut;
                DMatrix::from_fn(u.nrows(), u.nrows(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
            }
            Sample::Complex(u) => {
                let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |i, k| u[(i, k)] * w[k]);
                scaled * u.adjoint()
            }
        }
    }
}

/// `G(z)` with one Newton–Schulz correction `G ← G - G((H - z)G - I)`.
///
/// Squares the relative error of the spectral route; costs two extra products.
pub fn refined_resolvent(h: &Sample, r: &Resolvent, z: Complex64) -> DMatrix<Complex64> {
    let g = r.at(z);
    let n = h.n();
    let hz = DMatrix::from_fn(n, n, |i, j| h.entry(i, j) - if i == j { z } else { Complex64::new(0.0, 0.0) });
    let defect = hz * &g - DMatrix::<Complex64>::identity(n, n);
    &g - &g * defect
}

/// Kolmogorov distance between the eigenvalue CDF and the integrated QVE density.
///
/// The QVE CDF is the trapezoid integral of `grid.avg_density`, normalized by
/// its total so that both distributions have unit mass on the grid.
pub fn empirical_vs_qve(eigenvalues: &[f64], grid: &GridSolution) -> Result<f64> {
    let t = &grid.tau_grid;
    if t.len() < 2 || eigenvalues.is_empty() {
        return Err(Error::InvalidInput("need a grid and at least one eigenvalue".into()));
    }
    let mut cdf = vec![0.0; t.len()];
    for k in 1..t.len() {
        cdf[k] = cdf[k - 1] + 0.5 * (t[k] - t[k - 1]) * (grid.avg_density[k] + grid.avg_density[k - 1]);
    }
    let total = cdf[t.len() - 1];
    if !(total > 0.0) {
        return Err(Error::NoSupport);
    }
    let qve = |x: f64| -> f64 {
        if x <= t[0] {
            return 0.0;
        }
        if x >= t[t.len() - 1] {
            return 1.0;
        }
        let k = t.partition_point(|s| *s <= x).max(1);
        let frac = (x - t[k - 1]) / (t[k] - t[k - 1]);
        (cdf[k - 1] + frac * (cdf[k] - cdf[k - 1])) / total
    };
    let mut e = eigenvalues.to_vec();
    e.sort_by(f64::total_cmp);
    let n = e.len() as f64;
    Ok(e.iter()
        .enumerate()
        .map(|(k, x)| {
            let f = qve(*x);
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LocalLawReport {
    pub z: Complex64,
    /// `max_i |G_ii - m_{x(i)}|`
    pub max_diag_dev: f64,
    /// `max_{i≠j} |G_ij|`; absent when only the diagonal was available.
    pub max_offdiag: Option<f64>,
    /// `|N⁻¹ Tr G - <m>|`
    pub avg_dev: f64,
    /// `1/√(N Im z)`
    pub predicted_scale: f64,
    /// `‖d‖∞` with `d_k = -1/G_kk - z - a_k - Σ_i s_ki G_ii`
    pub d_norm: f64,
    /// `|N⁻¹ Σ d_k|`
    pub d_avg: f64,
}

/// Compares `G(z)` with the QVE solution `m` at the same `z`.
pub fn locallaw_residuals(g: &DMatrix<Complex64>, model: &ModelSpec, m: &Solution) -> Result<LocalLawReport> {
    let n = g.nrows();
    let gd: Vec<Complex64> = (0..n).map(|i| g[(i, i)]).collect();
    let mut report = locallaw_from_diagonal(&gd, model, m)?;
    report.max_offdiag = Some(
        (0..n)
            .into_par_iter()
            .map(|i| (0..n).filter(|j| *j != i).map(|j| g[(i, j)].norm()).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max),
    );
    Ok(report)
}

/// Same as [`locallaw_residuals`] from the resolvent diagonal alone.
pub fn locallaw_from_diagonal(gd: &[Complex64], model: &ModelSpec, m: &Solution) -> Result<LocalLawReport> {
    let n = gd.len();
    if m.m.len() != model.n() {
        return Err(Error::DimensionMismatch("solution does not match the model".into()));
    }
    let comp = component_map(model, n);
    let z = m.z;
    let s = model.s();
    let max_diag_dev = (0..n).map(|i| (gd[i] - m.m[comp[i]]).norm()).fold(0.0, f64::max);
    let trace: Complex64 = gd.iter().sum::<Complex64>() / n as f64;
    let avg_m: Complex64 = model.weights().iter().zip(&m.m).map(|(p, x)| x * *p).sum();
    // Σ_i s_ki G_ii grouped by component
    let mut comp_sum = vec![Complex64::new(0.0, 0.0); model.n()];
    for i in 0..n {
        comp_sum[comp[i]] += gd[i];
    }
    let d: Vec<Complex64> = (0..n)
        .map(|k| {
            let sg: Complex64 = (0..model.n()).map(|y| s[(comp[k], y)] * comp_sum[y]).sum::<Complex64>() / n as f64;
            -1.0 / gd[k] - z - model.a()[comp[k]] - sg
        })
        .collect();
    let d_norm = d.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let d_avg = (d.iter().sum::<Complex64>() / n as f64).norm();
    Ok(LocalLawReport {
        z,
        max_diag_dev,
        max_offdiag: None,
        avg_dev: (trace - avg_m).norm(),
        predicted_scale: 1.0 / (n as f64 * z.im).sqrt(),
        d_norm,
        d_avg,
    })
}

/// `‖(H - z) G - I‖∞` (max entry).
pub fn resolvent_identity_error(h: &Sample, g: &DMatrix<Complex64>, z: Complex64) -> f64 {
    let n = h.n();
    let hz = DMatrix::from_fn(n, n, |i, j| h.entry(i, j) - if i == j { z } else { Complex64::new(0.0, 0.0) });
    let prod = hz * g;
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (prod[(i, j)] - if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::two_block;
    use crate::solver::{solve, solve_grid, uniform_grid, SolverConfig};

    #[test]
    fn sampler_variance_and_symmetry() {
        let model = ModelSpec::semicircle(1).unwrap();
        let mut acc = 0.0;
        let reps = 10_000;
        for seed in 0..reps {
            let h = sample(&EnsembleSpec { n: 4, symmetry: Symmetry::RealSymmetric, seed }, &model).unwrap();
            if let Sample::Real(m) = &h {
                assert_eq!(m, &m.transpose());
                acc += m[(0, 1)] * m[(0, 1)];
            }
        }
        let var = acc / reps as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.03, "{var}");
        let hc = sample(&EnsembleSpec { n: 5, symmetry: Symmetry::ComplexHermitian, seed: 3 }, &model).unwrap();
        if let Sample::Complex(m) = hc {
            assert_eq!(m, m.adjoint());
        }
    }

    #[test]
    fn zero_profile_gives_zero_matrix() {
        let model = crate::model::build_model(vec![0.0; 2], DMatrix::zeros(2, 2), None).unwrap();
        let h = sample(&EnsembleSpec { n: 6, symmetry: Symmetry::RealSymmetric, seed: 1 }, &model).unwrap();
        if let Sample::Real(m) = h {
            assert!(m.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = two_block(3.0, 0.3, 2).unwrap();
        let spec = EnsembleSpec { n: 30, symmetry: Symmetry::ComplexHermitian, seed: 42 };
        let (a, b) = (sample(&spec, &model).unwrap(), sample(&spec, &model).unwrap());
        match (a, b) {
            (Sample::Complex(x), Sample::Complex(y)) => assert_eq!(x, y),
            _ => panic!("wrong symmetry"),
        }
    }

    #[test]
    fn component_map_follows_weights() {
        let model = two_block(3.0, 0.3, 2).unwrap();
        let c = component_map(&model, 10);
        assert_eq!(c.iter().filter(|k| **k == 0).count(), 3);
        assert_eq!(c.len(), 10);
    }

    #[test]
    fn resolvent_identity_and_far_field() {
        let model = ModelSpec::semicircle(1).unwrap();
        let h = sample(&EnsembleSpec { n: 200, symmetry: Symmetry::RealSymmetric, seed: 5 }, &model).unwrap();
        let r = Resolvent::new(&h).unwrap();
        let z = Complex64::new(0.1, 0.05);
        let err0 = resolvent_identity_error(&h, &r.at(z), z);
        let g = refined_resolvent(&h, &r, z);
        let err = resolvent_identity_error(&h, &g, z);
        assert!(err < 1e-10 && err < err0, "{err} {err0}");
        let cfg = SolverConfig::default();
        let zi = Complex64::new(0.0, 1.0);
        let far = locallaw_residuals(&r.at(zi), &model, &solve(&model, zi, &cfg).unwrap()).unwrap();
        let near = locallaw_residuals(&g, &model, &solve(&model, z, &cfg).unwrap()).unwrap();
        assert!(far.max_diag_dev <= 2.0);
        assert!(far.max_diag_dev < near.max_diag_dev);
        assert!(far.max_offdiag.is_some());
    }

    #[test]
    fn diagonal_path_matches_full_resolvent() {
        let model = crate::model::two_block(3.0, 0.05, 2).unwrap();
        let h = sample(&EnsembleSpec { n: 120, symmetry: Symmetry::ComplexHermitian, seed: 9 }, &model).unwrap();
        let r = Resolvent::new(&h).unwrap();
        let z = Complex64::new(0.3, 0.1);
        let g = r.at(z);
        let gd = r.diagonal(z);
        for i in 0..120 {
            assert!((g[(i, i)] - gd[i]).norm() < 1e-12);
        }
        let m = solve(&model, z, &SolverConfig::default()).unwrap();
        let a = locallaw_residuals(&g, &model, &m).unwrap();
        let b = locallaw_from_diagonal(&gd, &model, &m).unwrap();
        assert!((a.d_norm - b.d_norm).abs() < 1e-10 && b.max_offdiag.is_none());
    }

    #[test]
    fn small_n_distance_is_large() {
        let model = ModelSpec::semicircle(1).unwrap();
        let cfg = SolverConfig::default();
        let grid = solve_grid(&model, &uniform_grid(-3.0, 3.0, 0.01), 1e-6, &cfg).unwrap();
        let h = sample(&EnsembleSpec { n: 10, symmetry: Symmetry::RealSymmetric, seed: 1 }, &model).unwrap();
        let d = empirical_vs_qve(&Resolvent::new(&h).unwrap().spectrum(), &grid).unwrap();
        assert!(d > 0.02 && d <= 1.0);
    }
}
