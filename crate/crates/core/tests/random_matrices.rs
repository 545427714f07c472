//! Seeded random-matrix runs against the deterministic equation.

use qvelab_core::rmt::{locallaw_from_diagonal, sample};
use qvelab_core::*;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    0.5 * (xs[(n - 1) / 2] + xs[n / 2])
}

#[test]
fn eigenvalue_gap_matches_detected_edges() {
    let model = two_block(3.0, 0.5 * critical_delta(3.0), 2).unwrap();
    let report = classify(&model, &ClassifyConfig::default()).unwrap();
    let (l, r, _) = *report.profile.gaps.iter().find(|g| g.0 > 0.0).unwrap();
    let spec = EnsembleSpec { n: 2000, symmetry: Symmetry::RealSymmetric, seed: 1 };
    let eigs = Resolvent::new(&sample(&spec, &model).unwrap()).unwrap().spectrum();
    // widest spacing among eigenvalues on the positive side of the bulk
    let (mut lo, mut hi) = (0.0, 0.0);
    for w in eigs.windows(2).filter(|w| w[0] > 1.0 && w[1] < 3.0) {
        if w[1] - w[0] > hi - lo {
            (lo, hi) = (w[0], w[1]);
        }
    }
    assert!((lo - l).abs() < 0.05 && (hi - r).abs() < 0.05, "sampled ({lo}, {hi}) vs detected ({l}, {r})");
}

#[test]
fn diagonal_deviation_shrinks_with_n() {
    let model = ModelSpec::semicircle(1).unwrap();
    let cfg = SolverConfig::default();
    let z = Complex64::new(0.3, 0.05);
    let m = solve(&model, z, &cfg).unwrap();
    let mut medians = Vec::new();
    for n in [250, 500, 1000, 2000] {
        let devs: Vec<f64> = (0..10)
            .map(|seed| {
                let h = sample(&EnsembleSpec { n, symmetry: Symmetry::RealSymmetric, seed }, &model).unwrap();
                let gd = Resolvent::new(&h).unwrap().diagonal(z);
                locallaw_from_diagonal(&gd, &model, &m).unwrap().max_diag_dev
            })
            .collect();
        medians.push(median(devs));
    }
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn hermitian_ensemble_is_reproducible() {
    let model = two_block(3.0, 0.3, 4).unwrap();
    let spec = EnsembleSpec { n: 300, symmetry: Symmetry::ComplexHermitian, seed: 42 };
    let a = Resolvent::new(&sample(&spec, &model).unwrap()).unwrap().spectrum();
    let b = Resolvent::new(&sample(&spec, &model).unwrap()).unwrap().spectrum();
    assert_eq!(a, b);
}
