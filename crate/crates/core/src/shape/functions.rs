//! Universal shape functions and the root systems of the two reduced cubics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const THIRD: f64 = 1.0 / 3.0;
const CUT_TOL: f64 = 1e-12;

/// `Ψ_edge(λ) = √((1+λ)λ) / ((1+2λ+2√((1+λ)λ))^{2/3} + (1+2λ-2√((1+λ)λ))^{2/3} + 1)`, `λ ≥ 0`.
pub fn psi_edge(lambda: f64) -> f64 {
    assert!(lambda >= 0.0, "psi_edge is defined for lambda >= 0");
    // with t = asinh √λ: numerator sinh(2t)/2, denominator 2cosh(4t/3) + 1
    let t = lambda.sqrt().asinh();
    (2.0 * t).sinh() / (2.0 * (2.0 * (4.0 * t * THIRD).cosh() + 1.0))
}

/// `Ψ_min(λ) = √(1+λ²) / ((√(1+λ²)+λ)^{2/3} + (√(1+λ²)-λ)^{2/3} - 1) - 1`.
pub fn psi_min(lambda: f64) -> f64 {
    // equals cosh(asinh(λ)/3) - 1, written without cancellation near 0
    let half = lambda.asinh() * THIRD * 0.5;
    2.0 * half.sinh().powi(2)
}

/// Cusp profile `2^{-2/3} |ω|^{1/3}`.
pub fn cusp_shape(omega: f64) -> f64 {
    2f64.powf(-2.0 * THIRD) * omega.abs().powf(THIRD)
}

/// Edge profile `Δ^{1/3} Ψ_edge(|ω|/Δ)` next to a gap of length `Δ`.
pub fn edge_shape(omega: f64, delta: f64) -> f64 {
    delta.powf(THIRD) * psi_edge(omega.abs() / delta)
}

/// Profile `ρ Ψ_min(ω/ρ³)` around a nonzero minimum of size `ρ`.
pub fn min_shape(omega: f64, rho: f64) -> f64 {
    rho * psi_min(omega / rho.powi(3))
}

/// `ζ^{1/3}` with the principal branch of the logarithm.
pub fn principal_cbrt(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return z;
    }
    (z.ln() * THIRD).exp()
}

/// The three roots `(Ω̂₀, Ω̂₊, Ω̂₋)` of a reduced cubic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CubicRoots {
    pub zero: Complex64,
    pub plus: Complex64,
    pub minus: Complex64,
    /// `ζ` lies on a branch cut of the root functions.
    pub on_branch_cut: bool,
}

impl CubicRoots {
    pub fn as_array(&self) -> [Complex64; 3] {
        [self.zero, self.plus, self.minus]
    }
}

/// Roots of `Ω³ + 3Ω + 2ζ`:
/// `Ω̂₀ = -2Φ_odd`, `Ω̂± = Φ_odd ± i√3 Φ_even`, `Φ(ζ) = (√(1+ζ²) + ζ)^{1/3}`.
///
/// The root functions are analytic off `{iξ : |ξ| > 1}`; points there are flagged.
pub fn cardano_pos(zeta: Complex64) -> CubicRoots {
    let phi = |w: Complex64| principal_cbrt((1.0 + w * w).sqrt() + w);
    let (p, q) = (phi(zeta), phi(-zeta));
    let odd = (p - q) * 0.5;
    let even = (p + q) * 0.5;
    let i_sqrt3 = Complex64::new(0.0, 3f64.sqrt());
    CubicRoots {
        zero: -2.0 * odd,
        plus: odd + i_sqrt3 * even,
        minus: odd - i_sqrt3 * even,
        on_branch_cut: zeta.re.abs() <= CUT_TOL * (1.0 + zeta.norm()) && zeta.im.abs() > 1.0,
    }
}

/// Roots of `Ω³ - 3Ω + 2ζ`:
/// `Ω̂₀ = -(Φ₊ + Φ₋)`, `Ω̂± = (Φ₊ + Φ₋)/2 ± i(√3/2)(Φ₊ - Φ₋)`, with `Φ±` chosen by the
/// region of `Re ζ`. Points with `|Re ζ| = 1` are flagged.
pub fn cardano_neg(zeta: Complex64) -> CubicRoots {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let (pp, pm) = if zeta.re >= 1.0 {
        let r = (zeta * zeta - one).sqrt();
        (principal_cbrt(zeta + r), principal_cbrt(zeta - r))
    } else if zeta.re > -1.0 {
        let r = (one - zeta * zeta).sqrt();
        (principal_cbrt(zeta + i * r), principal_cbrt(zeta - i * r))
    } else {
        let r = (zeta * zeta - one).sqrt();
        (-principal_cbrt(-zeta - r), -principal_cbrt(-zeta + r))
    };
    let half_sqrt3 = Complex64::new(0.0, 3f64.sqrt() / 2.0);
    CubicRoots {
        zero: -(pp + pm),
        plus: 0.5 * (pp + pm) + half_sqrt3 * (pp - pm),
        minus: 0.5 * (pp + pm) - half_sqrt3 * (pp - pm),
        on_branch_cut: (zeta.re.abs() - 1.0).abs() <= CUT_TOL,
    }
}

/// `max_k |Ω_k³ + sΩ_k + 2ζ|` over the three roots, with `s = ±3`.
pub fn cubic_residual(roots: &CubicRoots, zeta: Complex64, linear: f64) -> f64 {
    roots
        .as_array()
        .iter()
        .map(|w| (w * w * w + linear * w + 2.0 * zeta).norm())
        .fold(0.0, f64::max)
}

/// `max` over the coefficients of `(Ω - Ω₀)(Ω - Ω₊)(Ω - Ω₋) - (Ω³ + sΩ + 2ζ)`.
pub fn factorization_residual(roots: &CubicRoots, zeta: Complex64, linear: f64) -> f64 {
    let [a, b, c] = roots.as_array();
    let e1 = a + b + c;
    let e2 = a * b + b * c + a * c;
    let e3 = a * b * c;
    // Ω³ - e1 Ω² + e2 Ω - e3
    [e1.norm(), (e2 - linear).norm(), (-e3 - 2.0 * zeta).norm()]
        .into_iter()
        .fold(0.0, f64::max)
}

/// Whether `ζ` is at distance at least `1/2` from the cut `i(-∞,-1) ∪ i(1,∞)` of [`cardano_pos`].
pub fn in_good_set(zeta: Complex64) -> bool {
    let d_im = (1.0 - zeta.im.abs()).max(0.0);
    (zeta.re * zeta.re + d_im * d_im).sqrt() >= 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // 30-digit reference values
    const PSI_EDGE_1: f64 = 0.310_990_823_173_968_727_9;
    const PSI_EDGE_HALF: f64 = 0.226_610_922_674_210_734_5;
    const PSI_EDGE_10: f64 = 0.796_907_524_321_218_209_7;
    const PSI_MIN_1: f64 = 0.043_467_943_638_916_958_1;
    const PSI_MIN_2: f64 = 0.118_033_988_749_894_848_2;
    const PSI_MIN_10: f64 = 0.542_384_775_181_047_905_2;

    #[test]
    fn psi_edge_values() {
        assert_eq!(psi_edge(0.0), 0.0);
        assert_relative_eq!(psi_edge(1.0), PSI_EDGE_1, max_relative = 1e-14);
        assert_relative_eq!(psi_edge(0.5), PSI_EDGE_HALF, max_relative = 1e-14);
        assert_relative_eq!(psi_edge(10.0), PSI_EDGE_10, max_relative = 1e-14);
        assert!((psi_edge(1.0) - 0.31095).abs() < 1e-4);
        let ratio = psi_edge(1e6) / 1e6f64.powf(THIRD);
        assert!((ratio / 2f64.powf(-4.0 / 3.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn psi_min_values() {
        assert_eq!(psi_min(0.0), 0.0);
        assert_relative_eq!(psi_min(1.0), PSI_MIN_1, max_relative = 1e-13);
        assert_relative_eq!(psi_min(2.0), PSI_MIN_2, max_relative = 1e-13);
        assert_relative_eq!(psi_min(10.0), PSI_MIN_10, max_relative = 1e-13);
        assert!((psi_min(1.0) - 0.04347).abs() < 1e-5);
        assert_eq!(psi_min(-2.5), psi_min(2.5));
    }

    #[test]
    fn closed_forms_match_literal_formulas() {
        for l in [1e-3f64, 0.1, 1.0, 7.0, 100.0] {
            let r = ((1.0 + l) * l).sqrt();
            let a = 1.0 + 2.0 * l;
            let literal = r / ((a + 2.0 * r).powf(2.0 / 3.0) + (a - 2.0 * r).powf(2.0 / 3.0) + 1.0);
            assert_relative_eq!(psi_edge(l), literal, max_relative = 1e-10);
            let r = (1.0f64 + l * l).sqrt();
            let literal = r / ((r + l).powf(2.0 / 3.0) + (r - l).powf(2.0 / 3.0) - 1.0) - 1.0;
            assert_relative_eq!(psi_min(l), literal, max_relative = 1e-10);
        }
    }

    #[test]
    fn shape_scaling_relations() {
        let mut l = 1e-6;
        assert_relative_eq!(psi_min(1e-4) / 1e-8, 1.0 / 18.0, max_relative = 1e-6);
        while l <= 1e6 {
            let e = psi_edge(l) / l.sqrt().min(l.powf(THIRD));
            let m = psi_min(l) / (l * l).min(l.powf(THIRD));
            assert!((0.1..=10.0).contains(&e), "edge {l}: {e}");
            // the ratio for Ψ_min dips to Ψ_min(1) ≈ 0.0435 at λ = 1
            assert!((1.0 / 25.0..=10.0).contains(&m), "min {l}: {m}");
            l *= 10f64.powf(0.25);
        }
    }

    #[test]
    fn psi_min_from_positive_roots() {
        let base = cardano_pos(c(0.0, 0.0)).plus;
        for l in [0.1, 1.0, 3.0, 50.0] {
            let r = cardano_pos(c(l, 0.0)).plus;
            assert_relative_eq!((r - base).im / 3f64.sqrt(), psi_min(l), max_relative = 1e-12);
        }
    }

    #[test]
    fn psi_edge_from_negative_roots_up_to_constant() {
        for l in [0.0, 0.1, 1.0, 3.0, 50.0] {
            let im = cardano_neg(c(1.0 + 2.0 * l, 0.0)).plus.im;
            assert!((im - 2.0 * 3f64.sqrt() * psi_edge(l)).abs() < 1e-12 * (1.0 + im));
        }
    }

    #[test]
    fn positive_cubic_at_zero() {
        let r = cardano_pos(c(0.0, 0.0));
        assert!(r.zero.norm() < 1e-15);
        assert!((r.plus - c(0.0, 3f64.sqrt())).norm() < 1e-15);
        assert!((r.minus - c(0.0, -(3f64.sqrt()))).norm() < 1e-15);
        assert!(!r.on_branch_cut);
    }

    #[test]
    fn negative_cubic_special_points() {
        let r = cardano_neg(c(1.0, 0.0));
        let mut re: Vec<f64> = r.as_array().iter().map(|x| x.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 2.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-7 && (re[2] - 1.0).abs() < 1e-7);
        assert!(r.on_branch_cut);
        let r = cardano_neg(c(0.0, 0.0));
        let mut re: Vec<f64> = r.as_array().iter().map(|x| x.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 3f64.sqrt()).abs() < 1e-14 && re[1].abs() < 1e-14 && (re[2] - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn flags_cuts() {
        assert!(cardano_pos(c(0.0, 2.0)).on_branch_cut);
        assert!(!cardano_pos(c(0.0, 0.5)).on_branch_cut);
        assert!(cardano_neg(c(-1.0, 0.3)).on_branch_cut);
        assert!(!cardano_neg(c(0.99, 0.3)).on_branch_cut);
    }

    #[test]
    fn random_factorization() {
        let z = c(0.7, -0.2);
        assert!(factorization_residual(&cardano_pos(z), z, 3.0) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let z = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let scale = 1.0 + z.norm();
            assert!(factorization_residual(&cardano_neg(z), z, -3.0) < 1e-12 * scale);
            assert!(cubic_residual(&cardano_neg(z), z, -3.0) < 1e-12 * scale);
            assert!(factorization_residual(&cardano_pos(z), z, 3.0) < 1e-12 * scale);
            assert!(cubic_residual(&cardano_pos(z), z, 3.0) < 1e-12 * scale);
        }
    }

    #[test]
    fn root_perturbation_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        while count < 100 {
            let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let xi = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (0.02 * (1.0 + z.norm()));
            // both endpoints and the midpoint in the good set keeps the segment off the cut
            if !(in_good_set(z) && in_good_set(z + xi) && in_good_set(z + xi * 0.5)) {
                continue;
            }
            count += 1;
            let (a, b) = (cardano_pos(z), cardano_pos(z + xi));
            for (x, y) in a.as_array().iter().zip(b.as_array()) {
                let ratio = (y - x).norm() * (1.0 + z.norm().powf(2.0 * THIRD)) / xi.norm();
                worst = worst.max(ratio);
            }
        }
        assert!(worst < 5.0, "fitted constant {worst}");
    }

    proptest! {
        #[test]
        fn roots_continuous_off_cuts(re in -3.0f64..3.0, im in -0.9f64..0.9) {
            let z = c(re, im);
            let h = 1e-7;
            for dz in [c(h, 0.0), c(0.0, h)] {
                let a = cardano_pos(z).as_array();
                let b = cardano_pos(z + dz).as_array();
                for (x, y) in a.iter().zip(b.iter()) {
                    prop_assert!((x - y).norm() < 1e-5);
                }
            }
        }

        #[test]
        fn negative_roots_continuous_inside_strips(re in -0.95f64..0.95, im in -3.0f64..3.0) {
            let z = c(re, im);
            let h = 1e-7;
            let a = cardano_neg(z).as_array();
            let b = cardano_neg(z + c(h, h)).as_array();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).norm() < 1e-5);
            }
        }
    }
}
