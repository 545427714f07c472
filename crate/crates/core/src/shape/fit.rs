//! Local exponents, shape fits and the gap-length prediction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::functions::{cusp_shape, edge_shape, min_shape};
use super::profile::golden_min;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::{solve, SolverConfig};
use crate::spectral::SpectralData;

/// Singularity class of a point where the density is small.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Edge,
    Cusp,
    NonzeroMin,
}

/// Least-squares fit of `v_x(τ₀ + ω) - v_x(τ₀) ≈ h_x Ψ(ω)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShapeFit {
    pub kind: ShapeKind,
    pub tau0: f64,
    /// Component amplitudes `h_x`.
    pub h: Vec<f64>,
    /// `Δ` for edges, `ρ` for minima, 0 for cusps.
    pub scale: f64,
    /// Relative L² misfit over the window.
    pub residual: f64,
    /// `(ω_min, ω_max)`, in units of `|ω|`.
    pub window: (f64, f64),
    /// `+1`: fit on `ω > 0`; `-1`: on `ω < 0`; `0`: both sides.
    pub direction: f64,
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

fn check_window(window: (f64, f64), min_ratio: f64) -> Result<()> {
    if !(window.0 > 0.0 && window.1 >= min_ratio * window.0) {
        return Err(Error::WindowTooSmall(format!(
            "window ({:e}, {:e}) must be positive and span a factor {min_ratio}",
            window.0, window.1
        )));
    }
    Ok(())
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Log-log slope of `<v(τ₀ + dir·ω)> - v0` against `ω` over `window` (16 log-spaced points).
pub fn local_exponent(
    model: &ModelSpec,
    tau0: f64,
    direction: f64,
    window: (f64, f64),
    v0: f64,
    eta: f64,
    config: &SolverConfig,
) -> Result<f64> {
    check_window(window, 2.0)?;
    let omegas = log_space(window.0, window.1, 16);
    let mut xs = Vec::with_capacity(omegas.len());
    let mut ys = Vec::with_capacity(omegas.len());
    for w in omegas {
        let s = solve(model, Complex64::new(tau0 + direction * w, eta), config)?;
        let dv = s.avg_v(model) - v0;
        if !(dv > 0.0) {
            return Err(Error::FitDiverged(format!("nonpositive density increment at omega = {w:e}")));
        }
        xs.push(w.ln());
        ys.push(dv.ln());
    }
    Ok(ols_slope(&xs, &ys))
}

fn profile_value(kind: ShapeKind, omega: f64, scale: f64) -> f64 {
    match kind {
        ShapeKind::Edge => edge_shape(omega, scale),
        ShapeKind::Cusp => cusp_shape(omega),
        ShapeKind::NonzeroMin => min_shape(omega, scale),
    }
}

/// Fits `h` (and the scale, searched over `[hint/10, 10·hint]`) on sampled solutions.
///
/// Edges and cusps are fitted with `v(τ₀) = 0`; minima subtract the measured
/// `v(τ₀)`. `direction` selects the side of `τ₀` (0 = both sides).
pub fn fit_shape(
    model: &ModelSpec,
    tau0: f64,
    kind: ShapeKind,
    scale_hint: f64,
    window: (f64, f64),
    direction: f64,
    eta: f64,
    config: &SolverConfig,
) -> Result<ShapeFit> {
    check_window(window, 2.0)?;
    let n = model.n();
    let v0 = match kind {
        ShapeKind::NonzeroMin => solve(model, Complex64::new(tau0, eta), config)?.v(),
        _ => vec![0.0; n],
    };
    let mut omegas: Vec<f64> = Vec::new();
    for w in log_space(window.0, window.1, 20) {
        if direction >= 0.0 {
            omegas.push(w);
        }
        if direction <= 0.0 {
            omegas.push(-w);
        }
    }
    // data[k][x] = v_x(τ₀ + ω_k) - v_x(τ₀)
    let mut data = Vec::with_capacity(omegas.len());
    for &w in &omegas {
        let s = solve(model, Complex64::new(tau0 + w, eta), config)?;
        data.push(s.v().iter().zip(&v0).map(|(a, b)| a - b).collect::<Vec<f64>>());
    }
    let total: f64 = data.iter().flatten().map(|d| d * d).sum();
    if !(total > 0.0) {
        return Err(Error::FitDiverged("no signal in the fit window".into()));
    }
    let fit_at = |scale: f64| -> (Vec<f64>, f64) {
        let phi: Vec<f64> = omegas.iter().map(|w| profile_value(kind, *w, scale)).collect();
        let pp: f64 = phi.iter().map(|p| p * p).sum();
        let h: Vec<f64> = (0..n)
            .map(|x| data.iter().zip(&phi).map(|(d, p)| d[x] * p).sum::<f64>() / pp)
            .collect();
        let misfit: f64 = data
            .iter()
            .zip(&phi)
            .map(|(d, p)| (0..n).map(|x| (d[x] - h[x] * p).powi(2)).sum::<f64>())
            .sum();
        (h, (misfit / total).sqrt())
    };
    let scale = match kind {
        ShapeKind::Cusp => 0.0,
        _ => {
            if !(scale_hint > 0.0) {
                return Err(Error::InvalidInput("edge and minimum fits need a positive scale hint".into()));
            }
            let c = scale_hint.ln();
            let (best, _) = golden_min(c - 10f64.ln(), c + 10f64.ln(), 1e-6, |s| Ok(fit_at(s.exp()).1))?;
            best.exp()
        }
    };
    let (h, residual) = fit_at(scale);
    if !residual.is_finite() || h.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::FitDiverged(format!("amplitudes {h:?} not positive")));
    }
    Ok(ShapeFit { kind, tau0, h, scale, residual, window, direction })
}

/// `Δ̂ = 4|σ|³ / (27 <|m| f> ψ²)`.
pub fn gap_estimate(spectral: &SpectralData) -> Result<f64> {
    gap_estimate_from(spectral.sigma, spectral.psi, spectral.f_abs_m)
}

pub fn gap_estimate_from(sigma: f64, psi: f64, f_abs_m: f64) -> Result<f64> {
    if !(psi.abs() > 1e-14) {
        return Err(Error::ZeroPsi);
    }
    Ok(4.0 * sigma.abs().powi(3) / (27.0 * f_abs_m * psi * psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{analyze, AnalyzeOptions};

    #[test]
    fn semicircle_edge_exponent_and_amplitude() {
        let model = ModelSpec::semicircle(1).unwrap();
        let cfg = SolverConfig::default();
        let e = local_exponent(&model, 2.0, -1.0, (1e-3, 1e-1), 0.0, 1e-6, &cfg).unwrap();
        assert!((e - 0.5).abs() < 0.05, "{e}");
        // v(2 - ω) = √(4ω - ω²)/2 ≈ √ω; Δ = 2Σ = 4 for the extreme edge
        let fit = fit_shape(&model, 2.0, ShapeKind::Edge, 4.0, (1e-3, 1e-1), -1.0, 1e-6, &cfg).unwrap();
        // Δ^{1/3}Ψ_edge(ω/Δ) ≈ √ω/(3Δ^{1/6}) for ω ≪ Δ, so h/(3Δ^{1/6}) ≈ 1
        let pred = fit.h[0] / (3.0 * fit.scale.powf(1.0 / 6.0));
        assert!((pred - 1.0).abs() < 0.05, "{pred} (scale {})", fit.scale);
        assert!(fit.residual < 0.05);
    }

    #[test]
    fn bad_windows_rejected() {
        let model = ModelSpec::semicircle(1).unwrap();
        let cfg = SolverConfig::default();
        assert!(matches!(
            local_exponent(&model, 2.0, -1.0, (1e-2, 1.5e-2), 0.0, 1e-6, &cfg),
            Err(Error::WindowTooSmall(_))
        ));
        assert!(matches!(
            fit_shape(&model, 2.0, ShapeKind::Cusp, 1.0, (0.0, 1.0), 1.0, 1e-6, &cfg),
            Err(Error::WindowTooSmall(_))
        ));
    }

    #[test]
    fn zero_psi_rejected() {
        assert!(matches!(gap_estimate_from(0.3, 0.0, 1.0), Err(Error::ZeroPsi)));
        let d = gap_estimate_from(0.3, 0.5, 1.0).unwrap();
        assert!((d - 4.0 * 0.027 / (27.0 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn extreme_edge_estimate_is_standalone() {
        let model = ModelSpec::semicircle(1).unwrap();
        let s = solve(&model, Complex64::new(2.0, 1e-6), &SolverConfig::default()).unwrap();
        let d = analyze(&model, &s, AnalyzeOptions::default()).unwrap();
        assert!(d.psi.abs() < 1e-12);
        assert!(matches!(gap_estimate(&d), Err(Error::ZeroPsi)));
    }
}
