//! Subcommand implementations. Each returns the rendered output text.

use std::result::Result;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qvelab_core::rmt::{empirical_vs_qve, locallaw_from_diagonal, sample};
use qvelab_core::scaling::diagnose_scalability;
use qvelab_core::shape::functions::{cusp_shape, edge_shape, min_shape};
use qvelab_core::shape::{fit_all, gap_law, FitOutcome, GapLaw};
use qvelab_core::spectral::DEFAULT_EPS_STAR;
use qvelab_core::stability::{
    cubic_check, smallness_gate, solve_perturbed_from, stability_params, CubicCheck, SmallnessGate, DEFAULT_CUBIC_CONSTANT,
};
use qvelab_core::*;

use crate::args::{parse_grid, Command, Common, Format, SymmetryArg};
use crate::output::{num, to_json, Table};

/// Why a run stopped; maps onto the exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

/// Rendered output, plus the grid points that failed (if any).
pub struct Emission {
    pub text: String,
    pub failure_mask: Option<Vec<bool>>,
}

impl Emission {
    fn whole(text: String) -> Self {
        Emission { text, failure_mask: None }
    }

    pub fn failed_points(&self) -> usize {
        self.failure_mask.as_ref().map_or(0, |m| m.iter().filter(|f| **f).count())
    }
}

/// Model, configuration and output choices shared by all subcommands.
pub struct Context {
    pub model: ModelSpec,
    pub hash: String,
    pub solver: SolverConfig,
    pub format: Format,
    pub grid: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
}

pub fn load_model(common: &Common) -> Result<ModelSpec, Failure> {
    let sources = [common.model.is_some(), common.semicircle.is_some(), common.two_block.is_some()];
    match sources.iter().filter(|s| **s).count() {
        0 => return Err(Failure::Validation("no model given: use --model, --semicircle or --two-block".into())),
        1 => {}
        _ => return Err(Failure::Validation("give exactly one of --model, --semicircle, --two-block".into())),
    }
    if let Some(path) = &common.model {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read model file {}: {e}", path.display())))?;
        return Ok(ModelSpec::from_json(&text)?);
    }
    if let Some(n) = common.semicircle {
        return Ok(ModelSpec::semicircle(n)?);
    }
    let tb = common.two_block.as_deref().unwrap_or_default();
    let n = tb[2];
    if !(n >= 0.0 && n.fract() == 0.0) {
        return Err(Failure::Validation(format!("two-block dimension {n} is not a nonnegative integer")));
    }
    Ok(two_block(tb[0], tb[1], n as usize)?)
}

pub fn build_context(common: &Common, command: &Command, model: ModelSpec, hash: String) -> Result<Context, Failure> {
    let mut solver = SolverConfig::default();
    if let Some(tol) = common.tol {
        solver.tol = tol;
    }
    solver.validate()?;
    let grid = common.grid.as_deref().map(parse_grid).transpose().map_err(Failure::Validation)?;
    let format = common.format.unwrap_or_else(|| match common.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        _ => command.default_format(),
    });
    if let Some(eta) = common.eta {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Failure::Validation(format!("eta must be finite and nonnegative, got {eta}")));
        }
    }
    Ok(Context { model, hash, solver, format, grid, eta: common.eta, seed: common.seed })
}

impl Context {
    fn eta_or_floor(&self) -> f64 {
        self.eta.unwrap_or(self.solver.eta_floor)
    }

    fn grid_or_default(&self) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(|| {
            let s = self.model.sigma_bound() + 0.5;
            parse_grid(&format!("{}:{}:0.01", -s, s)).unwrap_or_default()
        })
    }

    fn positive_eta(&self) -> Result<f64, Failure> {
        let eta = self.eta_or_floor();
        if eta < self.solver.eta_floor {
            return Err(Failure::Validation(format!("eta {eta:e} is below the floor {:e}", self.solver.eta_floor)));
        }
        Ok(eta)
    }

    fn component_header(&self, prefix: &str) -> Vec<String> {
        (0..self.model.n()).map(|i| format!("{prefix}_{i}")).collect()
    }
}

pub fn run(command: &Command, ctx: &Context) -> Result<Emission, Failure> {
    match command {
        Command::Solve { tau } => solve_cmd(ctx, *tau),
        Command::Density => density_cmd(ctx),
        Command::Shape { fine_step } => shape_cmd(ctx, *fine_step),
        Command::Stability { tau, d_fraction } => stability_cmd(ctx, *tau, *d_fraction),
        Command::Scale => scale_cmd(ctx),
        Command::Rmt { n, symmetry, tau } => rmt_cmd(ctx, *n, *symmetry, *tau),
        Command::Report { tau } => report_cmd(ctx, *tau),
    }
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    model_hash: &'a str,
    tau: f64,
    eta: f64,
    m: &'a [Complex64],
    avg_density: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn solve_record<'a>(ctx: &'a Context, s: &'a Solution) -> SolveRecord<'a> {
    SolveRecord {
        model_hash: &ctx.hash,
        tau: s.z.re,
        eta: s.z.im,
        m: &s.m,
        avg_density: if s.converged { s.density(&ctx.model) } else { f64::NAN },
        residual: s.residual,
        iterations: s.iterations,
        converged: s.converged,
    }
}

fn solve_cmd(ctx: &Context, tau: Option<f64>) -> Result<Emission, Failure> {
    let eta = ctx.positive_eta()?;
    let grid = match (tau, &ctx.grid) {
        (Some(_), Some(_)) => return Err(Failure::Validation("give either --tau or --grid".into())),
        (Some(t), None) => {
            let s = solve(&ctx.model, Complex64::new(t, eta), &ctx.solver)?;
            return Ok(Emission::whole(match ctx.format {
                Format::Json => to_json(&solve_record(ctx, &s))?,
                Format::Csv => solutions_csv(ctx, std::slice::from_ref(&s)),
            }));
        }
        (None, Some(_)) => ctx.grid_or_default(),
        (None, None) => return Err(Failure::Validation("solve needs --tau or --grid".into())),
    };
    let g = solve_grid(&ctx.model, &grid, eta, &ctx.solver)?;
    let text = match ctx.format {
        Format::Json => to_json(&g.solutions.iter().map(|s| solve_record(ctx, s)).collect::<Vec<_>>())?,
        Format::Csv => solutions_csv(ctx, &g.solutions),
    };
    Ok(Emission { text, failure_mask: Some(g.failure_mask()) })
}

fn solutions_csv(ctx: &Context, sols: &[Solution]) -> String {
    let n = ctx.model.n();
    let mut header = vec!["tau".to_string(), "eta".to_string()];
    for i in 0..n {
        header.push(format!("re_m_{i}"));
        header.push(format!("im_m_{i}"));
    }
    header.extend(["residual", "iterations", "converged", "model_hash"].map(String::from));
    let mut t = Table::new(&header);
    for s in sols {
        let mut row = vec![num(s.z.re), num(s.z.im)];
        for m in &s.m {
            row.push(num(m.re));
            row.push(num(m.im));
        }
        row.extend([num(s.residual), s.iterations.to_string(), s.converged.to_string(), ctx.hash.clone()]);
        t.row(row);
    }
    t.into_string()
}

#[derive(Serialize)]
struct DensityPoint {
    tau: f64,
    avg_density: f64,
    v: Vec<f64>,
    residual: f64,
    converged: bool,
}

#[derive(Serialize)]
struct DensityReport<'a> {
    model_hash: &'a str,
    eta: f64,
    points: Vec<DensityPoint>,
    failure_mask: Vec<bool>,
}

fn density_cmd(ctx: &Context) -> Result<Emission, Failure> {
    let eta = ctx.positive_eta()?;
    let g = solve_grid(&ctx.model, &ctx.grid_or_default(), eta, &ctx.solver)?;
    let mask = g.failure_mask();
    let text = match ctx.format {
        Format::Csv => {
            let mut header = vec!["tau".to_string(), "eta".to_string(), "avg_density".to_string()];
            header.extend(ctx.component_header("v"));
            header.extend(["residual", "converged", "model_hash"].map(String::from));
            let mut t = Table::new(&header);
            for (s, d) in g.solutions.iter().zip(&g.avg_density) {
                let mut row = vec![num(s.z.re), num(eta), num(*d)];
                row.extend(s.v().into_iter().map(num));
                row.extend([num(s.residual), s.converged.to_string(), ctx.hash.clone()]);
                t.row(row);
            }
            t.into_string()
        }
        Format::Json => to_json(&DensityReport {
            model_hash: &ctx.hash,
            eta,
            points: g
                .solutions
                .iter()
                .zip(&g.avg_density)
                .map(|(s, d)| DensityPoint { tau: s.z.re, avg_density: *d, v: s.v(), residual: s.residual, converged: s.converged })
                .collect(),
            failure_mask: mask.clone(),
        })?,
    };
    Ok(Emission { text, failure_mask: Some(mask) })
}

#[derive(Serialize)]
struct ShapeOutput<'a> {
    model_hash: &'a str,
    report: &'a ShapeReport,
    fits: &'a [FitOutcome],
    gap_laws: &'a [GapLaw],
}

fn shape_cmd(ctx: &Context, fine_step: Option<f64>) -> Result<Emission, Failure> {
    let mut cfg = ClassifyConfig { solver: ctx.solver, ..ClassifyConfig::default() };
    if let Some(h) = fine_step {
        if !(h > 0.0) {
            return Err(Failure::Validation("--fine-step must be positive".into()));
        }
        cfg.fine_step = h;
    }
    if let Some(eta) = ctx.eta {
        if !(eta > 0.0) {
            return Err(Failure::Validation("shape needs a positive --eta".into()));
        }
        cfg.solver.eta_floor = eta;
    }
    let report = classify(&ctx.model, &cfg)?;
    let fits = fit_all(&ctx.model, &report, &cfg.solver);
    let laws = gap_law(&ctx.model, &report, &cfg.solver);
    let text = match ctx.format {
        Format::Json => to_json(&ShapeOutput { model_hash: &ctx.hash, report: &report, fits: &fits, gap_laws: &laws })?,
        Format::Csv => fit_samples_csv(ctx, &fits, report.eta, &cfg.solver)?,
    };
    Ok(Emission::whole(text))
}

/// `(ω, <v>, <h> Ψ)` along each fit window, for plotting.
fn fit_samples_csv(ctx: &Context, fits: &[FitOutcome], eta: f64, solver: &SolverConfig) -> Result<String, Failure> {
    let header = ["index", "kind", "tau0", "omega", "avg_v", "avg_v_model", "eta", "model_hash"].map(String::from);
    let mut t = Table::new(&header);
    for (k, outcome) in fits.iter().enumerate() {
        let Some(fit) = &outcome.fit else { continue };
        let h = ctx.model.avg(&fit.h);
        let v0 = match fit.kind {
            ShapeKind::NonzeroMin => solve(&ctx.model, Complex64::new(fit.tau0, eta), solver)?.avg_v(&ctx.model),
            _ => 0.0,
        };
        let dirs: &[f64] = if fit.direction > 0.0 {
            &[1.0]
        } else if fit.direction < 0.0 {
            &[-1.0]
        } else {
            &[-1.0, 1.0]
        };
        let (lo, hi) = fit.window;
        for &dir in dirs {
            for j in 0..20 {
                let w = dir * (lo.ln() + (hi / lo).ln() * j as f64 / 19.0).exp();
                let v = solve(&ctx.model, Complex64::new(fit.tau0 + w, eta), solver)?.avg_v(&ctx.model) - v0;
                let model_v = h * match fit.kind {
                    ShapeKind::Edge => edge_shape(w, fit.scale),
                    ShapeKind::Cusp => cusp_shape(w),
                    ShapeKind::NonzeroMin => min_shape(w, fit.scale),
                };
                let kind = serde_json::to_value(fit.kind)?.as_str().unwrap_or_default().to_string();
                t.row([k.to_string(), kind, num(fit.tau0), num(w), num(v), num(model_v), num(eta), ctx.hash.clone()]);
            }
        }
    }
    Ok(t.into_string())
}

fn random_perturbation(rng: &mut ChaCha8Rng, n: usize, size: f64) -> Vec<Complex64> {
    let d: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let s = d.iter().map(|x| x.norm()).fold(0.0, f64::max);
    d.into_iter().map(|x| x * (size / s)).collect()
}

#[derive(Serialize)]
struct StabilityOutput<'a> {
    model_hash: &'a str,
    seed: u64,
    z: Complex64,
    gate: SmallnessGate,
    result: PerturbationResult,
    spectral: Option<SpectralData>,
    cubic_check: Option<CubicCheck>,
    params: Option<StabilityParams>,
    notes: Vec<String>,
}

fn stability_cmd(ctx: &Context, tau: Option<f64>, fraction: f64) -> Result<Emission, Failure> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Failure::Validation("--d-fraction must lie in (0, 1]".into()));
    }
    let eta = ctx.positive_eta()?;
    let seed = ctx.seed.unwrap_or(1);
    let model = &ctx.model;
    let profile = classify(model, &ClassifyConfig { solver: ctx.solver, ..ClassifyConfig::default() }).map(|r| r.profile);
    let point = |t: f64, rng: &mut ChaCha8Rng| -> Result<StabilityOutput, Failure> {
        let z = Complex64::new(t, eta);
        let base = solve(model, z, &ctx.solver)?;
        let gate = smallness_gate(model, &base)?;
        let d = random_perturbation(rng, model.n(), fraction * gate.delta);
        let result = solve_perturbed_from(model, &base, &d, &ctx.solver, true)?;
        let mut notes = Vec::new();
        let spectral = analyze(model, &base, AnalyzeOptions::default()).map_err(|e| notes.push(format!("spectral: {e}"))).ok();
        let cubic = spectral.as_ref().and_then(|s| {
            cubic_check(model, &result, s, DEFAULT_EPS_STAR, DEFAULT_CUBIC_CONSTANT).map_err(|e| notes.push(format!("cubic: {e}"))).ok()
        });
        let params = match &profile {
            Ok(p) => stability_params(model, p, z, &d, &ctx.solver).map_err(|e| notes.push(format!("params: {e}"))).ok(),
            Err(e) => {
                notes.push(format!("params: support unavailable ({e})"));
                None
            }
        };
        Ok(StabilityOutput { model_hash: &ctx.hash, seed, z, gate, result, spectral, cubic_check: cubic, params, notes })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match (tau, &ctx.grid) {
        (Some(_), Some(_)) => Err(Failure::Validation("give either --tau or --grid".into())),
        (None, None) => Err(Failure::Validation("stability needs --tau or --grid".into())),
        (Some(t), None) => {
            let out = point(t, &mut rng)?;
            Ok(Emission::whole(match ctx.format {
                Format::Json => to_json(&out)?,
                Format::Csv => stability_csv(ctx, &[(t, Ok(out))]),
            }))
        }
        (None, Some(grid)) => {
            let rows: Vec<(f64, Result<StabilityOutput, Failure>)> = grid.iter().map(|&t| (t, point(t, &mut rng))).collect();
            let mask = rows.iter().map(|(_, r)| r.is_err()).collect();
            let text = match ctx.format {
                Format::Csv => stability_csv(ctx, &rows),
                Format::Json => {
                    let ok: Vec<&StabilityOutput> = rows.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
                    to_json(&ok)?
                }
            };
            Ok(Emission { text, failure_mask: Some(mask) })
        }
    }
}

fn stability_csv(ctx: &Context, rows: &[(f64, Result<StabilityOutput, Failure>)]) -> String {
    let header = [
        "tau", "eta", "avg_v", "gate_delta", "d_norm", "diff_norm", "rough_sup_ratio", "theta_abs", "r_norm", "cubic_residual",
        "upsilon", "ok", "seed", "model_hash",
    ]
    .map(String::from);
    let mut t = Table::new(&header);
    let eta = ctx.eta_or_floor();
    let seed = ctx.seed.unwrap_or(1);
    for (tau, r) in rows {
        let cells = match r {
            Ok(o) => {
                let sup = |w: &[Complex64]| w.iter().map(|x| x.norm()).fold(0.0, f64::max);
                let diff: Vec<Complex64> = o.result.g.iter().zip(&o.result.m).map(|(a, b)| a - b).collect();
                vec![
                    num(*tau),
                    num(eta),
                    num(o.spectral.as_ref().map_or(f64::NAN, |s| s.avg_v)),
                    num(o.gate.delta),
                    num(sup(&o.result.d)),
                    num(sup(&diff)),
                    num(o.result.bound_ratios.get("rough_sup").copied().unwrap_or(f64::NAN)),
                    num(o.result.theta.norm()),
                    num(o.result.r_norm),
                    num(o.result.cubic_residual.unwrap_or(f64::NAN)),
                    num(o.params.map_or(f64::NAN, |p| p.upsilon)),
                    "true".into(),
                ]
            }
            Err(_) => {
                let mut v = vec![num(*tau), num(eta)];
                v.extend(std::iter::repeat(num(f64::NAN)).take(9));
                v.push("false".into());
                v
            }
        };
        t.row(cells.into_iter().chain([seed.to_string(), ctx.hash.clone()]));
    }
    t.into_string()
}

#[derive(Serialize)]
struct ScaleOutput<'a> {
    model_hash: &'a str,
    result: ScalingResult,
    pattern_diagnosis: Option<ScalingStatus>,
}

fn scale_cmd(ctx: &Context) -> Result<Emission, Failure> {
    let eta = ctx.eta.unwrap_or(0.0);
    let result = scale_symmetric(&ctx.model, eta, &ScalingConfig::default())?;
    let diagnosis = diagnose_scalability(&ctx.model.pattern()).ok();
    let text = match ctx.format {
        Format::Json => to_json(&ScaleOutput { model_hash: &ctx.hash, result, pattern_diagnosis: diagnosis })?,
        Format::Csv => {
            let header = ["component", "weight", "v", "eta", "status", "residual", "model_hash"].map(String::from);
            let mut t = Table::new(&header);
            let status = serde_json::to_value(result.status)?.as_str().unwrap_or_default().to_string();
            let v = result.v.clone().unwrap_or_else(|| vec![f64::NAN; ctx.model.n()]);
            for (i, (x, w)) in v.iter().zip(ctx.model.weights()).enumerate() {
                t.row([i.to_string(), num(*w), num(*x), num(eta), status.clone(), num(result.residual), ctx.hash.clone()]);
            }
            t.into_string()
        }
    };
    Ok(Emission::whole(text))
}

#[derive(Serialize)]
struct RmtOutput<'a> {
    model_hash: &'a str,
    seed: u64,
    #[serde(rename = "N")]
    n: usize,
    symmetry: Symmetry,
    ks_distance: f64,
    local_law: LocalLawReport,
}

fn rmt_cmd(ctx: &Context, n: usize, symmetry: SymmetryArg, tau: f64) -> Result<Emission, Failure> {
    if n < 2 {
        return Err(Failure::Validation("--n must be at least 2".into()));
    }
    let seed = ctx.seed.unwrap_or(1);
    let symmetry = match symmetry {
        SymmetryArg::Real => Symmetry::RealSymmetric,
        SymmetryArg::Complex => Symmetry::ComplexHermitian,
    };
    let h = sample(&EnsembleSpec { n, symmetry, seed }, &ctx.model)?;
    let r = Resolvent::new(&h)?;
    let eigs = r.spectrum();
    let text = match ctx.format {
        Format::Csv => {
            let header = ["index", "eigenvalue", "seed", "N", "model_hash"].map(String::from);
            let mut t = Table::new(&header);
            for (i, e) in eigs.iter().enumerate() {
                t.row([i.to_string(), num(*e), seed.to_string(), n.to_string(), ctx.hash.clone()]);
            }
            t.into_string()
        }
        Format::Json => {
            let grid = solve_grid(&ctx.model, &ctx.grid_or_default(), ctx.solver.eta_floor, &ctx.solver)?;
            let ks = empirical_vs_qve(&eigs, &grid)?;
            let eta = ctx.eta.unwrap_or_else(|| (n as f64).powf(-0.4));
            if !(eta > 0.0) {
                return Err(Failure::Validation("rmt needs a positive --eta".into()));
            }
            let z = Complex64::new(tau, eta);
            let m = solve(&ctx.model, z, &ctx.solver)?;
            let local_law = locallaw_from_diagonal(&r.diagonal(z), &ctx.model, &m)?;
            to_json(&RmtOutput { model_hash: &ctx.hash, seed, n, symmetry, ks_distance: ks, local_law })?
        }
    };
    Ok(Emission::whole(text))
}

#[derive(Serialize)]
struct ReportOutput<'a> {
    model_hash: &'a str,
    structural: StructuralReport,
    points: Vec<SpectralData>,
}

fn report_cmd(ctx: &Context, tau: Option<f64>) -> Result<Emission, Failure> {
    let eta = ctx.positive_eta()?;
    let model = &ctx.model;
    let taus = match (tau, &ctx.grid) {
        (Some(_), Some(_)) => return Err(Failure::Validation("give either --tau or --grid".into())),
        (Some(t), None) => vec![t],
        (None, Some(g)) => g.clone(),
        (None, None) => Vec::new(),
    };
    let results: Vec<Result<SpectralData, Error>> = taus
        .iter()
        .map(|&t| solve(model, Complex64::new(t, eta), &ctx.solver).and_then(|s| analyze(model, &s, AnalyzeOptions::default())))
        .collect();
    if taus.len() == 1 {
        if let Some(Err(_)) = results.first() {
            let e = results.into_iter().next().and_then(|r| r.err()).expect("checked above");
            return Err(e.into());
        }
    }
    let mask: Vec<bool> = results.iter().map(|r| r.is_err()).collect();
    let text = match ctx.format {
        Format::Json => to_json(&ReportOutput {
            model_hash: &ctx.hash,
            structural: model.structural_report(10),
            points: results.into_iter().filter_map(|r| r.ok()).collect(),
        })?,
        Format::Csv => {
            let header = [
                "tau", "eta", "lambda", "gap", "alpha", "avg_v", "sigma", "psi", "f_identity_residual", "beta_re", "beta_im", "ok",
                "model_hash",
            ]
            .map(String::from);
            let mut t = Table::new(&header);
            for (tau, r) in taus.iter().zip(&results) {
                let mut row = vec![num(*tau), num(eta)];
                match r {
                    Ok(s) => {
                        let beta = s.beta.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                        row.extend(
                            [s.lambda, s.gap, s.alpha, s.avg_v, s.sigma, s.psi, s.f_identity_residual.unwrap_or(f64::NAN), beta.re, beta.im]
                                .map(num),
                        );
                        row.push("true".into());
                    }
                    Err(_) => {
                        row.extend(std::iter::repeat(num(f64::NAN)).take(9));
                        row.push("false".into());
                    }
                }
                row.push(ctx.hash.clone());
                t.row(row);
            }
            t.into_string()
        }
    };
    Ok(Emission { text, failure_mask: (taus.len() > 1).then_some(mask) })
}
