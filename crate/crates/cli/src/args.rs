//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "qvelab", version, about = "Quadratic vector equation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Model file: {"n": .., "a": [..], "S": [[..]], "weights": [..]}
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Built-in model S = ones(N), a = 0
    #[arg(long, global = true, value_name = "N")]
    pub semicircle: Option<usize>,
    /// Built-in two-block model
    #[arg(long, global = true, num_args = 3, value_names = ["LAMBDA", "DELTA", "N"], allow_negative_numbers = true)]
    pub two_block: Option<Vec<f64>>,
    /// Real grid `a:b:step`, endpoints included within half a step
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Imaginary part of the spectral parameter
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Solver residual tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomized commands
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grid maps; results do not depend on it
    #[arg(long, global = true, env = "QVELAB_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Output file (stdout when absent); a manifest is written next to it
    #[arg(short, long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryArg {
    Real,
    Complex,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase", tag = "name")]
pub enum Command {
    /// Solve at `z = tau + i eta`, or along --grid
    Solve {
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
    },
    /// Self-consistent density along --grid
    Density,
    /// Support, singularities, shape fits and gap predictions
    Shape {
        /// Step of the fine scans around candidate points
        #[arg(long)]
        fine_step: Option<f64>,
    },
    /// Perturbed equation at `z = tau + i eta`, or a sweep along --grid
    Stability {
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
        /// Sup-norm of the random perturbation, as a fraction of the smallness gate
        #[arg(long, default_value_t = 1e-3)]
        d_fraction: f64,
    },
    /// Symmetric scaling `v (eta + S v) = 1`
    Scale,
    /// Sampled Wigner-type matrix against the equation
    Rmt {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, value_enum, default_value_t = SymmetryArg::Real)]
        symmetry: SymmetryArg,
        /// Real part of `z` for the local-law comparison
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
    },
    /// Structural constants and spectral data at `z`, or a sweep along --grid
    Report {
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Density => "density",
            Command::Shape { .. } => "shape",
            Command::Stability { .. } => "stability",
            Command::Scale => "scale",
            Command::Rmt { .. } => "rmt",
            Command::Report { .. } => "report",
        }
    }

    pub fn default_format(&self) -> Format {
        match self {
            Command::Solve { .. } | Command::Density => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Parses `a:b:step`; points beyond `b` by less than half a step are kept.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid `{spec}` is not of the form a:b:step"));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("grid bound `{s}` is not a number"));
    let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(h > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
        return Err(format!("grid `{spec}` needs finite a <= b and step > 0"));
    }
    let count = ((b - a) / h + 0.5).floor() as usize + 1;
    if count > 10_000_000 {
        return Err(format!("grid `{spec}` has {count} points"));
    }
    Ok((0..count).map(|k| a + k as f64 * h).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_within_half_step() {
        assert_eq!(parse_grid("-1:1:0.5").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0:1.2:0.5").unwrap().len(), 3);
        assert_eq!(parse_grid("0:1.3:0.5").unwrap().len(), 4);
        assert_eq!(parse_grid("-3:3:0.01").unwrap().len(), 601);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
