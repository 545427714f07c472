//! Numerical toolkit for the quadratic vector equation
//!
//! ```text
//! -1/m(z) = z + a + S m(z),   Im z > 0,
//! ```
//!
//! on a finite probability space: solvers, the operators that govern
//! stability, singularity shapes of the generating density, Sinkhorn-type
//! scaling at `z = 0`, and comparison with sampled random matrices.

pub mod error;
pub mod model;
pub mod solver;
pub mod shape;
pub mod rmt;
pub mod scaling;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use model::{build_model, critical_delta, is_fully_indecomposable, two_block, ModelFile, ModelSpec, StructuralReport};
pub use num_complex::Complex64;
pub use spectral::{analyze, AnalyzeOptions, SpectralData};
pub use rmt::{EnsembleSpec, LocalLawReport, Resolvent, Sample, Symmetry};
pub use scaling::{scale_symmetric, ScalingConfig, ScalingResult, ScalingStatus};
pub use shape::{classify, ClassifyConfig, ShapeKind, ShapeReport, Singularity, SupportProfile};
pub use solver::{solve, solve_fixed_point, solve_grid, solve_newton, uniform_grid, GridSolution, Solution, SolverConfig};
pub use stability::{solve_perturbed, PerturbationResult, StabilityParams};
