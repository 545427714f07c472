//! Shape of the generating density near its small values.

pub mod classify;
pub mod fit;
pub mod functions;
pub mod profile;

pub use classify::{classify, fit_all, gap_law, ClassifyConfig, EdgeSide, FitOutcome, GapLaw, ShapeReport, Singularity};
pub use fit::{fit_shape, gap_estimate, local_exponent, ShapeFit, ShapeKind};
pub use functions::{cardano_neg, cardano_pos, cusp_shape, edge_shape, min_shape, psi_edge, psi_min, CubicRoots};
pub use profile::{detect_support, SupportProfile};
