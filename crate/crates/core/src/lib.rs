//! Exact algorithms for induced arithmetic removal of colored linear patterns
//! over prime fields: pattern densities, Fourier regularity, energy-increment
//! regularization, canonical-coloring dichotomies and the recoloring pipeline.

pub mod energy;
pub mod error;
pub mod ext_field;
pub mod field;
pub mod fourier;
pub mod inhomogeneous;
pub mod pattern;
pub mod ramsey;
pub mod regularize;
pub mod removal;
pub mod space;
pub mod subspace;

pub use error::{Error, Result};
pub use ext_field::ExtensionField;
pub use field::{FpMatrix, PrimeField};
pub use pattern::{ColoredPattern, PatternFamily};
pub use space::{Coloring, DenseFunction, Limits, Space};
pub use subspace::Subspace;

/// Slack used in every floating-point threshold comparison.
pub const TOL: f64 = 1e-9;

/// Version tag written into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;
