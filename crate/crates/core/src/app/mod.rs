//! Empirical pipeline and command-line plumbing.

pub mod cli;
pub mod density;
pub mod io;

pub use density::{build_lagged_auxiliary, standardized_moments, transform, DensitySample, TransformKind};
pub use io::{load_curves, load_densities, load_scalars, write_curves, write_curves_to, write_scalars, RunManifest};
