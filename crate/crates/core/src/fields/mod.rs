//! Grids, field containers, spectral and radial calculus, snapshot files.

mod field;
mod grid;
pub mod radial;
pub mod snapshot;
pub mod spectral;

pub use field::{ComplexField, ScalarField, VectorField};
pub use grid::{Grid, GridKind};
pub use radial::{radial_derivative, radial_laplacian, RadialOperator};
pub use snapshot::{read_complex, read_snapshot, write_complex, write_snapshot, Snapshot};
pub use spectral::{curl2d, divergence, fractional_deriv, gradient, laplacian, Spectral};
