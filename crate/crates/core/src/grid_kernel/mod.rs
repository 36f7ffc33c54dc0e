//! Discretized domains, dispersal kernels and zero-order coefficient fields.

mod coefficient;
mod grid;
mod kernel;

pub use coefficient::{Coefficient, CoefficientSpec};
pub use grid::{BoxDomain, Grid, MAX_GRID_NODES};
pub use kernel::{kernel_mass, second_moment, KernelFamily, KernelSpec, Nondegeneracy};
