//! Generalized principal eigenvalue `λ_p` of nonlocal dispersal operators
//! `L_Ω + a` and `M_{σ,m,Ω} + a` on discretized domains.
//!
//! The discrete operator is the dense Nyström matrix
//! `A_ij = w_j K(x_i, x_j) + δ_ij (a_i + shift)` on a uniform midpoint grid,
//! and `λ_p = -ρ(A)` where `ρ` is its Perron value.

pub mod assembly;
pub mod cli_io;
pub mod error;
pub mod experiments;
pub mod grid_kernel;
pub mod local_ref;
pub mod spectral;

pub use assembly::{assemble, assemble_scaled, effective_sup, DiscreteOperator, Variant};
pub use error::{Error, Result};
pub use grid_kernel::{
    kernel_mass, second_moment, BoxDomain, Coefficient, CoefficientSpec, Grid, KernelFamily,
    KernelSpec,
};
pub use local_ref::{diffusivity, dirichlet_lambda1, LocalEigenResult};
pub use spectral::{
    bounds_iv, cw_bounds, existence_check, lambda_v_min, lambda_v_quadratic, principal_eig,
    SolverOptions, SpectralResult, Verdict,
};
