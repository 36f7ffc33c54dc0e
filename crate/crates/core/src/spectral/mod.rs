//! `λ_p` and its companions from a [`DiscreteOperator`].
//!
//! Three routes are kept separate: the Perron route (shifted power iteration
//! with Collatz–Wielandt certificates), the variational route on the
//! weighted-symmetrized matrix, and the envelope `bounds_iv`. On a finite
//! connected grid `λ_p' = λ_p'' = λ_p`, so the dual quantities are not
//! searched for separately.
//!
//! [`DiscreteOperator`]: crate::assembly::DiscreteOperator

mod bounds;
mod drift;
mod perron;
mod variational;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use bounds::{bounds_iv, concentration_index, existence_check, ExistenceReport};
pub use drift::{exp_test_lower_bound, moment_generating, DriftBound};
pub use perron::{cw_bounds, principal_eig};
pub use variational::{lambda_v_min, lambda_v_quadratic, VariationalResult};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Iterations after which the power iteration hands over to shift-invert.
pub(crate) const POWER_PHASE: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `200 n`.
    pub max_iter: Option<usize>,
    /// Keep the Collatz–Wielandt bracket of every iterate.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn traced(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub(crate) fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(200 * n.max(1))
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(crate::Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Roundoff-limited tolerance for quantities of magnitude `scale`.
pub(crate) fn effective_tol(tol: f64, scale: f64) -> f64 {
    tol.max(1e3 * f64::EPSILON * scale.max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Eigenpair,
    BoundaryCase,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Eigenpair => "eigenpair",
            Verdict::BoundaryCase => "boundary_case",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralResult {
    pub lambda_p: f64,
    /// Perron vector, unit weighted-ℓ² norm, largest entry positive.
    pub eigvec: Vec<f64>,
    /// `‖A u + λ_p u‖₂` for `u = φ_p / ‖φ_p‖₂`.
    pub residual: f64,
    pub cw_lower: f64,
    pub cw_upper: f64,
    /// Filled by callers that also run the variational route.
    pub lambda_v: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub existence: Verdict,
    pub concentration_index: f64,
    /// Tolerance the solve was run with.
    pub tol: f64,
    /// Components of the support graph the operator splits into.
    pub components: usize,
    /// `(cw_lower, cw_upper)` per iterate when tracing was requested.
    #[serde(skip)]
    pub trace: Vec<(f64, f64)>,
}
