//! Studies built on the solver: `σ`-sweeps with limit extrapolation, domain
//! exhaustion, scaling invariance, eigenfunction convergence, `m = 0`
//! monotonicity and the linearized growth rate.

mod exhaustion;
mod limit;
mod properties;
mod studies;
mod sweep;

pub use exhaustion::{
    domain_exhaustion, ExhaustionLevel, ExhaustionReport, ExhaustionSetup, EXHAUSTION_MONO_TOL,
    STAGNATION_TOL,
};
pub use limit::{limit_estimate, richardson, LimitEstimate, LimitTarget, SweepDirection};
pub use properties::{property_suite, random_coefficient, random_symmetric_instance, CheckOutcome};
pub use studies::{
    eigfn_convergence, growth_rate, local_reference, m0_monotonicity, scaling_invariance_suite,
    EigfnRecord, GrowthEstimate, MonoEntry, MonoReport, MonoSetup, MonotoneVerdict,
};
pub use sweep::{sigma_sweep, solve_record, ResolutionRule, SweepRecord, SweepSetup};
