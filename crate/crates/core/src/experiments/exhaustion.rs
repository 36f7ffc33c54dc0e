use serde::Serialize;

use crate::assembly::{assemble, Variant};
use crate::error::{Error, Result};
use crate::grid_kernel::{Coefficient, CoefficientSpec, Grid, KernelSpec};
use crate::spectral::SolverOptions;

use super::sweep::{solve_record, SweepRecord};

/// Tolerated increase between successive levels of a node-nested family.
pub const EXHAUSTION_MONO_TOL: f64 = 1e-12;
/// Successive change below which the family counts as stagnated.
pub const STAGNATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionLevel {
    pub half_width: f64,
    pub record: SweepRecord,
}

impl ExhaustionLevel {
    pub fn lambda_p(&self) -> f64 {
        self.record.lambda_p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionReport {
    pub levels: Vec<ExhaustionLevel>,
    /// Index of the first level whose change from its predecessor is below
    /// the stagnation tolerance.
    pub stagnation: Option<usize>,
    /// Largest increase `λ_p(level i+1) - λ_p(level i)`; `<= 1e-12` expected.
    pub max_increase: f64,
}

impl ExhaustionReport {
    pub fn monotone(&self) -> bool {
        self.max_increase <= EXHAUSTION_MONO_TOL
    }

    pub fn last(&self) -> &ExhaustionLevel {
        self.levels.last().expect("non-empty report")
    }
}

/// Exhaustion settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustionSetup<'a> {
    pub kernel: &'a KernelSpec,
    pub coefficient: &'a CoefficientSpec,
    pub variant: Variant,
    pub center: &'a [f64],
    pub spacing: f64,
    pub solver: SolverOptions,
    pub with_lambda_v: bool,
    pub stagnation_tol: f64,
    /// Stop after the first stagnated level.
    pub stop_at_stagnation: bool,
}

/// `λ_p` on boxes `center ± L` of fixed spacing, in increasing `L`.
pub fn domain_exhaustion(setup: &ExhaustionSetup, half_widths: &[f64]) -> Result<ExhaustionReport> {
    if half_widths.is_empty() {
        return Err(Error::InvalidArgument("no half widths given".into()));
    }
    if half_widths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("half widths must increase".into()));
    }
    let mut levels: Vec<ExhaustionLevel> = Vec::new();
    let mut stagnation = None;
    let mut max_increase = f64::NEG_INFINITY;
    for &l in half_widths {
        let grid = Grid::nested_box(setup.center, l, setup.spacing)?;
        let a = Coefficient::on_grid(setup.coefficient, &grid)?;
        let op = assemble(&grid, setup.kernel, &a, setup.variant)?;
        let sigma = setup.kernel.sigma().unwrap_or(f64::NAN);
        let (record, _) = solve_record(&op, sigma, &setup.solver, setup.with_lambda_v)?;
        if let Some(prev) = levels.last() {
            let change = record.lambda_p - prev.lambda_p();
            max_increase = max_increase.max(change);
            if stagnation.is_none() && change.abs() < setup.stagnation_tol {
                stagnation = Some(levels.len());
            }
        }
        levels.push(ExhaustionLevel { half_width: l, record });
        if setup.stop_at_stagnation && stagnation.is_some() {
            break;
        }
    }
    Ok(ExhaustionReport {
        levels,
        stagnation,
        max_increase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::KernelFamily;

    fn setup<'a>(k: &'a KernelSpec, a: &'a CoefficientSpec, center: &'a [f64]) -> ExhaustionSetup<'a> {
        ExhaustionSetup {
            kernel: k,
            coefficient: a,
            variant: Variant::MPlusA,
            center,
            spacing: 1.0 / 32.0,
            solver: SolverOptions::default(),
            with_lambda_v: false,
            stagnation_tol: STAGNATION_TOL,
            stop_at_stagnation: false,
        }
    }

    #[test]
    fn zero_coefficient_decreases_toward_zero() {
        let k = KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.25, 0.0);
        let a = CoefficientSpec::constant(0.0);
        let rep = domain_exhaustion(&setup(&k, &a, &[0.0]), &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!(rep.monotone());
        let vals: Vec<f64> = rep.levels.iter().map(|l| l.lambda_p()).collect();
        assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(vals[3] < vals[0]);
    }

    #[test]
    fn single_box() {
        let k = KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.25, 0.0);
        let a = CoefficientSpec::constant(0.1);
        let rep = domain_exhaustion(&setup(&k, &a, &[0.0]), &[1.0]).unwrap();
        assert_eq!(rep.levels.len(), 1);
        assert_eq!(rep.stagnation, None);
    }

    #[test]
    fn rejects_unsorted() {
        let k = KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.25, 0.0);
        let a = CoefficientSpec::constant(0.0);
        assert!(domain_exhaustion(&setup(&k, &a, &[0.0]), &[2.0, 1.0]).is_err());
    }
}
