use rayon::prelude::*;
use serde::Serialize;

use super::exhaustion::{domain_exhaustion, ExhaustionSetup, STAGNATION_TOL};
use super::sweep::{solve_record, SweepRecord, SweepSetup};
use crate::assembly::{assemble_scaled, DiscreteOperator, Variant};
use crate::error::{Error, Result};
use crate::grid_kernel::{CoefficientSpec, KernelFamily, KernelSpec};
use crate::local_ref::{diffusivity, dirichlet_lambda1_on, LocalEigenResult};
use crate::spectral::{principal_eig, SolverOptions, Verdict};

/// Largest `|λ_p(op) - λ_p(op scaled by s)|` over `scales`.
pub fn scaling_invariance_suite(op: &DiscreteOperator, scales: &[f64], opts: &SolverOptions) -> Result<f64> {
    if op.variant() != Variant::LPlusA {
        return Err(Error::InvalidArgument("scaling invariance applies to L-variant operators".into()));
    }
    let opts = SolverOptions {
        tol: opts.tol.min(1e-13),
        ..*opts
    };
    let base = principal_eig(op, &opts)?.lambda_p;
    let diffs: Result<Vec<f64>> = scales
        .par_iter()
        .map(|&s| {
            if s == 1.0 {
                return Ok(0.0);
            }
            let scaled = assemble_scaled(op, s)?;
            Ok((principal_eig(&scaled, &opts)?.lambda_p - base).abs())
        })
        .collect();
    Ok(diffs?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigfnRecord {
    pub record: SweepRecord,
    /// `None` when the operator has no eigenpair at this `σ`.
    pub distance: Option<f64>,
}

/// Local reference on the sweep box with `nodes` interior nodes per axis.
pub fn local_reference(setup: &SweepSetup, nodes: usize, tol: f64) -> Result<LocalEigenResult> {
    let dim = setup.domain.dim();
    let c = diffusivity(&setup.kernel(1.0), dim)?;
    dirichlet_lambda1_on(&setup.domain, &vec![nodes; dim], c, &setup.coefficient, tol)
}

/// Interior L² distance between the normalized Perron vector and the local
/// eigenfunction sampled on the same nodes, per `σ`.
pub fn eigfn_convergence(
    setup: &SweepSetup,
    sigmas: &[f64],
    margin: f64,
    reference: &LocalEigenResult,
) -> Result<Vec<(f64, Result<EigfnRecord>)>> {
    if setup.m != 2.0 || setup.variant != Variant::MPlusA {
        return Err(Error::InvalidArgument("eigenfunction convergence needs the M-variant with m = 2".into()));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be nonnegative, got {margin}")));
    }
    Ok(sigmas
        .par_iter()
        .map(|&sigma| (sigma, eigfn_record(setup, sigma, margin, reference)))
        .collect())
}

fn eigfn_record(setup: &SweepSetup, sigma: f64, margin: f64, reference: &LocalEigenResult) -> Result<EigfnRecord> {
    let op = setup.operator(sigma)?;
    let (record, res) = solve_record(&op, sigma, &setup.solver, setup.with_lambda_v)?;
    let grid = op.grid().expect("assembled operator has a grid");
    let w = grid.weight();
    let mut sampled: Vec<f64> = grid.nodes().map(|x| reference.interpolate(x)).collect();
    let norm = (w * sampled.iter().map(|v| v * v).sum::<f64>()).sqrt();
    sampled.iter_mut().for_each(|v| *v /= norm);
    let distance = (res.existence == Verdict::Eigenpair).then(|| {
        let sum: f64 = (0..grid.len())
            .filter(|&i| grid.boundary_distance(i) >= margin)
            .map(|i| (res.eigvec[i] - sampled[i]).powi(2))
            .sum();
        (w * sum).sqrt()
    });
    Ok(EigfnRecord { record, distance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneVerdict {
    Monotone,
    NotMonotone,
    /// Some box family did not stagnate.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonoEntry {
    pub sigma: f64,
    pub half_width: f64,
    pub stagnated: bool,
    pub record: SweepRecord,
}

impl MonoEntry {
    pub fn lambda_p(&self) -> f64 {
        self.record.lambda_p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonoReport {
    pub entries: Vec<MonoEntry>,
    pub verdict: MonotoneVerdict,
    /// Largest decrease `λ_p(σ_i) - λ_p(σ_{i+1})`.
    pub worst_drop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonoSetup {
    pub family: KernelFamily,
    pub radius: f64,
    pub coefficient: CoefficientSpec,
    pub center: Vec<f64>,
    pub spacing: f64,
    /// Box ladder tried for every `σ` until two successive levels agree.
    pub half_widths: Vec<f64>,
    pub solver: SolverOptions,
    pub mono_tol: f64,
}

/// `σ ↦ λ_p` for `m = 0` on exhaustion-converged boxes.
pub fn m0_monotonicity(setup: &MonoSetup, sigmas: &[f64]) -> Result<MonoReport> {
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let entries: Result<Vec<MonoEntry>> = sorted
        .par_iter()
        .map(|&sigma| {
            let k = KernelSpec::convolution(setup.family, setup.radius, sigma, 0.0);
            let ex = ExhaustionSetup {
                kernel: &k,
                coefficient: &setup.coefficient,
                variant: Variant::MPlusA,
                center: &setup.center,
                spacing: setup.spacing,
                solver: setup.solver,
                with_lambda_v: false,
                stagnation_tol: STAGNATION_TOL,
                stop_at_stagnation: true,
            };
            // skip boxes too small to hold one kernel diameter
            let ladder: Vec<f64> = setup
                .half_widths
                .iter()
                .copied()
                .filter(|&l| l >= sigma * setup.radius)
                .collect();
            let rep = domain_exhaustion(&ex, &ladder)?;
            let last = rep.last();
            Ok(MonoEntry {
                sigma,
                half_width: last.half_width,
                stagnated: rep.stagnation.is_some(),
                record: last.record.clone(),
            })
        })
        .collect();
    let entries = entries?;
    let worst_drop = entries
        .windows(2)
        .map(|w| w[0].lambda_p() - w[1].lambda_p())
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if entries.iter().any(|e| !e.stagnated) && entries.len() > 1 {
        MonotoneVerdict::Inconclusive
    } else if entries.len() < 2 || worst_drop <= setup.mono_tol {
        MonotoneVerdict::Monotone
    } else {
        MonotoneVerdict::NotMonotone
    };
    Ok(MonoReport {
        entries,
        verdict,
        worst_drop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthEstimate {
    /// Least-squares slope of `log‖u(t)‖₂` over the second half of `[0, T]`.
    pub rate: f64,
    /// `(e^{rate·dt} - 1) / dt`, removing the first-order Euler bias.
    pub euler_corrected: f64,
    pub steps: usize,
}

/// Explicit Euler for `u' = A u` with renormalization every step.
pub fn growth_rate(op: &DiscreteOperator, t_end: f64, dt: f64, u0: &[f64]) -> Result<GrowthEstimate> {
    let n = op.dim();
    if u0.len() != n {
        return Err(Error::Dimension { expected: n, got: u0.len() });
    }
    if let Some((index, &value)) = u0.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotPositive { index, value });
    }
    let norm_inf = op
        .matrix()
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let limit = if norm_inf > 0.0 { 0.25 / norm_inf } else { f64::INFINITY };
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::TimeStep { dt, limit });
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    if steps < 4 {
        return Err(Error::InvalidArgument("horizon shorter than four steps".into()));
    }
    let mut u = nalgebra::DVector::from_column_slice(u0);
    let mut log_norm = u.norm().ln();
    u /= u.norm();
    let first = steps / 2;
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..=steps {
        let du = op.apply(&u);
        u.axpy(dt, &du, 1.0);
        let nu = u.norm();
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::NonFinite("growth iterate".into()));
        }
        log_norm += nu.ln();
        u /= nu;
        if k >= first {
            let t = k as f64 * dt;
            sx += t;
            sy += log_norm;
            sxx += t * t;
            sxy += t * log_norm;
            cnt += 1.0;
        }
    }
    let rate = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    Ok(GrowthEstimate {
        rate,
        euler_corrected: ((rate * dt).exp() - 1.0) / dt,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::grid_kernel::{BoxDomain, Coefficient, Grid};
    use crate::experiments::ResolutionRule;
    use nalgebra::DMatrix;

    #[test]
    fn growth_on_two_by_two() {
        // eigenvalues 0.5 ± 0.3
        let op = DiscreteOperator::from_parts(
            DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0]),
            vec![0.5, 0.5],
        )
        .unwrap();
        let g = growth_rate(&op, 60.0, 1e-3, &[1.0, 0.2]).unwrap();
        assert!((g.euler_corrected - 0.8).abs() < 1e-4);
        assert!((g.rate - 0.8).abs() < 1e-3);
    }

    #[test]
    fn growth_dt_rule() {
        let op = DiscreteOperator::from_parts(DMatrix::from_element(2, 2, 1.0), vec![0.0; 2]).unwrap();
        assert!(matches!(growth_rate(&op, 1.0, 0.2, &[1.0, 1.0]), Err(Error::TimeStep { .. })));
        assert!(matches!(growth_rate(&op, 1.0, 0.01, &[1.0, 0.0]), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn growth_from_perron_vector() {
        let g = Grid::build(BoxDomain::interval(0.0, 1.0), &[40]).unwrap();
        let k = KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.3, 1.0);
        let a = Coefficient::on_grid(&CoefficientSpec::constant(0.2), &g).unwrap();
        let op = assemble(&g, &k, &a, Variant::MPlusA).unwrap();
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        let est = growth_rate(&op, 5.0, 1e-3, &res.eigvec).unwrap();
        assert!((est.euler_corrected + res.lambda_p).abs() < 1e-6);
    }

    #[test]
    fn scaling_identity_and_variant_check() {
        let g = Grid::build(BoxDomain::interval(-1.0, 1.0), &[40]).unwrap();
        let k = KernelSpec::convolution(KernelFamily::Triangle, 1.0, 0.4, 0.0);
        let a = Coefficient::on_grid(&CoefficientSpec::constant(0.1), &g).unwrap();
        let op = assemble(&g, &k, &a, Variant::LPlusA).unwrap();
        assert_eq!(scaling_invariance_suite(&op, &[1.0], &SolverOptions::default()).unwrap(), 0.0);
        assert!(scaling_invariance_suite(&op, &[2.0], &SolverOptions::default()).unwrap() <= 1e-11);
        let m = assemble(&g, &k, &a, Variant::MPlusA).unwrap();
        assert!(scaling_invariance_suite(&m, &[2.0], &SolverOptions::default()).is_err());
    }

    #[test]
    fn eigfn_margin_shrinks_distance() {
        let setup = SweepSetup {
            family: KernelFamily::Uniform,
            radius: 1.0,
            m: 2.0,
            domain: BoxDomain::interval(0.0, 1.0),
            coefficient: CoefficientSpec::constant(0.0),
            variant: Variant::MPlusA,
            resolution: ResolutionRule::PerSigma { nodes_per_sigma: 16.0 },
            solver: SolverOptions::default(),
            with_lambda_v: false,
        };
        let r = local_reference(&setup, 512, 1e-10).unwrap();
        let d0 = eigfn_convergence(&setup, &[0.2], 0.0, &r).unwrap().remove(0).1.unwrap();
        let d1 = eigfn_convergence(&setup, &[0.2], 0.1, &r).unwrap().remove(0).1.unwrap();
        assert!(d0.distance.unwrap() >= d1.distance.unwrap());
    }

    #[test]
    fn constant_coefficient_is_flat_in_sigma() {
        let setup = MonoSetup {
            family: KernelFamily::Uniform,
            radius: 1.0,
            coefficient: CoefficientSpec::constant(0.0),
            center: vec![0.0],
            spacing: 1.0 / 16.0,
            half_widths: vec![4.0, 8.0],
            solver: SolverOptions::default(),
            mono_tol: 1e-6,
        };
        let rep = m0_monotonicity(&setup, &[1.0]).unwrap();
        assert_eq!(rep.verdict, MonotoneVerdict::Monotone);
    }
}
