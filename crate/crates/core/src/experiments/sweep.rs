use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, DiscreteOperator, Variant};
use crate::error::{Error, Result};
use crate::grid_kernel::{BoxDomain, Coefficient, CoefficientSpec, Grid, KernelFamily, KernelSpec};
use crate::spectral::{
    bounds_iv, lambda_v_min, principal_eig, SolverOptions, SpectralResult, Verdict,
};

/// How the grid is chosen for each `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ResolutionRule {
    /// `h = σ r / nodes_per_sigma` (rounded down to fit the box).
    PerSigma { nodes_per_sigma: f64 },
    /// Fixed nodes per axis for every `σ`.
    Fixed { nodes: Vec<usize> },
}

impl ResolutionRule {
    pub fn counts(&self, domain: &BoxDomain, sigma: f64, radius: f64) -> Result<Vec<usize>> {
        match self {
            ResolutionRule::PerSigma { nodes_per_sigma } => {
                if !(nodes_per_sigma.is_finite() && *nodes_per_sigma > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "nodes_per_sigma must be positive, got {nodes_per_sigma}"
                    )));
                }
                let h = sigma * radius / nodes_per_sigma;
                Ok((0..domain.dim())
                    .map(|d| {
                        let cells = (domain.upper[d] - domain.lower[d]) / h;
                        // snap to the nearest integer when within roundoff so
                        // kernel edges stay on the lattice
                        let snapped = cells.round();
                        if (cells - snapped).abs() <= 1e-9 * cells {
                            snapped as usize
                        } else {
                            cells.ceil() as usize
                        }
                    })
                    .collect())
            }
            ResolutionRule::Fixed { nodes } => {
                if nodes.len() != domain.dim() {
                    return Err(Error::Dimension {
                        expected: domain.dim(),
                        got: nodes.len(),
                    });
                }
                Ok(nodes.clone())
            }
        }
    }
}

/// Everything in a `σ`-sweep except the `σ` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub family: KernelFamily,
    pub radius: f64,
    pub m: f64,
    pub domain: BoxDomain,
    pub coefficient: CoefficientSpec,
    pub variant: Variant,
    pub resolution: ResolutionRule,
    pub solver: SolverOptions,
    /// Also run the variational route (symmetric operators only).
    pub with_lambda_v: bool,
}

impl SweepSetup {
    pub fn kernel(&self, sigma: f64) -> KernelSpec {
        KernelSpec::convolution(self.family, self.radius, sigma, self.m)
    }

    pub fn operator(&self, sigma: f64) -> Result<DiscreteOperator> {
        let counts = self.resolution.counts(&self.domain, sigma, self.radius)?;
        let grid = Grid::build(self.domain.clone(), &counts)?;
        let a = Coefficient::on_grid(&self.coefficient, &grid)?;
        assemble(&grid, &self.kernel(sigma), &a, self.variant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sigma: f64,
    /// `NaN` for operators without an `m`.
    pub m: f64,
    pub lambda_p: f64,
    pub lambda_v: Option<f64>,
    pub cw_lower: f64,
    pub cw_upper: f64,
    pub iv_lo: f64,
    pub iv_hi: f64,
    pub n_nodes: usize,
    pub h: f64,
    pub existence: Verdict,
    pub converged: bool,
    pub wall_ms: f64,
}

/// Slack allowed in the record invariants.
const SANDWICH_SLACK: f64 = 1e-12;

/// Solve `op` and package a record; `sigma` is the label stored with it.
pub fn solve_record(
    op: &DiscreteOperator,
    sigma: f64,
    opts: &SolverOptions,
    with_lambda_v: bool,
) -> Result<(SweepRecord, SpectralResult)> {
    let start = Instant::now();
    let mut res = principal_eig(op, opts)?;
    if with_lambda_v && op.is_symmetric() {
        res.lambda_v = Some(lambda_v_min(op, opts)?.lambda_v);
    }
    let (iv_lo, iv_hi) = bounds_iv(op);
    let scale = 1.0 + res.lambda_p.abs();
    let slack = SANDWICH_SLACK * scale;
    if !(res.cw_lower <= res.lambda_p + slack && res.lambda_p <= res.cw_upper + slack) {
        return Err(Error::InvariantViolation(format!(
            "σ={sigma}: Collatz–Wielandt bracket [{}, {}] misses λ_p = {}",
            res.cw_lower, res.cw_upper, res.lambda_p
        )));
    }
    if !(iv_lo <= res.lambda_p + slack && res.lambda_p <= iv_hi + slack) {
        return Err(Error::InvariantViolation(format!(
            "σ={sigma}: envelope [{iv_lo}, {iv_hi}] misses λ_p = {}",
            res.lambda_p
        )));
    }
    let record = SweepRecord {
        sigma,
        m: op.m().unwrap_or(f64::NAN),
        lambda_p: res.lambda_p,
        lambda_v: res.lambda_v,
        cw_lower: res.cw_lower,
        cw_upper: res.cw_upper,
        iv_lo,
        iv_hi,
        n_nodes: op.dim(),
        h: op.spacing(),
        existence: res.existence,
        converged: res.converged,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((record, res))
}

/// One record per `σ`, sorted by `σ`; a failing `σ` does not abort the rest.
pub fn sigma_sweep(setup: &SweepSetup, sigmas: &[f64]) -> Vec<(f64, Result<SweepRecord>)> {
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .par_iter()
        .map(|&sigma| {
            let rec = setup.operator(sigma).and_then(|op| {
                solve_record(&op, sigma, &setup.solver, setup.with_lambda_v).map(|(r, _)| r)
            });
            (sigma, rec)
        })
        .collect()
}
