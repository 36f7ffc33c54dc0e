use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::studies::{growth_rate, scaling_invariance_suite};
use crate::assembly::{assemble, DiscreteOperator, Variant};
use crate::error::Result;
use crate::grid_kernel::{BoxDomain, Coefficient, CoefficientSpec, Grid, KernelFamily, KernelSpec};
use crate::spectral::{bounds_iv, exp_test_lower_bound, lambda_v_min, principal_eig, SolverOptions};

/// Random symmetric instance on an interval: kernel family, range, `m`,
/// coefficient family and node count are all drawn from `rng`.
pub fn random_symmetric_instance(rng: &mut impl Rng, max_n: usize) -> Result<DiscreteOperator> {
    let family = KernelFamily::ALL[rng.random_range(0..KernelFamily::ALL.len())];
    let n = rng.random_range(16..=max_n.max(16));
    let len = rng.random_range(0.5..3.0);
    let h = len / n as f64;
    let sigma = rng.random_range((8.0 * h)..(8.0 * h + len));
    let m = rng.random_range(0.0..=2.0);
    let coefficient = random_coefficient(rng, len);
    let grid = Grid::build(BoxDomain::interval(0.0, len), &[n])?;
    let k = KernelSpec::convolution(family, 1.0, sigma, m);
    let a = Coefficient::on_grid(&coefficient, &grid)?;
    let variant = if rng.random_bool(0.5) { Variant::MPlusA } else { Variant::LPlusA };
    assemble(&grid, &k, &a, variant)
}

pub fn random_coefficient(rng: &mut impl Rng, len: f64) -> CoefficientSpec {
    let center = vec![rng.random_range(0.0..len)];
    match rng.random_range(0..4) {
        0 => CoefficientSpec::constant(rng.random_range(-1.0..1.0)),
        1 => CoefficientSpec::CosineBump {
            amplitude: rng.random_range(-1.0..1.0),
            frequency: rng.random_range(0.1..2.0),
            center,
            offset: rng.random_range(-0.5..0.5),
            support: None,
        },
        2 => CoefficientSpec::GaussianBump {
            amplitude: rng.random_range(-1.0..1.0),
            width: rng.random_range(0.05..1.0),
            center,
            offset: 0.0,
        },
        _ => CoefficientSpec::PowerCusp {
            nu: rng.random_range(-0.5..0.5),
            center,
            beta: rng.random_range(0.5..2.5),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub threshold: f64,
}

impl CheckOutcome {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            passed: value <= threshold,
            value,
            threshold,
        }
    }
}

/// Lightweight randomized property suite behind the `check_all` experiment.
pub fn property_suite(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions::default();
    let traced = opts.traced();
    let mut sandwich: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    let mut equivalence: f64 = 0.0;
    let mut envelope: f64 = 0.0;
    let mut monotone: f64 = 0.0;
    let mut lipschitz: f64 = 0.0;
    for _ in 0..instances {
        let op = random_symmetric_instance(&mut rng, 120)?;
        let res = principal_eig(&op, &traced)?;
        for &(lo, hi) in &res.trace {
            sandwich = sandwich.max(lo - res.lambda_p).max(res.lambda_p - hi);
        }
        let top = nalgebra::SymmetricEigen::new(op.matrix().clone()).eigenvalues.max();
        oracle = oracle.max((res.lambda_p + top).abs());
        equivalence = equivalence.max((lambda_v_min(&op, &opts)?.lambda_v - res.lambda_p).abs());
        let (lo, hi) = bounds_iv(&op);
        envelope = envelope.max(lo - res.lambda_p).max(res.lambda_p - hi);

        // a <= b pointwise ⟹ λ_p(a) >= λ_p(b)
        let base = op.coefficient_values().to_vec();
        let bump: Vec<f64> = base.iter().map(|_| rng.random_range(0.0..0.5)).collect();
        let raised: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let holder = op.holder();
        let op_b = op.with_coefficient(&Coefficient::from_values(raised, holder)?)?;
        let lb = principal_eig(&op_b, &opts)?.lambda_p;
        monotone = monotone.max(lb - res.lambda_p);
        let sup = bump.iter().copied().fold(0.0, f64::max);
        lipschitz = lipschitz.max((lb - res.lambda_p).abs() - sup);
    }
    let mut out = vec![
        CheckOutcome::at_most("cw_sandwich", sandwich, 1e-12),
        CheckOutcome::at_most("dense_oracle", oracle, 1e-9),
        CheckOutcome::at_most("lambda_p_equals_lambda_v", equivalence, 1e-7),
        CheckOutcome::at_most("bounds_iv", envelope, 1e-12),
        CheckOutcome::at_most("monotone_in_a", monotone, 1e-12),
        CheckOutcome::at_most("lipschitz_in_a", lipschitz, 1e-12),
    ];

    let mut scaling: f64 = 0.0;
    for dim in [1usize, 2] {
        let n = if dim == 1 { 48 } else { 28 };
        let domain = BoxDomain::new(vec![-1.0; dim], vec![1.0; dim]);
        let grid = Grid::build(domain, &vec![n; dim])?;
        let k = KernelSpec::convolution(KernelFamily::Epanechnikov, 1.0, 0.6, 0.0);
        let spec = CoefficientSpec::GaussianBump {
            amplitude: 0.5,
            width: 0.4,
            center: vec![0.1],
            offset: 0.0,
        };
        let a = Coefficient::on_grid(&spec, &grid)?;
        let op = assemble(&grid, &k, &a, Variant::LPlusA)?;
        scaling = scaling.max(scaling_invariance_suite(&op, &[0.5, 2.0, 10.0], &opts)?);
    }
    out.push(CheckOutcome::at_most("scaling_invariance", scaling, 1e-11));

    let toy = DiscreteOperator::from_parts(DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0]), vec![0.5, 0.5])?;
    let g = growth_rate(&toy, 60.0, 1e-3, &[1.0, 0.2])?;
    out.push(CheckOutcome::at_most("growth_rate_2x2", (g.euler_corrected - 0.8).abs(), 1e-4));

    let drift = KernelSpec::Convolution {
        family: KernelFamily::Uniform,
        radius: 1.0,
        sigma: 1.0,
        m: 0.0,
        drift: 0.5,
    };
    let b = exp_test_lower_bound(&drift, (0.0, 10.0), 32)?;
    out.push(CheckOutcome::at_most("drift_bound_margin", -(b.bound + 1.0), -0.05));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_a_small_seed() {
        let out = property_suite(3, 4).unwrap();
        for c in &out {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn instances_are_reproducible() {
        let a = random_symmetric_instance(&mut ChaCha8Rng::seed_from_u64(9), 64).unwrap();
        let b = random_symmetric_instance(&mut ChaCha8Rng::seed_from_u64(9), 64).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(a.is_symmetric());
    }
}
