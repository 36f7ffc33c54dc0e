use serde::Serialize;

use super::{SpectralResult, Verdict};
use crate::assembly::{effective_sup, DiscreteOperator};

/// `(lo, hi) = (-max_i(a_i + shift + p_i), -max_i(a_i + shift))`, with `p_i`
/// the row masses of the integral part. `lo <= λ_p <= hi` always.
pub fn bounds_iv(op: &DiscreteOperator) -> (f64, f64) {
    let z = op.zero_order();
    let p = op.masses();
    let lo = z
        .iter()
        .zip(p)
        .map(|(zi, pi)| zi + pi)
        .fold(f64::NEG_INFINITY, f64::max);
    (-lo, -effective_sup(op))
}

/// `(Σφ²)² / (n Σφ⁴)`: near 1 for spread vectors, `1/n` for a spike.
pub fn concentration_index(phi: &[f64]) -> f64 {
    let s2: f64 = phi.iter().map(|p| p * p).sum();
    let s4: f64 = phi.iter().map(|p| p.powi(4)).sum();
    if s4 == 0.0 {
        return 0.0;
    }
    s2 * s2 / (phi.len() as f64 * s4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceReport {
    pub verdict: Verdict,
    /// `-sup(a + shift) - λ_p`, nonnegative up to roundoff.
    pub gap: f64,
    pub gap_tol: f64,
    pub concentration_index: f64,
}

/// Eigenpair iff `λ_p < -sup(a + shift) - gap_tol`, with
/// `gap_tol = 10 h^α + 100 tol` (`α` the Hölder exponent of `a`).
pub fn existence_check(res: &SpectralResult, op: &DiscreteOperator) -> ExistenceReport {
    let h = op.spacing();
    let gap_tol = 10.0 * h.powf(op.holder()) + 100.0 * res.tol;
    let gap = -effective_sup(op) - res.lambda_p;
    ExistenceReport {
        verdict: if gap > gap_tol {
            Verdict::Eigenpair
        } else {
            Verdict::BoundaryCase
        },
        gap,
        gap_tol,
        concentration_index: concentration_index(&res.eigvec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{principal_eig, SolverOptions};
    use nalgebra::DMatrix;

    #[test]
    fn envelope_contains_lambda_p() {
        let p = DMatrix::from_fn(8, 8, |i, j| if i == j { 0.0 } else { 0.1 / (1 + i + j) as f64 });
        let z: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let op = DiscreteOperator::from_parts(p, z).unwrap();
        let (lo, hi) = bounds_iv(&op);
        let lp = principal_eig(&op, &SolverOptions::default()).unwrap().lambda_p;
        assert!(lo <= lp && lp <= hi);
    }

    #[test]
    fn concentration_extremes() {
        assert!((concentration_index(&[1.0; 10]) - 1.0).abs() < 1e-15);
        let mut spike = vec![0.0; 10];
        spike[3] = 2.0;
        assert!((concentration_index(&spike) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn strong_coupling_is_eigenpair() {
        let p = DMatrix::from_element(4, 4, 0.5);
        let op = DiscreteOperator::from_parts(p, vec![0.0; 4]).unwrap();
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        assert_eq!(res.existence, Verdict::Eigenpair);
        let rep = existence_check(&res, &op);
        assert!((rep.gap - 2.0).abs() < 1e-10);
    }
}
