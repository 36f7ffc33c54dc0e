use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{effective_tol, SolverOptions, POWER_PHASE};
use crate::assembly::DiscreteOperator;
use crate::error::{Error, Result};

/// Minimizer of the symmetric quadratic-form quotient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalResult {
    pub lambda_v: f64,
    /// Unit weighted-ℓ² minimizer, largest entry positive.
    pub phi: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `[½ ΣΣ w_i w_j K_ij (φ_i - φ_j)² - Σ w_i (a_i + shift + p_i) φ_i²] / Σ w_i φ_i²`.
pub fn lambda_v_quadratic(op: &DiscreteOperator, phi: &[f64]) -> Result<f64> {
    if !op.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = op.dim();
    if phi.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: phi.len(),
        });
    }
    let w = op.weights();
    let denom: f64 = phi.iter().zip(&w).map(|(p, wi)| wi * p * p).sum();
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument("test function must be nonzero".into()));
    }
    let a = op.matrix();
    let mut dirichlet = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i != j {
                let d = phi[i] - phi[j];
                // a[(i, j)] is the integral entry s w_j K_ij
                row += a[(i, j)] * d * d;
            }
        }
        dirichlet += w[i] * row;
    }
    let potential: f64 = (0..n)
        .map(|i| w[i] * (op.zero_order()[i] + op.masses()[i]) * phi[i] * phi[i])
        .sum();
    Ok((0.5 * dirichlet - potential) / denom)
}

/// `λ_v` as minus the top eigenvalue of `S = W^{1/2} A W^{-1/2}`.
///
/// Shifted power iteration on `S + cI` with a Rayleigh-quotient/residual stop;
/// slow cases finish by Cholesky-based shift-invert with the shift held above
/// `λ_max(S)` (a failed factorization means the shift was too low).
pub fn lambda_v_min(op: &DiscreteOperator, opts: &SolverOptions) -> Result<VariationalResult> {
    opts.validate()?;
    if !op.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = op.dim();
    let w = op.weights();
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let a = op.matrix();
    let s = DMatrix::from_fn(n, n, |i, j| {
        let v = a[(i, j)] * sqrt_w[i] / sqrt_w[j];
        if i <= j {
            v
        } else {
            // exact symmetry for the eigen-iteration
            a[(j, i)] * sqrt_w[j] / sqrt_w[i]
        }
    });
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetrized matrix".into()));
    }
    let gersh = s.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
    let c = gersh + 1.0;
    let tol = effective_tol(opts.tol, gersh + c);
    let cap = opts.iteration_cap(n);

    // deterministic non-uniform start so symmetric ties do not hide the top mode
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i as f64 + 1.0) * 0.618_033_988_7).fract());
    x /= x.norm();
    let mut rq_prev = f64::INFINITY;
    let mut rq = 0.0;
    let mut res_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut chol: Option<(f64, nalgebra::Cholesky<f64, nalgebra::Dyn>)> = None;

    while iterations < cap {
        iterations += 1;
        let sx = &s * &x;
        rq = x.dot(&sx);
        let mut r = sx.clone();
        r.axpy(-rq, &x, 1.0);
        res_norm = r.norm();
        if (rq - rq_prev).abs() <= tol && res_norm <= 10.0 * tol {
            converged = true;
            break;
        }
        rq_prev = rq;
        if iterations < POWER_PHASE {
            let mut y = sx;
            y.axpy(c, &x, 1.0);
            x = &y / y.norm();
            continue;
        }
        let target = rq + res_norm;
        let stale = match &chol {
            None => true,
            Some((shift, _)) => shift - rq > 10.0 * res_norm.max(tol),
        };
        if stale {
            let mut margin = res_norm.max(4.0 * f64::EPSILON * (gersh + 1.0));
            let mut attempt = 0;
            chol = loop {
                let shift = target + margin;
                let mut m = -s.clone();
                for i in 0..n {
                    m[(i, i)] += shift;
                }
                if let Some(f) = m.cholesky() {
                    break Some((shift, f));
                }
                attempt += 1;
                margin *= 4.0;
                if attempt > 60 {
                    break None;
                }
            };
        }
        let Some((_, f)) = &chol else { break };
        let y = f.solve(&x);
        x = &y / y.norm();
    }

    let mut phi: Vec<f64> = x.iter().zip(&sqrt_w).map(|(xi, sw)| xi / sw).collect();
    let wnorm: f64 = phi.iter().zip(&w).map(|(p, wi)| wi * p * p).sum::<f64>().sqrt();
    let sign = phi
        .iter()
        .copied()
        .max_by(|p, q| p.abs().total_cmp(&q.abs()))
        .map_or(1.0, f64::signum);
    phi.iter_mut().for_each(|p| *p *= sign / wnorm);

    Ok(VariationalResult {
        lambda_v: -rq,
        phi,
        residual: res_norm,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::principal_eig;

    fn random_symmetric(n: usize, seed: u64) -> DiscreteOperator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random::<f64>() / n as f64;
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
        }
        let z = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        DiscreteOperator::from_parts(p, z).unwrap()
    }

    #[test]
    fn quotient_at_perron_vector_is_lambda_p() {
        let op = random_symmetric(30, 7);
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        let q = lambda_v_quadratic(&op, &res.eigvec).unwrap();
        assert!((q - res.lambda_p).abs() < 1e-10);
    }

    #[test]
    fn quotient_dominates_lambda_p() {
        let op = random_symmetric(25, 3);
        let lp = principal_eig(&op, &SolverOptions::default()).unwrap().lambda_p;
        for k in 0..10 {
            let phi: Vec<f64> = (0..25).map(|i| ((i * (k + 2)) as f64).sin() + 0.1).collect();
            assert!(lambda_v_quadratic(&op, &phi).unwrap() >= lp - 1e-10);
        }
    }

    #[test]
    fn quotient_matches_weighted_inner_product() {
        let op = random_symmetric(12, 11);
        let phi: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let v = DVector::from_column_slice(&phi);
        let expected = -op.apply(&v).dot(&v) / v.dot(&v);
        assert!((lambda_v_quadratic(&op, &phi).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn zero_operator() {
        let op = DiscreteOperator::from_parts(DMatrix::zeros(4, 4), vec![0.0; 4]).unwrap();
        let r = lambda_v_min(&op, &SolverOptions::default()).unwrap();
        assert_eq!(r.lambda_v, 0.0);
        assert_eq!(lambda_v_quadratic(&op, &[1.0, -2.0, 0.5, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn matches_dense_oracle() {
        let op = random_symmetric(40, 21);
        let r = lambda_v_min(&op, &SolverOptions::default()).unwrap();
        let top = nalgebra::SymmetricEigen::new(op.matrix().clone()).eigenvalues.max();
        assert!((r.lambda_v + top).abs() < 1e-9);
        assert!(r.converged);
    }

    #[test]
    fn rejects_nonsymmetric() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        let op = DiscreteOperator::from_parts(p, vec![0.0; 2]).unwrap();
        assert!(matches!(lambda_v_min(&op, &SolverOptions::default()), Err(Error::NotSymmetric)));
        assert!(matches!(lambda_v_quadratic(&op, &[1.0, 1.0]), Err(Error::NotSymmetric)));
    }
}
