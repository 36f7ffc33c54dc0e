use nalgebra::{DMatrix, DVector};

use super::{bounds, effective_tol, SolverOptions, SpectralResult, POWER_PHASE};
use crate::assembly::DiscreteOperator;
use crate::error::{Error, Result};

/// Perron value of the shifted matrix together with its certificates.
struct PerronState {
    phi: DVector<f64>,
    rq: f64,
    lower: f64,
    upper: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<(f64, f64)>,
}

/// `λ_p = -ρ(A)` by power iteration on `B = A + cI`, `c = |shift| + ‖a‖_∞ + 1`.
///
/// `B` is entrywise nonnegative with a positive diagonal, so positive iterates
/// stay positive and the ratios `(Bφ)_i / φ_i` bracket `ρ(B)` at every step.
/// When the spectral gap is too small for the plain iteration, the solver
/// switches to shift-invert with the shift kept above the Collatz–Wielandt
/// upper bound, which keeps `(sI - B)^{-1}` nonnegative.
pub fn principal_eig(op: &DiscreteOperator, opts: &SolverOptions) -> Result<SpectralResult> {
    opts.validate()?;
    if op.matrix().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("operator matrix".into()));
    }
    let c = op.shift().abs()
        + op
            .coefficient_values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
        + 1.0;
    let n = op.dim();

    let (state, phi_full) = if op.is_connected() {
        let st = perron(op.matrix(), c, opts)?;
        let phi = st.phi.clone();
        (st, phi)
    } else {
        // λ_p over a disconnected set is the smallest per-component value,
        // i.e. the component with the largest Perron value dominates.
        let mut best: Option<(PerronState, &Vec<usize>)> = None;
        let mut iterations = 0;
        for comp in op.components() {
            let sub = op.restrict(comp);
            let st = perron(sub.matrix(), c, opts)?;
            iterations += st.iterations;
            if best.as_ref().is_none_or(|(b, _)| st.rq > b.rq) {
                best = Some((st, comp));
            }
        }
        let (mut st, comp) = best.expect("at least one component");
        st.iterations = iterations;
        let mut phi = DVector::zeros(n);
        for (k, &i) in comp.iter().enumerate() {
            phi[i] = st.phi[k];
        }
        (st, phi)
    };

    let lambda_p = -(state.rq - c);
    let unit = phi_full.normalize();
    let mut r = op.apply(&unit);
    r.axpy(lambda_p, &unit, 1.0);
    let residual = r.norm();

    let weights = op.weights();
    let wnorm = phi_full
        .iter()
        .zip(&weights)
        .map(|(p, w)| w * p * p)
        .sum::<f64>()
        .sqrt();
    let eigvec: Vec<f64> = phi_full.iter().map(|p| p / wnorm).collect();

    let mut res = SpectralResult {
        lambda_p,
        eigvec,
        residual,
        cw_lower: -(state.upper - c),
        cw_upper: -(state.lower - c),
        lambda_v: None,
        iterations: state.iterations,
        converged: state.converged,
        existence: super::Verdict::Eigenpair,
        concentration_index: 0.0,
        tol: opts.tol,
        components: op.components().len(),
        trace: state
            .trace
            .iter()
            .map(|&(lo, hi)| (-(hi - c), -(lo - c)))
            .collect(),
    };
    let report = bounds::existence_check(&res, op);
    res.existence = report.verdict;
    res.concentration_index = report.concentration_index;
    Ok(res)
}

fn perron(a: &DMatrix<f64>, c: f64, opts: &SolverOptions) -> Result<PerronState> {
    let n = a.nrows();
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += c;
    }
    let scale = c + b.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let tol = effective_tol(opts.tol, scale);
    let cap = opts.iteration_cap(n);

    let mut phi = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut st = PerronState {
        phi: phi.clone(),
        rq: f64::NAN,
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        iterations: 0,
        converged: false,
        trace: Vec::new(),
    };
    let mut prev_rq = f64::INFINITY;
    let mut factor: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
    let mut last_width = f64::INFINITY;

    while st.iterations < cap {
        st.iterations += 1;
        let y = &b * &phi;
        let (lower, upper) = ratio_range(&y, &phi)?;
        let rq = phi.dot(&y) / phi.dot(&phi);
        if opts.record_trace {
            st.trace.push((lower, upper));
        }
        st.phi.copy_from(&phi);
        st.rq = rq;
        st.lower = lower;
        st.upper = upper;
        let width = upper - lower;
        if (rq - prev_rq).abs() <= tol && width <= 10.0 * tol {
            st.converged = true;
            break;
        }
        prev_rq = rq;

        if st.iterations < POWER_PHASE || n == 1 {
            phi = &y / y.norm();
            continue;
        }

        // Shift-invert step. Refactor only when the previous step did not
        // shrink the bracket by at least a factor of ten.
        let refactor = match &factor {
            None => true,
            Some(_) => width > 0.1 * last_width,
        };
        if refactor {
            let s = upper + width.max(4.0 * f64::EPSILON * scale);
            let mut shifted = -b.clone();
            for i in 0..n {
                shifted[(i, i)] += s;
            }
            factor = Some((s, shifted.lu()));
        }
        last_width = width;
        let (_, lu) = factor.as_ref().expect("factorization present");
        let z = match lu.solve(&phi) {
            Some(z) => z,
            None => {
                // exactly singular: the shift hit ρ(B), φ is already converged
                st.converged = width <= 10.0 * tol;
                break;
            }
        };
        let mut z = z.map(f64::abs);
        let floor = z.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        if floor.is_finite() {
            z.iter_mut().filter(|v| **v == 0.0).for_each(|v| *v = floor * 1e-3);
        } else {
            break;
        }
        phi = &z / z.norm();
    }
    Ok(st)
}

/// `(min_i y_i/φ_i, max_i y_i/φ_i)`.
fn ratio_range(y: &DVector<f64>, phi: &DVector<f64>) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, (&yi, &pi)) in y.iter().zip(phi.iter()).enumerate() {
        if !(pi > 0.0) {
            return Err(Error::NotPositive { index: i, value: pi });
        }
        let r = yi / pi;
        if !r.is_finite() {
            return Err(Error::NonFinite("Collatz–Wielandt ratio".into()));
        }
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Collatz–Wielandt bracket `(min_i -(Aφ)_i/φ_i, max_i -(Aφ)_i/φ_i)`; for
/// every positive `φ` it contains `λ_p`.
pub fn cw_bounds(op: &DiscreteOperator, phi: &[f64]) -> Result<(f64, f64)> {
    if phi.len() != op.dim() {
        return Err(Error::Dimension {
            expected: op.dim(),
            got: phi.len(),
        });
    }
    if let Some((index, &value)) = phi.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotPositive { index, value });
    }
    // evaluate on A + cI so the ratios are sums of nonnegative terms
    let c = op.zero_order().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let phi = DVector::from_column_slice(phi);
    let mut y = op.apply(&phi);
    y.axpy(c, &phi, 1.0);
    let (lo, hi) = ratio_range(&y, &phi)?;
    Ok((-(hi - c), -(lo - c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Verdict;

    fn raw(p: DMatrix<f64>, z: Vec<f64>) -> DiscreteOperator {
        DiscreteOperator::from_parts(p, z).unwrap()
    }

    #[test]
    fn two_by_two() {
        let op = raw(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), vec![0.0; 2]);
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        assert!((res.lambda_p + 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((res.eigvec[0] - s).abs() < 1e-10 && (res.eigvec[1] - s).abs() < 1e-10);
        assert!(res.converged);
        assert!(res.residual < 1e-10);
    }

    #[test]
    fn diagonal_shift_covariance() {
        let p = DMatrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()));
        let base = principal_eig(&raw(p.clone(), vec![0.0; 5]), &SolverOptions::default()).unwrap();
        let shifted = principal_eig(&raw(p, vec![0.75; 5]), &SolverOptions::default()).unwrap();
        assert!((shifted.lambda_p - (base.lambda_p - 0.75)).abs() < 1e-10);
    }

    #[test]
    fn multiplication_operator() {
        let op = raw(DMatrix::zeros(3, 3), vec![5.0; 3]);
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        assert!((res.lambda_p + 5.0).abs() < 1e-14);
        assert_eq!(res.components, 3);
        let op = raw(DMatrix::zeros(3, 3), vec![1.0, 3.0, 2.0]);
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        assert!((res.lambda_p + 3.0).abs() < 1e-14);
        assert_eq!(res.existence, Verdict::BoundaryCase);
    }

    #[test]
    fn cw_on_perron_vector_is_tight() {
        let p = DMatrix::from_fn(6, 6, |i, j| ((i + j) % 3 + 1) as f64 / 10.0);
        let p = &p + p.transpose();
        let op = raw(p, vec![0.1, -0.2, 0.0, 0.3, 0.05, -0.1]);
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        let (lo, hi) = cw_bounds(&op, &res.eigvec).unwrap();
        assert!((lo - res.lambda_p).abs() < 1e-9 && (hi - res.lambda_p).abs() < 1e-9);
        assert!(lo <= res.lambda_p + 1e-12 && res.lambda_p <= hi + 1e-12);
    }

    #[test]
    fn cw_on_ones_uses_row_sums() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.1, 0.2, 0.0, 0.5, 0.1, 0.5, 0.0]);
        let op = raw(p.clone(), vec![0.0; 3]);
        let (lo, hi) = cw_bounds(&op, &[1.0; 3]).unwrap();
        let sums: Vec<f64> = p.row_iter().map(|r| r.sum()).collect();
        let max = sums.iter().copied().fold(f64::MIN, f64::max);
        let min = sums.iter().copied().fold(f64::MAX, f64::min);
        assert!((lo + max).abs() < 1e-15 && (hi + min).abs() < 1e-15);
        assert!(matches!(cw_bounds(&op, &[1.0, 0.0, 1.0]), Err(Error::NotPositive { index: 1, .. })));
    }

    #[test]
    fn rejects_bad_tolerance() {
        let op = raw(DMatrix::zeros(2, 2), vec![0.0; 2]);
        assert!(principal_eig(&op, &SolverOptions::with_tol(0.0)).is_err());
    }

    #[test]
    fn near_degenerate_gap_uses_shift_invert() {
        // rank-one coupling much weaker than the spread of the diagonal
        let n = 200;
        let p = DMatrix::from_element(n, n, 1e-4 / n as f64);
        let z: Vec<f64> = (0..n).map(|i| -((i as f64 - 100.3) / 100.0).powi(2)).collect();
        let op = raw(p.clone(), z.clone());
        let res = principal_eig(&op, &SolverOptions::default()).unwrap();
        assert!(res.converged, "iterations {}", res.iterations);
        let mut dense = p;
        for i in 0..n {
            dense[(i, i)] += z[i];
        }
        let top = nalgebra::SymmetricEigen::new(dense).eigenvalues.max();
        assert!((res.lambda_p + top).abs() < 1e-9);
    }
}
