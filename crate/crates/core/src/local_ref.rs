//! Finite-difference Dirichlet reference `λ_1(cΔ + a)`.
//!
//! Vertex-centred grid on the box: `n_d` interior nodes per axis with spacing
//! `H_d = L_d / (n_d + 1)`, boundary values zero.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_kernel::{BoxDomain, CoefficientSpec, Grid, KernelSpec};
use crate::spectral::DEFAULT_TOL;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalEigenResult {
    /// `inf_φ [c‖∇φ‖² - ∫aφ²] / ‖φ‖²` on the discrete space.
    pub lambda_1: f64,
    /// Unit weighted-ℓ², positive.
    pub phi_1: Vec<f64>,
    pub c: f64,
    pub domain: BoxDomain,
    /// Interior nodes per axis.
    pub counts: Vec<usize>,
    pub spacing: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl LocalEigenResult {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        let mut rest = i;
        let mut x = vec![0.0; self.dim()];
        for d in (0..self.dim()).rev() {
            let k = rest % self.counts[d];
            rest /= self.counts[d];
            x[d] = self.domain.lower[d] + (k as f64 + 1.0) * self.spacing[d];
        }
        x
    }

    /// Piecewise-(bi)linear interpolant of `φ_1`, zero on and outside the
    /// boundary.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let dim = self.dim();
        // per axis: lower vertex index in 0..=n+1 and weight of the upper one
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for d in 0..dim {
            let t = (x[d] - self.domain.lower[d]) / self.spacing[d];
            if !(t > 0.0 && t < (self.counts[d] + 1) as f64) {
                return 0.0;
            }
            let k = (t.floor() as usize).min(self.counts[d]);
            base[d] = k;
            frac[d] = t - k as f64;
        }
        let value = |idx: &[usize]| -> f64 {
            let mut flat = 0;
            for d in 0..dim {
                let k = idx[d];
                if k == 0 || k > self.counts[d] {
                    return 0.0;
                }
                flat = flat * self.counts[d] + (k - 1);
            }
            self.phi_1[flat]
        };
        let mut total = 0.0;
        for corner in 0..(1usize << dim) {
            let mut idx = [0usize; 2];
            let mut w = 1.0;
            for d in 0..dim {
                let up = (corner >> d) & 1 == 1;
                idx[d] = base[d] + up as usize;
                w *= if up { frac[d] } else { 1.0 - frac[d] };
            }
            if w != 0.0 {
                total += w * value(&idx[..dim]);
            }
        }
        total
    }
}

/// `D_2(J) / (2N)` for an even convolution kernel in dimension `dim`.
pub fn diffusivity(k: &KernelSpec, dim: usize) -> Result<f64> {
    k.validate()?;
    match k {
        KernelSpec::Convolution {
            family,
            radius,
            drift,
            ..
        } => {
            if *drift != 0.0 {
                return Err(Error::InvalidKernel(
                    "diffusivity needs an even kernel (drift must be 0)".into(),
                ));
            }
            if !(1..=2).contains(&dim) {
                return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
            }
            Ok(family.second_moment(dim, *radius) / (2.0 * dim as f64))
        }
        _ => Err(Error::InvalidKernel(
            "diffusivity is defined for convolution kernels".into(),
        )),
    }
}

/// Smallest eigenvalue of `-cΔ_h - diag(a)` with Dirichlet data on the box of
/// `grid`, using `grid.counts()` interior nodes per axis.
pub fn dirichlet_lambda1(
    grid: &Grid,
    c: f64,
    a: &CoefficientSpec,
    tol: f64,
) -> Result<LocalEigenResult> {
    dirichlet_lambda1_on(grid.domain(), grid.counts(), c, a, tol)
}

pub fn dirichlet_lambda1_on(
    domain: &BoxDomain,
    counts: &[usize],
    c: f64,
    a: &CoefficientSpec,
    tol: f64,
) -> Result<LocalEigenResult> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("diffusivity must be positive, got {c}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    a.validate()?;
    let dim = domain.dim();
    if !(1..=2).contains(&dim) || counts.len() != dim || counts.contains(&0) {
        return Err(Error::InvalidGrid("need a 1-D or 2-D box with nodes on every axis".into()));
    }
    let spacing: Vec<f64> = (0..dim)
        .map(|d| (domain.upper[d] - domain.lower[d]) / (counts[d] + 1) as f64)
        .collect();
    let n: usize = counts.iter().product();
    let stride_last = counts[dim - 1];
    let band = if dim == 1 { 1 } else { stride_last };
    let mut out = LocalEigenResult {
        lambda_1: 0.0,
        phi_1: Vec::new(),
        c,
        domain: domain.clone(),
        counts: counts.to_vec(),
        spacing: spacing.clone(),
        residual: 0.0,
        iterations: 0,
    };
    let pot: Vec<f64> = (0..n).map(|i| a.eval(&out.node(i))).collect();
    if pot.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coefficient on the finite-difference grid".into()));
    }
    let coupling: Vec<f64> = spacing.iter().map(|h| c / (h * h)).collect();
    let diag_base: f64 = coupling.iter().map(|k| 2.0 * k).sum();

    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let mut v = (diag_base - pot[i]) * x[i];
            if dim == 1 {
                if i > 0 {
                    v -= coupling[0] * x[i - 1];
                }
                if i + 1 < n {
                    v -= coupling[0] * x[i + 1];
                }
            } else {
                let col = i % stride_last;
                if col > 0 {
                    v -= coupling[1] * x[i - 1];
                }
                if col + 1 < stride_last {
                    v -= coupling[1] * x[i + 1];
                }
                if i >= stride_last {
                    v -= coupling[0] * x[i - stride_last];
                }
                if i + stride_last < n {
                    v -= coupling[0] * x[i + stride_last];
                }
            }
            y[i] = v;
        }
        y
    };

    // Gershgorin: every eigenvalue is >= -max a
    let amax = pot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = -amax - 1.0;
    let mut banded = Banded::zeros(n, band);
    for i in 0..n {
        banded.set(i, 0, diag_base - pot[i] - shift);
        if dim == 1 {
            if i + 1 < n {
                banded.set(i, 1, -coupling[0]);
            }
        } else {
            if (i % stride_last) + 1 < stride_last {
                banded.set(i, 1, -coupling[1]);
            }
            if i + stride_last < n {
                banded.set(i, stride_last, -coupling[0]);
            }
        }
    }
    banded.cholesky()?;

    let scale = 2.0 * diag_base + amax.abs() + 1.0;
    let floor = 1e3 * f64::EPSILON * scale;
    let stop = tol.max(floor);
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = f64::NAN;
    let mut residual = f64::INFINITY;
    let cap = 100_000;
    let mut it = 0;
    while it < cap {
        it += 1;
        let y = banded.solve(&x);
        x = &y / y.norm();
        let tx = apply(&x);
        lambda = x.dot(&tx);
        let mut r = tx;
        r.axpy(-lambda, &x, 1.0);
        residual = r.norm();
        if residual <= stop {
            break;
        }
    }
    if residual > stop {
        return Err(Error::NoConvergence("dirichlet_lambda1", it));
    }

    let sign = if x.sum() < 0.0 { -1.0 } else { 1.0 };
    let cell: f64 = spacing.iter().product();
    let wnorm = (cell * x.dot(&x)).sqrt();
    out.phi_1 = x.iter().map(|v| sign * v / wnorm).collect();
    out.lambda_1 = lambda;
    out.residual = residual;
    out.iterations = it;
    Ok(out)
}

/// Symmetric banded matrix, lower storage `l[i][k] = M[i][i+k]`, factorized
/// in place to `R^T R`.
struct Banded {
    n: usize,
    band: usize,
    data: Vec<f64>,
}

impl Banded {
    fn zeros(n: usize, band: usize) -> Self {
        Self {
            n,
            band,
            data: vec![0.0; n * (band + 1)],
        }
    }

    fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[i * (self.band + 1) + k] = v;
    }

    fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * (self.band + 1) + k]
    }

    /// Upper Cholesky `M = R^T R`, `R` stored in the same layout.
    fn cholesky(&mut self) -> Result<()> {
        let b = self.band;
        for i in 0..self.n {
            let mut d = self.get(i, 0);
            for k in i.saturating_sub(b)..i {
                let r = self.get(k, i - k);
                d -= r * r;
            }
            if !(d > 0.0) {
                return Err(Error::InvariantViolation(
                    "finite-difference matrix is not positive definite".into(),
                ));
            }
            let d = d.sqrt();
            self.set(i, 0, d);
            for j in (i + 1)..(i + b + 1).min(self.n) {
                let mut v = self.get(i, j - i);
                for k in j.saturating_sub(b)..i {
                    v -= self.get(k, i - k) * self.get(k, j - k);
                }
                self.set(i, j - i, v / d);
            }
        }
        Ok(())
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let b = self.band;
        let n = self.n;
        let mut y = rhs.clone();
        // R^T y = rhs
        for i in 0..n {
            let mut v = y[i];
            for k in i.saturating_sub(b)..i {
                v -= self.get(k, i - k) * y[k];
            }
            y[i] = v / self.get(i, 0);
        }
        // R x = y
        for i in (0..n).rev() {
            let mut v = y[i];
            for j in (i + 1)..(i + b + 1).min(n) {
                v -= self.get(i, j - i) * y[j];
            }
            y[i] = v / self.get(i, 0);
        }
        y
    }
}

/// Default tolerance for the reference solve.
pub const LOCAL_TOL: f64 = DEFAULT_TOL;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::KernelFamily;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::build(BoxDomain::interval(0.0, 1.0), &[n]).unwrap()
    }

    fn zero() -> CoefficientSpec {
        CoefficientSpec::constant(0.0)
    }

    #[test]
    fn interval_spectrum() {
        let r = dirichlet_lambda1(&unit(256), 1.0, &zero(), 1e-10).unwrap();
        assert!((r.lambda_1 / (PI * PI) - 1.0).abs() < 1e-3);
        let h = 1.0 / 257.0;
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((r.lambda_1 - exact).abs() < 1e-8);
        assert!(r.phi_1.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn linear_in_c_and_shift() {
        let base = dirichlet_lambda1(&unit(128), 1.0 / 6.0, &zero(), 1e-10).unwrap();
        assert!((base.lambda_1 / (PI * PI / 6.0) - 1.0).abs() < 1e-3);
        let k = CoefficientSpec::constant(0.8);
        let shifted = dirichlet_lambda1(&unit(128), 1.0 / 6.0, &k, 1e-10).unwrap();
        assert!((shifted.lambda_1 - (base.lambda_1 - 0.8)).abs() < 1e-9);
    }

    #[test]
    fn second_order_convergence() {
        let err = |n| dirichlet_lambda1(&unit(n), 1.0, &zero(), 1e-11).unwrap().lambda_1 - PI * PI;
        let (e1, e2, e3) = (err(31), err(63), err(127));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn square_matches_separable_value() {
        let g = Grid::build(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 2.0]), &[20, 41]).unwrap();
        let r = dirichlet_lambda1(&g, 0.5, &zero(), 1e-10).unwrap();
        let h = 1.0 / 21.0;
        let mode = |h: f64, l: f64| 4.0 / (h * h) * (PI * h / (2.0 * l)).sin().powi(2);
        let exact = 0.5 * (mode(h, 1.0) + mode(2.0 / 42.0, 2.0));
        assert!((r.lambda_1 - exact).abs() < 1e-8);
    }

    #[test]
    fn variational_lower_bound() {
        let a = CoefficientSpec::CosineBump {
            amplitude: 2.0,
            frequency: 1.0,
            center: vec![0.0],
            offset: 0.0,
            support: None,
        };
        let n = 100;
        let r = dirichlet_lambda1(&unit(n), 1.0 / 6.0, &a, 1e-10).unwrap();
        assert!(r.lambda_1 >= -2.0);
        // dense oracle on the same stencil
        let h = 1.0 / (n + 1) as f64;
        let k = 1.0 / 6.0 / (h * h);
        let t = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * k - a.eval(&[(i + 1) as f64 * h])
            } else if i.abs_diff(j) == 1 {
                -k
            } else {
                0.0
            }
        });
        let min = nalgebra::SymmetricEigen::new(t).eigenvalues.min();
        assert!((r.lambda_1 - min).abs() < 1e-8);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let r = dirichlet_lambda1(&unit(15), 1.0, &zero(), 1e-10).unwrap();
        for i in 0..15 {
            assert!((r.interpolate(&r.node(i)) - r.phi_1[i]).abs() < 1e-14);
        }
        assert_eq!(r.interpolate(&[0.0]), 0.0);
        assert_eq!(r.interpolate(&[1.2]), 0.0);
    }

    #[test]
    fn diffusivities() {
        let k = |f| KernelSpec::convolution(f, 1.0, 0.3, 2.0);
        assert!((diffusivity(&k(KernelFamily::Uniform), 1).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((diffusivity(&k(KernelFamily::Triangle), 1).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((diffusivity(&k(KernelFamily::Uniform), 2).unwrap() - 1.0 / 8.0).abs() < 1e-15);
        let drifting = KernelSpec::Convolution {
            family: KernelFamily::Uniform,
            radius: 1.0,
            sigma: 1.0,
            m: 0.0,
            drift: 0.5,
        };
        assert!(diffusivity(&drifting, 1).is_err());
    }

    #[test]
    fn nonlocal_form_below_local_energy() {
        // ½ΣΣ w² J_σ (φ_i-φ_j)² / σ² <= (D_2/2) ‖∇_h φ‖² + O(h) for sine modes
        for sigma in [0.2, 0.1, 0.05] {
            let n = (16.0 / sigma) as usize;
            let g = unit(n);
            let h = g.h();
            let k = KernelSpec::convolution(KernelFamily::Uniform, 1.0, sigma, 2.0);
            for mode in 1..=3 {
                let phi: Vec<f64> = g.nodes().map(|x| (mode as f64 * PI * x[0]).sin()).collect();
                let mut form = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let d = phi[i] - phi[j];
                        form += h * h * k.eval(g.node(i), g.node(j)) * d * d;
                    }
                }
                form *= 0.5 / (sigma * sigma);
                let mut grad = 0.0;
                let ext = |i: isize| if i < 0 || i >= n as isize { 0.0 } else { phi[i as usize] };
                for i in -1..n as isize {
                    let d = ext(i + 1) - ext(i);
                    grad += d * d / h;
                }
                let local = 0.5 / 3.0 * grad;
                assert!(form <= local + 10.0 * h, "σ={sigma} mode={mode}: {form} vs {local}");
            }
        }
    }
}
