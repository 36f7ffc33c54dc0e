use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_kernel::KernelSpec;

/// Lower bound on `λ_p` over the whole line for a drifting kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftBound {
    /// `-min_λ m̂(λ)`.
    pub bound: f64,
    pub argmin: f64,
    /// True when the minimum sits at an end of the search interval.
    pub at_boundary: bool,
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn support(k: &KernelSpec) -> Result<(f64, f64, f64)> {
    match k {
        KernelSpec::Convolution {
            radius,
            sigma,
            drift,
            ..
        } => Ok((sigma * (drift - radius), sigma * drift, sigma * (drift + radius))),
        _ => Err(Error::InvalidKernel(
            "drift bound needs a convolution kernel".into(),
        )),
    }
}

/// `m̂(λ) = ∫ K(z, 0) e^{-λ z} dz` in one dimension, by composite 5-point
/// Gauss–Legendre with `panels` panels split at the kernel centre.
pub fn moment_generating(k: &KernelSpec, lambda: f64, panels: usize) -> Result<f64> {
    let (lo, mid, hi) = support(k)?;
    let half = (panels / 2).max(1);
    let mut total = 0.0;
    for (a, b) in [(lo, mid), (mid, hi)] {
        let step = (b - a) / half as f64;
        for p in 0..half {
            let c = a + (p as f64 + 0.5) * step;
            for (t, w) in GL5 {
                let z = c + 0.5 * step * t;
                total += 0.5 * step * w * k.eval(&[z], &[0.0]) * (-lambda * z).exp();
            }
        }
    }
    Ok(total)
}

/// Golden-section minimization of the convex `m̂` over `lambda_range`.
pub fn exp_test_lower_bound(
    k: &KernelSpec,
    lambda_range: (f64, f64),
    samples: usize,
) -> Result<DriftBound> {
    k.validate()?;
    let (a0, b0) = lambda_range;
    if !(a0.is_finite() && b0.is_finite() && a0 < b0) {
        return Err(Error::InvalidArgument(format!(
            "bad λ range [{a0}, {b0}]"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 quadrature panels".into()));
    }
    let f = |l: f64| moment_generating(k, l, samples);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a0, b0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-10 * (1.0 + b0.abs().max(a0.abs())) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    let mut argmin = 0.5 * (a + b);
    let mut best = f(argmin)?;
    for end in [a0, b0] {
        let v = f(end)?;
        if v < best {
            best = v;
            argmin = end;
        }
    }
    let edge = 1e-6 * (b0 - a0);
    Ok(DriftBound {
        bound: -best,
        argmin,
        at_boundary: (argmin - a0).abs() <= edge || (b0 - argmin).abs() <= edge,
    })
}
