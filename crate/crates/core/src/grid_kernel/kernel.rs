use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::coefficient::CoefficientSpec;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Arguments this close (relative) to the support edge count as on the edge.
const EDGE_SNAP: f64 = 1e-9;

/// Compactly supported, radially symmetric, unit-mass profiles on `|z| <= r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Uniform,
    Triangle,
    Epanechnikov,
    Quartic,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Uniform,
        KernelFamily::Triangle,
        KernelFamily::Epanechnikov,
        KernelFamily::Quartic,
    ];

    /// Unnormalized radial profile as a function of `u = |z| / r`.
    ///
    /// The uniform profile jumps at `u = 1`; on the edge itself it takes the
    /// mean of the one-sided limits so that midpoint sums over grids aligned
    /// with the support reproduce unit mass exactly.
    pub fn profile(self, u: f64) -> f64 {
        let u = u.abs();
        if (u - 1.0).abs() <= EDGE_SNAP {
            return match self {
                KernelFamily::Uniform => 0.5,
                _ => 0.0,
            };
        }
        if u > 1.0 {
            return 0.0;
        }
        match self {
            KernelFamily::Uniform => 1.0,
            KernelFamily::Triangle => 1.0 - u,
            KernelFamily::Epanechnikov => 1.0 - u * u,
            KernelFamily::Quartic => (1.0 - u * u).powi(2),
        }
    }

    /// Constant making `norm * profile(|z|/r)` a probability density on ℝ^N.
    pub fn normalization(self, dim: usize, radius: f64) -> f64 {
        match dim {
            1 => {
                let c = match self {
                    KernelFamily::Uniform => 0.5,
                    KernelFamily::Triangle => 1.0,
                    KernelFamily::Epanechnikov => 0.75,
                    KernelFamily::Quartic => 15.0 / 16.0,
                };
                c / radius
            }
            _ => {
                let c = match self {
                    KernelFamily::Uniform => 1.0,
                    KernelFamily::Triangle => 3.0,
                    KernelFamily::Epanechnikov => 2.0,
                    KernelFamily::Quartic => 3.0,
                };
                c / (PI * radius * radius)
            }
        }
    }

    /// `D_2(J) = ∫ J(z) |z|^2 dz`.
    pub fn second_moment(self, dim: usize, radius: f64) -> f64 {
        let r2 = radius * radius;
        match dim {
            1 => match self {
                KernelFamily::Uniform => r2 / 3.0,
                KernelFamily::Triangle => r2 / 6.0,
                KernelFamily::Epanechnikov => r2 / 5.0,
                KernelFamily::Quartic => r2 / 7.0,
            },
            _ => match self {
                KernelFamily::Uniform => r2 / 2.0,
                KernelFamily::Triangle => 0.3 * r2,
                KernelFamily::Epanechnikov => r2 / 3.0,
                KernelFamily::Quartic => r2 / 4.0,
            },
        }
    }

    /// `J(z)` for the unscaled density of support radius `radius`.
    pub fn density(self, radius: f64, z: &[f64]) -> f64 {
        let norm2: f64 = z.iter().map(|v| v * v).sum();
        self.normalization(z.len(), radius) * self.profile(norm2.sqrt() / radius)
    }
}

/// Dispersal kernel `K(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `K(x, y) = σ^{-N} J((x - y)/σ - d e_1)`; `d` is nonzero only for the
    /// drift bound.
    Convolution {
        family: KernelFamily,
        radius: f64,
        sigma: f64,
        m: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        drift: f64,
    },
    /// `K(x, y) = J((x - y) / (g(y) h(x)))`.
    General {
        family: KernelFamily,
        radius: f64,
        g: CoefficientSpec,
        h: CoefficientSpec,
    },
    /// `K(x, y) = C (1 + |x - y|)^{-α}` for `|x - y| <= truncation`.
    SlowDecay1d {
        amplitude: f64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<f64>,
    },
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Constants with `C_0 1_{B_{r_0}} >= K >= c_0 1_{B_{r_1}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nondegeneracy {
    pub c0: f64,
    pub big_c0: f64,
    pub r0: f64,
    pub r1: f64,
}

impl KernelSpec {
    pub fn convolution(family: KernelFamily, radius: f64, sigma: f64, m: f64) -> Self {
        KernelSpec::Convolution {
            family,
            radius,
            sigma,
            m,
            drift: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidKernel(msg));
        match self {
            KernelSpec::Convolution {
                radius,
                sigma,
                m,
                drift,
                ..
            } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return bad(format!("sigma must be positive, got {sigma}"));
                }
                if !(0.0..=2.0).contains(m) {
                    return bad(format!("m must lie in [0,2], got {m}"));
                }
                if !drift.is_finite() {
                    return bad("drift must be finite".into());
                }
                Ok(())
            }
            KernelSpec::General { radius, g, h, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                g.validate()?;
                h.validate()?;
                Ok(())
            }
            KernelSpec::SlowDecay1d {
                amplitude,
                alpha,
                truncation,
            } => {
                if !(amplitude.is_finite() && *amplitude > 0.0) {
                    return bad(format!("amplitude must be positive, got {amplitude}"));
                }
                if !(alpha.is_finite() && *alpha > 1.5) {
                    return bad(format!("alpha must exceed 3/2, got {alpha}"));
                }
                match truncation {
                    Some(r) if !(r.is_finite() && *r > 0.0) => {
                        bad(format!("truncation radius must be positive, got {r}"))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    /// `K(x, y) >= 0`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Convolution {
                family,
                radius,
                sigma,
                drift,
                ..
            } => {
                let dim = x.len();
                let mut z = [0.0; 2];
                for d in 0..dim {
                    z[d] = (x[d] - y[d]) / sigma;
                }
                z[0] -= drift;
                family.density(*radius, &z[..dim]) / sigma.powi(dim as i32)
            }
            KernelSpec::General {
                family,
                radius,
                g,
                h,
            } => {
                let scale = g.eval(y) * h.eval(x);
                let dim = x.len();
                let mut z = [0.0; 2];
                for d in 0..dim {
                    z[d] = (x[d] - y[d]) / scale;
                }
                family.density(*radius, &z[..dim])
            }
            KernelSpec::SlowDecay1d {
                amplitude,
                alpha,
                truncation,
            } => {
                let dist = (x[0] - y[0]).abs();
                match truncation {
                    Some(r) if dist > *r => 0.0,
                    _ => amplitude * (1.0 + dist).powf(-alpha),
                }
            }
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            KernelSpec::Convolution { sigma, .. } => Some(*sigma),
            _ => None,
        }
    }

    pub fn m(&self) -> Option<f64> {
        match self {
            KernelSpec::Convolution { m, .. } => Some(*m),
            _ => None,
        }
    }

    /// Same kernel at a different scale `σ`.
    pub fn with_sigma(&self, new_sigma: f64) -> Self {
        let mut k = self.clone();
        if let KernelSpec::Convolution { sigma, .. } = &mut k {
            *sigma = new_sigma;
        }
        k
    }

    pub fn with_m(&self, new_m: f64) -> Self {
        let mut k = self.clone();
        if let KernelSpec::Convolution { m, .. } = &mut k {
            *m = new_m;
        }
        k
    }

    /// Exact symmetry `K(x, y) = K(y, x)` holds by construction.
    pub fn is_symmetric(&self) -> bool {
        match self {
            KernelSpec::Convolution { drift, .. } => *drift == 0.0,
            KernelSpec::General { .. } => false,
            KernelSpec::SlowDecay1d { .. } => true,
        }
    }

    /// Length scale the grid spacing must resolve (`h <= scale / 8`).
    pub fn resolution_scale(&self, grid: &Grid) -> f64 {
        match self {
            KernelSpec::Convolution { radius, sigma, .. } => sigma * radius,
            KernelSpec::General { radius, g, h, .. } => {
                let (gmin, _) = extent(g, grid);
                let (hmin, _) = extent(h, grid);
                radius * gmin * hmin
            }
            // The profile varies on a unit length scale.
            KernelSpec::SlowDecay1d { truncation, .. } => truncation.map_or(1.0, |r| r.min(1.0)),
        }
    }

    pub fn check_resolution(&self, grid: &Grid) -> Result<()> {
        let scale = self.resolution_scale(grid);
        let limit = scale / 8.0;
        let spacing = grid.h();
        if spacing > limit * (1.0 + 1e-12) {
            return Err(Error::Resolution {
                spacing,
                scale,
                limit,
            });
        }
        Ok(())
    }

    /// Witness constants for the nondegeneracy hypothesis. For the general
    /// variant the modulation bounds are taken over the grid nodes.
    pub fn nondegeneracy(&self, grid: &Grid) -> Nondegeneracy {
        let dim = grid.dim();
        match self {
            KernelSpec::Convolution {
                family,
                radius,
                sigma,
                drift,
                ..
            } => {
                let norm = family.normalization(dim, *radius) / sigma.powi(dim as i32);
                let r1_unscaled = ((radius - drift.abs()) / 2.0).max(0.0);
                let worst = (r1_unscaled + drift.abs()) / radius;
                Nondegeneracy {
                    big_c0: norm,
                    r0: sigma * (radius + drift.abs()),
                    r1: sigma * r1_unscaled,
                    c0: norm * family.profile(worst),
                }
            }
            KernelSpec::General {
                family,
                radius,
                g,
                h,
            } => {
                let (gmin, gmax) = extent(g, grid);
                let (hmin, hmax) = extent(h, grid);
                let norm = family.normalization(dim, *radius);
                Nondegeneracy {
                    big_c0: norm,
                    r0: radius * gmax * hmax,
                    r1: radius * gmin * hmin / 2.0,
                    c0: norm * family.profile(0.5),
                }
            }
            KernelSpec::SlowDecay1d {
                amplitude,
                alpha,
                truncation,
            } => {
                let r0 = truncation.unwrap_or(f64::INFINITY);
                let r1 = truncation.map_or(1.0, |r| r / 2.0);
                Nondegeneracy {
                    big_c0: *amplitude,
                    r0,
                    r1,
                    c0: amplitude * (1.0 + r1).powf(-alpha),
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelSpec::Convolution {
                family,
                radius,
                sigma,
                m,
                drift,
            } => {
                let mut s = format!("{family:?}(r={radius},sigma={sigma},m={m})").to_lowercase();
                if *drift != 0.0 {
                    s.push_str(&format!("+drift({drift})"));
                }
                s
            }
            KernelSpec::General { family, radius, .. } => {
                format!("general:{family:?}(r={radius})").to_lowercase()
            }
            KernelSpec::SlowDecay1d {
                amplitude,
                alpha,
                truncation,
            } => format!("slow_decay(C={amplitude},alpha={alpha},R={truncation:?})"),
        }
    }
}

fn extent(spec: &CoefficientSpec, grid: &Grid) -> (f64, f64) {
    grid.nodes()
        .map(|x| spec.eval(x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// `D_2` of the kernel in dimension `dim`; for the convolution variant this
/// is the moment of the unscaled `J` (the moment of `J_σ` is `σ^2 D_2`).
pub fn second_moment(k: &KernelSpec, dim: usize) -> Result<f64> {
    k.validate()?;
    match k {
        KernelSpec::Convolution {
            family,
            radius,
            drift,
            ..
        } => Ok(family.second_moment(dim, *radius) + drift * drift),
        KernelSpec::General { .. } => Err(Error::InvalidKernel(
            "second moment is defined for translation-invariant kernels only".into(),
        )),
        KernelSpec::SlowDecay1d {
            amplitude,
            alpha,
            truncation,
        } => {
            // ∫_{-R}^{R} C (1+|z|)^{-α} z^2 dz with u = 1 + |z|
            let a = *alpha;
            let upper = match truncation {
                Some(r) => 1.0 + r,
                None if a > 3.0 => f64::INFINITY,
                None => {
                    return Err(Error::InvalidKernel(format!(
                        "second moment diverges for alpha = {a} <= 3 without truncation"
                    )))
                }
            };
            let power_integral = |k: f64| -> f64 {
                if (k + 1.0).abs() < 1e-14 {
                    upper.ln()
                } else if upper.is_infinite() {
                    -1.0 / (k + 1.0)
                } else {
                    (upper.powf(k + 1.0) - 1.0) / (k + 1.0)
                }
            };
            let half =
                power_integral(2.0 - a) - 2.0 * power_integral(1.0 - a) + power_integral(-a);
            Ok(2.0 * amplitude * half)
        }
    }
}

/// `p(x) = Σ_j w_j K(x, y_j)`, the quadrature of `K(x, ·)` over the grid.
pub fn kernel_mass(k: &KernelSpec, grid: &Grid, x: &[f64]) -> f64 {
    let w = grid.weight();
    grid.nodes().map(|y| w * k.eval(x, y)).sum()
}
