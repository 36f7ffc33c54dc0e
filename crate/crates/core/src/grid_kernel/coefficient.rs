use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Symbolic zero-order field `a(x)`.
///
/// `piecewise` and `tabulated` depend on the first coordinate only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * prod_d cos(2π f (x_d - c_d))`, optionally cut
    /// to `offset` outside the cube `|x - c|_inf <= support`.
    CosineBump {
        amplitude: f64,
        frequency: f64,
        center: Vec<f64>,
        #[serde(default)]
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<f64>,
    },
    /// `offset + amplitude * exp(-|x - c|^2 / (2 width^2))`.
    GaussianBump {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `nu - |x - c|^beta`; `1/(nu - a)` is integrable near `c` iff `beta < N`.
    PowerCusp {
        nu: f64,
        center: Vec<f64>,
        beta: f64,
    },
    /// Piecewise constant: `values[k]` on the k-th interval cut by `breaks`.
    Piecewise {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// Piecewise linear interpolation of `(points, values)`, constant outside.
    Tabulated {
        points: Vec<f64>,
        values: Vec<f64>,
    },
}

impl CoefficientSpec {
    pub fn constant(value: f64) -> Self {
        CoefficientSpec::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCoefficient(msg));
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidCoefficient(format!("{name} must be finite")))
            }
        };
        match self {
            CoefficientSpec::Constant { value } => finite("value", *value),
            CoefficientSpec::CosineBump {
                amplitude,
                frequency,
                center,
                offset,
                support,
            } => {
                finite("amplitude", *amplitude)?;
                finite("frequency", *frequency)?;
                finite("offset", *offset)?;
                check_center(center)?;
                match support {
                    Some(r) if !(r.is_finite() && *r > 0.0) => {
                        bad(format!("support must be positive, got {r}"))
                    }
                    _ => Ok(()),
                }
            }
            CoefficientSpec::GaussianBump {
                amplitude,
                width,
                center,
                offset,
            } => {
                finite("amplitude", *amplitude)?;
                finite("offset", *offset)?;
                check_center(center)?;
                if !(width.is_finite() && *width > 0.0) {
                    return bad(format!("width must be positive, got {width}"));
                }
                Ok(())
            }
            CoefficientSpec::PowerCusp { nu, center, beta } => {
                finite("nu", *nu)?;
                check_center(center)?;
                if !(beta.is_finite() && *beta > 0.0) {
                    return bad(format!("beta must be positive, got {beta}"));
                }
                Ok(())
            }
            CoefficientSpec::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return bad(format!(
                        "piecewise needs {} values for {} breaks, got {}",
                        breaks.len() + 1,
                        breaks.len(),
                        values.len()
                    ));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("piecewise breaks must be strictly increasing".into());
                }
                breaks
                    .iter()
                    .chain(values)
                    .try_for_each(|&v| finite("piecewise entry", v))
            }
            CoefficientSpec::Tabulated { points, values } => {
                if points.len() < 2 || points.len() != values.len() {
                    return bad("tabulated needs at least two (point, value) pairs".into());
                }
                if points.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated points must be strictly increasing".into());
                }
                points
                    .iter()
                    .chain(values)
                    .try_for_each(|&v| finite("tabulated entry", v))
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CoefficientSpec::Constant { value } => *value,
            CoefficientSpec::CosineBump {
                amplitude,
                frequency,
                center,
                offset,
                support,
            } => {
                let mut prod = 1.0;
                for (d, &xd) in x.iter().enumerate() {
                    let dx = xd - center_at(center, d);
                    if let Some(r) = support {
                        if dx.abs() > *r {
                            return *offset;
                        }
                    }
                    prod *= (2.0 * PI * frequency * dx).cos();
                }
                offset + amplitude * prod
            }
            CoefficientSpec::GaussianBump {
                amplitude,
                width,
                center,
                offset,
            } => {
                let r2 = dist2(x, center);
                offset + amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            CoefficientSpec::PowerCusp { nu, center, beta } => nu - dist2(x, center).sqrt().powf(*beta),
            CoefficientSpec::Piecewise { breaks, values } => {
                let k = breaks.partition_point(|&b| b <= x[0]);
                values[k]
            }
            CoefficientSpec::Tabulated { points, values } => {
                let t = x[0];
                let k = points.partition_point(|&p| p <= t);
                if k == 0 {
                    values[0]
                } else if k == points.len() {
                    values[k - 1]
                } else {
                    let (x0, x1) = (points[k - 1], points[k]);
                    let s = (t - x0) / (x1 - x0);
                    values[k - 1] * (1.0 - s) + values[k] * s
                }
            }
        }
    }

    /// Declared Hölder exponent of the family.
    pub fn holder_exponent(&self) -> f64 {
        match self {
            CoefficientSpec::PowerCusp { beta, .. } => beta.min(1.0),
            _ => 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            CoefficientSpec::Constant { value } => format!("constant({value})"),
            CoefficientSpec::CosineBump {
                amplitude,
                frequency,
                ..
            } => format!("cosine_bump(A={amplitude},f={frequency})"),
            CoefficientSpec::GaussianBump {
                amplitude, width, ..
            } => format!("gaussian_bump(A={amplitude},w={width})"),
            CoefficientSpec::PowerCusp { nu, beta, .. } => format!("power_cusp(nu={nu},beta={beta})"),
            CoefficientSpec::Piecewise { values, .. } => format!("piecewise({} pieces)", values.len()),
            CoefficientSpec::Tabulated { points, .. } => format!("tabulated({} points)", points.len()),
        }
    }
}

fn check_center(center: &[f64]) -> Result<()> {
    if center.is_empty() || center.len() > 2 || center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidCoefficient(
            "center must have 1 or 2 finite coordinates".into(),
        ));
    }
    Ok(())
}

// A one-entry center is broadcast to every axis.
fn center_at(center: &[f64], d: usize) -> f64 {
    center.get(d).copied().unwrap_or(center[0])
}

fn dist2(x: &[f64], center: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(d, &xd)| (xd - center_at(center, d)).powi(2))
        .sum()
}

/// A coefficient field sampled on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    spec: Option<CoefficientSpec>,
    values: Vec<f64>,
    sup: f64,
    holder: f64,
}

impl Coefficient {
    pub fn on_grid(spec: &CoefficientSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let values: Vec<f64> = grid.nodes().map(|x| spec.eval(x)).collect();
        let mut c = Self::from_values(values, spec.holder_exponent())?;
        c.spec = Some(spec.clone());
        Ok(c)
    }

    /// Raw node values, with no symbolic family behind them.
    pub fn from_values(values: Vec<f64>, holder: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidCoefficient("no node values".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient value at node {i}")));
        }
        if !(holder > 0.0 && holder <= 1.0) {
            return Err(Error::InvalidCoefficient(format!(
                "Hölder exponent must lie in (0, 1], got {holder}"
            )));
        }
        let sup = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            spec: None,
            values,
            sup,
            holder,
        })
    }

    pub fn with_holder(mut self, holder: f64) -> Result<Self> {
        if !(holder > 0.0 && holder <= 1.0) {
            return Err(Error::InvalidCoefficient(format!(
                "Hölder exponent must lie in (0, 1], got {holder}"
            )));
        }
        self.holder = holder;
        Ok(self)
    }

    pub fn spec(&self) -> Option<&CoefficientSpec> {
        self.spec.as_ref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `ν`, the maximum over nodes.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn holder(&self) -> f64 {
        self.holder
    }

    pub fn label(&self) -> String {
        self.spec
            .as_ref()
            .map(CoefficientSpec::label)
            .unwrap_or_else(|| format!("nodal({})", self.values.len()))
    }

    /// `a + c`, keeping the family label.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
            sup: self.sup + c,
            holder: self.holder,
        }
    }
}
