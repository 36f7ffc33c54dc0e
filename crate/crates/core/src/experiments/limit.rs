use serde::{Deserialize, Serialize};

use super::SweepRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    ToZero,
    ToInfinity,
}

impl SweepDirection {
    /// Extrapolation variable: `σ` toward zero, `1/σ` toward infinity.
    fn step(self, sigma: f64) -> f64 {
        match self {
            SweepDirection::ToZero => sigma,
            SweepDirection::ToInfinity => 1.0 / sigma,
        }
    }
}

/// The analytic value a sweep should approach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitTarget {
    /// `-ν`
    NegSup { nu: f64 },
    /// `1 - ν`
    OneMinusSup { nu: f64 },
    /// `λ_1(cΔ + a)` from the local reference.
    Local { lambda_1: f64 },
}

impl LimitTarget {
    pub fn value(&self) -> f64 {
        match *self {
            LimitTarget::NegSup { nu } => -nu,
            LimitTarget::OneMinusSup { nu } => 1.0 - nu,
            LimitTarget::Local { lambda_1 } => lambda_1,
        }
    }

    /// Target for an `M`-variant sweep with `ν = sup a`; the `m = 2`, `σ → 0`
    /// case needs the local value supplied.
    pub fn for_regime(m: f64, direction: SweepDirection, nu: f64, local: Option<f64>) -> Result<Self> {
        match direction {
            SweepDirection::ToInfinity if m == 0.0 => Ok(LimitTarget::OneMinusSup { nu }),
            SweepDirection::ToInfinity => Ok(LimitTarget::NegSup { nu }),
            SweepDirection::ToZero if m < 2.0 => Ok(LimitTarget::NegSup { nu }),
            SweepDirection::ToZero => local
                .map(|lambda_1| LimitTarget::Local { lambda_1 })
                .ok_or_else(|| Error::InvalidArgument("m = 2 limit needs the local eigenvalue".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub extrapolated: f64,
    /// Values ordered from coarsest to finest along the sweep direction.
    pub tail: Vec<f64>,
    pub order: u32,
    pub target: LimitTarget,
    pub gap: f64,
    pub raw_gap: f64,
    /// False when the last three values are not monotone; `extrapolated` is
    /// then the raw last value.
    pub monotone_tail: bool,
}

/// Richardson step `v2 + (v2 - v1) / (r^p - 1)` with `r = step1 / step2`.
pub fn richardson(v1: f64, v2: f64, step1: f64, step2: f64, order: u32) -> f64 {
    let r = step1 / step2;
    v2 + (v2 - v1) / (r.powi(order as i32) - 1.0)
}

pub fn limit_estimate(
    records: &[SweepRecord],
    direction: SweepDirection,
    target: LimitTarget,
    order: u32,
) -> Result<LimitEstimate> {
    if records.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 records, got {}",
            records.len()
        )));
    }
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!("order must be 1 or 2, got {order}")));
    }
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (direction.step(r.sigma), r.lambda_p))
        .collect();
    if pts.iter().any(|(s, v)| !(s.is_finite() && *s > 0.0 && v.is_finite())) {
        return Err(Error::NonFinite("sweep tail".into()));
    }
    // coarse to fine: decreasing step
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tail: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let k = pts.len();
    let d1 = pts[k - 2].1 - pts[k - 3].1;
    let d2 = pts[k - 1].1 - pts[k - 2].1;
    let monotone_tail = d1 * d2 >= 0.0;
    let last = pts[k - 1].1;
    let extrapolated = if monotone_tail {
        richardson(pts[k - 2].1, last, pts[k - 2].0, pts[k - 1].0, order)
    } else {
        log::warn!("non-monotone sweep tail; reporting the raw last value");
        last
    };
    let t = target.value();
    Ok(LimitEstimate {
        extrapolated,
        tail,
        order,
        target,
        gap: (extrapolated - t).abs(),
        raw_gap: (last - t).abs(),
        monotone_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Verdict;

    fn recs(f: impl Fn(f64) -> f64, sigmas: &[f64]) -> Vec<SweepRecord> {
        sigmas
            .iter()
            .map(|&s| SweepRecord {
                sigma: s,
                m: 2.0,
                lambda_p: f(s),
                lambda_v: None,
                cw_lower: f(s),
                cw_upper: f(s),
                iv_lo: f64::NEG_INFINITY,
                iv_hi: f64::INFINITY,
                n_nodes: 1,
                h: 0.0,
                existence: Verdict::Eigenpair,
                converged: true,
                wall_ms: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_on_linear_model() {
        let r = recs(|s| 1.5 + 2.0 * s, &[0.2, 0.1, 0.05, 0.025]);
        let t = LimitTarget::Local { lambda_1: 1.5 };
        let e = limit_estimate(&r, SweepDirection::ToZero, t, 1).unwrap();
        assert!((e.extrapolated - 1.5).abs() < 1e-13);
        assert!(e.gap < e.raw_gap);
    }

    #[test]
    fn inverse_sigma_model() {
        let r = recs(|s| 0.7 - 3.0 / s, &[5.0, 10.0, 20.0, 40.0]);
        let e = limit_estimate(&r, SweepDirection::ToInfinity, LimitTarget::OneMinusSup { nu: 0.3 }, 1).unwrap();
        assert!(e.gap < 1e-12);
    }

    #[test]
    fn constant_sequence() {
        let r = recs(|_| -0.25, &[1.0, 2.0, 4.0]);
        let e = limit_estimate(&r, SweepDirection::ToInfinity, LimitTarget::NegSup { nu: 0.25 }, 2).unwrap();
        assert_eq!(e.extrapolated, -0.25);
        assert!(e.monotone_tail);
    }

    #[test]
    fn non_monotone_tail_skips() {
        let vals = [(0.4, 1.0), (0.2, 1.2), (0.1, 1.1)];
        let r = recs(|s| vals.iter().find(|v| v.0 == s).unwrap().1, &[0.4, 0.2, 0.1]);
        let e = limit_estimate(&r, SweepDirection::ToZero, LimitTarget::NegSup { nu: 0.0 }, 1).unwrap();
        assert!(!e.monotone_tail);
        assert_eq!(e.extrapolated, 1.1);
    }

    #[test]
    fn rejects_short_or_bad_order() {
        let r = recs(|s| s, &[1.0, 2.0]);
        assert!(limit_estimate(&r, SweepDirection::ToZero, LimitTarget::NegSup { nu: 0.0 }, 1).is_err());
        let r = recs(|s| s, &[1.0, 2.0, 3.0]);
        assert!(limit_estimate(&r, SweepDirection::ToZero, LimitTarget::NegSup { nu: 0.0 }, 3).is_err());
    }

    #[test]
    fn regime_targets() {
        use SweepDirection::*;
        assert_eq!(LimitTarget::for_regime(0.0, ToInfinity, 0.3, None).unwrap().value(), 0.7);
        assert_eq!(LimitTarget::for_regime(1.0, ToInfinity, 0.3, None).unwrap().value(), -0.3);
        assert_eq!(LimitTarget::for_regime(1.0, ToZero, 0.3, None).unwrap().value(), -0.3);
        assert!(LimitTarget::for_regime(2.0, ToZero, 0.3, None).is_err());
    }
}
