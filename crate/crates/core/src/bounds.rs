//! Participation factor and per-step impedance bounds.
//!
//! Under nonnegative intermediate loads every step brackets the total
//! impedance: `Δv / i_in ≤ z_tot ≤ Δv / i_out`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedSample, MeasurementSeries, RejectReason};

/// Default current floor below which a step carries no information.
pub const DEFAULT_I_FLOOR: f64 = 1e-6;

pub fn derive_samples(series: &MeasurementSeries, i_floor: f64) -> Vec<DerivedSample> {
    debug_assert!(i_floor >= 0.0);
    series
        .samples()
        .iter()
        .map(|s| {
            let dv = s.v_in - s.v_out;
            let f = s.i_out / s.i_in;
            let z_lb = dv / s.i_in;
            let rejected = if !s.is_finite() {
                Some(RejectReason::NonFinite)
            } else if s.i_in <= i_floor {
                Some(RejectReason::InflowBelowFloor)
            } else if s.i_out > s.i_in {
                Some(RejectReason::OutflowExceedsInflow)
            } else if dv < 0.0 {
                Some(RejectReason::NegativeVoltageDrop)
            } else {
                None
            };
            let z_ub = (rejected.is_none() && s.i_out > i_floor).then(|| dv / s.i_out);
            DerivedSample {
                t: s.t,
                dv,
                f,
                z_lb,
                z_ub,
                rejected,
            }
        })
        .collect()
}

/// Highest lower bound and lowest upper bound over the valid samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightestBounds {
    pub max_lb: f64,
    /// `None` when no valid sample carries an upper bound.
    pub min_ub: Option<f64>,
}

pub fn tightest_bounds(samples: &[DerivedSample]) -> Result<TightestBounds> {
    let mut max_lb = f64::NEG_INFINITY;
    let mut min_ub: Option<f64> = None;
    let mut any = false;
    for s in samples.iter().filter(|s| s.is_valid()) {
        any = true;
        max_lb = max_lb.max(s.z_lb);
        if let Some(ub) = s.z_ub {
            min_ub = Some(min_ub.map_or(ub, |m| m.min(ub)));
        }
    }
    if !any {
        return Err(Error::EmptyEvidence("no valid samples".into()));
    }
    Ok(TightestBounds { max_lb, min_ub })
}

/// Per-reason rejection counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub valid: usize,
    pub without_ub: usize,
    pub non_finite: usize,
    pub inflow_below_floor: usize,
    pub outflow_exceeds_inflow: usize,
    pub negative_voltage_drop: usize,
}

impl SampleCounts {
    pub fn invalid(&self) -> usize {
        self.non_finite + self.inflow_below_floor + self.outflow_exceeds_inflow + self.negative_voltage_drop
    }
}

pub fn count_samples(samples: &[DerivedSample]) -> SampleCounts {
    let mut c = SampleCounts::default();
    for s in samples {
        match s.rejected {
            None => {
                c.valid += 1;
                if s.z_ub.is_none() {
                    c.without_ub += 1;
                }
            }
            Some(RejectReason::NonFinite) => c.non_finite += 1,
            Some(RejectReason::InflowBelowFloor) => c.inflow_below_floor += 1,
            Some(RejectReason::OutflowExceedsInflow) => c.outflow_exceeds_inflow += 1,
            Some(RejectReason::NegativeVoltageDrop) => c.negative_voltage_drop += 1,
        }
    }
    c
}

/// Largest participation factor among valid samples.
pub fn max_participation(samples: &[DerivedSample]) -> Option<f64> {
    samples
        .iter()
        .filter(|s| s.is_valid())
        .map(|s| s.f)
        .fold(None, |acc, f| Some(acc.map_or(f, |a: f64| a.max(f))))
}
