//! Domain types shared across the crate.
//!
//! Everything here is plain data: immutable once built, `Send + Sync`, and
//! validated at construction.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-kilometre series parameters of a cable type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableParams {
    pub r_per_km: f64,
    pub x_per_km: f64,
    #[serde(default)]
    pub label: String,
}

impl CableParams {
    pub fn new(r_per_km: f64, x_per_km: f64, label: impl Into<String>) -> Result<Self> {
        let cable = Self {
            r_per_km,
            x_per_km,
            label: label.into(),
        };
        cable.validate()?;
        Ok(cable)
    }

    /// NAYY 4x150 SE as listed in the pandapower standard line types.
    pub fn nayy_4x150() -> Self {
        Self {
            r_per_km: 0.208,
            x_per_km: 0.08,
            label: "NAYY 4x150 SE".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_per_km.is_finite() && self.r_per_km > 0.0) {
            return Err(Error::validation(format!(
                "cable r_per_km must be > 0, got {}",
                self.r_per_km
            )));
        }
        if !(self.x_per_km.is_finite() && self.x_per_km >= 0.0) {
            return Err(Error::validation(format!(
                "cable x_per_km must be >= 0, got {}",
                self.x_per_km
            )));
        }
        Ok(())
    }
}

impl Default for CableParams {
    fn default() -> Self {
        Self::nayy_4x150()
    }
}

/// Circuit model used for a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Purely resistive network fed by current sinks.
    Dc,
    /// Complex impedances with constant-power loads; only magnitudes are exported.
    Ac,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Dc => f.write_str("dc"),
            Mode::Ac => f.write_str("ac"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub length_m: f64,
    pub cable: CableParams,
    pub z: Complex64,
}

impl SegmentSpec {
    pub fn new(length_m: f64, cable: CableParams, mode: Mode) -> Result<Self> {
        if !(length_m.is_finite() && length_m > 0.0) {
            return Err(Error::validation(format!(
                "segment length must be > 0, got {length_m}"
            )));
        }
        cable.validate()?;
        let km = length_m / 1000.0;
        let z = match mode {
            Mode::Dc => Complex64::new(km * cable.r_per_km, 0.0),
            Mode::Ac => Complex64::new(km * cable.r_per_km, km * cable.x_per_km),
        };
        Ok(Self { length_m, cable, z })
    }
}

/// A measured branch: `K` series segments between the in- and out-node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    segments: Vec<SegmentSpec>,
    mode: Mode,
}

impl BranchSpec {
    pub fn new(segments: Vec<SegmentSpec>, mode: Mode) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::validation("branch needs at least one segment"));
        }
        for (k, seg) in segments.iter().enumerate() {
            if !(seg.z.norm() > 0.0) {
                return Err(Error::validation(format!(
                    "segment {k} has zero impedance"
                )));
            }
            if mode == Mode::Dc && seg.z.im != 0.0 {
                return Err(Error::validation(format!(
                    "segment {k} has reactance in DC mode"
                )));
            }
        }
        Ok(Self { segments, mode })
    }

    pub fn segments(&self) -> &[SegmentSpec] {
        &self.segments
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of segments `K`.
    pub fn k(&self) -> usize {
        self.segments.len()
    }

    pub fn total_impedance(&self) -> Complex64 {
        self.segments.iter().map(|s| s.z).sum()
    }

    /// Scalar ground truth: the magnitude of the complex total impedance.
    pub fn z_true(&self) -> f64 {
        self.total_impedance().norm()
    }

    pub fn sum_of_magnitudes(&self) -> f64 {
        self.segments.iter().map(|s| s.z.norm()).sum()
    }

    /// True when every segment shares one impedance angle, in which case
    /// `|Σ z_k| == Σ |z_k|` up to rounding.
    pub fn has_uniform_angle(&self) -> bool {
        let first = self.segments[0].z.arg();
        self.segments
            .iter()
            .all(|s| (s.z.arg() - first).abs() <= 1e-12)
    }
}

/// Builds a branch with one segment per entry in `lengths_m`, all of one cable type.
pub fn build_branch(lengths_m: &[f64], cable: &CableParams, mode: Mode) -> Result<BranchSpec> {
    if lengths_m.is_empty() {
        return Err(Error::validation("lengths must not be empty"));
    }
    let segments = lengths_m
        .iter()
        .map(|&l| SegmentSpec::new(l, cable.clone(), mode))
        .collect::<Result<Vec<_>>>()?;
    BranchSpec::new(segments, mode)
}

/// One time step of boundary magnitudes. Failed solver steps carry NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub t: u64,
    pub v_in: f64,
    pub v_out: f64,
    pub i_in: f64,
    pub i_out: f64,
}

impl MeasurementSample {
    pub fn failed(t: u64) -> Self {
        Self {
            t,
            v_in: f64::NAN,
            v_out: f64::NAN,
            i_in: f64::NAN,
            i_out: f64::NAN,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v_in.is_finite() && self.v_out.is_finite() && self.i_in.is_finite() && self.i_out.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    dt_s: f64,
    samples: Vec<MeasurementSample>,
}

impl MeasurementSeries {
    pub fn new(dt_s: f64, samples: Vec<MeasurementSample>) -> Result<Self> {
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(Error::validation(format!("dt_s must be > 0, got {dt_s}")));
        }
        if let Some(first) = samples.first() {
            for (i, s) in samples.iter().enumerate() {
                if s.t != first.t + i as u64 {
                    return Err(Error::validation(format!(
                        "timestamps must be consecutive step indices; sample {i} has t={} after t={}",
                        s.t, first.t
                    )));
                }
                for (name, v) in [("v_in", s.v_in), ("v_out", s.v_out), ("i_in", s.i_in), ("i_out", s.i_out)] {
                    if v < 0.0 || v.is_infinite() {
                        return Err(Error::validation(format!(
                            "{name} at t={} must be a nonnegative magnitude, got {v}",
                            s.t
                        )));
                    }
                }
            }
        }
        Ok(Self { dt_s, samples })
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn samples(&self) -> &[MeasurementSample] {
        &self.samples
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Why a time step was excluded from estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Solver failed at this step; magnitudes are not finite.
    NonFinite,
    /// `i_in` at or below the current floor.
    InflowBelowFloor,
    /// `i_out > i_in`.
    OutflowExceedsInflow,
    /// `v_out > v_in`.
    NegativeVoltageDrop,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::NonFinite => "non-finite measurement",
            RejectReason::InflowBelowFloor => "i_in below floor",
            RejectReason::OutflowExceedsInflow => "i_out exceeds i_in",
            RejectReason::NegativeVoltageDrop => "negative voltage drop",
        };
        f.write_str(s)
    }
}

/// Per-step participation factor and impedance bounds.
///
/// `z_ub` is `None` when `i_out` is at or below the current floor; the
/// sample still contributes its lower bound and `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedSample {
    pub t: u64,
    pub dv: f64,
    pub f: f64,
    pub z_lb: f64,
    pub z_ub: Option<f64>,
    pub rejected: Option<RejectReason>,
}

impl DerivedSample {
    pub fn is_valid(&self) -> bool {
        self.rejected.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    None,
    F,
    F2,
}

/// Line `z_lb ≈ beta0 · f + beta1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub beta0: f64,
    pub beta1: f64,
    pub weight_mode: WeightMode,
    pub n_used: usize,
}

impl RegressionFit {
    pub fn eval(&self, f: f64) -> f64 {
        self.beta0 * f + self.beta1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lin,
    LinW,
    LinW2,
    MeanLbUb,
    K2Exact,
}

impl Method {
    /// The four total-impedance estimators, in report order.
    pub const STANDARD: [Method; 4] = [Method::MeanLbUb, Method::Lin, Method::LinW, Method::LinW2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lin => "lin",
            Method::LinW => "lin_w",
            Method::LinW2 => "lin_w2",
            Method::MeanLbUb => "mean_lb_ub",
            Method::K2Exact => "k2_exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lin" => Ok(Method::Lin),
            "lin_w" => Ok(Method::LinW),
            "lin_w2" | "lin_w²" => Ok(Method::LinW2),
            "mean_lb_ub" => Ok(Method::MeanLbUb),
            "k2_exact" => Ok(Method::K2Exact),
            other => Err(Error::validation(format!("unknown method `{other}`"))),
        }
    }
}

/// Parses a comma-separated method list such as `lin,lin_w`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(Error::validation("method list is empty"));
    }
    Ok(methods)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    /// Reported estimate after clamping into the proven bounds.
    pub z_hat: f64,
    /// Estimate before clamping (equal to `z_hat` when no clamp applied).
    pub z_raw: f64,
    pub fit: Option<RegressionFit>,
    pub max_lb: f64,
    pub min_ub: Option<f64>,
    pub clamped: bool,
    /// Regression design was singular and the midpoint estimate was used.
    pub fallback: bool,
    /// Per-segment impedances, only for `k2_exact`.
    pub segments: Option<Vec<f64>>,
}
