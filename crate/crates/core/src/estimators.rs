//! Total-impedance estimators.
//!
//! The regression methods fit `z_lb ≈ β₀·f + β₁` over the valid samples and
//! read the line at `f = 1`, where every intermediate load is zero and the
//! lower bound equals the total impedance. Estimates are then clamped into
//! `[max_lb, min_ub]`.

use serde::{Deserialize, Serialize};

use crate::bounds::{derive_samples, tightest_bounds, TightestBounds, DEFAULT_I_FLOOR};
use crate::error::{Error, Result};
use crate::model::{DerivedSample, EstimationResult, MeasurementSeries, Method, RegressionFit, WeightMode};

/// Weighted least-squares line through `(f, z)` points.
///
/// Solves the 2x2 weighted normal equations in centred form.
pub fn wls_fit(points: &[(f64, f64)], weights: &[f64]) -> Result<RegressionFit> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "points vs weights",
            left: points.len(),
            right: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::validation(format!("weights must be positive, got {w}")));
    }
    check_design(points)?;

    let w_sum: f64 = weights.iter().sum();
    let (mut f_bar, mut z_bar) = (0.0, 0.0);
    for (&(f, z), &w) in points.iter().zip(weights) {
        f_bar += w * f;
        z_bar += w * z;
    }
    f_bar /= w_sum;
    z_bar /= w_sum;

    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&(f, z), &w) in points.iter().zip(weights) {
        let df = f - f_bar;
        sxx += w * df * df;
        sxy += w * df * (z - z_bar);
    }
    finish(sxx, sxy, f_bar, z_bar, WeightMode::None, points.len())
}

/// Ordinary least-squares line through `(f, z)` points.
pub fn ols_fit(points: &[(f64, f64)]) -> Result<RegressionFit> {
    check_design(points)?;
    let n = points.len() as f64;
    let f_bar = points.iter().map(|p| p.0).sum::<f64>() / n;
    let z_bar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - f_bar).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - f_bar) * (p.1 - z_bar)).sum();
    finish(sxx, sxy, f_bar, z_bar, WeightMode::None, points.len())
}

fn check_design(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::SingularDesign(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::validation(format!("non-finite point {p:?}")));
    }
    let f0 = points[0].0;
    if points.iter().all(|p| p.0 == f0) {
        return Err(Error::SingularDesign("all participation factors are identical".into()));
    }
    Ok(())
}

fn finish(sxx: f64, sxy: f64, f_bar: f64, z_bar: f64, mode: WeightMode, n: usize) -> Result<RegressionFit> {
    if !(sxx > 0.0) {
        return Err(Error::SingularDesign("zero spread in participation factor".into()));
    }
    let beta0 = sxy / sxx;
    Ok(RegressionFit {
        beta0,
        beta1: z_bar - beta0 * f_bar,
        weight_mode: mode,
        n_used: n,
    })
}

fn valid(samples: &[DerivedSample]) -> impl Iterator<Item = &DerivedSample> {
    samples.iter().filter(|s| s.is_valid())
}

/// Clamps into `[max_lb, min_ub]`; the upper clamp is skipped when the
/// bounds are inconsistent (possible with AC magnitude data).
fn clamp(raw: f64, b: &TightestBounds) -> f64 {
    let mut z = raw.max(b.max_lb);
    if let Some(ub) = b.min_ub.filter(|ub| *ub >= b.max_lb) {
        z = z.min(ub);
    }
    z
}

fn midpoint(b: &TightestBounds) -> Result<f64> {
    let ub = b
        .min_ub
        .ok_or_else(|| Error::EmptyEvidence("no sample carries an upper bound".into()))?;
    Ok(b.max_lb + (ub - b.max_lb) / 2.0)
}

fn regression_result(
    method: Method,
    samples: &[DerivedSample],
    bounds: TightestBounds,
    fit: Result<RegressionFit>,
) -> Result<EstimationResult> {
    match fit {
        Ok(fit) => {
            let raw = fit.eval(1.0);
            let z_hat = clamp(raw, &bounds);
            Ok(EstimationResult {
                method,
                z_hat,
                z_raw: raw,
                fit: Some(fit),
                max_lb: bounds.max_lb,
                min_ub: bounds.min_ub,
                clamped: z_hat != raw,
                fallback: false,
                segments: None,
            })
        }
        Err(Error::SingularDesign(reason)) => {
            log::debug!("{method}: singular design ({reason}); using bound midpoint");
            let z = midpoint(&bounds).map_err(|_| {
                Error::EmptyEvidence(format!(
                    "{method}: singular design ({reason}) and no upper bound to fall back on"
                ))
            })?;
            debug_assert!(!samples.is_empty());
            Ok(EstimationResult {
                method,
                z_hat: z,
                z_raw: z,
                fit: None,
                max_lb: bounds.max_lb,
                min_ub: bounds.min_ub,
                clamped: false,
                fallback: true,
                segments: None,
            })
        }
        Err(e) => Err(e),
    }
}

/// Unweighted regression of `z_lb` on `f`, evaluated at `f = 1`.
pub fn estimate_lin(samples: &[DerivedSample]) -> Result<EstimationResult> {
    let bounds = tightest_bounds(samples)?;
    let points: Vec<(f64, f64)> = valid(samples).map(|s| (s.f, s.z_lb)).collect();
    let fit = ols_fit(&points);
    regression_result(Method::Lin, samples, bounds, fit)
}

/// Regression weighted by `f` (`power = 1`) or `f²` (`power = 2`).
/// Samples with `f = 0` carry zero weight and are left out.
pub fn estimate_lin_w(samples: &[DerivedSample], power: u32) -> Result<EstimationResult> {
    let (method, mode) = match power {
        1 => (Method::LinW, WeightMode::F),
        2 => (Method::LinW2, WeightMode::F2),
        p => return Err(Error::validation(format!("weight power must be 1 or 2, got {p}"))),
    };
    let bounds = tightest_bounds(samples)?;
    let (points, weights): (Vec<_>, Vec<_>) = valid(samples)
        .filter(|s| s.f > 0.0)
        .map(|s| ((s.f, s.z_lb), s.f.powi(power as i32)))
        .unzip();
    if points.is_empty() {
        return Err(Error::EmptyEvidence(format!("{method}: every weight is zero")));
    }
    let fit = wls_fit(&points, &weights).map(|fit| RegressionFit { weight_mode: mode, ..fit });
    regression_result(method, samples, bounds, fit)
}

/// Midpoint between the highest lower bound and the lowest upper bound.
pub fn estimate_mean_lb_ub(samples: &[DerivedSample]) -> Result<EstimationResult> {
    let bounds = tightest_bounds(samples)?;
    let z = midpoint(&bounds)?;
    Ok(EstimationResult {
        method: Method::MeanLbUb,
        z_hat: z,
        z_raw: z,
        fit: None,
        max_lb: bounds.max_lb,
        min_ub: bounds.min_ub,
        clamped: false,
        fallback: false,
        segments: None,
    })
}

/// Per-segment impedances of a two-segment branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSegment {
    pub z1: f64,
    pub z2: f64,
}

/// Solves `Δv = z₁·i_in + z₂·i_out` over all usable steps by least squares.
///
/// With one intermediate node, KCL gives `i₁ = i_in` and `i₂ = i_out`, so
/// both segment impedances are identifiable once the steps are not all
/// proportional. Uses a two-column Gram-Schmidt QR to avoid squaring the
/// condition number.
pub fn estimate_k2_exact(series: &MeasurementSeries) -> Result<TwoSegment> {
    let rows: Vec<(f64, f64, f64)> = series
        .samples()
        .iter()
        .zip(derive_samples(series, DEFAULT_I_FLOOR))
        .filter(|(_, d)| d.is_valid())
        .map(|(s, d)| (s.i_in, s.i_out, d.dv))
        .collect();
    if rows.len() < 2 {
        return Err(Error::SingularDesign(format!(
            "need at least 2 usable steps, got {}",
            rows.len()
        )));
    }

    let dot = |a: &dyn Fn(&(f64, f64, f64)) -> f64, b: &dyn Fn(&(f64, f64, f64)) -> f64| {
        rows.iter().map(|r| a(r) * b(r)).sum::<f64>()
    };
    let r11 = dot(&|r| r.0, &|r| r.0).sqrt();
    let q1: Vec<f64> = rows.iter().map(|r| r.0 / r11).collect();
    let a2_norm = dot(&|r| r.1, &|r| r.1).sqrt();

    // orthogonalise column 2 against q1, twice for stability
    let mut u: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mut r12 = 0.0;
    for _ in 0..2 {
        let c: f64 = q1.iter().zip(&u).map(|(q, x)| q * x).sum();
        r12 += c;
        for (x, q) in u.iter_mut().zip(&q1) {
            *x -= c * q;
        }
    }
    let r22 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(r22 > 1e-10 * a2_norm) {
        return Err(Error::SingularDesign(
            "i_in and i_out are proportional across all steps".into(),
        ));
    }
    let q2: Vec<f64> = u.iter().map(|x| x / r22).collect();

    let qtb1: f64 = q1.iter().zip(&rows).map(|(q, r)| q * r.2).sum();
    let qtb2: f64 = q2.iter().zip(&rows).map(|(q, r)| q * r.2).sum();
    let z2 = qtb2 / r22;
    let z1 = (qtb1 - r12 * z2) / r11;
    Ok(TwoSegment { z1, z2 })
}

fn k2_result(series: &MeasurementSeries, samples: &[DerivedSample]) -> Result<EstimationResult> {
    let bounds = tightest_bounds(samples)?;
    let seg = estimate_k2_exact(series)?;
    let z = seg.z1 + seg.z2;
    Ok(EstimationResult {
        method: Method::K2Exact,
        z_hat: z,
        z_raw: z,
        fit: None,
        max_lb: bounds.max_lb,
        min_ub: bounds.min_ub,
        clamped: false,
        fallback: false,
        segments: Some(vec![seg.z1, seg.z2]),
    })
}

/// Runs one method. `series` is only consulted by `k2_exact`.
pub fn estimate(method: Method, series: &MeasurementSeries, samples: &[DerivedSample]) -> Result<EstimationResult> {
    match method {
        Method::Lin => estimate_lin(samples),
        Method::LinW => estimate_lin_w(samples, 1),
        Method::LinW2 => estimate_lin_w(samples, 2),
        Method::MeanLbUb => estimate_mean_lb_ub(samples),
        Method::K2Exact => k2_result(series, samples),
    }
}
