//! Ground-truth chain solver.
//!
//! Node 0 is the in-node (source), node `K` the out-node. Segment `s`
//! connects node `s` to node `s + 1`; intermediate node `j` (1..K) carries
//! the unmeasured load `loads[j - 1]` and the out-node carries the tail
//! load, which sits beyond the `i_out` measurement point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BranchSpec, MeasurementSample, MeasurementSeries, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadUnit {
    /// DC current sinks.
    Amperes,
    /// AC constant-power loads.
    Watts,
}

/// Load time series for the `K - 1` intermediate nodes plus the out-node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadAssignment {
    pub unit: LoadUnit,
    /// Profile names drawn for the intermediate nodes, in chain order.
    pub names: Vec<String>,
    pub tail_name: String,
    pub loads: Vec<Vec<f64>>,
    pub tail: Vec<f64>,
}

impl LoadAssignment {
    /// Number of time steps `T`.
    pub fn steps(&self) -> usize {
        self.tail.len()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.loads.len() != k - 1 {
            return Err(Error::LengthMismatch {
                what: "intermediate loads vs K-1",
                left: self.loads.len(),
                right: k - 1,
            });
        }
        let t = self.tail.len();
        for series in &self.loads {
            if series.len() != t {
                return Err(Error::LengthMismatch {
                    what: "load series length",
                    left: series.len(),
                    right: t,
                });
            }
        }
        for (node, series) in self.loads.iter().chain(std::iter::once(&self.tail)).enumerate() {
            if let Some((step, v)) = series.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(Error::AssumptionViolation(format!(
                    "load at node {} step {step} is {v}; loads must be nonnegative",
                    node + 1
                )));
            }
        }
        Ok(())
    }

    /// Converts watt series to DC current sinks at a fixed nominal voltage.
    pub fn to_dc_currents(&self, nominal_v: f64) -> LoadAssignment {
        match self.unit {
            LoadUnit::Amperes => self.clone(),
            LoadUnit::Watts => LoadAssignment {
                unit: LoadUnit::Amperes,
                names: self.names.clone(),
                tail_name: self.tail_name.clone(),
                loads: self
                    .loads
                    .iter()
                    .map(|s| s.iter().map(|p| p / nominal_v).collect())
                    .collect(),
                tail: self.tail.iter().map(|p| p / nominal_v).collect(),
            },
        }
    }

    /// Loads at a single time step.
    pub fn step(&self, t: usize) -> (Vec<f64>, f64) {
        (self.loads.iter().map(|s| s[t]).collect(), self.tail[t])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSolution {
    /// `K + 1` node voltages, source first.
    pub node_voltages: Vec<Complex64>,
    /// `K` segment currents, `segment_currents[0]` is `i_in`.
    pub segment_currents: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SweepSolution {
    pub fn to_sample(&self, t: u64) -> MeasurementSample {
        MeasurementSample {
            t,
            v_in: self.node_voltages[0].norm(),
            v_out: self.node_voltages[self.node_voltages.len() - 1].norm(),
            i_in: self.segment_currents[0].norm(),
            i_out: self.segment_currents[self.segment_currents.len() - 1].norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Convergence threshold on the largest node-voltage update, in volts.
    pub tol: f64,
    pub max_iter: usize,
    /// Voltage collapse floor as a fraction of the source magnitude.
    pub collapse_floor: f64,
    /// Load power factor (lagging). 1.0 gives purely active loads.
    pub power_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            collapse_floor: 0.5,
            power_factor: 0.95,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::validation("solver tol must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("solver max_iter must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.collapse_floor) {
            return Err(Error::validation("collapse_floor must be in [0, 1)"));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(Error::validation("power_factor must be in (0, 1]"));
        }
        Ok(())
    }

    /// Reactive-to-active power ratio implied by the power factor.
    fn q_per_p(&self) -> f64 {
        let pf = self.power_factor;
        (1.0 - pf * pf).max(0.0).sqrt() / pf
    }
}

fn check_loads(branch: &BranchSpec, loads: &[f64], tail: f64) -> Result<()> {
    if loads.len() != branch.k() - 1 {
        return Err(Error::LengthMismatch {
            what: "intermediate loads vs K-1",
            left: loads.len(),
            right: branch.k() - 1,
        });
    }
    if let Some((j, v)) = loads.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::AssumptionViolation(format!(
            "load at node {} is {v}; loads must be nonnegative",
            j + 1
        )));
    }
    if !(tail >= 0.0) {
        return Err(Error::AssumptionViolation(format!(
            "tail load is {tail}; loads must be nonnegative"
        )));
    }
    Ok(())
}

/// Exact DC solution: currents by backward accumulation, voltages by forward drops.
pub fn solve_dc_step(
    branch: &BranchSpec,
    source_v: f64,
    loads: &[f64],
    tail_current: f64,
) -> Result<SweepSolution> {
    if branch.mode() != Mode::Dc {
        return Err(Error::validation("solve_dc_step needs a DC branch"));
    }
    check_loads(branch, loads, tail_current)?;

    let k = branch.k();
    let mut currents = vec![0.0; k];
    currents[k - 1] = tail_current;
    for s in (0..k - 1).rev() {
        currents[s] = currents[s + 1] + loads[s];
    }
    let mut voltages = Vec::with_capacity(k + 1);
    voltages.push(source_v);
    for (s, seg) in branch.segments().iter().enumerate() {
        let v = voltages[s] - seg.z.re * currents[s];
        voltages.push(v);
    }

    Ok(SweepSolution {
        node_voltages: voltages.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        segment_currents: currents.into_iter().map(|i| Complex64::new(i, 0.0)).collect(),
        iterations: 1,
        converged: true,
    })
}

/// Backward/forward sweep for constant-power loads.
///
/// Each iteration draws load currents `conj(S / v)` from the latest node
/// voltages, accumulates them toward the source, then propagates voltage
/// drops outward. Stops once the largest node-voltage update is below `tol`.
pub fn solve_ac_step(
    branch: &BranchSpec,
    source_v: Complex64,
    loads: &[f64],
    tail_power: f64,
    opts: &SolverOptions,
) -> Result<SweepSolution> {
    if branch.mode() != Mode::Ac {
        return Err(Error::validation("solve_ac_step needs an AC branch"));
    }
    check_loads(branch, loads, tail_power)?;
    opts.validate()?;

    let k = branch.k();
    let q_ratio = opts.q_per_p();
    let power: Vec<Complex64> = loads
        .iter()
        .chain(std::iter::once(&tail_power))
        .map(|&p| Complex64::new(p, p * q_ratio))
        .collect();
    let floor = opts.collapse_floor * source_v.norm();

    let mut voltages = vec![source_v; k + 1];
    let mut currents = vec![Complex64::new(0.0, 0.0); k];
    let mut last_step = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        // backward: node j (1..=K) draws power[j - 1]
        let mut acc = Complex64::new(0.0, 0.0);
        for s in (0..k).rev() {
            acc += (power[s] / voltages[s + 1]).conj();
            currents[s] = acc;
        }
        // forward
        let mut step = 0.0f64;
        for (s, seg) in branch.segments().iter().enumerate() {
            let v = voltages[s] - seg.z * currents[s];
            step = step.max((v - voltages[s + 1]).norm());
            voltages[s + 1] = v;
        }
        last_step = step;

        if let Some((node, v)) = voltages
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.norm()))
            .find(|(_, m)| !(*m >= floor))
        {
            return Err(Error::Infeasible {
                node,
                voltage: v,
                floor,
            });
        }
        if step < opts.tol {
            return Ok(SweepSolution {
                node_voltages: voltages,
                segment_currents: currents,
                iterations: iter,
                converged: true,
            });
        }
    }

    Err(Error::Diverged {
        iterations: opts.max_iter,
        last_step,
        last: Box::new(SweepSolution {
            node_voltages: voltages,
            segment_currents: currents,
            iterations: opts.max_iter,
            converged: false,
        }),
    })
}

/// Solves every time step of an assignment and exports boundary magnitudes.
///
/// Steps where the power flow diverges or collapses are kept as NaN samples.
pub fn run_series(
    branch: &BranchSpec,
    source_v: f64,
    assignment: &LoadAssignment,
    dt_s: f64,
    opts: &SolverOptions,
) -> Result<MeasurementSeries> {
    assignment.validate(branch.k())?;
    let expected = match branch.mode() {
        Mode::Dc => LoadUnit::Amperes,
        Mode::Ac => LoadUnit::Watts,
    };
    if assignment.unit != expected {
        return Err(Error::validation(format!(
            "{} branch needs loads in {expected:?}",
            branch.mode()
        )));
    }
    opts.validate()?;

    let mut samples = Vec::with_capacity(assignment.steps());
    let mut loads = vec![0.0; branch.k() - 1];
    for t in 0..assignment.steps() {
        for (slot, series) in loads.iter_mut().zip(&assignment.loads) {
            *slot = series[t];
        }
        let tail = assignment.tail[t];
        let solved = match branch.mode() {
            Mode::Dc => solve_dc_step(branch, source_v, &loads, tail),
            Mode::Ac => solve_ac_step(branch, Complex64::new(source_v, 0.0), &loads, tail, opts),
        };
        match solved {
            Ok(sol) => samples.push(sol.to_sample(t as u64)),
            Err(e @ (Error::Diverged { .. } | Error::Infeasible { .. })) => {
                log::debug!("step {t} failed: {e}");
                samples.push(MeasurementSample::failed(t as u64));
            }
            Err(e) => return Err(e),
        }
    }
    MeasurementSeries::new(dt_s, samples)
}
