//! Household load profiles: CSV ingestion, a synthetic generator, random
//! assignment to branch nodes, and interval averaging.
//!
//! # Synthetic households
//!
//! [`generate_synthetic`] produces 1-minute active-power series. Each
//! household `h` gets
//!
//! * a base load `b_h ~ U(0.02, 0.06) · peak_w` shaped by a shared daily
//!   curve (night trough, morning and evening peaks) shifted by a
//!   per-household offset `~ U(-60, 60)` minutes, times multiplicative
//!   log-normal noise `exp(x_t)` where `x_t` is an AR(1) process with
//!   coefficient 0.95 and stationary standard deviation 0.3;
//! * appliance events arriving as a Poisson process whose per-minute rate
//!   is `a_h · shape(t)²` with activity `a_h ~ U(0.005, 0.02)`; each event
//!   lasts `1 + Geometric(1/8)` minutes at a level `~ U(0.15, 0.6) · peak_w`.
//!
//! The sum is clipped to `[0, peak_w]`, so every value is nonnegative and
//! `peak_w = 0` yields all-zero profiles.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MeasurementSample, MeasurementSeries};
use crate::simulator::{LoadAssignment, LoadUnit};

/// Named power series (watts) sharing one length and sampling interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    dt_s: f64,
    names: Vec<String>,
    profiles: Vec<Vec<f64>>,
}

impl ProfileSet {
    pub fn new(dt_s: f64, names: Vec<String>, profiles: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt_s > 0.0) {
            return Err(Error::validation(format!("dt_s must be > 0, got {dt_s}")));
        }
        if names.len() != profiles.len() {
            return Err(Error::LengthMismatch {
                what: "profile names vs series",
                left: names.len(),
                right: profiles.len(),
            });
        }
        if let Some(first) = profiles.first() {
            let t = first.len();
            for (name, p) in names.iter().zip(&profiles) {
                if p.len() != t {
                    return Err(Error::validation(format!(
                        "profile `{name}` has {} steps, expected {t}",
                        p.len()
                    )));
                }
                if let Some((step, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
                    return Err(Error::validation(format!(
                        "profile `{name}` has invalid power {v} at step {step}"
                    )));
                }
            }
        }
        Ok(Self { dt_s, names, profiles })
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Number of time steps `T`.
    pub fn steps(&self) -> usize {
        self.profiles.first().map_or(0, Vec::len)
    }

    /// Keeps the first `t` steps of every profile.
    pub fn truncate(&self, t: usize) -> Result<Self> {
        if t > self.steps() {
            return Err(Error::validation(format!(
                "profiles have {} steps, {t} requested",
                self.steps()
            )));
        }
        Ok(Self {
            dt_s: self.dt_s,
            names: self.names.clone(),
            profiles: self.profiles.iter().map(|p| p[..t].to_vec()).collect(),
        })
    }
}

/// Reads a profile CSV: header of profile names, one row per step, watts.
pub fn load_profiles_csv(path: impl AsRef<Path>, dt_s: f64) -> Result<ProfileSet> {
    let file = std::fs::File::open(path.as_ref())?;
    read_profiles_csv(file, dt_s)
}

pub fn read_profiles_csv<R: std::io::Read>(reader: R, dt_s: f64) -> Result<ProfileSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Format(format!("profile header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Format("profile CSV has no columns".into()));
    }
    let mut profiles = vec![Vec::new(); names.len()];
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if record.len() != names.len() {
            return Err(Error::Parse {
                row,
                col: record.len().min(names.len()) + 1,
                msg: format!("ragged row: {} cells, header has {}", record.len(), names.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("non-numeric value `{cell}` in column `{}`", names[c]),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse {
                    row,
                    col: c + 1,
                    msg: format!("invalid power {v} in column `{}`", names[c]),
                });
            }
            profiles[c].push(v);
        }
    }
    ProfileSet::new(dt_s, names, profiles)
}

pub fn write_profiles_csv<W: std::io::Write>(set: &ProfileSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(set.names()).map_err(to_io)?;
    for t in 0..set.steps() {
        w.write_record(set.profiles().iter().map(|p| p[t].to_string()))
            .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Sampling interval of [`generate_synthetic`] output.
pub const SYNTHETIC_DT_S: f64 = 60.0;
const MINUTES_PER_DAY: f64 = 1440.0;

/// Relative household demand over the day, in `[0.25, 1]`; `minute` wraps.
fn daily_shape(minute: f64) -> f64 {
    let h = minute.rem_euclid(MINUTES_PER_DAY) / 60.0;
    let bump = |centre: f64, width: f64| {
        let d = (h - centre + 12.0).rem_euclid(24.0) - 12.0;
        (-0.5 * (d / width).powi(2)).exp()
    };
    let night = 0.5 * (1.0 + (2.0 * PI * (h - 15.0) / 24.0).cos());
    (0.25 + 0.15 * night + 0.45 * bump(7.5, 1.2) + 0.6 * bump(19.0, 2.0)).min(1.0)
}

/// Reproducible synthetic household profiles at 1-minute resolution.
pub fn generate_synthetic(n_profiles: usize, steps: usize, seed: u64, peak_w: f64) -> Result<ProfileSet> {
    if n_profiles == 0 {
        return Err(Error::validation("n_profiles must be >= 1"));
    }
    if steps == 0 {
        return Err(Error::validation("T must be >= 1"));
    }
    if !(peak_w >= 0.0 && peak_w.is_finite()) {
        return Err(Error::validation(format!("peak_w must be >= 0, got {peak_w}")));
    }

    let mut names = Vec::with_capacity(n_profiles);
    let mut profiles = Vec::with_capacity(n_profiles);
    let ar = 0.95f64;
    let sigma = 0.3f64;
    let innov = Normal::new(0.0, sigma * (1.0 - ar * ar).sqrt()).expect("valid normal");
    let stationary = Normal::new(0.0, sigma).expect("valid normal");
    let duration = Geometric::new(1.0 / 8.0).expect("valid geometric");

    for h in 0..n_profiles {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(h as u64);

        let base = peak_w * rng.random_range(0.02..0.06);
        let shift = rng.random_range(-60.0..60.0);
        let activity = rng.random_range(0.005..0.02);

        let mut x = stationary.sample(&mut rng);
        let mut series = vec![0.0; steps];
        let mut active: Vec<(usize, f64)> = Vec::new();
        for (t, slot) in series.iter_mut().enumerate() {
            let shape = daily_shape(t as f64 + shift);
            x = ar * x + innov.sample(&mut rng);
            let mut p = base * shape * x.exp();

            if rng.random::<f64>() < activity * shape * shape {
                let len = 1 + duration.sample(&mut rng) as usize;
                let level = peak_w * rng.random_range(0.15..0.6);
                active.push((t + len, level));
            }
            active.retain(|&(end, _)| end > t);
            p += active.iter().map(|&(_, level)| level).sum::<f64>();
            *slot = p.clamp(0.0, peak_w);
        }
        names.push(format!("house_{h:03}"));
        profiles.push(series);
    }
    ProfileSet::new(SYNTHETIC_DT_S, names, profiles)
}

/// Draws `K - 1` intermediate profiles and one tail profile, uniformly with replacement.
pub fn assign_loads(set: &ProfileSet, k: usize, rng_seed: u64) -> Result<LoadAssignment> {
    if set.is_empty() {
        return Err(Error::validation("profile set is empty"));
    }
    if k == 0 {
        return Err(Error::validation("K must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut pick = || rng.random_range(0..set.len());
    let picks: Vec<usize> = (0..k - 1).map(|_| pick()).collect();
    let tail = pick();
    Ok(LoadAssignment {
        unit: LoadUnit::Watts,
        names: picks.iter().map(|&i| set.names[i].clone()).collect(),
        tail_name: set.names[tail].clone(),
        loads: picks.iter().map(|&i| set.profiles[i].clone()).collect(),
        tail: set.profiles[tail].clone(),
    })
}

fn check_factor(factor: usize) -> Result<()> {
    if factor < 1 {
        return Err(Error::validation("downsample factor must be >= 1"));
    }
    Ok(())
}

fn window_means(series: &[f64], factor: usize) -> Vec<f64> {
    series
        .chunks_exact(factor)
        .map(|w| w.iter().sum::<f64>() / factor as f64)
        .collect()
}

/// Interval-averages measurements: each output sample is the per-channel
/// mean of `factor` consecutive inputs. A trailing partial window is dropped.
pub fn downsample(series: &MeasurementSeries, factor: usize) -> Result<MeasurementSeries> {
    check_factor(factor)?;
    if factor == 1 {
        return Ok(series.clone());
    }
    let dropped = series.len() % factor;
    if dropped > 0 {
        log::warn!("downsample by {factor}: dropping {dropped} trailing samples");
    }
    let start = series.samples().first().map_or(0, |s| s.t);
    let samples = series
        .samples()
        .chunks_exact(factor)
        .enumerate()
        .map(|(w, chunk)| {
            let mean = |get: fn(&MeasurementSample) -> f64| {
                chunk.iter().map(get).sum::<f64>() / factor as f64
            };
            MeasurementSample {
                t: start + w as u64,
                v_in: mean(|s| s.v_in),
                v_out: mean(|s| s.v_out),
                i_in: mean(|s| s.i_in),
                i_out: mean(|s| s.i_out),
            }
        })
        .collect();
    MeasurementSeries::new(series.dt_s() * factor as f64, samples)
}

/// Interval-averages the load series themselves, for re-simulation at the
/// coarser resolution.
pub fn downsample_loads(assignment: &LoadAssignment, factor: usize) -> Result<LoadAssignment> {
    check_factor(factor)?;
    Ok(LoadAssignment {
        unit: assignment.unit,
        names: assignment.names.clone(),
        tail_name: assignment.tail_name.clone(),
        loads: assignment.loads.iter().map(|s| window_means(s, factor)).collect(),
        tail: window_means(&assignment.tail, factor),
    })
}
