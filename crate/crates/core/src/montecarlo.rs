//! Monte-Carlo studies over randomly drawn branches and load assignments.
//!
//! Seeding is hierarchical: the study seed fixes the synthetic profile pool
//! and, together with a run index, a per-run seed from which independent
//! streams for segment lengths and profile draws are split. Any run can be
//! reproduced on its own and adding runs never perturbs earlier ones.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{count_samples, derive_samples, max_participation, SampleCounts, DEFAULT_I_FLOOR};
use crate::error::{Error, Result};
use crate::estimators::estimate;
use crate::model::{build_branch, BranchSpec, CableParams, Method, Mode};
use crate::profiles::{self, generate_synthetic, load_profiles_csv, ProfileSet};
use crate::simulator::{run_series, LoadAssignment, SolverOptions};
use crate::stats::Summary;

/// Fraction of failed runs above which a study is aborted.
pub const FAILED_RUN_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSource {
    Synthetic {
        #[serde(default = "default_n_profiles")]
        n_profiles: usize,
        #[serde(default = "default_peak_w")]
        peak_w: f64,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_n_profiles() -> usize {
    100
}
fn default_peak_w() -> f64 {
    5000.0
}

impl Default for ProfileSource {
    fn default() -> Self {
        ProfileSource::Synthetic {
            n_profiles: default_n_profiles(),
            peak_w: default_peak_w(),
        }
    }
}

/// How coarser measurement resolutions are produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DownsampleMode {
    /// Interval-average the simulated measurements, as a meter would.
    #[default]
    Measurements,
    /// Interval-average the loads and re-simulate at the coarse resolution.
    Loads,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Segment count `K`.
    pub k: usize,
    #[serde(default = "default_length_range")]
    pub length_range_m: [f64; 2],
    #[serde(default)]
    pub cable: CableParams,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Number of time steps `T`.
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_source_v")]
    pub source_v: f64,
    #[serde(default)]
    pub profiles: ProfileSource,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_i_floor")]
    pub i_floor: f64,
    #[serde(default)]
    pub downsample_mode: DownsampleMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_length_range() -> [f64; 2] {
    [100.0, 300.0]
}
fn default_mode() -> Mode {
    Mode::Ac
}
fn default_steps() -> usize {
    1440
}
fn default_dt() -> f64 {
    60.0
}
fn default_source_v() -> f64 {
    400.0
}
fn default_i_floor() -> f64 {
    DEFAULT_I_FLOOR
}

impl ScenarioConfig {
    /// Defaults for a `K`-segment branch: lengths U(100, 300) m, NAYY 4x150,
    /// AC, one day at one-minute resolution.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            length_range_m: default_length_range(),
            cable: CableParams::default(),
            mode: default_mode(),
            steps: default_steps(),
            dt_s: default_dt(),
            source_v: default_source_v(),
            profiles: ProfileSource::default(),
            solver: SolverOptions::default(),
            i_floor: default_i_floor(),
            downsample_mode: DownsampleMode::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::validation("k must be >= 1"));
        }
        let [lo, hi] = self.length_range_m;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::validation(format!(
                "length_range_m must satisfy 0 < min <= max, got [{lo}, {hi}]"
            )));
        }
        if self.steps < 2 {
            return Err(Error::validation("steps (T) must be >= 2"));
        }
        if !(self.dt_s > 0.0) {
            return Err(Error::validation("dt_s must be > 0"));
        }
        if !(self.source_v > 0.0 && self.source_v.is_finite()) {
            return Err(Error::validation("source_v must be > 0"));
        }
        if !(self.i_floor >= 0.0) {
            return Err(Error::validation("i_floor must be >= 0"));
        }
        if let ProfileSource::Synthetic { n_profiles, peak_w } = &self.profiles {
            if *n_profiles == 0 {
                return Err(Error::validation("profiles.n_profiles must be >= 1"));
            }
            if !(*peak_w >= 0.0) {
                return Err(Error::validation("profiles.peak_w must be >= 0"));
            }
        }
        self.cable.validate()?;
        self.solver.validate()
    }

    /// Resolves the profile pool and returns a scenario ready for sampling.
    pub fn prepare(&self) -> Result<Scenario> {
        self.validate()?;
        let pool = match &self.profiles {
            ProfileSource::Synthetic { n_profiles, peak_w } => {
                if self.dt_s != profiles::SYNTHETIC_DT_S {
                    return Err(Error::validation(format!(
                        "synthetic profiles are generated at {} s; set dt_s accordingly",
                        profiles::SYNTHETIC_DT_S
                    )));
                }
                generate_synthetic(*n_profiles, self.steps, derive_seed(self.seed, POOL_STREAM), *peak_w)?
            }
            ProfileSource::Csv { path } => load_profiles_csv(path, self.dt_s)?.truncate(self.steps)?,
        };
        Ok(Scenario {
            config: self.clone(),
            pool,
        })
    }
}

const POOL_STREAM: u64 = 0x706f_6f6c;
const LENGTH_STREAM: u64 = 0;
const ASSIGN_STREAM: u64 = 1;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Child seed for `child` under `parent`.
pub fn derive_seed(parent: u64, child: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(child.wrapping_add(0x5bd1_e995)))
}

/// A validated config together with its profile pool.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    pool: ProfileSet,
}

/// One drawn branch with its loads.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledScenario {
    pub run_seed: u64,
    pub branch: BranchSpec,
    pub assignment: LoadAssignment,
}

impl Scenario {
    pub fn from_pool(config: ScenarioConfig, pool: ProfileSet) -> Result<Self> {
        config.validate()?;
        let pool = pool.truncate(config.steps)?;
        Ok(Self { config, pool })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn pool(&self) -> &ProfileSet {
        &self.pool
    }

    /// Draws segment lengths `~ U(min, max)` and a load assignment for one run.
    pub fn sample(&self, run_index: u64) -> Result<SampledScenario> {
        let cfg = &self.config;
        let run_seed = derive_seed(cfg.seed, run_index);
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
        rng.set_stream(LENGTH_STREAM);
        let [lo, hi] = cfg.length_range_m;
        let lengths: Vec<f64> = (0..cfg.k)
            .map(|_| if lo < hi { rng.random_range(lo..hi) } else { lo })
            .collect();
        let branch = build_branch(&lengths, &cfg.cable, cfg.mode)?;
        let assignment = profiles::assign_loads(&self.pool, cfg.k, derive_seed(run_seed, ASSIGN_STREAM))?;
        Ok(SampledScenario {
            run_seed,
            branch,
            assignment,
        })
    }

    fn loads_for(&self, assignment: &LoadAssignment) -> LoadAssignment {
        match self.config.mode {
            Mode::Dc => assignment.to_dc_currents(self.config.source_v),
            Mode::Ac => assignment.clone(),
        }
    }

    /// Simulates a drawn scenario at the base resolution.
    pub fn simulate(&self, sampled: &SampledScenario) -> Result<crate::model::MeasurementSeries> {
        run_series(
            &sampled.branch,
            self.config.source_v,
            &self.loads_for(&sampled.assignment),
            self.config.dt_s,
            &self.config.solver,
        )
    }

    fn series_at(
        &self,
        sampled: &SampledScenario,
        base: &crate::model::MeasurementSeries,
        factor: usize,
    ) -> Result<crate::model::MeasurementSeries> {
        if factor == 1 {
            return Ok(base.clone());
        }
        match self.config.downsample_mode {
            DownsampleMode::Measurements => profiles::downsample(base, factor),
            DownsampleMode::Loads => {
                let coarse = profiles::downsample_loads(&self.loads_for(&sampled.assignment), factor)?;
                run_series(
                    &sampled.branch,
                    self.config.source_v,
                    &coarse,
                    self.config.dt_s * factor as f64,
                    &self.config.solver,
                )
            }
        }
    }

    /// Runs a single Monte-Carlo draw end to end.
    pub fn run_one(&self, run_index: u64, methods: &[Method], factors: &[usize]) -> RunRecord {
        let mut record = RunRecord {
            run_index,
            run_seed: derive_seed(self.config.seed, run_index),
            z_true: f64::NAN,
            lengths_m: Vec::new(),
            uniform_angle: true,
            points: Vec::new(),
            error: None,
        };
        if let Err(e) = self.run_into(&mut record, methods, factors) {
            record.error = Some(e.to_string());
            record.points.clear();
        }
        record
    }

    fn run_into(&self, record: &mut RunRecord, methods: &[Method], factors: &[usize]) -> Result<()> {
        let sampled = self.sample(record.run_index)?;
        record.z_true = sampled.branch.z_true();
        record.lengths_m = sampled.branch.segments().iter().map(|s| s.length_m).collect();
        record.uniform_angle = sampled.branch.has_uniform_angle();
        let base = self.simulate(&sampled)?;
        for &factor in factors {
            let series = self.series_at(&sampled, &base, factor)?;
            let samples = derive_samples(&series, self.config.i_floor);
            let mut estimates = Vec::with_capacity(methods.len());
            for &method in methods {
                let r = estimate(method, &series, &samples)
                    .map_err(|e| Error::EmptyEvidence(format!("{method} at factor {factor}: {e}")))?;
                estimates.push(MethodOutcome {
                    method,
                    z_hat: r.z_hat,
                    z_raw: r.z_raw,
                    eps_pct: epsilon(record.z_true, r.z_hat)?,
                    eps_truth_pct: 100.0 * (record.z_true - r.z_hat).abs() / record.z_true,
                    clamped: r.clamped,
                    fallback: r.fallback,
                });
            }
            record.points.push(FactorOutcome {
                factor,
                dt_s: series.dt_s(),
                counts: count_samples(&samples),
                max_f: max_participation(&samples),
                estimates,
            });
        }
        Ok(())
    }
}

/// Relative estimation error in percent, normalised by the ESTIMATE:
/// `|z_true - z_hat| / z_hat · 100`.
pub fn epsilon(z_true: f64, z_hat: f64) -> Result<f64> {
    if !(z_hat > 0.0) {
        return Err(Error::validation(format!("estimate must be > 0 for epsilon, got {z_hat}")));
    }
    Ok((z_true - z_hat).abs() / z_hat * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub z_hat: f64,
    pub z_raw: f64,
    pub eps_pct: f64,
    /// Diagnostic variant normalised by the true impedance.
    pub eps_truth_pct: f64,
    pub clamped: bool,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorOutcome {
    pub factor: usize,
    pub dt_s: f64,
    pub counts: SampleCounts,
    pub max_f: Option<f64>,
    pub estimates: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: u64,
    pub run_seed: u64,
    pub z_true: f64,
    pub lengths_m: Vec<f64>,
    /// False when mixed cable types make `|Σz| < Σ|z|`.
    pub uniform_angle: bool,
    pub points: Vec<FactorOutcome>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn point(&self, factor: usize) -> Option<&FactorOutcome> {
        self.points.iter().find(|p| p.factor == factor)
    }

    pub fn outcome(&self, factor: usize, method: Method) -> Option<&MethodOutcome> {
        self.point(factor)?.estimates.iter().find(|e| e.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub factor: usize,
    pub dt_s: f64,
    pub method: Method,
    pub eps: Summary,
    pub eps_truth_mean: f64,
    pub clamped: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub runs: usize,
    pub failed_runs: usize,
    pub failures: Vec<(u64, String)>,
    pub mixed_cable_runs: usize,
    /// Invalid-sample totals per factor, summed over successful runs.
    pub invalid_samples: Vec<(usize, usize)>,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: ScenarioConfig,
    pub n_s: usize,
    pub methods: Vec<Method>,
    pub factors: Vec<usize>,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<MethodAggregate>,
    pub diagnostics: Diagnostics,
}

impl StudyReport {
    pub fn aggregate(&self, factor: usize, method: Method) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.factor == factor && a.method == method)
    }

    pub fn successful_runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| !r.failed())
    }
}

/// Worker configuration for [`run_study`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallelism {
    /// Worker cap; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

/// Runs `n_s` draws, evaluating every method at every downsample factor.
pub fn run_study(
    scenario: &Scenario,
    n_s: usize,
    methods: &[Method],
    factors: &[usize],
    par: Parallelism,
) -> Result<StudyReport> {
    if n_s == 0 {
        return Err(Error::validation("n_s must be >= 1"));
    }
    if methods.is_empty() {
        return Err(Error::validation("at least one method is required"));
    }
    if factors.is_empty() || factors.contains(&0) {
        return Err(Error::validation("factors must be non-empty and >= 1"));
    }
    if methods.contains(&Method::K2Exact) && scenario.config.k != 2 {
        return Err(Error::validation("k2_exact applies only to K = 2"));
    }

    let work = || -> Vec<RunRecord> {
        (0..n_s as u64)
            .into_par_iter()
            .map(|r| scenario.run_one(r, methods, factors))
            .collect()
    };
    let runs = match par.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::validation(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let report = assemble(scenario.config.clone(), n_s, methods, factors, runs);
    let failed = report.diagnostics.failed_runs;
    if failed as f64 > FAILED_RUN_TOLERANCE * n_s as f64 {
        return Err(Error::StudyFailed {
            failed,
            total: n_s,
            tolerance_pct: FAILED_RUN_TOLERANCE * 100.0,
        });
    }
    Ok(report)
}

fn assemble(
    config: ScenarioConfig,
    n_s: usize,
    methods: &[Method],
    factors: &[usize],
    runs: Vec<RunRecord>,
) -> StudyReport {
    let mut diagnostics = Diagnostics {
        runs: runs.len(),
        ..Default::default()
    };
    for r in &runs {
        if let Some(e) = &r.error {
            diagnostics.failed_runs += 1;
            diagnostics.failures.push((r.run_index, e.clone()));
        } else if !r.uniform_angle {
            diagnostics.mixed_cable_runs += 1;
        }
    }

    let mut aggregates = Vec::new();
    for &factor in factors {
        let invalid = runs
            .iter()
            .filter_map(|r| r.point(factor))
            .map(|p| p.counts.invalid())
            .sum();
        diagnostics.invalid_samples.push((factor, invalid));
        for &method in methods {
            let outcomes: Vec<&MethodOutcome> = runs.iter().filter_map(|r| r.outcome(factor, method)).collect();
            let eps: Vec<f64> = outcomes.iter().map(|o| o.eps_pct).collect();
            let Some(summary) = Summary::of(&eps) else { continue };
            let fallbacks = outcomes.iter().filter(|o| o.fallback).count();
            diagnostics.fallbacks += fallbacks;
            let dt_s = runs
                .iter()
                .find_map(|r| r.point(factor))
                .map_or(config.dt_s * factor as f64, |p| p.dt_s);
            aggregates.push(MethodAggregate {
                factor,
                dt_s,
                method,
                eps: summary,
                eps_truth_mean: outcomes.iter().map(|o| o.eps_truth_pct).sum::<f64>() / outcomes.len() as f64,
                clamped: outcomes.iter().filter(|o| o.clamped).count(),
                fallbacks,
            });
        }
    }

    StudyReport {
        config,
        n_s,
        methods: methods.to_vec(),
        factors: factors.to_vec(),
        runs,
        aggregates,
        diagnostics,
    }
}

/// Per-run maximum participation factor at one resolution, with cross-run quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxParticipation {
    pub factor: usize,
    pub dt_s: f64,
    pub per_run: Vec<(u64, f64)>,
    pub summary: Option<Summary>,
}

pub fn max_participation_stats(report: &StudyReport) -> Vec<MaxParticipation> {
    report
        .factors
        .iter()
        .map(|&factor| {
            let per_run: Vec<(u64, f64)> = report
                .successful_runs()
                .filter_map(|r| Some((r.run_index, r.point(factor)?.max_f?)))
                .collect();
            let values: Vec<f64> = per_run.iter().map(|p| p.1).collect();
            let dt_s = report
                .runs
                .iter()
                .find_map(|r| r.point(factor))
                .map_or(report.config.dt_s * factor as f64, |p| p.dt_s);
            MaxParticipation {
                factor,
                dt_s,
                summary: Summary::of(&values),
                per_run,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(k: usize, mode: Mode) -> ScenarioConfig {
        ScenarioConfig {
            steps: 120,
            mode,
            profiles: ProfileSource::Synthetic { n_profiles: 10, peak_w: 4000.0 },
            seed: 1,
            ..ScenarioConfig::new(k)
        }
    }

    #[test]
    fn epsilon_uses_estimate_denominator() {
        assert_eq!(epsilon(1.0, 1.0).unwrap(), 0.0);
        assert!((epsilon(1.0, 0.9).unwrap() - 11.111111111111111).abs() < 1e-12);
        assert!((epsilon(0.9, 1.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(epsilon(1.0, 0.0).is_err());
        assert!(epsilon(1.0, -1.0).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let sc = small(4, Mode::Ac).prepare().unwrap();
        let a = sc.sample(5).unwrap();
        let b = sc.sample(5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.branch.k(), 4);
        assert_eq!(a.assignment.loads.len(), 3);
        assert_ne!(sc.sample(6).unwrap().branch, a.branch);
    }

    #[test]
    fn lengths_average_to_midpoint() {
        let sc = ScenarioConfig { k: 100, ..small(100, Mode::Dc) }.prepare().unwrap();
        let lengths: Vec<f64> = (0..100)
            .flat_map(|r| sc.sample(r).unwrap().branch.segments().iter().map(|s| s.length_m).collect::<Vec<_>>())
            .collect();
        assert_eq!(lengths.len(), 10_000);
        assert!(lengths.iter().all(|l| (100.0..300.0).contains(l)));
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        // sd of the mean is 57.7/100 ≈ 0.58 m
        assert!((mean - 200.0).abs() < 2.0, "mean {mean}");
    }

    #[test]
    fn config_validation() {
        let mut c = small(4, Mode::Ac);
        c.length_range_m = [300.0, 100.0];
        assert!(c.validate().is_err());
        let mut c = small(4, Mode::Ac);
        c.steps = 1;
        assert!(c.validate().is_err());
        let mut c = small(0, Mode::Ac);
        c.k = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_load_scenario_is_exact() {
        let cfg = ScenarioConfig { steps: 10, ..small(3, Mode::Dc) };
        let names = vec!["flat".to_string()];
        let pool = ProfileSet::new(60.0, names, vec![vec![0.0; 10]]).unwrap();
        // zero intermediate loads but a nonzero tail: use two profiles
        let pool = ProfileSet::new(
            60.0,
            vec!["zero".into(), "tail".into()],
            vec![pool.profiles()[0].clone(), (0..10).map(|t| 1000.0 + 100.0 * t as f64).collect()],
        )
        .unwrap();
        let sc = Scenario::from_pool(cfg, pool).unwrap();
        // find a run whose intermediate nodes all drew "zero" and whose tail drew "tail"
        let run = (0..200)
            .find(|&r| {
                let s = sc.sample(r).unwrap();
                s.assignment.names.iter().all(|n| n == "zero") && s.assignment.tail_name == "tail"
            })
            .expect("some run draws the zero profile everywhere");
        let report = run_study_from(&sc, run);
        for o in &report.points[0].estimates {
            assert!(o.eps_pct < 1e-9, "{:?}", o);
        }
    }

    fn run_study_from(sc: &Scenario, run: u64) -> RunRecord {
        sc.run_one(run, &Method::STANDARD, &[1])
    }

    #[test]
    fn study_is_deterministic_across_jobs() {
        let sc = small(4, Mode::Ac).prepare().unwrap();
        let a = run_study(&sc, 6, &Method::STANDARD, &[1, 10], Parallelism { jobs: Some(1) }).unwrap();
        let b = run_study(&sc, 6, &Method::STANDARD, &[1, 10], Parallelism { jobs: Some(4) }).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        // run isolation
        assert_eq!(sc.run_one(3, &Method::STANDARD, &[1, 10]), a.runs[3]);
        for agg in &a.aggregates {
            let s = agg.eps;
            assert!(s.q25 <= s.median && s.median <= s.q75 && s.q75 <= s.max);
        }
        let mf = max_participation_stats(&a);
        assert_eq!(mf.len(), 2);
        assert_eq!(mf[1].dt_s, 600.0);
    }

    #[test]
    fn study_rejects_bad_arguments() {
        let sc = small(4, Mode::Ac).prepare().unwrap();
        assert!(run_study(&sc, 0, &Method::STANDARD, &[1], Parallelism::default()).is_err());
        assert!(run_study(&sc, 1, &[], &[1], Parallelism::default()).is_err());
        assert!(run_study(&sc, 1, &Method::STANDARD, &[0], Parallelism::default()).is_err());
        assert!(run_study(&sc, 1, &[Method::K2Exact], &[1], Parallelism::default()).is_err());
    }

    #[test]
    fn failing_runs_abort_study() {
        // every profile all-zero: no valid samples, every run fails
        let cfg = ScenarioConfig { steps: 5, ..small(3, Mode::Ac) };
        let pool = ProfileSet::new(60.0, vec!["z".into()], vec![vec![0.0; 5]]).unwrap();
        let sc = Scenario::from_pool(cfg, pool).unwrap();
        match run_study(&sc, 5, &Method::STANDARD, &[1], Parallelism::default()) {
            Err(Error::StudyFailed { failed, total, .. }) => assert_eq!((failed, total), (5, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn loads_downsampling_resimulates() {
        let mut cfg = small(4, Mode::Ac);
        cfg.downsample_mode = DownsampleMode::Loads;
        let sc = cfg.prepare().unwrap();
        let r = sc.run_one(0, &Method::STANDARD, &[1, 60]);
        assert!(r.error.is_none(), "{:?}", r.error);
        assert_eq!(r.point(60).unwrap().dt_s, 3600.0);
        assert_eq!(r.point(60).unwrap().counts.valid, 2);
    }
}
