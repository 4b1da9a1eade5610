//! Command implementations behind the `branch-pi` binary.
//!
//! Exit codes: 0 ok, 1 input/validation, 2 runtime, 3 insufficient evidence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use branch_pi::bounds::{count_samples, derive_samples, max_participation, SampleCounts, DEFAULT_I_FLOOR};
use branch_pi::estimators::estimate;
use branch_pi::io::{load_measurements, save_measurements, GroundTruth};
use branch_pi::montecarlo::{max_participation_stats, run_study, Parallelism, ScenarioConfig, StudyReport};
use branch_pi::profiles::{generate_synthetic, write_profiles_csv};
use branch_pi::{EstimationResult, Method};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Evidence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Evidence(_) => 3,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn classify(e: branch_pi::Error) -> CliError {
    use branch_pi::Error as E;
    match e {
        E::EmptyEvidence(_) | E::SingularDesign(_) => CliError::Evidence(e.to_string()),
        E::Diverged { .. } | E::Infeasible { .. } | E::StudyFailed { .. } => CliError::Runtime(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

fn read_config_text(path: &Path) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("config not found: {}", path.display())));
    }
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Reads a scenario TOML file. Relative CSV profile paths resolve against the config's directory.
pub fn load_scenario_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = read_config_text(path)?;
    let mut cfg: ScenarioConfig =
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    resolve_profile_path(&mut cfg, path);
    cfg.validate().map_err(input)?;
    Ok(cfg)
}

fn resolve_profile_path(cfg: &mut ScenarioConfig, config_path: &Path) {
    if let branch_pi::montecarlo::ProfileSource::Csv { path } = &mut cfg.profiles {
        if path.is_relative() {
            if let Some(dir) = config_path.parent() {
                *path = dir.join(&*path);
            }
        }
    }
}

/// Study file: a `[scenario]` table plus the sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default = "default_factors")]
    pub factors: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub scenario: ScenarioConfig,
}

fn default_n_s() -> usize {
    150
}
fn default_k_values() -> Vec<usize> {
    (4..=14).collect()
}
fn default_factors() -> Vec<usize> {
    vec![1, 5, 15, 30, 60]
}
fn default_methods() -> Vec<Method> {
    Method::STANDARD.to_vec()
}

pub fn load_study_config(path: &Path) -> Result<StudyConfig, CliError> {
    let text = read_config_text(path)?;
    let mut cfg: StudyConfig =
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    resolve_profile_path(&mut cfg.scenario, path);
    cfg.scenario.validate().map_err(input)?;
    if cfg.n_s == 0 {
        return Err(CliError::Input("n_s must be >= 1".into()));
    }
    Ok(cfg)
}

/// Sidecar path for a measurement file: `run.csv` → `run.truth.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

pub fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = load_scenario_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let scenario = cfg.prepare().map_err(input)?;
    let sampled = scenario.sample(0).map_err(input)?;
    let series = scenario.simulate(&sampled).map_err(runtime)?;

    save_measurements(&series, out).map_err(runtime)?;
    let truth = GroundTruth::from_branch(&sampled.branch, cfg.seed);
    let json = serde_json::to_string_pretty(&truth).map_err(runtime)?;
    fs::write(sidecar_path(out), json).map_err(runtime)?;

    let failed = series.samples().iter().filter(|s| !s.is_finite()).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "power flow failed at {failed} of {} steps (written as NaN)",
            series.len()
        )));
    }
    log::info!("wrote {} steps to {}", series.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub steps: usize,
    pub counts: SampleCounts,
    pub max_f: Option<f64>,
    pub results: Vec<EstimationResult>,
}

/// Runs the chosen methods on a measurement CSV.
pub fn estimate_file(measurements: &Path, methods: &[Method], dt_s: f64, i_floor: f64) -> Result<EstimateReport, CliError> {
    if !measurements.exists() {
        return Err(CliError::Input(format!("measurements not found: {}", measurements.display())));
    }
    let series = load_measurements(measurements, dt_s).map_err(input)?;
    let samples = derive_samples(&series, i_floor);
    let counts = count_samples(&samples);
    let results = methods
        .iter()
        .map(|&m| estimate(m, &series, &samples).map_err(classify))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EstimateReport {
        steps: series.len(),
        counts,
        max_f: max_participation(&samples),
        results,
    })
}

pub fn cmd_estimate(measurements: &Path, methods: &[Method], out: &Path, dt_s: f64) -> Result<(), CliError> {
    let report = estimate_file(measurements, methods, dt_s, DEFAULT_I_FLOOR)?;
    let json = serde_json::to_string_pretty(&report).map_err(runtime)?;
    fs::write(out, json).map_err(runtime)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum StudyKind {
    KSweep,
    DtSweep,
    MethodTable,
}

#[derive(Debug, Clone, Default)]
pub struct StudyOverrides {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub factors: Option<Vec<usize>>,
}

fn study_at(cfg: &ScenarioConfig, n_s: usize, methods: &[Method], factors: &[usize], jobs: Option<usize>) -> Result<StudyReport, CliError> {
    let scenario = cfg.prepare().map_err(input)?;
    run_study(&scenario, n_s, methods, factors, Parallelism { jobs }).map_err(classify)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(path, json).map_err(runtime)
}

fn max_f_rows(csv: &mut String, axis: &str, report: &StudyReport, factor: usize) {
    for stats in max_participation_stats(report).into_iter().filter(|m| m.factor == factor) {
        for (run, f) in stats.per_run {
            let _ = writeln!(csv, "{axis},{run},{f}");
        }
    }
}

/// Runs one of the figure-ready studies and writes reports plus flat CSVs into `out_dir`.
pub fn cmd_study(config: &Path, kind: StudyKind, out_dir: &Path, ov: &StudyOverrides) -> Result<(), CliError> {
    let mut cfg = load_study_config(config)?;
    if let Some(seed) = ov.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(m) = &ov.methods {
        cfg.methods = m.clone();
    }
    if let Some(f) = &ov.factors {
        cfg.factors = f.clone();
    }
    fs::create_dir_all(out_dir).map_err(runtime)?;

    match kind {
        StudyKind::KSweep => {
            let mut table = String::from("k,method,q25,median,q75\n");
            let mut max_f = String::from("k,run_index,max_f\n");
            for &k in &cfg.k_values {
                let scenario = ScenarioConfig { k, ..cfg.scenario.clone() };
                let report = study_at(&scenario, cfg.n_s, &cfg.methods, &[1], ov.jobs)?;
                write_json(&out_dir.join(format!("report_k{k}.json")), &report)?;
                for agg in &report.aggregates {
                    let _ = writeln!(table, "{k},{},{},{},{}", agg.method, agg.eps.q25, agg.eps.median, agg.eps.q75);
                }
                max_f_rows(&mut max_f, &k.to_string(), &report, 1);
            }
            fs::write(out_dir.join("k_sweep.csv"), table).map_err(runtime)?;
            fs::write(out_dir.join("max_f.csv"), max_f).map_err(runtime)?;
        }
        StudyKind::DtSweep => {
            let report = study_at(&cfg.scenario, cfg.n_s, &cfg.methods, &cfg.factors, ov.jobs)?;
            write_json(&out_dir.join("report.json"), &report)?;
            let mut table = String::from("dt_s,method,mean_eps\n");
            for agg in &report.aggregates {
                let _ = writeln!(table, "{},{},{}", agg.dt_s, agg.method, agg.eps.mean);
            }
            let mut max_f = String::from("dt_s,run_index,max_f\n");
            for stats in max_participation_stats(&report) {
                for (run, f) in stats.per_run {
                    let _ = writeln!(max_f, "{},{run},{f}", stats.dt_s);
                }
            }
            fs::write(out_dir.join("dt_sweep.csv"), table).map_err(runtime)?;
            fs::write(out_dir.join("max_f.csv"), max_f).map_err(runtime)?;
        }
        StudyKind::MethodTable => {
            let report = study_at(&cfg.scenario, cfg.n_s, &cfg.methods, &[1], ov.jobs)?;
            write_json(&out_dir.join("report.json"), &report)?;
            let mut table = String::from("method,median,q75,max\n");
            for agg in &report.aggregates {
                let _ = writeln!(table, "{},{},{},{}", agg.method, agg.eps.median, agg.eps.q75, agg.eps.max);
            }
            let mut max_f = String::from("k,run_index,max_f\n");
            max_f_rows(&mut max_f, &cfg.scenario.k.to_string(), &report, 1);
            fs::write(out_dir.join("method_table.csv"), table).map_err(runtime)?;
            fs::write(out_dir.join("max_f.csv"), max_f).map_err(runtime)?;
        }
    }
    Ok(())
}

pub fn cmd_profiles(n: usize, steps: usize, seed: u64, peak_w: f64, out: &Path) -> Result<(), CliError> {
    let set = generate_synthetic(n, steps, seed, peak_w).map_err(input)?;
    let file = fs::File::create(out).map_err(runtime)?;
    write_profiles_csv(&set, std::io::BufWriter::new(file)).map_err(runtime)
}

pub fn parse_factors(list: &str) -> Result<Vec<usize>, CliError> {
    let factors = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|f| *f >= 1)
                .ok_or_else(|| CliError::Input(format!("invalid downsample factor `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if factors.is_empty() {
        return Err(CliError::Input("factor list is empty".into()));
    }
    Ok(factors)
}
