//! Acceptance suite. Runs with a custom harness so every criterion prints
//! exactly one PASS/FAIL line, even without `--nocapture`.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use branch_pi::bounds::{derive_samples, tightest_bounds, DEFAULT_I_FLOOR};
use branch_pi::estimators::{estimate, estimate_k2_exact, ols_fit, wls_fit};
use branch_pi::io::{load_measurements, save_measurements};
use branch_pi::montecarlo::{epsilon, max_participation_stats, run_study, Parallelism, Scenario, ScenarioConfig, StudyReport};
use branch_pi::profiles::{generate_synthetic, SYNTHETIC_DT_S};
use branch_pi::simulator::{run_series, LoadAssignment, LoadUnit, SolverOptions};
use branch_pi::{build_branch, CableParams, Method, Mode};

/// Relative slack for comparisons that hold exactly in real arithmetic.
const FP_REL: f64 = 1e-12;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn r_per_m() -> f64 {
    0.208 / 1000.0
}

fn dc_scenario(k: usize, seed: u64, pool: &branch_pi::profiles::ProfileSet) -> Scenario {
    let mut cfg = ScenarioConfig::new(k);
    cfg.mode = Mode::Dc;
    cfg.seed = seed;
    Scenario::from_pool(cfg, pool.clone()).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let pool = generate_synthetic(100, 1440, 7, 5000.0).unwrap();
    let mut violations = 0usize;
    let mut order_violations = 0usize;
    let mut highest_f_tightest = 0usize;
    let runs = 200;
    for i in 0..runs {
        let k = 2 + (i % 7) as usize;
        let scenario = dc_scenario(k, 1000 + i, &pool);
        let sampled = scenario.sample(0).unwrap();
        // independent truth from the drawn lengths
        let z_true: f64 = sampled.branch.segments().iter().map(|s| s.length_m * r_per_m()).sum();
        let series = scenario.simulate(&sampled).unwrap();
        let samples = derive_samples(&series, DEFAULT_I_FLOOR);
        for s in samples.iter().filter(|s| s.is_valid()) {
            if s.z_lb > z_true * (1.0 + FP_REL) {
                violations += 1;
            }
            if let Some(ub) = s.z_ub {
                if ub < z_true * (1.0 - FP_REL) {
                    violations += 1;
                }
            }
        }
        let tb = tightest_bounds(&samples).unwrap();
        if let Some(ub) = tb.min_ub {
            if tb.max_lb > ub * (1.0 + FP_REL) {
                order_violations += 1;
            }
        }
        let with_ub: Vec<_> = samples.iter().filter(|s| s.is_valid() && s.z_ub.is_some()).collect();
        let width = |s: &&branch_pi::DerivedSample| s.z_ub.unwrap() - s.z_lb;
        let best_f = with_ub.iter().max_by(|a, b| a.f.total_cmp(&b.f)).unwrap();
        let min_width = with_ub.iter().map(width).fold(f64::INFINITY, f64::min);
        if width(best_f) <= min_width * (1.0 + 1e-9) + z_true * FP_REL {
            highest_f_tightest += 1;
        }
    }
    let elapsed = start.elapsed();
    let share = highest_f_tightest as f64 / runs as f64;
    let msg = format!(
        "{runs} DC runs, bound violations {violations}, max_lb>min_ub {order_violations}, \
         highest-f tightest {:.1}%, {:.2?}",
        share * 100.0,
        elapsed
    );
    check(
        violations == 0 && order_violations == 0 && share >= 0.95 && elapsed < Duration::from_secs(10),
        msg.clone(),
        msg,
    )
}

fn criterion_2() -> Outcome {
    let pool = generate_synthetic(100, 1440, 8, 5000.0).unwrap();
    let scenarios: Vec<_> = (0..20u64)
        .map(|i| {
            let scenario = dc_scenario(2 + (i % 7) as usize, 2000 + i, &pool);
            let sampled = scenario.sample(0).unwrap();
            (scenario, sampled)
        })
        .collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (scenario, sampled) in &scenarios {
        let mut loads = sampled.assignment.to_dc_currents(scenario.config().source_v);
        let t0 = loads.tail.iter().position(|&i| i > 0.0).unwrap();
        for series in &mut loads.loads {
            series[t0] = 0.0;
        }
        let series = run_series(&sampled.branch, scenario.config().source_v, &loads, 60.0, &SolverOptions::default()).unwrap();
        let samples = derive_samples(&series, DEFAULT_I_FLOOR);
        let z_true: f64 = sampled.branch.segments().iter().map(|s| s.length_m * r_per_m()).sum();
        for m in Method::STANDARD {
            let r = estimate(m, &series, &samples).unwrap();
            worst = worst.max(epsilon(z_true, r.z_hat).unwrap());
        }
    }
    let elapsed = start.elapsed();
    let msg = format!("20 DC runs with a zero-load step, worst eps {worst:.3e}%, {elapsed:.2?}");
    check(worst < 1e-6 && elapsed < Duration::from_secs(1), msg.clone(), msg)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let lengths = [rng.random_range(20.0..400.0), rng.random_range(20.0..400.0)];
        let branch = build_branch(&lengths, &CableParams::nayy_4x150(), Mode::Dc).unwrap();
        let steps = rng.random_range(2..8usize);
        let assignment = LoadAssignment {
            unit: LoadUnit::Amperes,
            names: vec!["mid".into()],
            tail_name: "tail".into(),
            loads: vec![(0..steps).map(|_| rng.random_range(0.5..30.0)).collect()],
            tail: (0..steps).map(|_| rng.random_range(0.5..30.0)).collect(),
        };
        let series = run_series(&branch, 400.0, &assignment, 60.0, &SolverOptions::default()).unwrap();
        let fit = estimate_k2_exact(&series).unwrap();
        let z1 = lengths[0] * r_per_m();
        let z2 = lengths[1] * r_per_m();
        worst = worst.max(((fit.z1 - z1) / z1).abs()).max(((fit.z2 - z2) / z2).abs());
    }
    let msg = format!("10 K=2 draws, worst per-segment relative error {worst:.3e}");
    check(worst < 1e-9, msg.clone(), msg)
}

fn pinv_line(points: &[(f64, f64)], weights: &[f64]) -> (f64, f64) {
    let n = points.len();
    let a = DMatrix::from_fn(n, 2, |r, c| weights[r].sqrt() * if c == 0 { points[r].0 } else { 1.0 });
    let b = DVector::from_fn(n, |r, _| weights[r].sqrt() * points[r].1);
    let x = a.pseudo_inverse(1e-14).unwrap() * b;
    (x[0], x[1])
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut worst_uniform = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(5..40usize);
        let slope = rng.random_range(-2.0..2.0);
        let icpt = rng.random_range(0.0..2.0);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let f = rng.random_range(0.0..1.0);
                (f, slope * f + icpt + rng.random_range(-0.1..0.1))
            })
            .collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let fit = wls_fit(&points, &weights).unwrap();
        let (s, c) = pinv_line(&points, &weights);
        worst = worst.max((fit.beta0 - s).abs()).max((fit.beta1 - c).abs());

        let w = rng.random_range(0.1..10.0);
        let uni = wls_fit(&points, &vec![w; n]).unwrap();
        let ols = ols_fit(&points).unwrap();
        worst_uniform = worst_uniform.max((uni.beta0 - ols.beta0).abs()).max((uni.beta1 - ols.beta1).abs());
    }
    let msg = format!("1000 systems, max deviation vs pseudo-inverse {worst:.3e}, uniform vs OLS {worst_uniform:.3e}");
    check(worst < 1e-10 && worst_uniform < 1e-12, msg.clone(), msg)
}

fn ac_study(k: usize, seed: u64, n_s: usize, factors: &[usize]) -> (StudyReport, Duration) {
    let mut cfg = ScenarioConfig::new(k);
    cfg.seed = seed;
    let scenario = cfg.prepare().unwrap();
    let start = Instant::now();
    let report = run_study(&scenario, n_s, &Method::STANDARD, factors, Parallelism { jobs: Some(8) }).unwrap();
    (report, start.elapsed())
}

fn median(report: &StudyReport, factor: usize, m: Method) -> f64 {
    report.aggregate(factor, m).unwrap().eps.median
}

fn criterion_5() -> Outcome {
    let mut details = Vec::new();
    let mut thresholds_ok = true;
    let mut ordering_seeds = 0;
    let mut slowest = Duration::ZERO;
    for seed in 1..=3u64 {
        let (r4, t4) = ac_study(4, seed, 150, &[1]);
        let (r14, t14) = ac_study(14, seed, 150, &[1]);
        slowest = slowest.max(t4).max(t14);
        let worst4 = Method::STANDARD.iter().map(|&m| median(&r4, 1, m)).fold(0.0, f64::max);
        let lin = median(&r14, 1, Method::Lin);
        let lin_w = median(&r14, 1, Method::LinW);
        let mid = median(&r14, 1, Method::MeanLbUb);
        thresholds_ok &= worst4 < 5.0 && lin_w < 10.0;
        if lin_w < lin && lin_w < mid {
            ordering_seeds += 1;
        }
        details.push(format!(
            "seed {seed}: K=4 worst median {worst4:.2}%, K=14 lin_w {lin_w:.2}% lin {lin:.2}% mean_lb_ub {mid:.2}%"
        ));
    }
    let msg = format!(
        "{}; orderings held for {ordering_seeds}/3 seeds; slowest study {slowest:.2?}",
        details.join("; ")
    );
    check(
        thresholds_ok && ordering_seeds >= 2 && slowest < Duration::from_secs(300),
        msg.clone(),
        msg,
    )
}

fn criterion_6() -> Outcome {
    let factors = [1, 5, 15, 30, 60];
    let (report, _) = ac_study(14, 1, 150, &factors);
    let mut degraded = true;
    let mut parts = Vec::new();
    for m in Method::STANDARD {
        let fine = report.aggregate(1, m).unwrap().eps.mean;
        let coarse = report.aggregate(60, m).unwrap().eps.mean;
        degraded &= coarse > fine;
        parts.push(format!("{m} {fine:.2}->{coarse:.2}%"));
    }
    let stats = max_participation_stats(&report);
    let at = |factor: usize| stats.iter().find(|s| s.factor == factor).unwrap();
    let (fine, coarse) = (at(1), at(60));
    let mut lower = 0usize;
    for (run, f60) in &coarse.per_run {
        if let Some((_, f1)) = fine.per_run.iter().find(|(r, _)| r == run) {
            if f60 < f1 {
                lower += 1;
            }
        }
    }
    let share = lower as f64 / coarse.per_run.len() as f64;
    let msg = format!(
        "mean eps 1->60 min: {}; max f lower at 60 min in {:.1}% of runs (median {:.3}->{:.3})",
        parts.join(", "),
        share * 100.0,
        fine.summary.as_ref().unwrap().median,
        coarse.summary.as_ref().unwrap().median
    );
    check(degraded && share >= 0.90, msg.clone(), msg)
}

fn criterion_7() -> Outcome {
    let mut good = 0;
    let mut parts = Vec::new();
    for seed in 1..=3u64 {
        let medians: Vec<f64> = [4, 8, 14]
            .iter()
            .map(|&k| {
                let (r, _) = ac_study(k, seed, 50, &[1]);
                max_participation_stats(&r)[0].summary.as_ref().unwrap().median
            })
            .collect();
        if medians.windows(2).all(|w| w[1] < w[0]) {
            good += 1;
        }
        parts.push(format!("seed {seed}: {:.3}/{:.3}/{:.3}", medians[0], medians[1], medians[2]));
    }
    let msg = format!("median max f at K=4/8/14, {}; decreasing for {good}/3 seeds", parts.join(", "));
    check(good >= 2, msg.clone(), msg)
}

fn criterion_8() -> Outcome {
    let mut cfg = ScenarioConfig::new(6);
    cfg.seed = 88;
    cfg.steps = 720;
    let scenario = cfg.prepare().unwrap();
    let run = |jobs| {
        let r = run_study(&scenario, 24, &Method::STANDARD, &[1, 15], Parallelism { jobs }).unwrap();
        serde_json::to_string(&r).unwrap()
    };
    let reference = run(Some(1));
    let identical = [Some(2), Some(4), Some(8), None].into_iter().all(|j| run(j) == reference);

    let dir = tempfile::tempdir().unwrap();
    let mut round_trip = true;
    for i in 0..5u64 {
        let sampled = scenario.sample(i).unwrap();
        let series = scenario.simulate(&sampled).unwrap();
        let path = dir.path().join(format!("run{i}.csv"));
        save_measurements(&series, &path).unwrap();
        let back = load_measurements(&path, SYNTHETIC_DT_S).unwrap();
        let (a, b) = (derive_samples(&series, DEFAULT_I_FLOOR), derive_samples(&back, DEFAULT_I_FLOOR));
        for m in Method::STANDARD {
            round_trip &= estimate(m, &series, &a).unwrap() == estimate(m, &back, &b).unwrap();
        }
    }
    let msg = format!("reports identical across jobs 1/2/4/8/default: {identical}; file round trip exact: {round_trip}");
    check(identical && round_trip, msg.clone(), msg)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 bound soundness", criterion_1),
        ("2 exact recovery at f = 1", criterion_2),
        ("3 K=2 exact identification", criterion_3),
        ("4 regression core oracle", criterion_4),
        ("5 method table bands", criterion_5),
        ("6 resolution degradation", criterion_6),
        ("7 max f vs K", criterion_7),
        ("8 determinism and round trip", criterion_8),
    ];
    // `cargo test -- --list` probes harness-less targets
    if std::env::args().any(|a| a == "--list") {
        for (name, _) in &criteria {
            println!("{name}: test");
        }
        return;
    }
    let mut failed = 0;
    for (name, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(Ok(msg)) => println!("PASS criterion {name}: {msg}"),
            Ok(Err(msg)) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name}: panicked");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
