use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use branch_pi::model::parse_methods;
use branch_pi::Method;
use branch_pi_cli::{cmd_estimate, cmd_profiles, cmd_simulate, cmd_study, parse_factors, CliError, StudyKind, StudyOverrides};

#[derive(Debug, Parser)]
#[command(name = "branch-pi", version, about = "Branch impedance estimation from boundary measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write measurements plus a ground-truth sidecar.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the total impedance from a measurement CSV.
    Estimate {
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, default_value = "mean_lb_ub,lin,lin_w,lin_w2")]
        methods: String,
        #[arg(long)]
        out: PathBuf,
        /// Sampling interval of the measurements in seconds.
        #[arg(long, default_value_t = 60.0)]
        dt: f64,
    },
    /// Run a Monte-Carlo study and write reports and plot-ready CSVs.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: StudyKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        factors: Option<String>,
    },
    /// Write synthetic household profiles as CSV.
    Profiles {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1440)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5000.0)]
        peak_w: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn methods(list: &str) -> Result<Vec<Method>, CliError> {
    parse_methods(list).map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
        Command::Estimate { measurements, methods: list, out, dt } => {
            cmd_estimate(&measurements, &methods(&list)?, &out, dt)
        }
        Command::Study { config, kind, out, jobs, seed, methods: m, factors } => {
            let ov = StudyOverrides {
                jobs,
                seed,
                methods: m.as_deref().map(methods).transpose()?,
                factors: factors.as_deref().map(parse_factors).transpose()?,
            };
            cmd_study(&config, kind, &out, &ov)
        }
        Command::Profiles { n, steps, seed, peak_w, out } => cmd_profiles(n, steps, seed, peak_w, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
