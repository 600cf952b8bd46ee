use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use super::config::{parse_config_for, Experiment, ExperimentConfig, OutputFormat};
use super::run::{run, write_outputs};
use super::{CliError, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "uncertainty-lab", version, about = "Fisher-information uncertainty experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo benchmark of location estimators against the Cramér–Rao bound.
    Estimate(CommonArgs),
    /// Evolve a classical Hamilton-Jacobi ensemble.
    EvolveClassical(CommonArgs),
    /// Evolve the Fisher-augmented (Madelung) ensemble.
    EvolveQuantum(CommonArgs),
    /// Run the Madelung engine and the wavefunction solver side by side.
    Compare(CommonArgs),
    /// Gamma-ray microscope indeterminacy product.
    Microscope(CommonArgs),
    /// Tabulate Fisher length, momentum spreads and products over time.
    UncertaintyReport(CommonArgs),
}

impl Command {
    fn split(&self) -> (Experiment, &CommonArgs) {
        match self {
            Command::Estimate(a) => (Experiment::Estimate, a),
            Command::EvolveClassical(a) => (Experiment::EvolveClassical, a),
            Command::EvolveQuantum(a) => (Experiment::EvolveQuantum, a),
            Command::Compare(a) => (Experiment::Compare, a),
            Command::Microscope(a) => (Experiment::Microscope, a),
            Command::UncertaintyReport(a) => (Experiment::UncertaintyReport, a),
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Which files to write (overrides `output.format`).
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// RNG seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write a gnuplot script for the CSV outputs.
    #[arg(long)]
    pub emit_plots: bool,
}

fn load(experiment: Experiment, args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?,
        None => String::new(),
    };
    let mut config = parse_config_for(&text, experiment)?;
    if let Some(dir) = &args.output {
        config.output.dir = dir.clone();
    }
    if let Some(format) = args.format {
        config.output.format = format;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.output.emit_plots |= args.emit_plots;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let (experiment, args) = cli.command.split();
    let config = load(experiment, args)?;
    let start = Instant::now();
    let output = run(&config)?;
    let seconds = start.elapsed().as_secs_f64();
    write_outputs(&output, &config.output.dir, seconds)?;
    for check in output.report.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "check failed: {} = {:e} (limit {:e}): {}",
            check.name, check.value, check.limit, check.description
        );
    }
    Ok(if output.report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Parses `args` (including the program name), runs and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
