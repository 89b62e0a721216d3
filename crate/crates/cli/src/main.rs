use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stiefel_priors_cli::{execute, init_threads, parse_config, parse_override, CliError, Command};

#[derive(Parser)]
#[command(name = "stiefel-priors", version, about = "Structured priors on the Stiefel manifold")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set hmc.draws=500` or `--set entry_law.ell=0.2`.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Draw Q from a structured prior.
    SamplePrior(Common),
    /// Polar projection of a matrix onto the Stiefel manifold.
    Project(Common),
    /// Run a theory experiment preset.
    TheoryCheck(Common),
    /// Fit the network eigenmodel.
    FitEigenmodel(Common),
    /// Fit the smooth model-based SVD.
    FitSvd(Common),
    /// Convergence diagnostics for a draws table.
    Diagnose(Common),
    /// Run whatever command the config file names.
    Run(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cmd, common) = match cli.command {
        Sub::SamplePrior(c) => (Some(Command::SamplePrior), c),
        Sub::Project(c) => (Some(Command::Project), c),
        Sub::TheoryCheck(c) => (Some(Command::TheoryCheck), c),
        Sub::FitEigenmodel(c) => (Some(Command::FitEigenmodel), c),
        Sub::FitSvd(c) => (Some(Command::FitSvd), c),
        Sub::Diagnose(c) => (Some(Command::Diagnose), c),
        Sub::Run(c) => (None, c),
    };
    let text = match &common.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))?,
        ),
        None => None,
    };
    let overrides = common
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = parse_config(text.as_deref(), cmd, &overrides)?;
    if common.print_config {
        emit(&cfg.normal_form());
        return Ok(());
    }
    init_threads()?;
    let a = execute(&cfg)?;
    let status = json!({
        "status": "ok",
        "command": cfg.command().name(),
        "output_dir": cfg.output_dir(),
        "outputs": a.files,
        "summary": a.summary,
    });
    emit(&format!("{status}\n"));
    Ok(())
}

// A closed pipe (`| head`) is not an error worth a panic.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
