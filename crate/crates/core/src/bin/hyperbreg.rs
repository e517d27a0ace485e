use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hyperbreg::experiment::{self, Command, ExperimentConfig, RunError};

/// Galerkin solver and regularity experiments for second-order evolution equations.
#[derive(Debug, Parser)]
#[command(name = "hyperbreg", version)]
struct Cli {
    /// One of solve, derivatives, compat, frechet-test, convergence, energy.
    command: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `k` from the config.
    #[arg(long)]
    k: Option<usize>,
    /// Overrides `lin_tol` from the config.
    #[arg(long = "lin-tol")]
    lin_tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hyperbreg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf, RunError> {
    let command = Command::parse(&cli.command).ok_or_else(|| {
        let valid: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
        RunError::Invalid(format!("unknown command {:?}; valid commands: {}", cli.command, valid.join(", ")))
    })?;
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.command != command {
        return Err(RunError::Invalid(format!(
            "command {} does not match config command {}",
            command.name(),
            cfg.command.name()
        )));
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(tol) = cli.lin_tol {
        cfg.lin_tol = tol;
    }
    experiment::run(&cfg, &cli.out)
}
