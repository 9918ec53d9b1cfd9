use std::path::PathBuf;
use std::process::ExitCode;

use ammfg::{run_experiment, CliError, RunConfig, Subcommand};
use clap::{Args, Parser};

/// Mean-field and finite-N solvers for traders on a constant-product pool.
#[derive(Debug, Parser)]
#[command(version)]
enum Cli {
    /// Parse and check the configuration; writes the manifest only.
    Validate(RunArgs),
    /// Solve the HJB equation against a zero mean flow.
    Hjb(RunArgs),
    /// Solve for the mean-field equilibrium and verify it.
    Mfg(RunArgs),
    /// Play the equilibrium feedback in the N-player game.
    Game(RunArgs),
    /// Estimate the Nash gap of the equilibrium feedback over player counts.
    NashSweep(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "AMMFG_THREADS")]
    threads: Option<usize>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cmd: Subcommand, args: &RunArgs) -> Result<(), CliError> {
    let source = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::parse(&source)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))?;
    pool.install(|| run_experiment(&cfg, &source, cmd, &args.out))
}

fn main() -> ExitCode {
    let (cmd, args) = match Cli::parse() {
        Cli::Validate(a) => (Subcommand::Validate, a),
        Cli::Hjb(a) => (Subcommand::Hjb, a),
        Cli::Mfg(a) => (Subcommand::Mfg, a),
        Cli::Game(a) => (Subcommand::Game, a),
        Cli::NashSweep(a) => (Subcommand::NashSweep, a),
    };
    match execute(cmd, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
