use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ttgrape_cli::{run_experiment, CliError, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "ttgrape", version, about = "Tensor-train GRAPE for spin-chain state transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the initial state under the configured pulse.
    Propagate(RunArgs),
    /// Optimise the pulse for the configured state transfer.
    Optimize(RunArgs),
    /// Check a config and print it with all defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the random initial pulse.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    target_infidelity: Option<f64>,
}

impl RunArgs {
    fn load(&self, mode: Mode) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.mode = mode;
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.pulse.seed = seed;
        }
        if let Some(n) = self.max_iters {
            cfg.grape.max_iterations = n;
        }
        if let Some(x) = self.target_infidelity {
            cfg.grape.target_infidelity = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, mode) = match cli.command {
        Command::Validate { config } => {
            print!("{}", ExperimentConfig::load(&config)?.emit());
            return Ok(());
        }
        Command::Propagate(a) => (a, Mode::Propagate),
        Command::Optimize(a) => (a, Mode::Optimize),
    };
    let cfg = args.load(mode)?;
    let summary = run_experiment(&cfg)?;
    println!(
        "{}: {} (infidelity {:.6e}, {:.1} s) -> {}",
        summary.mode,
        summary.termination,
        summary.final_infidelity,
        summary.wall_seconds,
        cfg.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
