use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lm_penalty::cli::{cmd_check, cmd_compare, cmd_run, cmd_verify, Mode};

/// Levenberg–Marquardt penalty dynamics: simulate, verify, audit, compare.
#[derive(Parser)]
#[command(name = "lmpen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate (or iterate) a configuration and write trace.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Continuous)]
        mode: Mode,
    },
    /// Check a trace against the reference solution and write report.json.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Continuous)]
        mode: Mode,
    },
    /// Audit the hypotheses on the schedules and the penalty.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare continuous and discrete trajectories as mu halves.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LMPEN_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, mode } => cmd_run(&config, mode, &out),
        Command::Verify { config, trace, out, mode } => cmd_verify(&config, &trace, out.as_deref(), mode),
        Command::Check { config } => cmd_check(&config),
        Command::Compare { config, out } => cmd_compare(&config, &out),
    };
    ExitCode::from(code)
}
