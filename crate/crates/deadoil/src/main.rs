use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};
use deadoil::config::CONFIG_HELP;
use deadoil::run::{run, Command};

/// Finite-difference solver and source control for the steady dead-oil
/// isotherm system.
#[derive(Parser)]
#[command(name = "deadoil", version, after_long_help = CONFIG_HELP)]
#[command(
    after_help = "Exit status: 0 success, 2 nonconvergence, 3 config error, 4 verification failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (see `deadoil help <command>` for keys and defaults)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, overriding [output] directory
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Seed for random draws in verification (default 24301)
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the state equations for [control] source
    #[command(after_long_help = CONFIG_HELP)]
    Solve(Common),
    /// Optimize the source against the configured targets
    #[command(after_long_help = CONFIG_HELP)]
    Optimize(Common),
    /// Run the verification cases listed under [verify]
    #[command(after_long_help = CONFIG_HELP)]
    Verify(Common),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            process::exit(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let (cmd, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    let code = run(cmd, &args.config, args.output.as_deref(), args.seed);
    process::exit(code as i32);
}
