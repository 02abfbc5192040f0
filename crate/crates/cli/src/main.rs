use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use forcedmech_cli::{resolve_seed, run, Command, Options};

#[derive(Parser)]
#[command(
    name = "forcedmech",
    version,
    about = "Symmetries, conserved quantities and simulation of forced Lagrangian systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the forced Euler-Lagrange and Hamilton equations.
    Derive(Args),
    /// Check each candidate symmetry and report as JSON.
    Check(Args),
    /// Integrate with RK4 and write the trajectory as CSV.
    Simulate(Args),
    /// Eliminate a cyclic coordinate at fixed momentum.
    Reduce(Args),
    /// Search for polynomial symmetries on Q.
    Find(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    degree: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Derive(a) => (Command::Derive, a),
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Reduce(a) => (Command::Reduce, a),
        Cmd::Find(a) => (Command::Find, a),
    };
    let env = std::env::var("FORCEDMECH_SEED").ok();
    let result = resolve_seed(args.seed, env.as_deref()).and_then(|seed| {
        let opts = Options {
            seed,
            h: args.h,
            t_end: args.t,
            degree: args.degree,
        };
        run(cmd, &args.system, args.out.as_deref(), &opts)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
