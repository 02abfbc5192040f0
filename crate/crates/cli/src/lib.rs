//! Command-line front end: system files in, reports out.

pub mod commands;
pub mod error;
pub mod system;

use std::path::{Path, PathBuf};

pub use commands::{Options, Output};
pub use error::{CliError, SyntaxError};
pub use system::{parse_system, SystemFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Derive,
    Check,
    Simulate,
    Reduce,
    Find,
}

pub fn execute(cmd: Command, file: &SystemFile, opts: &Options) -> Result<Output, CliError> {
    match cmd {
        Command::Derive => commands::derive(file, opts),
        Command::Check => commands::check(file, opts),
        Command::Simulate => commands::simulate(file, opts),
        Command::Reduce => commands::reduce(file, opts),
        Command::Find => commands::find(file, opts),
    }
}

/// Where the summary of a command writing its main output to `out` goes.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Seed from the flag, then `FORCEDMECH_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64, CliError> {
    match (flag, env) {
        (Some(s), _) => Ok(s),
        (None, Some(v)) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("FORCEDMECH_SEED is not an unsigned integer: `{v}`"))
        }),
        (None, None) => Ok(0),
    }
}

/// Parse, run and write the outputs. The main output goes to `out` or
/// stdout; a summary goes next to `out` or to stderr.
pub fn run(
    cmd: Command,
    system: &Path,
    out: Option<&Path>,
    opts: &Options,
) -> Result<(), CliError> {
    let file = parse_system(system)?;
    let output = execute(cmd, &file, opts)?;
    let write = |path: &Path, text: &str| {
        std::fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
    };
    match out {
        Some(path) => {
            write(path, &output.main)?;
            if let Some(s) = &output.summary {
                write(&summary_path(path), s)?;
            }
        }
        None => {
            print!("{}", output.main);
            if let Some(s) = &output.summary {
                eprint!("{s}");
            }
        }
    }
    match output.deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
