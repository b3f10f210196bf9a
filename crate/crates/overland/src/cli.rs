//! Command-line front end: `build-dsm`, `run` and `validate`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::dsm::{build_dsm, read_features, ClassSelection};
use crate::error::{Error, Result};
use crate::raster::RasterGrid;
use crate::simulation::{run, Scenario};
use crate::solver::SolverOptions;
use crate::validation::{validation_report, write_report};

/// Environment variable supplying a default block count for `run`.
pub const BLOCKS_ENV: &str = "OVERLAND_BLOCKS";

#[derive(Debug, Parser)]
#[command(name = "overland", version, about = "Shallow-water overland flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Build a hydraulic DSM from a DTM and classified vector features.
    BuildDsm {
        #[arg(long)]
        dtm: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// File listing the class ids to keep.
        #[arg(long)]
        classes: PathBuf,
        /// Distance below which open lines are closed into polygons (m).
        #[arg(long, default_value_t = 0.1)]
        close_tolerance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a flood scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Number of domain blocks; overrides the config file and OVERLAND_BLOCKS.
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Run an analytical benchmark at n/2 and n cells.
    Validate {
        #[arg(long, value_parser = ["lake-at-rest", "lake-emerged", "ritter", "stoker"])]
        case: String,
        #[arg(long, value_parser = clap::value_parser!(u64).range(10..))]
        n: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Parses arguments, program name first. `--help` and `--version` come
/// back as a clap error whose `exit_code()` is 0.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Command, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args).map(|c| c.command)
}

fn blocks_from_env() -> Result<Option<usize>> {
    match std::env::var(BLOCKS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{BLOCKS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Executes a parsed command.
pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::BuildDsm {
            dtm,
            features,
            classes,
            close_tolerance,
            out,
        } => {
            let dtm = RasterGrid::read(&dtm)?;
            let feats = read_features(&features)?;
            let sel = ClassSelection::read(&classes)?;
            let dsm = build_dsm(&dtm, &feats, &sel, close_tolerance)?;
            dsm.write(&out, None)?;
            log::info!("wrote {}", out.display());
            Ok(())
        }
        Command::Run { config, blocks } => {
            let mut scn = Scenario::load(&config)?;
            // flag > environment > config file
            let blocks = match blocks {
                Some(b) => Some(b),
                None => blocks_from_env()?,
            };
            if let Some(b) = blocks {
                scn.options.blocks = b;
            }
            run(scn).map(|_| ())
        }
        Command::Validate { case, n, report } => {
            let (rows, csv) = validation_report(&case, n as usize, SolverOptions::default())?;
            for r in &rows {
                log::info!("{} n={} L1(h)={:.3e} Linf(h)={:.3e}", r.name, r.n, r.norms_h.l1, r.norms_h.linf);
            }
            match report {
                Some(path) => write_report(path, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

/// Maps an outcome to the process exit code: 0 success, 1 usage or
/// configuration problems, 2 numerical aborts.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_numerical() => 2,
        Err(_) => 1,
    }
}

/// Parses, runs and reports; returns the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cmd = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 { 0 } else { 1 };
        }
    };
    let result = execute(cmd);
    if let Err(e) = &result {
        log::error!("{e}");
    }
    exit_code(&result)
}
