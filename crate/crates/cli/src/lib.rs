//! Command-line workflows over `junctionlab-core`: simulate IV traces, convert
//! lock-in data, fit gaps, sweep transmon T1 and estimate bilayer gaps.
//!
//! Exit codes: 0 success, 1 numerical or runtime failure, 2 usage, config or
//! parse error. Every written file names the `<out>.manifest` that records
//! the resolved configuration, input digests, version and time of the run.

// `!(a < b)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_fit, cmd_ingest, cmd_proximity, cmd_simulate, cmd_t1, parse_report, IngestOptions,
    IngestTarget,
};
pub use error::CliError;
pub use manifest::RunManifest;

/// Environment variable capping the worker threads of parallel sweeps.
pub const THREADS_ENV: &str = "JUNCTIONLAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "junctionlab",
    version,
    about = "Asymmetric-gap tunnel junction toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an IV curve from a junction config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also draw the curve as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit gap, resistance and transparency to an IV or conductance trace.
    Fit {
        data: PathBuf,
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also draw data and fitted model as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Quasiparticle-limited T1 versus temperature.
    T1 {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cooper-limit gap of a bilayer, or the coupling matching a measured gap.
    Proximity { config: PathBuf },
    /// Convert a trace between conductance and IV.
    Ingest {
        data: PathBuf,
        #[arg(long)]
        to: IngestTarget,
        #[arg(long)]
        out: PathBuf,
        /// Bias (uV) at which the integrated current is pinned.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        anchor_bias: f64,
        /// Current (nA) at the anchor bias.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        anchor_current: f64,
        /// Multiplies the signal column.
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        /// Overrides the header units, e.g. `mV`; needs --signal-unit too.
        #[arg(long, requires = "signal_unit")]
        bias_unit: Option<junctionlab_core::Unit>,
        #[arg(long, requires = "bias_unit")]
        signal_unit: Option<junctionlab_core::Unit>,
    },
}

/// Caps rayon's global pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Usage(format!("{THREADS_ENV}={raw} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

/// Runs one parsed command and returns its standard output.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { config, out, svg } => cmd_simulate(&config, &out, svg.as_deref()),
        Command::Fit {
            data,
            config,
            out,
            svg,
        } => cmd_fit(&data, &config, &out, svg.as_deref()),
        Command::T1 { config, out } => cmd_t1(&config, &out),
        Command::Proximity { config } => cmd_proximity(&config),
        Command::Ingest {
            data,
            to,
            out,
            anchor_bias,
            anchor_current,
            gain,
            bias_unit,
            signal_unit,
        } => {
            let opts = IngestOptions {
                to,
                anchor: (anchor_bias, anchor_current),
                gain,
                units: bias_unit.zip(signal_unit),
            };
            cmd_ingest(&data, &opts, &out)
        }
    }
}
