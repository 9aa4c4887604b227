//! Batch front door for the phonon-counting toolkit: configuration-driven
//! simulation, fitting, calibration, and plot-data emission.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use commands::{CalibrationMethodArg, CommonArgs, OutputFormat};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "omct",
    version,
    about = "Simulation and inference for pulsed single-phonon-counting thermometry of optomechanical crystals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

impl Common {
    fn into_args(self) -> CommonArgs {
        CommonArgs {
            config_path: self.config,
            seed: self.seed,
            out_dir: self.out,
            format: self.format,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a pulsed phonon-counting run: histogram, true occupancy, manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit measured or simulated data.
    Fit {
        #[command(subcommand)]
        what: FitCommand,
    },
    /// Compute a thermometry calibration rate.
    Calibrate {
        /// Which calibration procedure to run.
        #[arg(value_enum)]
        method: CalibrationMethodArg,
        #[command(flatten)]
        common: Common,
    },
    /// Noise-equivalent phonon occupation vs photon number, per detuning.
    Nnep {
        #[command(flatten)]
        common: Common,
        /// Lower end of the photon-number sweep.
        #[arg(long, default_value_t = 10.0)]
        nc_min: f64,
        /// Upper end of the photon-number sweep.
        #[arg(long, default_value_t = 1e5)]
        nc_max: f64,
        /// Number of (log-spaced) sweep points.
        #[arg(long, default_value_t = 60)]
        points: usize,
    },
    /// Filter-stack transmission curve and optional pulse distortion.
    FilterResponse {
        #[command(flatten)]
        common: Common,
        /// Half-width of the detuning sweep (Hz).
        #[arg(long, default_value_t = 5e9)]
        span_hz: f64,
        /// Number of sweep points.
        #[arg(long, default_value_t = 401)]
        points: usize,
        /// Also propagate a square pulse of this duration (ns).
        #[arg(long)]
        pulse_ns: Option<f64>,
    },
}

#[derive(Subcommand)]
enum FitCommand {
    /// Bayesian pulse-occupancy fit of a click histogram.
    Pulse {
        #[command(flatten)]
        common: Common,
        /// Click histogram CSV (bin_start_s,bin_width_s,counts,repetitions).
        #[arg(long)]
        data: PathBuf,
        /// Pump envelope CSV (t_s,value); a square envelope from the config
        /// is synthesized when omitted.
        #[arg(long)]
        envelope: Option<PathBuf>,
    },
    /// Complex transparency-window fit of a coherent-response sweep.
    Eit {
        #[command(flatten)]
        common: Common,
        /// Sweep CSV (delta_hz,s_re,s_im,sigma).
        #[arg(long)]
        data: PathBuf,
    },
    /// Power-law fit y = [offset +] prefactor·x^exponent.
    Powerlaw {
        #[command(flatten)]
        common: Common,
        /// Points CSV (x,y,sigma).
        #[arg(long)]
        data: PathBuf,
        /// Include the additive offset term.
        #[arg(long)]
        offset: bool,
    },
    /// Exponential decay fit n(t) = amplitude·e^{−2π·rate·t} [+ floor].
    Ringdown {
        #[command(flatten)]
        common: Common,
        /// Points CSV (t_s,n,sigma).
        #[arg(long)]
        data: PathBuf,
        /// Include the additive floor term.
        #[arg(long)]
        floor: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common } => commands::cmd_simulate(&common.into_args()),
        Command::Fit { what } => match what {
            FitCommand::Pulse {
                common,
                data,
                envelope,
            } => commands::cmd_fit_pulse(&common.into_args(), &data, envelope.as_deref()),
            FitCommand::Eit { common, data } => commands::cmd_fit_eit(&common.into_args(), &data),
            FitCommand::Powerlaw {
                common,
                data,
                offset,
            } => commands::cmd_fit_powerlaw(&common.into_args(), &data, offset),
            FitCommand::Ringdown {
                common,
                data,
                floor,
            } => commands::cmd_fit_ringdown(&common.into_args(), &data, floor),
        },
        Command::Calibrate { method, common } => {
            commands::cmd_calibrate(&common.into_args(), method)
        }
        Command::Nnep {
            common,
            nc_min,
            nc_max,
            points,
        } => commands::cmd_nnep(&common.into_args(), nc_min, nc_max, points),
        Command::FilterResponse {
            common,
            span_hz,
            points,
            pulse_ns,
        } => commands::cmd_filter_response(&common.into_args(), span_hz, points, pulse_ns),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
