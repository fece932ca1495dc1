//! Command-line front end: simulation, estimation, evaluation and the
//! comparison harnesses, with reproducible run manifests.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pvmax",
    version,
    about = "Reconstructs PV plant maximum power from DC measurements via model-based irradiance estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct PlantArg {
    /// Plant configuration file (datasheet, topology, sensor tolerances).
    #[arg(long)]
    plant: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct OutArg {
    /// Output directory; created if absent.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct EstimatorArgs {
    /// Comma-separated estimator set: analytical,iandi,ekf,pyranometer.
    #[arg(long, default_value = "analytical")]
    estimators: String,
    /// I&I gain [1/s].
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    /// I&I initial irradiance state [W/m2].
    #[arg(long, default_value_t = 100.0)]
    s_init: f64,
    /// EKF prior mean [W/m2].
    #[arg(long, default_value_t = 500.0)]
    prior_mean: f64,
    /// EKF prior standard deviation [W/m2].
    #[arg(long, default_value_t = 300.0)]
    prior_std: f64,
    /// EKF process noise: clustered (needs --clusters) or fixed.
    #[arg(long, default_value = "fixed")]
    q_mode: String,
    /// Fixed process-noise variance [(W/m2)^2].
    #[arg(long, default_value_t = 25.0)]
    q_fixed: f64,
    /// Fitted cluster model file for clustered process noise.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Apply the temperature mounting-offset correction at ingestion.
    #[arg(long, default_value_t = false)]
    correct_temperature: bool,
    /// Grid density of maximum-power reconstruction.
    #[arg(long, default_value_t = 1000)]
    grid_points: usize,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Identify the five STC model parameters from the plant datasheet.
    ExtractParams {
        #[command(flatten)]
        plant: PlantArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate a synthetic measurement CSV from a scenario file.
    Simulate {
        #[command(flatten)]
        plant: PlantArg,
        /// Scenario configuration file.
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run one estimator over a measurement CSV.
    Estimate {
        #[command(flatten)]
        plant: PlantArg,
        /// Canonical measurement CSV.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Score estimators against the ground truth columns of a CSV.
    Evaluate {
        #[command(flatten)]
        plant: PlantArg,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Noise-robustness sweep on one measurement channel.
    Sweep {
        #[command(flatten)]
        plant: PlantArg,
        /// Scenario file defining the clean baseline experiment.
        #[arg(long)]
        scenario: PathBuf,
        /// Swept channel: current, voltage or temperature.
        #[arg(long)]
        channel: String,
        /// Comma-separated added noise standard deviations.
        #[arg(long)]
        added_stds: String,
        /// Monte Carlo repetitions per level.
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Single-sided amplitude spectra of reconstructed power series.
    Spectrum {
        #[command(flatten)]
        plant: PlantArg,
        #[arg(long)]
        input: PathBuf,
        /// High-band cut-off frequency [Hz].
        #[arg(long, default_value_t = 0.05)]
        cutoff_hz: f64,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// I&I gain sweep over a measurement CSV.
    GammaSweep {
        #[command(flatten)]
        plant: PlantArg,
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated gains.
        #[arg(long, default_value = "0.1,0.7,1,5,20,100,200")]
        gammas: String,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// DF-vs-FF forecast comparison on the synthetic multi-day dataset.
    ForecastCompare {
        #[command(flatten)]
        plant: PlantArg,
        #[arg(long, default_value_t = 6)]
        train_days: usize,
        #[arg(long, default_value_t = 2)]
        test_days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Fit the k-means process-noise model from a CSV's true irradiance.
    FitClusters {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Feature window length [samples].
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also report mean within-cluster variance for k in 2..=10.
        #[arg(long, default_value_t = false)]
        sweep_k: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Re-run a previous command from its manifest.
    Rerun {
        /// manifest.txt of a previous run.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<pvmax_core::Error>()
                .map(|e| e.exit_code())
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
