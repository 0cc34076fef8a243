//! `bandspike`: simulate scenarios, estimate covariances, evaluate SCNR,
//! run Monte-Carlo sweeps and tabulate likelihood bounds.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bandspike", version, about = "Banded+spiked covariance estimation experiments")]
struct Cli {
    /// Master seed; per-trial seeds are seed + trial.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the ground truth, one SCM per (K, trial) and a manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate a covariance from an SCM file.
    Estimate {
        #[arg(long)]
        scm: PathBuf,
        /// Number of samples behind the SCM.
        #[arg(long)]
        k: usize,
        /// banded-spiked, dl, band-taper (with --taper-l) or band-taper-L,
        /// spiked-shrinkage, scm.
        #[arg(long, default_value = "banded-spiked")]
        method: String,
        /// Regularisation for banded-spiked; default 3*sqrt(log(p)/K).
        #[arg(long)]
        mu: Option<f64>,
        /// Loading level for dl; default sigma2_hat.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        taper_l: Option<usize>,
        /// Stem of the output files.
        #[arg(long, default_value = "estimate")]
        name: String,
    },
    /// Normalized SCNR of an estimate over the Doppler-azimuth grid.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Channels; pulses per channel are p / q.
        #[arg(long, default_value_t = 1)]
        q: usize,
    },
    /// Monte-Carlo comparison of estimators.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Variational bound on the relaxation error over a range of c.
    Bounds {
        #[arg(long)]
        p: Option<usize>,
        /// Comma-separated sample counts.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// c / sigma2 in dB as start:stop:step.
        #[arg(long, default_value = "0:40:2")]
        c_db_range: String,
        /// Take λ_max(S) and tr(S) from this file instead of simulating.
        #[arg(long)]
        scm: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        band_size: usize,
        #[arg(long, default_value_t = 25)]
        spike_count: usize,
        #[arg(long, default_value_t = 100.0)]
        spike_gain: f64,
        /// Monte-Carlo draws per K.
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Simulate { config } => commands::simulate(&config, cli.seed, &cli.out),
        Command::Estimate {
            scm,
            k,
            method,
            mu,
            delta,
            taper_l,
            name,
        } => commands::estimate(
            &commands::EstimateArgs {
                scm,
                k,
                method,
                mu,
                delta,
                taper_l,
                name,
            },
            &cli.out,
        )
        .map(drop),
        Command::Evaluate { truth, estimate, q } => commands::evaluate(&truth, &estimate, q, &cli.out).map(drop),
        Command::Sweep { config } => commands::sweep(&config, cli.seed, &cli.out),
        Command::Bounds {
            p,
            k,
            sigma2,
            c_db_range,
            scm,
            band_size,
            spike_count,
            spike_gain,
            trials,
        } => commands::bounds(
            &commands::BoundsArgs {
                p,
                k,
                sigma2,
                c_db: commands::parse_range(&c_db_range)?,
                scm,
                band_size,
                spike_count,
                spike_gain,
                trials,
            },
            cli.seed.unwrap_or(0),
            &cli.out,
        )
        .map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
