use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blockfade::harness::{self, Experiment, ExperimentConfig};
use blockfade::Error;

#[derive(Parser)]
#[command(name = "blockfade", version, about = "Polar codes over binary-input block fading channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BI-AWGN, CSI-R and CDI achievable-rate curves
    Rates(Settings),
    /// Per-level CDI rates with their average and the CSI-R reference
    Subrates(Settings),
    /// Construct codes and write profile files
    Construct(Settings),
    /// Frame-error-rate sweep
    Fer(Settings),
    /// FER sweep that fails when a point exceeds its union bound by more than 3 standard errors
    BoundCheck(Settings),
}

/// Every configuration key is also a flag; flags override the file.
#[derive(Args, Debug, Default)]
struct Settings {
    /// Configuration file of key=value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coherent time, or a comma-separated list for rate curves
    #[arg(long)]
    tc: Option<String>,
    /// Blocks per frame (power of two)
    #[arg(long)]
    n: Option<String>,
    /// SNR grid in dB: a,b,c or start:step:stop
    #[arg(long, allow_hyphen_values = true)]
    snr_grid_db: Option<String>,
    #[arg(long)]
    rate: Option<String>,
    /// Monte Carlo samples per rate estimate
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// CDI, CSI-R or FULL
    #[arg(long)]
    csi_mode: Option<String>,
    #[arg(long)]
    quadrature_nodes: Option<String>,
    /// CSV destination; stdout when absent
    #[arg(long)]
    output_path: Option<String>,
    /// mlc, parallel or bicm
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    frames: Option<String>,
    /// Genie-aided frames per constructed code
    #[arg(long)]
    construct_samples: Option<String>,
    #[arg(long)]
    profile_dir: Option<String>,
    /// Construct codes at each SNR instead of loading them
    #[arg(long)]
    construct: Option<String>,
    /// Replace the fading channel by a near-noiseless unit-gain channel
    #[arg(long)]
    noiseless: Option<String>,
    /// Base name of profile files
    #[arg(long)]
    label: Option<String>,
}

impl Settings {
    fn overrides(&self) -> Vec<(String, String)> {
        let fields = [
            ("tc", &self.tc),
            ("n", &self.n),
            ("snr_grid_db", &self.snr_grid_db),
            ("rate", &self.rate),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("csi_mode", &self.csi_mode),
            ("quadrature_nodes", &self.quadrature_nodes),
            ("output_path", &self.output_path),
            ("scheme", &self.scheme),
            ("frames", &self.frames),
            ("construct_samples", &self.construct_samples),
            ("profile_dir", &self.profile_dir),
            ("construct", &self.construct),
            ("noiseless", &self.noiseless),
            ("label", &self.label),
        ];
        fields
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Config(_) | Error::InvalidArgument(_) | Error::Infeasible(_) | Error::Format { .. } => 2,
        Error::InvalidState(_) => 1,
    }
}

fn run(experiment: Experiment, settings: &Settings) -> Result<bool, Error> {
    let cfg = ExperimentConfig::load(experiment, settings.config.as_deref(), &settings.overrides())?;
    eprintln!("blockfade: {experiment} config_hash={} seed={}", cfg.hash(), cfg.seed);
    let (csv, ok) = match experiment {
        Experiment::RateCurves => (harness::run_rate_curves(&cfg)?, true),
        Experiment::SubchannelRates => (harness::run_subchannel_rates(&cfg)?, true),
        Experiment::Construct => (harness::run_construct(&cfg)?, true),
        Experiment::FerSweep => (harness::run_fer_sweep(&cfg)?, true),
        Experiment::BoundCheck => {
            let (csv, violations) = harness::run_bound_check(&cfg)?;
            if violations > 0 {
                eprintln!("blockfade: {violations} point(s) exceed the union bound");
            }
            (csv, violations == 0)
        }
    };
    harness::write_output(&cfg, &csv)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("BLOCKFADE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    let (experiment, settings) = match &cli.command {
        Command::Rates(s) => (Experiment::RateCurves, s),
        Command::Subrates(s) => (Experiment::SubchannelRates, s),
        Command::Construct(s) => (Experiment::Construct, s),
        Command::Fer(s) => (Experiment::FerSweep, s),
        Command::BoundCheck(s) => (Experiment::BoundCheck, s),
    };
    match run(experiment, settings) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("blockfade: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
