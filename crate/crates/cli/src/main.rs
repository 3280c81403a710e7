//! `pla`: experiment front-end for the CSI physical-layer authentication
//! lab. Generates datasets, builds detectors, trains and evaluates
//! LiteNP-Net, and reproduces AUC-vs-parameter sweeps as CSV.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{IngestMode, PearsonInput, ScoringSpec, StatsSource};
use config::DetectorKind;

#[derive(Parser)]
#[command(name = "pla", version, about = "CSI physical-layer authentication lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand: the config file and its overrides.
#[derive(Args)]
struct ConfigArgs {
    /// Path to the experiment config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config value by dotted path, e.g. --set scenario.snr_db=6.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<config::ExperimentConfig> {
        config::load_config(self.config.as_deref(), &self.sets, self.seed)
    }
}

#[derive(Args)]
struct DetectorArgs {
    /// Detector to score with.
    #[arg(long, value_enum)]
    detector: DetectorKind,
    /// Channel statistics source for the NP detectors.
    #[arg(long, value_enum, default_value = "true")]
    stats: StatsSource,
    /// Trained model file (litenp only).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Training dataset for --stats estimated.
    #[arg(long)]
    train_data: Option<PathBuf>,
    /// Input representation for the Pearson baseline.
    #[arg(long, value_enum, default_value = "complex-parts")]
    pearson_mode: PearsonInput,
}

impl DetectorArgs {
    fn spec(&self) -> ScoringSpec<'_> {
        ScoringSpec {
            detector: self.detector,
            stats_source: self.stats,
            model: self.model.as_deref(),
            train_data: self.train_data.as_deref(),
            pearson_mode: self.pearson_mode.into(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulated train/test pair datasets plus regeneration metadata.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for train.csv, test.csv and meta files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Train LiteNP-Net on a pair dataset.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Training pair dataset (CSV).
        #[arg(long)]
        data: PathBuf,
        /// Where to write the trained model.
        #[arg(long)]
        model_out: PathBuf,
        /// Optional per-epoch loss history CSV.
        #[arg(long)]
        history_out: Option<PathBuf>,
    },
    /// Score a test dataset with one detector and write metrics (and ROC).
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Test pair dataset (CSV).
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        /// Metrics CSV output.
        #[arg(long)]
        metrics_out: PathBuf,
        /// Optional ROC CSV output.
        #[arg(long)]
        roc_out: Option<PathBuf>,
    },
    /// Run the configured parameter sweep and write a long-form AUC CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for sweep.csv and sweep.meta.json.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Score a dataset and export only the ROC curve.
    RocExport {
        #[command(flatten)]
        config: ConfigArgs,
        /// Test pair dataset (CSV).
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        /// ROC CSV output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an experimental CSI capture into a labeled pair dataset.
    Ingest {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSI records CSV.
        #[arg(long)]
        input: PathBuf,
        /// Pairing rule.
        #[arg(long, value_enum, default_value = "train")]
        mode: IngestMode,
        /// Packet offset for positive (same-device) pairs.
        #[arg(long, default_value_t = 1)]
        dk_pos: usize,
        /// Packet offset for negative (different-device) pairs.
        #[arg(long, default_value_t = 50)]
        dk_neg: usize,
        /// Source id of the legitimate device (test mode).
        #[arg(long)]
        legit_id: Option<String>,
        /// Apply phase-noise compensation before pairing.
        #[arg(long)]
        phase_compensate: bool,
        /// Reference subcarrier for phase compensation.
        #[arg(long, default_value_t = 0)]
        ref_subcarrier: usize,
        /// Output pair dataset CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out_dir } => commands::simulate(&config.load()?, &out_dir),
        Command::Train {
            config,
            data,
            model_out,
            history_out,
        } => commands::train(&config.load()?, &data, &model_out, history_out.as_deref()),
        Command::Evaluate {
            config,
            data,
            detector,
            metrics_out,
            roc_out,
        } => commands::evaluate(
            &config.load()?,
            &data,
            &detector.spec(),
            &metrics_out,
            roc_out.as_deref(),
        ),
        Command::Sweep { config, out_dir } => commands::sweep(&config.load()?, &out_dir),
        Command::RocExport {
            config,
            data,
            detector,
            out,
        } => commands::roc_export(&config.load()?, &data, &detector.spec(), &out),
        Command::Ingest {
            config,
            input,
            mode,
            dk_pos,
            dk_neg,
            legit_id,
            phase_compensate,
            ref_subcarrier,
            out,
        } => commands::ingest(
            &config.load()?,
            &input,
            mode,
            dk_pos,
            dk_neg,
            legit_id.as_deref(),
            phase_compensate,
            ref_subcarrier,
            &out,
        ),
    }
}

fn main() {
    env_logger::init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
