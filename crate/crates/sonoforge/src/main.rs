use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sonoforge::commands::{self, parse_kind};
use sonoforge::config::CliConfig;
use sonoforge_core::FeatureKind;
use sonoforge::{Error, Result};

#[derive(Parser)]
#[command(name = "sonoforge", version, about = "Audio feature extraction and CNN training for environmental sound classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract one feature kind from a WAV file or a directory of WAVs.
    Extract {
        #[arg(long, value_parser = parse_kind)]
        feature: FeatureKind,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render feature files as greyscale PGM images.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print or write the seeded train/validation split.
    Split {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the CNN on extracted features.
    Train {
        #[arg(long, value_parser = parse_kind)]
        feature: FeatureKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides output.features_dir.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the validation split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Evaluate on every clip instead of the validation split.
        #[arg(long)]
        all: bool,
    },
    /// Comparison table over the run reports in a directory.
    Report {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { feature, input, out, config } => {
            let cfg = CliConfig::load_or_default(config.as_deref())?;
            let outcome = commands::extract(feature, &input, &out, &cfg)?;
            for (wav, e) in &outcome.failures {
                eprintln!("{}: {e}", wav.display());
            }
            eprintln!("wrote {} {feature} file(s) to {}", outcome.written.len(), out.display());
            if !outcome.failures.is_empty() {
                return Err(Error::Failed(format!("{} file(s) failed", outcome.failures.len())));
            }
        }
        Command::Render { input, out } => {
            let written = commands::render(&input, &out)?;
            eprintln!("wrote {} image(s) to {}", written.len(), out.display());
        }
        Command::Split { config, seed, out } => {
            let cfg = CliConfig::load(&config)?;
            let (index, split) = commands::split(&cfg, seed)?;
            let listing = commands::split_listing(&index, &split);
            match out {
                Some(p) => fs::write(&p, listing).map_err(|e| Error::io(&p, e))?,
                None => print!("{listing}"),
            }
            eprintln!("{} train / {} validation", split.train.len(), split.validation.len());
        }
        Command::Train { feature, config, seed, out, features } => {
            let cfg = CliConfig::load(&config)?;
            let features = features.unwrap_or_else(|| cfg.output.features_dir.clone());
            let out = out.unwrap_or_else(|| cfg.output.runs_dir.clone());
            let outcome = commands::train(feature, &cfg, seed, &features, &out, |e| {
                eprintln!(
                    "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}  lr {:e}",
                    e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc, e.lr
                )
            })?;
            eprintln!("report {}", outcome.report_path.display());
            eprintln!("checkpoint {}", outcome.checkpoint_path.display());
        }
        Command::Evaluate { checkpoint, config, seed, features, all } => {
            let cfg = CliConfig::load(&config)?;
            let features = features.unwrap_or_else(|| cfg.output.features_dir.clone());
            let (loss, acc, n) = commands::evaluate(&checkpoint, &cfg, seed, &features, all)?;
            println!("clips {n}\nloss {loss:.6}\naccuracy {acc:.6}");
        }
        Command::Report { runs } => print!("{}", commands::report(&runs)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
