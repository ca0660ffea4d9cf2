use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "phishssl", version, about = "Self-supervised phishing website detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract lexical URL features from a file of URLs (one per line)
    Extract {
        /// Input text file of URLs
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the contrastive model from a JSON run config
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override every seed in the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a model on the config's test split
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Trained checkpoint (required for --model phishssl)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// phishssl, kmeans or autoencoder (defaults to the config's model)
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the four-configuration component ablation
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify a CSV of feature rows with a trained checkpoint
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Headerful all-numeric feature CSV
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export test-split embeddings with labels for external projection
    ExportEmbeddings {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extract { dataset, out } => phishssl_cli::cmd_extract(dataset, out),
        Command::Train { config, out, seed } => {
            phishssl_cli::cmd_train(config, out.as_deref(), *seed)
        }
        Command::Eval { config, checkpoint, model, out, seed } => phishssl_cli::cmd_eval(
            config,
            checkpoint.as_deref(),
            model.as_deref(),
            out.as_deref(),
            *seed,
        ),
        Command::Ablate { config, out, seed } => {
            phishssl_cli::cmd_ablate(config, out.as_deref(), *seed)
        }
        Command::Predict { checkpoint, dataset, out } => {
            phishssl_cli::cmd_predict(checkpoint, dataset, out)
        }
        Command::ExportEmbeddings { checkpoint, config, out } => {
            phishssl_cli::cmd_export_embeddings(checkpoint, config, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
