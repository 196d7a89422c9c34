use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use notakit::cli::{
    cmd_evaluate, cmd_preprocess, cmd_report, cmd_sweep, cmd_train, cmd_train_logreg, error_kind,
    ExperimentConfig, TrainVariant,
};

/// Dual-encoder response selection with none-of-the-above detection.
#[derive(Parser)]
#[command(name = "notakit", version)]
struct Cli {
    /// Path to the experiment TOML config.
    #[arg(long, default_value = "experiment.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build splits and per-x evaluation sets.
    Preprocess,
    /// Train an encoder variant.
    Train {
        #[arg(long, value_enum, default_value_t = TrainVariant::Plain)]
        variant: TrainVariant,
    },
    /// Train the score-based meta classifiers.
    TrainLogreg,
    /// Run every configured detector over the test sets.
    Evaluate,
    /// Grid-search rejection thresholds on validation data.
    Sweep,
    /// Merge evaluation reports into summary tables and figures.
    Report,
}

fn run(cli: &Cli) -> notakit::Result<()> {
    let config = ExperimentConfig::load(&cli.config)?;
    match &cli.command {
        Command::Preprocess => cmd_preprocess(&config),
        Command::Train { variant } => cmd_train(&config, *variant).map(|_| ()),
        Command::TrainLogreg => cmd_train_logreg(&config),
        Command::Evaluate => cmd_evaluate(&config),
        Command::Sweep => cmd_sweep(&config),
        Command::Report => cmd_report(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": error_kind(&err),
                "message": err.to_string(),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
