mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "spanrefine", version, about = "Span-ranking coreference with global span refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write a checkpoint.
    Train(RunArgs),
    /// Write predicted clusters for every document in `input`.
    Predict(RunArgs),
    /// Score `pred` against `gold` with MUC, B³, CEAF_φ4 and the CoNLL average.
    Score(RunArgs),
    /// Show each mention's most attended spans in document `doc_id`.
    Inspect(RunArgs),
    /// Write a synthetic corpus to `output`.
    Gen(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides as `--key value`, applied after the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        config.apply_overrides(&self.overrides)?;
        Ok(config)
    }
}

/// Usage and configuration problems exit 1, data problems 2 and numeric
/// failures 3.
fn exit_code(err: &anyhow::Error) -> u8 {
    use spanrefine::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 1;
        }
        if cause.downcast_ref::<commands::DataError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse { .. } | E::Validation { .. } | E::Checkpoint(_) | E::Io(_) | E::Empty(_) => 2,
                E::NonFinite(_) | E::NonFiniteLoss(_) | E::Shape { .. } => 3,
                E::InvalidArgument(_) | E::ParamMismatch(_) | E::Infeasible(_) => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let (args, run): (&RunArgs, fn(&RunConfig) -> anyhow::Result<()>) = match &cli.command {
        Command::Train(a) => (a, commands::train),
        Command::Predict(a) => (a, commands::predict),
        Command::Score(a) => (a, commands::score),
        Command::Inspect(a) => (a, commands::inspect),
        Command::Gen(a) => (a, commands::gen),
    };
    let result = args.resolve().map_err(anyhow::Error::from).and_then(|config| {
        info!("resolved configuration:\n{config}");
        run(&config)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            error!("{err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
