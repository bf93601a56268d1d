use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use model_reward_cli::{execute, CliError, Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "model-reward", version, about = "Collaborative model rewards from a JSON experiment config")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "warn")]
    log_level: log::LevelFilter,
}

fn run(args: &Args) -> Result<(), CliError> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {t}: {e}")))?;
    }
    let (cfg, bytes) = ExperimentConfig::load(&args.config)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output_dir`".into()))?;
    execute(&cfg, &bytes, args.command, &out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::new().filter_level(args.log_level).format_timestamp(None).init();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
