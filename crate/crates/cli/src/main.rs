use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vortexlab::{run_experiment, Command, ConfigError, ExperimentConfig};

/// Vortex patch experiments on bounded planar domains.
#[derive(Parser)]
#[command(name = "vortexlab", version)]
struct Cli {
    /// Pipeline stage to run.
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment configuration.
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let record = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{record}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e @ ConfigError::Read { .. }) => return fail("io", e.to_string(), 2),
        Err(e) => return fail("config", e.to_string(), 2),
    };
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    match run_experiment(config, cli.command) {
        Ok(report) => {
            println!("{}", serde_json::json!({ "status": report.status, "files": report.files }));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), e.exit_code()),
    }
}
