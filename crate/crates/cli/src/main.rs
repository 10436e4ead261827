use std::process::ExitCode;

use clap::Parser;
use delayprop::commands::{self, Cli, Command};
use delayprop::service;
use delayprop::CliError;

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Query(a) => commands::query(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Serve(a) => {
            let registry = service::registry_for(a.model_dir.as_deref())
                .map_err(|e| CliError::Usage(format!("cannot load model directory: {e}")))?;
            let hashes: Vec<String> = registry.list().iter().map(|m| m.config_hash.clone()).collect();
            let hash = delayprop::config_hash(hashes.join("\n").as_bytes());
            log::info!("config hash {hash}");
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
            runtime
                .block_on(service::serve(&a.addr, registry))
                .map_err(|e| CliError::Usage(format!("cannot serve on {}: {e}", a.addr)))?;
            Ok(hash)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
