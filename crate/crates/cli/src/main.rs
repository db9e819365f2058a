mod evaluate;
mod export;
mod policy;
mod replay;
mod serve;
mod setup;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Attention-aware highlighting for drone oversight: train, evaluate,
/// replay and serve highlighting policies.
#[derive(Debug, Parser)]
#[command(name = "oversight", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a PPO highlighting policy.
    Train(train::TrainArgs),
    /// Evaluate baseline or learned policies over seeded episodes.
    Eval(evaluate::EvalArgs),
    /// Walk through a stored episode trace.
    Replay(replay::ReplayArgs),
    /// Run the WebSocket session service.
    Serve(serve::ServeArgs),
    /// Convert checkpoints, reports, logs and traces.
    Export(export::ExportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => train::run(args),
        Command::Eval(args) => evaluate::run(args),
        Command::Replay(args) => replay::run(args),
        Command::Serve(args) => serve::run(args),
        Command::Export(args) => export::run(args),
    }
}

/// Print an error as one JSON object on stderr.
fn report_error(kind: &str, err: &anyhow::Error) {
    let causes: Vec<String> = err.chain().skip(1).map(|c| c.to_string()).collect();
    let doc = serde_json::json!({
        "error": {
            "kind": kind,
            "message": err.to_string(),
            "causes": causes,
        }
    });
    eprintln!("{doc}");
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|c| c.downcast_ref::<oversight_core::Error>())
        .map(|e| e.kind())
        .unwrap_or("error")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = anyhow::anyhow!(e.render().to_string().trim().to_string());
            report_error("usage", &err);
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report_error(error_kind(&err), &err);
            ExitCode::FAILURE
        }
    }
}
