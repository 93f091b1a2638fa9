use std::process::ExitCode;

use clap::Parser;
use schane_cli::cli::{Cli, Command};
use schane_cli::commands;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = cli.resolve().and_then(|cfg| match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Pretrain(_) => commands::pretrain(&cfg),
        Command::Fewshot(_) => commands::fewshot(&cfg),
        Command::SweepLambda(_) => commands::sweep_lambda(&cfg),
        Command::Ablation(_) => commands::ablation(&cfg),
        Command::Analyze(_) => commands::analyze(&cfg),
    });
    match result {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            println!("manifest: {}", outcome.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {} failed: {e}", cli.command.name());
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
