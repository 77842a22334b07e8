mod args;
mod commands;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use settings::Settings;

const USAGE_OR_IO: u8 = 2;

fn run(cli: &Cli) -> anyhow::Result<commands::Status> {
    let mut cfg = Settings::load(cli.config.as_deref())?;
    match &cli.command {
        Command::ValidateSchema(a) => commands::validate_schema(a),
        Command::Synth(a) => commands::synth(a, &mut cfg),
        Command::Train(a) => commands::train(a, &mut cfg),
        Command::Predict(a) => commands::predict(a, &mut cfg),
        Command::Eval(a) => commands::eval(a, &mut cfg),
        Command::Transfer(a) => commands::transfer(a, &mut cfg),
        Command::Augment(a) => commands::augment(a, &mut cfg),
        Command::Convert(a) => commands::convert_cmd(a, &mut cfg),
        Command::Sample(a) => commands::sample(a, &mut cfg),
        Command::LlmRun(a) => commands::llm_run(a, &mut cfg),
    }
}

fn error_name(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<tpoint_core::Error>() {
        return core.name();
    }
    if e.downcast_ref::<tpoint_llm::LlmError>().is_some() {
        return "LlmError";
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "IoError";
    }
    "Error"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error[{}]: {e:#}", error_name(&e));
            ExitCode::from(USAGE_OR_IO)
        }
    }
}
