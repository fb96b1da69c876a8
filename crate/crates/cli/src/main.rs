mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

/// A problem with how the command was invoked rather than with its inputs.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const RESULT_FILE: &str = "result.json";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match args::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = format!("{:?}", cli.command).split(['(', ' ']).next().unwrap_or_default().to_string();
    match commands::run(&cli).and_then(|o| write_result(&command, o)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}\n\nRun with --help for usage.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write_result(command: &str, o: commands::Outcome) -> anyhow::Result<String> {
    std::fs::create_dir_all(&o.dir)?;
    let doc = serde_json::json!({ "command": command, "status": "ok", "summary": o.summary, "result": o.result });
    std::fs::write(o.dir.join(RESULT_FILE), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(o.summary)
}
