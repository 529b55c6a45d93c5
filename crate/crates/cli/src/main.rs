mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;

/// Snake-case code for an error, from the innermost library error if any.
fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ninegrid::Error>() {
            return e.code();
        }
        if let Some(e) = cause.downcast_ref::<ninegrid_service::ApiError>() {
            return e.code();
        }
    }
    "error"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", out.json);
            } else {
                if !out.text.is_empty() {
                    println!("{}", out.text);
                }
                for w in &out.warnings {
                    eprintln!("warning: {w}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            if cli.json {
                let body =
                    json!({ "error": { "code": error_code(&err), "message": format!("{err:#}") } });
                println!("{body}");
            }
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
