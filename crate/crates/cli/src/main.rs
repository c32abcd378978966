use std::process::ExitCode;

use clap::Parser;
use piconvae::cli::{dispatch, Cli, Outcome};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Run { dir, manifest }) => {
            for name in manifest.outputs.keys() {
                log::info!("wrote {}", dir.join(name).display());
            }
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Ok(Outcome::Replay { dir, report }) => {
            for (name, want, got) in &report.files {
                let status = if got.as_deref() == Some(want.as_str()) { "match" } else { "MISMATCH" };
                println!("{status} {name}");
            }
            println!("{}", dir.display());
            if report.all_match() {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: replay did not reproduce the recorded outputs");
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
