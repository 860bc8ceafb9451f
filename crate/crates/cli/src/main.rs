use std::process::ExitCode;

use clap::Parser;
use trigate_cli::{run, Cli, Failure};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            match out.failed {
                Some(msg) => {
                    eprintln!("verification failed: {msg}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(f) => {
            match &f {
                Failure::Verification(m) => eprintln!("verification failed: {m}"),
                Failure::Usage(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
