use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use kamcert_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("KAMCERT_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("kamcert: KAMCERT_THREADS: {e}");
                    return ExitCode::from(1);
                }
            }
            _ => {
                eprintln!("kamcert: KAMCERT_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    match run(&cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.stdout.as_bytes());
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("kamcert: {e}");
            ExitCode::from(1)
        }
    }
}
