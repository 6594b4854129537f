use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use cqmine_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let code = match run(&cli, &mut out) {
        Ok(code) => code,
        Err(cqmine_cli::CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => return ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    if out.flush().is_err() {
        return ExitCode::from(cqmine_cli::EXIT_INPUT as u8);
    }
    ExitCode::from(code as u8)
}
