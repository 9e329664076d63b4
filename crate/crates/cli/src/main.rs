use std::process::ExitCode;

use clap::error::ErrorKind;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match hmp_cli::run(std::env::args_os(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(hmp_cli::CliError::Usage(e))
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) =>
        {
            let _ = e.print();
            ExitCode::SUCCESS
        }
        Err(hmp_cli::CliError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(hmp_cli::EXIT_USAGE as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
