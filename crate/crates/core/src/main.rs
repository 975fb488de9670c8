use std::process::ExitCode;

fn main() -> ExitCode {
    match ensemble_recal::cli::run_args(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("recal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
