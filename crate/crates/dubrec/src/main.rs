use std::process::ExitCode;

fn main() -> ExitCode {
    match dubrec::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dubrec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
