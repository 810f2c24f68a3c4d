use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fmm_ecg::cli::main_with(std::env::args_os(), &mut std::io::stdout()))
}
