use std::process::ExitCode;

fn main() -> ExitCode {
    featmix::cli::main_with_args(std::env::args_os())
}
