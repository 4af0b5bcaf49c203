use std::process::ExitCode;

fn main() -> ExitCode {
    sqq_cli::cli::main()
}
