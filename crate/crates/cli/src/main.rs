use std::process::ExitCode;

fn main() -> ExitCode {
    let out = &mut std::io::stdout().lock();
    let err = &mut std::io::stderr().lock();
    teststand_cli::main_with_args(std::env::args_os(), out, err).into()
}
