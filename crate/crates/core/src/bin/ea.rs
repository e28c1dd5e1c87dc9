use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = ealgebra::cli::main_with(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code)
}
