use std::process::ExitCode;

use clap::Parser;

use colweb::cli::{main_with, Cli};

/// Deep class chains materialize recursively.
const STACK_SIZE: usize = 256 * 1024 * 1024;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let worker = std::thread::Builder::new()
        .stack_size(STACK_SIZE)
        .spawn(move || main_with(cli))
        .expect("failed to start worker thread");
    match worker.join() {
        Ok(code) => ExitCode::from(u8::try_from(code).unwrap_or(1)),
        Err(_) => ExitCode::FAILURE,
    }
}
