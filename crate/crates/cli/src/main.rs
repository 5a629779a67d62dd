// SPDX-License-Identifier: Apache-2.0

mod args;
mod commands;
mod error;
mod manifest;

use clap::Parser;

fn main() {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = commands::run(cli.command) {
        eprintln!("relrules: {e}");
        std::process::exit(e.exit_code());
    }
}
