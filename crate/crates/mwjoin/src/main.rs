// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

fn main() -> ExitCode {
    mwjoin::cli::main_from(std::env::args_os())
}
