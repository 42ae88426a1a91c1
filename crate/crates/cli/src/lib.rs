//! Command-line front end: parses input documents, runs the analyses of
//! `crjet-core` and renders canonical reports.
//!
//! [`run`] is the whole program minus process I/O, so tests can call it
//! directly and compare outputs byte for byte.

pub mod commands;
pub mod parse;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use commands::Cli;

/// What the process should print and return.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Exit code for failed verifications.
pub const EXIT_FAILED: i32 = 1;
/// Exit code for unusable input or a computation error.
pub const EXIT_ERROR: i32 = 2;

pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Output { stdout: String::new(), stderr: text, code: EXIT_ERROR }
            } else {
                Output { stdout: text, stderr: String::new(), code: 0 }
            };
        }
    };
    match commands::execute(&cli) {
        Ok(report) => Output {
            stdout: report.render(cli.json()),
            stderr: String::new(),
            code: if report.passed { 0 } else { EXIT_FAILED },
        },
        Err(e) => Output { stdout: String::new(), stderr: format!("error: {e}\n"), code: EXIT_ERROR },
    }
}
