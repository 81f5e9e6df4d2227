//! The `clipaudit` command line.
//!
//! Results go to stdout in the chosen `--format`; progress and timing go to
//! stderr, so runs with the same seed produce the same stdout bytes. Exit
//! codes: 0 success, 2 usage, 3 data error, 4 outside the reference table.

mod args;
mod audit;
mod commands;

use std::ffi::OsString;
use std::fmt;
use std::io::{BufRead, Write};

use clap::Parser;

pub use args::{Cli, Format};

/// Standard streams, injectable for tests.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut (dyn Write + Send),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    OutOfTable(String),
    /// The reader of stdout went away; not worth reporting.
    BrokenPipe,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::OutOfTable(_) => 4,
            CliError::BrokenPipe => 0,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::OutOfTable(m) => f.write_str(m),
            CliError::BrokenPipe => f.write_str("broken pipe"),
        }
    }
}

impl From<clipaudit::Error> for CliError {
    fn from(err: clipaudit::Error) -> Self {
        match err {
            clipaudit::Error::OutOfTable { .. } => CliError::OutOfTable(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::BrokenPipe;
        }
        CliError::Data(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        if err.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe) {
            return CliError::BrokenPipe;
        }
        CliError::Data(err.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                io.stderr.write_all(text.as_bytes())
            } else {
                io.stdout.write_all(text.as_bytes())
            };
            return e.exit_code();
        }
    };
    match commands::dispatch(cli, io).and_then(|()| io.stdout.flush().map_err(CliError::from)) {
        Ok(()) => 0,
        Err(CliError::BrokenPipe) => 0,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            e.exit_code()
        }
    }
}
