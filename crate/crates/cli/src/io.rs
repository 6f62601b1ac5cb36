//! Input parsing, output emission and the exit-code contract.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use wildhodge::json::to_canonical_string;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Parse = 2,
    Negative = 3,
    Cap = 4,
    NonConvergence = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self { exit, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(Exit::Parse, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

/// Parse a JSON file; errors carry the line, column and offending field.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    parse_json(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn canonical<T: Serialize>(value: &T) -> CliResult<String> {
    to_canonical_string(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::new(Exit::Parse, format!("serializing output: {e}")))
}

/// Write to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> CliResult<()> {
    let res = match path {
        Some(p) => fs::write(p, content),
        None => std::io::stdout().lock().write_all(content.as_bytes()),
    };
    res.map_err(|e| Failure::parse(format!("writing output: {e}")))
}

/// Render CSV rows into a string.
pub fn csv_string<R: Serialize>(rows: &[R]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Failure::parse(format!("writing CSV: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::parse(format!("writing CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}
