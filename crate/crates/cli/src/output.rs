use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Serializes through `Value`, whose maps are ordered, so keys come out sorted.
pub fn sorted<T: Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn pretty(v: &Value) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn stdout(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Pretty JSON to `out` if given, otherwise to standard output.
pub fn emit_json(v: &Value, out: Option<&Path>) -> CliResult<()> {
    let text = pretty(v)?;
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => stdout(&text),
    }
}
