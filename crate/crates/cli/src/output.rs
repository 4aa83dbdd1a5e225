use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::Format;

/// What a command hands back: the result, the parsed inputs it used, an
/// optional CSV rendering, and an analysis-level failure (exit 2) that still
/// produces output.
pub struct Outcome {
    pub result: Value,
    pub inputs: Value,
    pub csv: Option<String>,
    pub failure: Option<String>,
}

impl Outcome {
    pub fn new<T: Serialize>(result: &T) -> Result<Self, CliError> {
        Ok(Outcome {
            result: to_value(result)?,
            inputs: Value::Null,
            csv: None,
            failure: None,
        })
    }

    pub fn inputs<T: Serialize>(mut self, inputs: &T) -> Result<Self, CliError> {
        self.inputs = to_value(inputs)?;
        Ok(self)
    }

    pub fn csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn fail_if(mut self, cond: bool, msg: impl Into<String>) -> Self {
        if cond {
            self.failure = Some(msg.into());
        }
        self
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Analysis(format!("serializing output: {e}")))
}

#[derive(Serialize)]
pub struct Envelope {
    tool: &'static str,
    version: &'static str,
    command: String,
    config: Value,
    format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_unix: Option<u64>,
    #[serde(skip_serializing_if = "Value::is_null")]
    inputs: Value,
    result: Value,
}

impl Envelope {
    pub fn new(command: &str, config: Value, format: Format, timestamp: bool, inputs: Value, result: Value) -> Self {
        Envelope {
            tool: "henon-mme",
            version: henon_mme::VERSION,
            command: command.to_string(),
            config,
            format,
            generated_unix: timestamp
                .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
            inputs,
            result,
        }
    }
}

pub fn to_json(envelope: &Envelope) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(envelope)
        .map_err(|e| CliError::Analysis(format!("serializing output: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes to stdout, or to `path` through a temporary file in the same
/// directory renamed into place.
pub fn write(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::Usage(format!("stdout: {e}")));
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(body.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
