use std::path::Path;
use std::process::Command;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::MetricError;

pub const PESQ_RANGE: (f64, f64) = (-0.5, 4.5);

/// Default output pattern: a line holding a single decimal number.
pub const DEFAULT_PESQ_PATTERN: &str = r"(?m)^\s*(-?\d+(?:\.\d+)?)\s*$";

/// External PESQ scorer. `command` is run through `sh -c` after replacing
/// `{clean}` and `{enhanced}` with shell-quoted paths; the first capture
/// group of `pattern` in its stdout is the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesqCommand {
    pub command: String,
    #[serde(default = "default_pattern")]
    pub pattern: String,
}

fn default_pattern() -> String {
    DEFAULT_PESQ_PATTERN.to_string()
}

impl PesqCommand {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            pattern: default_pattern(),
        }
    }
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

/// Score a (clean, enhanced) file pair. No command configured yields `None`.
pub fn external_pesq(
    clean_path: &Path,
    enhanced_path: &Path,
    scorer: Option<&PesqCommand>,
) -> Result<Option<f64>, MetricError> {
    let Some(scorer) = scorer else {
        return Ok(None);
    };
    let pattern = Regex::new(&scorer.pattern)
        .map_err(|e| MetricError::InvalidArgument(format!("bad PESQ pattern: {e}")))?;
    let cmd = scorer
        .command
        .replace("{clean}", &shell_quote(clean_path))
        .replace("{enhanced}", &shell_quote(enhanced_path));
    let output = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| MetricError::ExternalToolFailure(format!("could not run `{cmd}`: {e}")))?;
    if !output.status.success() {
        return Err(MetricError::ExternalToolFailure(format!(
            "`{cmd}` exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let value: f64 = pattern
        .captures(&stdout)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().parse().ok())
        .ok_or_else(|| {
            MetricError::ExternalToolFailure(format!("no score in output {:?}", stdout.trim()))
        })?;
    if !(PESQ_RANGE.0..=PESQ_RANGE.1).contains(&value) {
        return Err(MetricError::RangeViolation(value));
    }
    Ok(Some(value))
}
