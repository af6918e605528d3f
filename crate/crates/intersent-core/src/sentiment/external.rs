//! Adapter for user-supplied analyzer commands.
//!
//! The contract is deliberately minimal so any language can implement it:
//! the command is spawned once per text, receives the full text on stdin,
//! and must print a single decimal number in `[-1, +1]` on stdout and exit
//! zero. Anything else maps onto a specific [`AnalyzerError`] variant.

use std::io::Write;
use std::process::{Command, Stdio};

use super::{Analyzer, AnalyzerError, SentimentScore};

/// Analyzer that shells out to an external command for every text.
pub struct ExternalAnalyzer {
    id: String,
    command: Vec<String>,
}

impl ExternalAnalyzer {
    /// Build an adapter around `command` (argv form, program first).
    pub fn new(id: impl Into<String>, command: Vec<String>) -> Result<Self, AnalyzerError> {
        if command.is_empty() {
            return Err(AnalyzerError::Spawn {
                command,
                source: std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    "external analyzer command line is empty",
                ),
            });
        }
        Ok(ExternalAnalyzer {
            id: id.into(),
            command,
        })
    }

    fn spawn_err(&self, source: std::io::Error) -> AnalyzerError {
        AnalyzerError::Spawn {
            command: self.command.clone(),
            source,
        }
    }
}

impl Analyzer for ExternalAnalyzer {
    fn id(&self) -> &str {
        &self.id
    }

    fn analyze(&self, text: &str) -> Result<SentimentScore, AnalyzerError> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| self.spawn_err(e))?;

        // Texts are short (single model responses), so writing stdin to
        // completion before draining stdout cannot fill the pipe buffers.
        // A child may exit without reading its input (e.g. it fails fast);
        // that surfaces here as EPIPE and the verdict belongs to the exit
        // status below, not to this write.
        {
            let mut stdin = child.stdin.take().expect("stdin was piped");
            match stdin.write_all(text.as_bytes()) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                Err(e) => return Err(self.spawn_err(e)),
            }
        }

        let output = child.wait_with_output().map_err(|e| self.spawn_err(e))?;
        if !output.status.success() {
            return Err(AnalyzerError::NonZeroExit {
                command: self.command.clone(),
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }

        let stdout = String::from_utf8_lossy(&output.stdout);
        let trimmed = stdout.trim();
        let value: f64 = trimmed.parse().map_err(|_| AnalyzerError::MalformedOutput {
            command: self.command.clone(),
            output: trimmed.chars().take(200).collect(),
        })?;
        if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
            return Err(AnalyzerError::OutOfRange {
                command: self.command.clone(),
                value,
            });
        }
        Ok(SentimentScore { compound: value })
    }
}
