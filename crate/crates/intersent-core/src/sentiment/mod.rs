//! Sentiment scoring behind a pluggable analyzer interface.
//!
//! The builtin analyzer is a VADER-compatible lexicon-and-rules scorer (see
//! [`vader`]); an external-command adapter lets users plug any analyzer that
//! reads text on stdin and prints one compound value.

pub mod external;
pub mod lexicon;
pub mod vader;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A compound sentiment score in [−1, +1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub compound: f64,
}

/// Which analyzer implementation a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerKind {
    BuiltinLexiconRules,
    ExternalCommand,
}

/// Analyzer selection plus the data needed to construct it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerDescriptor {
    pub analyzer_id: String,
    pub kind: AnalyzerKind,
    /// External only: argv of the command to spawn per call.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("external analyzer failed to run {command:?}: {source}")]
    Spawn {
        command: Vec<String>,
        source: std::io::Error,
    },
    #[error("external analyzer {command:?} exited with {status}: {stderr}")]
    NonZeroExit {
        command: Vec<String>,
        status: String,
        stderr: String,
    },
    #[error("external analyzer {command:?} printed malformed output {output:?}")]
    MalformedOutput {
        command: Vec<String>,
        output: String,
    },
    #[error("external analyzer {command:?} returned {value} outside [-1, +1]")]
    OutOfRange {
        command: Vec<String>,
        value: f64,
    },
}

/// A sentiment analyzer: a deterministic map from text to a compound score.
pub trait Analyzer: Send + Sync {
    fn id(&self) -> &str;
    fn analyze(&self, text: &str) -> Result<SentimentScore, AnalyzerError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_serde_round_trip() {
        let d = AnalyzerDescriptor {
            analyzer_id: "vader-builtin".into(),
            kind: AnalyzerKind::BuiltinLexiconRules,
            command: vec![],
        };
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<AnalyzerDescriptor>(&s).unwrap(), d);
    }
}
