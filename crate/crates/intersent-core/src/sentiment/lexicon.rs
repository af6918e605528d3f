//! The valence lexicon: token → mean valence, shipped as a versioned TSV.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// The lexicon file bundled with the crate: the VADER sentiment lexicon
/// (Hutto & Gilbert 2014) as distributed with vaderSentiment 3.3.2, reduced
/// to the token/valence columns.
pub const BUNDLED_LEXICON: &str = include_str!("../../data/vader_lexicon.tsv");

/// Identifier recorded in manifests and reports for the bundled lexicon.
pub const BUNDLED_LEXICON_ID: &str = "vader-lexicon-3.3.2";

/// SHA-256 of the bundled lexicon file; pinned so silent drift fails a test.
pub const BUNDLED_LEXICON_SHA256: &str =
    "009b7e673e3a76afcf7432df3bcc96582b754168268c968beffdef3fa5aabbd6";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("lexicon line {line} is malformed: {text:?}")]
    Malformed { line: usize, text: String },
    #[error("lexicon line {line} has non-numeric valence {value:?}")]
    BadValence { line: usize, value: String },
}

/// An immutable token → valence map with provenance.
///
/// Lookups are case-insensitive on the token (callers pass lowercased
/// tokens); unknown tokens have zero valence by definition.
#[derive(Debug, Clone)]
pub struct ValenceLexicon {
    entries: HashMap<String, f64>,
    provenance: String,
    sha256: String,
}

impl ValenceLexicon {
    /// Parses TSV `token<TAB>valence` lines. Lines starting with `#` are
    /// comments; blank lines are skipped; a later duplicate token wins.
    pub fn parse(text: &str, provenance: &str) -> Result<ValenceLexicon, LexiconError> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let token = fields.next().unwrap_or_default();
            let valence = fields.next().ok_or_else(|| LexiconError::Malformed {
                line: i + 1,
                text: line.to_string(),
            })?;
            if token.is_empty() {
                return Err(LexiconError::Malformed {
                    line: i + 1,
                    text: line.to_string(),
                });
            }
            let value: f64 = valence.parse().map_err(|_| LexiconError::BadValence {
                line: i + 1,
                value: valence.to_string(),
            })?;
            entries.insert(token.to_string(), value);
        }
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        Ok(ValenceLexicon {
            entries,
            provenance: provenance.to_string(),
            sha256: hex::encode(hasher.finalize()),
        })
    }

    /// The lexicon bundled with the crate.
    pub fn bundled() -> ValenceLexicon {
        ValenceLexicon::parse(BUNDLED_LEXICON, BUNDLED_LEXICON_ID)
            .expect("bundled lexicon must parse")
    }

    /// Loads a lexicon from a file path.
    pub fn load(path: &Path) -> Result<ValenceLexicon, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ValenceLexicon::parse(&text, &path.display().to_string())
    }

    /// Valence of a lowercased token, if the token is in the lexicon.
    pub fn get(&self, token_lower: &str) -> Option<f64> {
        self.entries.get(token_lower).copied()
    }

    /// All (token, valence) entries, in unspecified order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries
            .iter()
            .map(|(token, &valence)| (token.as_str(), valence))
    }

    pub fn contains(&self, token_lower: &str) -> bool {
        self.entries.contains_key(token_lower)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Source identifier (bundled id or file path).
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// SHA-256 of the lexicon file bytes, recorded in manifests and reports.
    pub fn sha256(&self) -> &str {
        &self.sha256
    }
}
