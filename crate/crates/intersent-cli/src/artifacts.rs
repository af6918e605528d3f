//! Run artifact layout, the output-directory lock, and the run manifest.
//!
//! Every run owns one directory under the output directory:
//!
//! ```text
//! <outdir>/<run_id>/
//!   manifest.json        run summary: config snapshot, hashes, counts
//!   transcripts/         one JSONL transcript store per backend
//!   matrices/            one score-matrix CSV per (backend, attribute, setting)
//!   grid.csv             backend × (attribute, setting) correlation grid
//!   report.md            human-readable report
//! ```
//!
//! Artifact names derive from validated filesystem-safe identifiers, so the
//! layout is stable and predictable; consumers construct paths, they never
//! parse file names.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use intersent_core::groups::{AttributeKind, QuestionType, Setting, TemplateSet};
use intersent_core::sentiment::lexicon::BUNDLED_LEXICON_SHA256;
use intersent_core::sentiment::AnalyzerKind;

use crate::config::{AnalyzerConfig, RunConfig};

/// Tool name recorded in manifests and reports.
pub const TOOL_NAME: &str = "intersent";

/// Tool version recorded in manifests and reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// All paths of one run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub run_dir: PathBuf,
    pub manifest: PathBuf,
    pub transcripts_dir: PathBuf,
    pub matrices_dir: PathBuf,
    pub grid_csv: PathBuf,
    pub report_md: PathBuf,
}

impl RunPaths {
    pub fn new(outdir: &Path, run_id: &str) -> RunPaths {
        let run_dir = outdir.join(run_id);
        RunPaths {
            manifest: run_dir.join("manifest.json"),
            transcripts_dir: run_dir.join("transcripts"),
            matrices_dir: run_dir.join("matrices"),
            grid_csv: run_dir.join("grid.csv"),
            report_md: run_dir.join("report.md"),
            run_dir,
        }
    }

    /// Transcript store for one backend.
    pub fn transcript(&self, backend_id: &str) -> PathBuf {
        self.transcripts_dir.join(format!("{backend_id}.jsonl"))
    }

    /// Score-matrix CSV for one combination.
    pub fn matrix(&self, backend_id: &str, attribute: AttributeKind, setting: Setting) -> PathBuf {
        self.matrices_dir.join(format!(
            "{backend_id}.{}.{}.csv",
            attribute.slug(),
            setting.slug()
        ))
    }
}

/// Exclusive lock on an output directory: at most one mutating command runs
/// against it at a time. Created with `create_new`, holds the owner PID, and
/// is removed on drop. A leftover lock from a crashed process must be
/// deleted by hand; the error message names it.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    /// Lock file name inside the output directory.
    pub const FILE_NAME: &'static str = ".intersent.lock";

    pub fn acquire(outdir: &Path) -> Result<RunLock, String> {
        fs::create_dir_all(outdir)
            .map_err(|e| format!("cannot create output directory {}: {e}", outdir.display()))?;
        let path = outdir.join(Self::FILE_NAME);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                Err(format!(
                    "output directory is locked by another run (pid {}); \
                     delete {} if that process is gone",
                    holder.trim(),
                    path.display()
                ))
            }
            Err(e) => Err(format!("cannot create lock {}: {e}", path.display())),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Whether the run produced everything it was asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial,
}

/// Record and scoring counts for one (backend, attribute, setting)
/// combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationCount {
    pub backend_id: String,
    pub attribute: AttributeKind,
    pub setting: Setting,
    /// Transcript records completed for this combination's plan.
    pub records: usize,
    /// Responses whose scores entered the matrix.
    pub scored: usize,
    /// Responses dropped by the refusal filter.
    pub dropped_refusals: usize,
}

/// The run manifest: everything needed to re-score or audit a run.
///
/// Written once per `run` invocation (and updated by `score`); re-runs with
/// identical inputs reproduce it byte-for-byte except the timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub run_id: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_reason: Option<String>,
    pub created_at: DateTime<Utc>,
    pub completed_at: DateTime<Utc>,
    pub analyzer_id: String,
    /// SHA-256 of the builtin lexicon, or `external:<analyzer_id>` when an
    /// external analyzer (which has no lexicon) produced the scores.
    pub lexicon_checksum: String,
    /// Domain-tagged SHA-256 over the template table and mixed-row
    /// selection in effect.
    pub template_set_hash: String,
    /// Full configuration snapshot with input paths resolved.
    pub config: RunConfig,
    pub combinations: Vec<CombinationCount>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<(), String> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| format!("cannot serialize manifest: {e}"))?;
        fs::write(path, json + "\n")
            .map_err(|e| format!("cannot write manifest {}: {e}", path.display()))
    }

    pub fn load(path: &Path) -> Result<RunManifest, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read manifest {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("malformed manifest {}: {e}", path.display()))
    }
}

/// The lexicon checksum an analyzer configuration implies.
pub fn lexicon_checksum(analyzer: &AnalyzerConfig) -> String {
    match analyzer.kind {
        AnalyzerKind::BuiltinLexiconRules => BUNDLED_LEXICON_SHA256.to_string(),
        AnalyzerKind::ExternalCommand => format!("external:{}", analyzer.analyzer_id),
    }
}

/// Deterministic identity hash of a template set: domain-tagged SHA-256 over
/// every template (id, question type, row index, pattern) in table order
/// plus the mixed-row selection. Two runs agree on this hash exactly when
/// their prompt wording machinery is identical.
pub fn template_set_hash(set: &TemplateSet) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"intersent-template-set-v1\n");
    hasher.update((set.templates.len() as u64).to_le_bytes());
    for template in &set.templates {
        for text in [&template.id, &template.pattern] {
            hasher.update((text.len() as u64).to_le_bytes());
            hasher.update(text.as_bytes());
        }
        hasher.update([match template.qtype {
            QuestionType::YesNo => 0u8,
            QuestionType::Wh => 1u8,
        }]);
        hasher.update([template.row_index]);
    }
    hasher.update((set.mixed_rows.len() as u64).to_le_bytes());
    hasher.update(&set.mixed_rows);
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_paths_follow_documented_layout() {
        let paths = RunPaths::new(Path::new("out"), "e2e-replay");
        assert_eq!(paths.run_dir, Path::new("out/e2e-replay"));
        assert_eq!(paths.manifest, Path::new("out/e2e-replay/manifest.json"));
        assert_eq!(
            paths.transcript("fixture-chat"),
            Path::new("out/e2e-replay/transcripts/fixture-chat.jsonl")
        );
        assert_eq!(
            paths.matrix("fixture-chat", AttributeKind::RacesEthnicities, Setting::Mixed),
            Path::new("out/e2e-replay/matrices/fixture-chat.races_ethnicities.mixed.csv")
        );
        assert_eq!(paths.grid_csv, Path::new("out/e2e-replay/grid.csv"));
        assert_eq!(paths.report_md, Path::new("out/e2e-replay/report.md"));
    }

    #[test]
    fn lock_is_exclusive_and_released_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        let denied = RunLock::acquire(dir.path()).unwrap_err();
        assert!(denied.contains("locked"), "{denied}");
        assert!(denied.contains(&std::process::id().to_string()), "{denied}");
        drop(lock);
        let again = RunLock::acquire(dir.path()).unwrap();
        drop(again);
        assert!(!dir.path().join(RunLock::FILE_NAME).exists());
    }

    #[test]
    fn lock_creates_missing_output_directory() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("deep/nested/out");
        let _lock = RunLock::acquire(&outdir).unwrap();
        assert!(outdir.is_dir());
    }

    #[test]
    fn template_set_hash_is_stable_and_sensitive() {
        let default_set = TemplateSet::default();
        let h1 = template_set_hash(&default_set);
        let h2 = template_set_hash(&TemplateSet::default());
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);

        let mut other_rows = TemplateSet::default();
        other_rows.mixed_rows = vec![2, 4, 6, 8, 10, 12];
        assert_ne!(template_set_hash(&other_rows), h1);

        let mut other_pattern = TemplateSet::default();
        other_pattern.templates[0].pattern.push('!');
        assert_ne!(template_set_hash(&other_pattern), h1);
    }

    #[test]
    fn lexicon_checksum_depends_on_analyzer_kind() {
        let builtin = AnalyzerConfig::builtin();
        assert_eq!(lexicon_checksum(&builtin), BUNDLED_LEXICON_SHA256);
        let external = AnalyzerConfig {
            analyzer_id: "tweetnlp".into(),
            kind: AnalyzerKind::ExternalCommand,
            command: vec!["analyze".into()],
        };
        assert_eq!(lexicon_checksum(&external), "external:tweetnlp");
    }

    #[test]
    fn manifest_round_trips_and_orders_keys_stably() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let config = RunConfig::parse(
            r#"
run_id = "demo"
attributes = ["races_ethnicities"]
settings = ["yes_no_only"]

[analyzer]
analyzer_id = "vader-builtin"
kind = "builtin_lexicon_rules"

[[backends]]
backend_id = "fixture-chat"
kind = "replay"
fixture = "f.jsonl"
"#,
        )
        .unwrap();
        let manifest = RunManifest {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            run_id: "demo".into(),
            status: RunStatus::Complete,
            partial_reason: None,
            created_at: "2026-08-19T12:00:00Z".parse().unwrap(),
            completed_at: "2026-08-19T12:00:05Z".parse().unwrap(),
            analyzer_id: "vader-builtin".into(),
            lexicon_checksum: BUNDLED_LEXICON_SHA256.into(),
            template_set_hash: template_set_hash(&TemplateSet::default()),
            config,
            combinations: vec![CombinationCount {
                backend_id: "fixture-chat".into(),
                attribute: AttributeKind::RacesEthnicities,
                setting: Setting::YesNoOnly,
                records: 216,
                scored: 216,
                dropped_refusals: 0,
            }],
        };
        manifest.save(&path).unwrap();
        let loaded = RunManifest::load(&path).unwrap();
        assert_eq!(loaded, manifest);
        // Saving the loaded manifest is byte-identical: nothing depends on
        // in-memory ordering.
        let first = fs::read_to_string(&path).unwrap();
        loaded.save(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), first);
        assert!(first.ends_with('\n'));
    }
}
