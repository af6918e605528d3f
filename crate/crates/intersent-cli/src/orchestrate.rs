//! The four commands behind the `intersent` binary, as library functions.
//!
//! Exit-code contract (enforced by `main` via [`CmdError::exit_code`] and
//! [`Outcome::exit_code`]):
//!
//! - `0` — the run produced everything it was asked for.
//! - `1` — partial results (some combinations failed, a reference poll was
//!   unreadable, scoring aborted) or a runtime failure such as a missing
//!   transcript file. Whatever could be produced is on disk, with explicit
//!   markers in the manifest, grid, and report.
//! - `2` — configuration or invocation errors, including a locked output
//!   directory: nothing was produced.
//!
//! Failure semantics, per phase:
//!
//! - A backend that cannot be constructed (or a replay fixture that does not
//!   exist) fails all of its combinations; other backends still run.
//! - A combination whose plan execution fails is recorded as
//!   `combination failed: …` in the grid and report; the run is partial.
//! - An analyzer that fails *during a run* aborts the scoring phase:
//!   transcripts and the manifest are still written (the expensive data is
//!   safe), matrices/grid/report are not. During `score` the same failure
//!   leaves every artifact untouched and reports an error instead — a broken
//!   override must not damage a good run.
//! - An unreadable reference poll makes the run partial and suppresses the
//!   grid and report (a grid against half the references would be silently
//!   misleading); transcripts and matrices are still written.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};

use intersent_core::groups::{build_plan, AttributeKind, Setting};
use intersent_core::polls::{load_reference, matrix_to_csv, parse_matrix_csv, ReferenceMatrix};
use intersent_core::sentiment::vader::VaderAnalyzer;
use intersent_core::sentiment::{Analyzer, AnalyzerKind};
use intersent_core::stats::{
    aggregate, correlation_grid, GridOutcome, LabeledMatrix, PairCell, PairScoreMatrix,
};
use intersent_gateway::{request_key, BackendKind, Gateway, TranscriptRecord, TranscriptStore};

use crate::artifacts::{
    lexicon_checksum, template_set_hash, CombinationCount, RunLock, RunManifest, RunPaths,
    RunStatus, TOOL_NAME, TOOL_VERSION,
};
use crate::config::{AnalyzerConfig, RunConfig};
use crate::report::{render_grid_csv, render_report_md, ReportContext};
use crate::scoring::{build_analyzer, score_records};

/// One grid combination: (backend_id, attribute, setting).
pub type ComboKey = (String, AttributeKind, Setting);

/// A transcript JSONL named by the run manifest is absent on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingTranscriptError {
    pub path: PathBuf,
}

impl fmt::Display for MissingTranscriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MissingTranscriptError: transcript file {} is named by the run manifest \
             but does not exist",
            self.path.display()
        )
    }
}

impl std::error::Error for MissingTranscriptError {}

/// A command failure. `Config` means nothing was produced; the other
/// variants may leave partial artifacts behind (always with explicit
/// markers).
#[derive(Debug)]
pub enum CmdError {
    /// Invalid configuration or invocation (exit 2).
    Config { message: String },
    /// A transcript file the manifest names is missing (exit 1).
    MissingTranscript(MissingTranscriptError),
    /// Runtime failure (exit 1).
    Run { message: String },
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config { .. } => 2,
            CmdError::MissingTranscript(_) | CmdError::Run { .. } => 1,
        }
    }

    fn run(message: impl Into<String>) -> CmdError {
        CmdError::Run {
            message: message.into(),
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config { message } => write!(f, "configuration error: {message}"),
            CmdError::MissingTranscript(e) => e.fmt(f),
            CmdError::Run { message } => f.write_str(message),
        }
    }
}

impl std::error::Error for CmdError {}

/// Success outcome of a mutating command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Partial { reason: String },
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::Partial { .. } => 1,
        }
    }
}

/// Analyzer selection for `score`: keep the run's analyzer, name one by id,
/// or define an external command.
#[derive(Debug, Clone)]
pub enum AnalyzerOverride {
    None,
    /// `--analyzer <id>`: the run's configured analyzer or the builtin.
    Id(String),
    /// `--analyzer <id> --analyzer-cmd <argv…>`: an external command.
    Command { id: String, argv: Vec<String> },
}

impl AnalyzerOverride {
    fn resolve(self, configured: &AnalyzerConfig) -> Result<AnalyzerConfig, CmdError> {
        match self {
            AnalyzerOverride::None => Ok(configured.clone()),
            AnalyzerOverride::Command { id, argv } => {
                if id.is_empty() {
                    return Err(CmdError::Config {
                        message: "--analyzer-cmd requires --analyzer <id> to name the analyzer"
                            .to_string(),
                    });
                }
                Ok(AnalyzerConfig {
                    analyzer_id: id,
                    kind: AnalyzerKind::ExternalCommand,
                    command: argv,
                })
            }
            AnalyzerOverride::Id(id) => {
                if id == configured.analyzer_id {
                    Ok(configured.clone())
                } else if id == VaderAnalyzer::DEFAULT_ID {
                    Ok(AnalyzerConfig::builtin())
                } else {
                    Err(CmdError::Config {
                        message: format!(
                            "unknown analyzer {id:?}: expected {:?} (the run's analyzer) or \
                             {:?} (the builtin); pass --analyzer-cmd to define an external \
                             command under a new id",
                            configured.analyzer_id,
                            VaderAnalyzer::DEFAULT_ID
                        ),
                    })
                }
            }
        }
    }
}

fn config_problems(problems: Vec<String>) -> CmdError {
    CmdError::Config {
        message: format!("invalid configuration:\n  {}", problems.join("\n  ")),
    }
}

/// Execute a run end to end: query every (backend, attribute, setting)
/// combination, score the responses, and emit matrices, grid, report, and
/// manifest under `<output_dir>/<run_id>/`.
pub fn cmd_run(
    mut config: RunConfig,
    outdir_override: Option<&Path>,
    parallelism_override: Option<usize>,
) -> Result<Outcome, CmdError> {
    if let Some(outdir) = outdir_override {
        config.output_dir = outdir.to_path_buf();
    }
    if let Some(parallelism) = parallelism_override {
        config.parallelism = parallelism;
    }
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(config_problems(problems));
    }

    let _lock = RunLock::acquire(&config.output_dir)
        .map_err(|message| CmdError::Config { message })?;
    let paths = RunPaths::new(&config.output_dir, &config.run_id);
    for dir in [&paths.run_dir, &paths.transcripts_dir, &paths.matrices_dir] {
        fs::create_dir_all(dir)
            .map_err(|e| CmdError::run(format!("cannot create {}: {e}", dir.display())))?;
    }
    let created_at = Utc::now();

    let template_set = config.template_set();
    let lexicon = lexicon_checksum(&config.analyzer);
    let template_hash = template_set_hash(&template_set);
    // Build the analyzer before any network traffic: a misconfigured
    // analyzer must not cost a single API call.
    let analyzer =
        build_analyzer(&config.analyzer).map_err(|message| CmdError::Config { message })?;
    let gateway_config = config.gateway.gateway_config();

    let mut records_by_combo: BTreeMap<ComboKey, Vec<TranscriptRecord>> = BTreeMap::new();
    let mut combo_failures: BTreeMap<ComboKey, String> = BTreeMap::new();
    let mut tolerated: Vec<String> = Vec::new();

    for backend in &config.backends {
        let run_store = Arc::new(
            TranscriptStore::open(paths.transcript(&backend.backend_id))
                .map_err(|e| CmdError::run(e.to_string()))?,
        );
        let is_replay = backend.kind == BackendKind::Replay;
        // A backend that cannot be constructed fails all of its
        // combinations but does not abort the other backends.
        let gateway: Result<Gateway, String> = match backend.kind {
            BackendKind::Replay => {
                let fixture = backend
                    .fixture
                    .clone()
                    .expect("validated: replay backends carry a fixture path");
                if fixture.is_file() {
                    TranscriptStore::open(&fixture)
                        .map_err(|e| e.to_string())
                        .and_then(|store| {
                            Gateway::new(
                                backend.descriptor(),
                                &config.run_id,
                                Arc::new(store),
                                gateway_config.clone(),
                            )
                            .map_err(|e| e.to_string())
                        })
                } else {
                    Err(format!(
                        "replay fixture {} does not exist",
                        fixture.display()
                    ))
                }
            }
            BackendKind::HttpChat => Gateway::new(
                backend.descriptor(),
                &config.run_id,
                Arc::clone(&run_store),
                gateway_config.clone(),
            )
            .map_err(|e| e.to_string()),
        };

        for &attribute in &config.attributes {
            let roster = config.roster_for(attribute);
            for &setting in &config.settings {
                let key: ComboKey = (backend.backend_id.clone(), attribute, setting);
                let gateway = match &gateway {
                    Ok(gateway) => gateway,
                    Err(message) => {
                        combo_failures.insert(key, message.clone());
                        continue;
                    }
                };
                let plan = match build_plan(&roster, &template_set, setting, config.repeats) {
                    Ok(plan) => plan,
                    Err(e) => {
                        combo_failures.insert(key, format!("template expansion failed: {e}"));
                        continue;
                    }
                };
                match gateway.run_plan(&plan, config.parallelism) {
                    Ok(report) => {
                        if is_replay {
                            // Replay serves from the fixture store; copy the
                            // records (run_id already rewritten) into this
                            // run's own transcript, skipping keys recorded by
                            // an earlier combination or a resumed run.
                            for record in &report.records {
                                if run_store.lookup(&record.request_key).is_none() {
                                    run_store
                                        .append(record)
                                        .map_err(|e| CmdError::run(e.to_string()))?;
                                }
                            }
                        }
                        if !report.failures.is_empty() {
                            tolerated.push(format!(
                                "combination {}/{}/{}: {} of {} prompts failed within the \
                                 failure budget",
                                backend.backend_id,
                                attribute.slug(),
                                setting.slug(),
                                report.failures.len(),
                                plan.len()
                            ));
                        }
                        records_by_combo.insert(key, report.records);
                    }
                    Err(e) => {
                        combo_failures.insert(key, e.to_string());
                    }
                }
            }
        }
    }

    match score_phase(&config, &records_by_combo, analyzer.as_ref()) {
        Ok(phase) => {
            let emitted = emit_artifacts(
                &config,
                &paths,
                &lexicon,
                &template_hash,
                &phase.matrices,
                &combo_failures,
                tolerated,
                true,
            )?;
            write_manifest(
                &config,
                &paths,
                created_at,
                emitted.status,
                emitted.partial_reason.clone(),
                &lexicon,
                &template_hash,
                phase.counts,
            )?;
            Ok(outcome_of(emitted.status, emitted.partial_reason))
        }
        Err(message) => {
            // Scoring aborted: keep the transcripts and manifest (the
            // expensive data), emit nothing downstream of the analyzer.
            let mut reasons = failure_reasons(&combo_failures);
            reasons.extend(tolerated);
            reasons.push(format!("scoring aborted: {message}"));
            let reason = reasons.join("; ");
            let counts = unscored_counts(&config, &records_by_combo);
            write_manifest(
                &config,
                &paths,
                created_at,
                RunStatus::Partial,
                Some(reason.clone()),
                &lexicon,
                &template_hash,
                counts,
            )?;
            Ok(Outcome::Partial { reason })
        }
    }
}

/// Re-score an existing run's transcripts (optionally with a different
/// analyzer) and rebuild matrices, grid, report, and manifest in place.
pub fn cmd_score(
    outdir: &Path,
    run_id: &str,
    analyzer_override: AnalyzerOverride,
) -> Result<Outcome, CmdError> {
    let paths = RunPaths::new(outdir, run_id);
    let _lock = RunLock::acquire(outdir).map_err(|message| CmdError::Config { message })?;
    let mut manifest =
        RunManifest::load(&paths.manifest).map_err(|message| CmdError::Config { message })?;
    let mut config = manifest.config.clone();
    config.analyzer = analyzer_override.resolve(&config.analyzer)?;
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(config_problems(problems));
    }

    let template_set = config.template_set();
    let lexicon = lexicon_checksum(&config.analyzer);
    let template_hash = template_set_hash(&template_set);
    let analyzer =
        build_analyzer(&config.analyzer).map_err(|message| CmdError::Config { message })?;

    // Rebuild every plan and look its responses up in the stored
    // transcripts. A missing file is an error; missing individual records
    // (a partial original run) only shrink the data, mirroring the
    // tolerated-failure semantics of `run`.
    let mut records_by_combo: BTreeMap<ComboKey, Vec<TranscriptRecord>> = BTreeMap::new();
    let mut shortfalls: Vec<String> = Vec::new();
    for backend in &config.backends {
        let path = paths.transcript(&backend.backend_id);
        if !path.is_file() {
            return Err(CmdError::MissingTranscript(MissingTranscriptError { path }));
        }
        let store = TranscriptStore::open(&path).map_err(|e| CmdError::run(e.to_string()))?;
        for &attribute in &config.attributes {
            let roster = config.roster_for(attribute);
            for &setting in &config.settings {
                let plan = build_plan(&roster, &template_set, setting, config.repeats)
                    .map_err(|e| CmdError::run(format!("template expansion failed: {e}")))?;
                let mut records = Vec::with_capacity(plan.len());
                for prompt in &plan {
                    let key = request_key(
                        &backend.backend_id,
                        &prompt.system_text,
                        &prompt.user_text,
                        prompt.repeat_index,
                    );
                    if let Some(record) = store.lookup(&key) {
                        records.push(record);
                    }
                }
                if records.len() < plan.len() {
                    shortfalls.push(format!(
                        "combination {}/{}/{}: {} of {} planned responses available",
                        backend.backend_id,
                        attribute.slug(),
                        setting.slug(),
                        records.len(),
                        plan.len()
                    ));
                }
                records_by_combo.insert((backend.backend_id.clone(), attribute, setting), records);
            }
        }
    }

    let phase = score_phase(&config, &records_by_combo, analyzer.as_ref()).map_err(|message| {
        CmdError::run(format!(
            "scoring failed, artifacts left unchanged: {message}"
        ))
    })?;
    let emitted = emit_artifacts(
        &config,
        &paths,
        &lexicon,
        &template_hash,
        &phase.matrices,
        &BTreeMap::new(),
        shortfalls,
        true,
    )?;

    manifest.status = emitted.status;
    manifest.partial_reason = emitted.partial_reason.clone();
    manifest.completed_at = Utc::now();
    manifest.analyzer_id = config.analyzer.analyzer_id.clone();
    manifest.lexicon_checksum = lexicon;
    manifest.template_set_hash = template_hash;
    manifest.config = config;
    manifest.combinations = phase.counts;
    manifest
        .save(&paths.manifest)
        .map_err(|message| CmdError::Run { message })?;

    Ok(outcome_of(emitted.status, emitted.partial_reason))
}

/// Rebuild `grid.csv` and `report.md` from the matrices already on disk.
/// The manifest is read, never written; the exit status mirrors it.
pub fn cmd_report(outdir: &Path, run_id: &str) -> Result<Outcome, CmdError> {
    let paths = RunPaths::new(outdir, run_id);
    let _lock = RunLock::acquire(outdir).map_err(|message| CmdError::Config { message })?;
    let manifest =
        RunManifest::load(&paths.manifest).map_err(|message| CmdError::Config { message })?;
    let config = &manifest.config;

    let scored_by_combo: BTreeMap<ComboKey, usize> = manifest
        .combinations
        .iter()
        .map(|c| ((c.backend_id.clone(), c.attribute, c.setting), c.scored))
        .collect();

    let mut matrices: BTreeMap<ComboKey, PairScoreMatrix> = BTreeMap::new();
    let mut combo_failures: BTreeMap<ComboKey, String> = BTreeMap::new();
    for (backend, attribute, setting) in config.combinations() {
        let key: ComboKey = (backend.backend_id.clone(), attribute, setting);
        let path = paths.matrix(&backend.backend_id, attribute, setting);
        if !path.is_file() {
            // A combination the manifest says produced scores must have its
            // matrix; one that produced none never had a matrix to read.
            if scored_by_combo.get(&key).copied().unwrap_or(0) > 0 {
                return Err(CmdError::run(format!(
                    "score matrix {} is named by the manifest but missing; \
                     run `intersent score --run {}` to rebuild it",
                    path.display(),
                    config.run_id
                )));
            }
            combo_failures.insert(key, "no score matrix on disk for this combination".into());
            continue;
        }
        let text = fs::read_to_string(&path)
            .map_err(|e| CmdError::run(format!("cannot read {}: {e}", path.display())))?;
        let raw = parse_matrix_csv(&text)
            .map_err(|e| CmdError::run(format!("malformed matrix {}: {e}", path.display())))?;
        let cells = raw
            .cells
            .iter()
            .map(|((from, to), value)| {
                ((from.clone(), to.clone()), PairCell { mean: *value, count: 0 })
            });
        let matrix =
            PairScoreMatrix::from_cells(attribute, raw.row_codes.clone(), raw.col_codes.clone(), cells)
                .map_err(|e| CmdError::run(format!("invalid matrix {}: {e}", path.display())))?;
        matrices.insert(key, matrix);
    }

    let extra: Vec<String> = manifest.partial_reason.clone().into_iter().collect();
    let emitted = emit_artifacts(
        config,
        &paths,
        &manifest.lexicon_checksum,
        &manifest.template_set_hash,
        &matrices,
        &combo_failures,
        extra,
        false,
    )?;
    Ok(outcome_of(emitted.status, emitted.partial_reason))
}

/// Load and validate a configuration file; `Ok(())` means it would run.
pub fn cmd_validate_config(path: &Path) -> Result<(), CmdError> {
    let config = RunConfig::load(path).map_err(|message| CmdError::Config { message })?;
    let problems = config.validate();
    if problems.is_empty() {
        Ok(())
    } else {
        Err(config_problems(problems))
    }
}

struct ScorePhase {
    matrices: BTreeMap<ComboKey, PairScoreMatrix>,
    counts: Vec<CombinationCount>,
}

/// Score every combination's records and aggregate them into matrices.
/// `Err` carries the analyzer (or aggregation) failure message; the caller
/// decides whether that aborts the command or degrades it.
fn score_phase(
    config: &RunConfig,
    records_by_combo: &BTreeMap<ComboKey, Vec<TranscriptRecord>>,
    analyzer: &dyn Analyzer,
) -> Result<ScorePhase, String> {
    // Compound scores memoized by request key across combinations: settings
    // share template rows, and an external analyzer costs a process spawn
    // per call.
    let mut memo: HashMap<String, f64> = HashMap::new();
    let mut matrices = BTreeMap::new();
    let mut counts = Vec::new();
    for (backend, attribute, setting) in config.combinations() {
        let key: ComboKey = (backend.backend_id.clone(), attribute, setting);
        let Some(records) = records_by_combo.get(&key) else {
            counts.push(CombinationCount {
                backend_id: backend.backend_id.clone(),
                attribute,
                setting,
                records: 0,
                scored: 0,
                dropped_refusals: 0,
            });
            continue;
        };
        let batch = score_records(records, analyzer, config.drop_refusals, &mut memo)
            .map_err(|e| e.to_string())?;
        let roster = config.roster_for(attribute);
        let row_codes: Vec<String> = roster
            .iter()
            .filter(|g| g.can_be_from)
            .map(|g| g.code.clone())
            .collect();
        let col_codes: Vec<String> = roster.iter().map(|g| g.code.clone()).collect();
        let matrix = aggregate(attribute, &row_codes, &col_codes, &batch.observations).map_err(
            |e| {
                format!(
                    "aggregation for {}/{}/{} failed: {e}",
                    backend.backend_id,
                    attribute.slug(),
                    setting.slug()
                )
            },
        )?;
        counts.push(CombinationCount {
            backend_id: backend.backend_id.clone(),
            attribute,
            setting,
            records: records.len(),
            scored: batch.observations.len(),
            dropped_refusals: batch.dropped_refusals,
        });
        matrices.insert(key, matrix);
    }
    Ok(ScorePhase { matrices, counts })
}

fn failure_reasons(combo_failures: &BTreeMap<ComboKey, String>) -> Vec<String> {
    combo_failures
        .iter()
        .map(|((backend_id, attribute, setting), message)| {
            format!(
                "combination {backend_id}/{}/{} failed: {message}",
                attribute.slug(),
                setting.slug()
            )
        })
        .collect()
}

fn unscored_counts(
    config: &RunConfig,
    records_by_combo: &BTreeMap<ComboKey, Vec<TranscriptRecord>>,
) -> Vec<CombinationCount> {
    config
        .combinations()
        .into_iter()
        .map(|(backend, attribute, setting)| {
            let key: ComboKey = (backend.backend_id.clone(), attribute, setting);
            CombinationCount {
                backend_id: backend.backend_id.clone(),
                attribute,
                setting,
                records: records_by_combo.get(&key).map_or(0, Vec::len),
                scored: 0,
                dropped_refusals: 0,
            }
        })
        .collect()
}

struct Emitted {
    status: RunStatus,
    partial_reason: Option<String>,
}

/// Write matrix CSVs, load references, and render grid + report. Returns
/// the run status this implies. When any reference is unreadable the grid
/// and report are suppressed and the result is partial.
#[allow(clippy::too_many_arguments)]
fn emit_artifacts(
    config: &RunConfig,
    paths: &RunPaths,
    lexicon: &str,
    template_hash: &str,
    matrices: &BTreeMap<ComboKey, PairScoreMatrix>,
    combo_failures: &BTreeMap<ComboKey, String>,
    extra_reasons: Vec<String>,
    write_matrices: bool,
) -> Result<Emitted, CmdError> {
    if write_matrices {
        fs::create_dir_all(&paths.matrices_dir).map_err(|e| {
            CmdError::run(format!(
                "cannot create {}: {e}",
                paths.matrices_dir.display()
            ))
        })?;
        for ((backend_id, attribute, setting), matrix) in matrices {
            let mut text = format!("# run_id: {}\n# lexicon: {}\n", config.run_id, lexicon);
            text.push_str(&matrix_to_csv(
                matrix.row_codes(),
                matrix.col_codes(),
                |from, to| matrix.cell(from, to).map(|cell| cell.mean),
            ));
            let path = paths.matrix(backend_id, *attribute, *setting);
            fs::write(&path, text)
                .map_err(|e| CmdError::run(format!("cannot write {}: {e}", path.display())))?;
        }
    }

    let mut reasons = failure_reasons(combo_failures);
    reasons.extend(extra_reasons);

    let mut references: BTreeMap<AttributeKind, ReferenceMatrix> = BTreeMap::new();
    let mut reference_errors = Vec::new();
    for &attribute in &config.attributes {
        let Some(path) = config.reference_path(attribute) else {
            continue;
        };
        match load_reference(attribute, &config.roster_for(attribute), path) {
            Ok(reference) => {
                references.insert(attribute, reference);
            }
            Err(e) => {
                reference_errors.push(format!("reference poll for {}: {e}", attribute.slug()))
            }
        }
    }
    if !reference_errors.is_empty() {
        reasons.extend(reference_errors);
        return Ok(Emitted {
            status: RunStatus::Partial,
            partial_reason: Some(reasons.join("; ")),
        });
    }

    let mut labeled = Vec::new();
    for (backend, attribute, setting) in config.combinations() {
        let key: ComboKey = (backend.backend_id.clone(), attribute, setting);
        if let Some(matrix) = matrices.get(&key) {
            labeled.push(LabeledMatrix {
                backend_id: backend.backend_id.clone(),
                setting,
                matrix,
            });
        }
    }
    let reference_map: HashMap<AttributeKind, ReferenceMatrix> = references
        .iter()
        .map(|(&attribute, reference)| (attribute, reference.clone()))
        .collect();
    let mut outcomes: BTreeMap<ComboKey, GridOutcome> = BTreeMap::new();
    for entry in correlation_grid(&labeled, &reference_map) {
        outcomes.insert((entry.backend_id, entry.attribute, entry.setting), entry.outcome);
    }
    for (key, message) in combo_failures {
        outcomes.insert(
            key.clone(),
            GridOutcome::Undefined {
                n: 0,
                reason: format!("combination failed: {message}"),
            },
        );
    }

    let partial_reason = if reasons.is_empty() {
        None
    } else {
        Some(reasons.join("; "))
    };
    let backend_ids: Vec<String> = config
        .backends
        .iter()
        .map(|b| b.backend_id.clone())
        .collect();
    let ctx = ReportContext {
        run_id: &config.run_id,
        analyzer_id: &config.analyzer.analyzer_id,
        lexicon_checksum: lexicon,
        template_set_hash: template_hash,
        partial_reason: partial_reason.as_deref(),
        backend_ids: &backend_ids,
        attributes: &config.attributes,
        settings: &config.settings,
        outcomes: &outcomes,
        matrices,
        references: &references,
    };
    fs::write(&paths.grid_csv, render_grid_csv(&ctx)).map_err(|e| {
        CmdError::run(format!("cannot write {}: {e}", paths.grid_csv.display()))
    })?;
    fs::write(&paths.report_md, render_report_md(&ctx)).map_err(|e| {
        CmdError::run(format!("cannot write {}: {e}", paths.report_md.display()))
    })?;

    let status = if partial_reason.is_some() {
        RunStatus::Partial
    } else {
        RunStatus::Complete
    };
    Ok(Emitted {
        status,
        partial_reason,
    })
}

fn outcome_of(status: RunStatus, partial_reason: Option<String>) -> Outcome {
    match status {
        RunStatus::Complete => Outcome::Complete,
        RunStatus::Partial => Outcome::Partial {
            reason: partial_reason.unwrap_or_else(|| "partial results".to_string()),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    config: &RunConfig,
    paths: &RunPaths,
    created_at: DateTime<Utc>,
    status: RunStatus,
    partial_reason: Option<String>,
    lexicon: &str,
    template_hash: &str,
    combinations: Vec<CombinationCount>,
) -> Result<(), CmdError> {
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        run_id: config.run_id.clone(),
        status,
        partial_reason,
        created_at,
        completed_at: Utc::now(),
        analyzer_id: config.analyzer.analyzer_id.clone(),
        lexicon_checksum: lexicon.to_string(),
        template_set_hash: template_hash.to_string(),
        config: config.clone(),
        combinations,
    };
    manifest
        .save(&paths.manifest)
        .map_err(|message| CmdError::Run { message })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Config fragment: one replay backend over a three-nationality roster,
    /// two settings, builtin analyzer, one reference poll.
    fn base_toml(outdir: &Path) -> String {
        format!(
            r#"
run_id = "orch-demo"
output_dir = "{out}"
repeats = 2
attributes = ["nationalities"]
settings = ["yes_no_only", "mixed"]

[analyzer]
analyzer_id = "vader-builtin"
kind = "builtin_lexicon_rules"

[[backends]]
backend_id = "canned"
kind = "replay"
fixture = "fixture.jsonl"

[references]
nationalities = "nats.csv"

[[rosters.nationalities]]
code = "FR"
base_surface = "French"

[[rosters.nationalities]]
code = "DE"
base_surface = "German"

[[rosters.nationalities]]
code = "IT"
base_surface = "Italian"
"#,
            out = outdir.display()
        )
    }

    const REFERENCE_CSV: &str = "from\\to,FR,DE,IT\nFR,,62.0,55.0\nDE,48.0,,51.5\nIT,67.0,44.0,\n";

    /// Write `config.toml`, `nats.csv`, and a replay fixture answering every
    /// prompt the config plans, then load the config.
    fn prepare(dir: &Path, toml: &str) -> RunConfig {
        let config_path = dir.join("config.toml");
        fs::write(&config_path, toml).unwrap();
        fs::write(dir.join("nats.csv"), REFERENCE_CSV).unwrap();
        let config = RunConfig::load(&config_path).unwrap();
        synth_fixture(&config);
        config
    }

    /// Fill the config's fixture path with deterministic responses keyed by
    /// request key, covering every planned prompt exactly once.
    fn synth_fixture(config: &RunConfig) {
        let backend = &config.backends[0];
        let fixture = backend.fixture.clone().unwrap();
        fs::write(&fixture, "").unwrap();
        let store = TranscriptStore::open(&fixture).unwrap();
        let set = config.template_set();
        let bank = [
            "They are wonderful, kind, and I admire them greatly.",
            "They are okay I guess.",
            "They are awful and I despise them.",
        ];
        let mut seen = HashSet::new();
        for &attribute in &config.attributes {
            let roster = config.roster_for(attribute);
            for &setting in &config.settings {
                let plan = build_plan(&roster, &set, setting, config.repeats).unwrap();
                for prompt in &plan {
                    let key = request_key(
                        &backend.backend_id,
                        &prompt.system_text,
                        &prompt.user_text,
                        prompt.repeat_index,
                    );
                    if !seen.insert(key.clone()) {
                        continue;
                    }
                    let pick = key.as_bytes()[0] as usize % bank.len();
                    store
                        .append(&TranscriptRecord {
                            run_id: "fixture-origin".into(),
                            backend_id: backend.backend_id.clone(),
                            attribute,
                            from_code: prompt.from_code.clone(),
                            to_code: prompt.to_code.clone(),
                            template_id: prompt.template_id.clone(),
                            repeat_index: prompt.repeat_index,
                            system_text: prompt.system_text.clone(),
                            user_text: prompt.user_text.clone(),
                            response_text: bank[pick].to_string(),
                            request_key: key,
                            timestamp: "2026-08-19T12:00:00Z".parse().unwrap(),
                        })
                        .unwrap();
                }
            }
        }
    }

    fn read(path: &Path) -> String {
        fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
    }

    fn manifest_without_timestamps(path: &Path) -> serde_json::Value {
        let mut value: serde_json::Value = serde_json::from_str(&read(path)).unwrap();
        let object = value.as_object_mut().unwrap();
        object.remove("created_at");
        object.remove("completed_at");
        value
    }

    #[test]
    fn cmd_run_replay_end_to_end_is_complete() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config = prepare(dir.path(), &base_toml(&outdir));
        let outcome = cmd_run(config.clone(), None, None).unwrap();
        assert_eq!(outcome, Outcome::Complete);

        let paths = RunPaths::new(&outdir, "orch-demo");
        let manifest = RunManifest::load(&paths.manifest).unwrap();
        assert_eq!(manifest.status, RunStatus::Complete);
        assert_eq!(manifest.partial_reason, None);
        assert_eq!(manifest.combinations.len(), 2);
        // 6 ordered pairs × 6 templates × 2 repeats per combination.
        for combo in &manifest.combinations {
            assert_eq!(combo.records, 72);
            assert_eq!(combo.scored, 72);
            assert_eq!(combo.dropped_refusals, 0);
        }

        // The run-local transcript holds each unique key exactly once.
        let set = config.template_set();
        let expected_unique: HashSet<&str> = set
            .select(Setting::YesNoOnly)
            .iter()
            .chain(set.select(Setting::Mixed).iter())
            .map(|t| t.id.as_str())
            .collect();
        let expected_lines = expected_unique.len() * 6 * 2;
        let transcript = read(&paths.transcript("canned"));
        assert_eq!(transcript.lines().count(), expected_lines);
        assert!(transcript.contains("\"run_id\":\"orch-demo\""));

        for setting in ["yes_no_only", "mixed"] {
            let matrix = read(
                &paths
                    .matrices_dir
                    .join(format!("canned.nationalities.{setting}.csv")),
            );
            let mut lines = matrix.lines();
            assert_eq!(lines.next(), Some("# run_id: orch-demo"));
            assert!(lines.next().unwrap().starts_with("# lexicon: "));
            assert_eq!(lines.next(), Some("from\\to,FR,DE,IT"));
        }

        let grid = read(&paths.grid_csv);
        let lines: Vec<&str> = grid.lines().collect();
        assert_eq!(
            lines[2],
            "backend,nationalities:yes_no_only,nationalities:mixed"
        );
        assert!(lines[3].starts_with("canned,"), "{grid}");
        assert!(!grid.contains("NA"), "expected computed cells:\n{grid}");

        let report = read(&paths.report_md);
        assert!(report.contains("## Correlation grid"));
        assert!(report.contains("ρ="));
        assert!(!report.contains("PARTIAL"));
    }

    #[test]
    fn cmd_run_is_deterministic_across_parallelism() {
        let dir = tempfile::tempdir().unwrap();
        let out_serial = dir.path().join("out-serial");
        let out_parallel = dir.path().join("out-parallel");
        let config = prepare(dir.path(), &base_toml(&out_serial));

        cmd_run(config.clone(), None, Some(1)).unwrap();
        cmd_run(config, Some(&out_parallel), Some(8)).unwrap();

        let serial = RunPaths::new(&out_serial, "orch-demo");
        let parallel = RunPaths::new(&out_parallel, "orch-demo");
        assert_eq!(read(&serial.grid_csv), read(&parallel.grid_csv));
        assert_eq!(read(&serial.report_md), read(&parallel.report_md));
        for setting in ["yes_no_only", "mixed"] {
            let name = format!("canned.nationalities.{setting}.csv");
            assert_eq!(
                read(&serial.matrices_dir.join(&name)),
                read(&parallel.matrices_dir.join(&name))
            );
        }
        let mut left = manifest_without_timestamps(&serial.manifest);
        let mut right = manifest_without_timestamps(&parallel.manifest);
        // The effective config legitimately differs in output directory and
        // worker count; everything else must match.
        for manifest in [&mut left, &mut right] {
            let config = manifest
                .as_object_mut()
                .unwrap()
                .get_mut("config")
                .unwrap()
                .as_object_mut()
                .unwrap();
            config.remove("output_dir");
            config.remove("parallelism");
        }
        assert_eq!(left, right);
    }

    #[test]
    fn cmd_score_reproduces_run_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config = prepare(dir.path(), &base_toml(&outdir));
        cmd_run(config, None, None).unwrap();

        let paths = RunPaths::new(&outdir, "orch-demo");
        let grid_before = read(&paths.grid_csv);
        let report_before = read(&paths.report_md);
        let matrix_name = "canned.nationalities.mixed.csv";
        let matrix_before = read(&paths.matrices_dir.join(matrix_name));
        let manifest_before = manifest_without_timestamps(&paths.manifest);
        let created_before: serde_json::Value =
            serde_json::from_str(&read(&paths.manifest)).unwrap();

        let outcome = cmd_score(&outdir, "orch-demo", AnalyzerOverride::None).unwrap();
        assert_eq!(outcome, Outcome::Complete);

        assert_eq!(read(&paths.grid_csv), grid_before);
        assert_eq!(read(&paths.report_md), report_before);
        assert_eq!(read(&paths.matrices_dir.join(matrix_name)), matrix_before);
        assert_eq!(manifest_without_timestamps(&paths.manifest), manifest_before);
        // created_at survives a re-score; only completed_at moves.
        let created_after: serde_json::Value =
            serde_json::from_str(&read(&paths.manifest)).unwrap();
        assert_eq!(created_after["created_at"], created_before["created_at"]);
    }

    #[test]
    fn cmd_score_missing_transcript_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config = prepare(dir.path(), &base_toml(&outdir));
        cmd_run(config, None, None).unwrap();

        let paths = RunPaths::new(&outdir, "orch-demo");
        let transcript = paths.transcript("canned");
        fs::remove_file(&transcript).unwrap();

        let err = cmd_score(&outdir, "orch-demo", AnalyzerOverride::None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        match &err {
            CmdError::MissingTranscript(e) => assert_eq!(e.path, transcript),
            other => panic!("expected MissingTranscript, got {other:?}"),
        }
        let message = err.to_string();
        assert!(message.contains("MissingTranscriptError"), "{message}");
        assert!(message.contains(transcript.to_str().unwrap()), "{message}");
    }

    #[test]
    fn cmd_score_constant_zero_analyzer_zeroes_matrices_and_degenerates_grid() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config = prepare(dir.path(), &base_toml(&outdir));
        cmd_run(config, None, None).unwrap();

        let outcome = cmd_score(
            &outdir,
            "orch-demo",
            AnalyzerOverride::Command {
                id: "zero".into(),
                argv: vec!["sh".into(), "-c".into(), "cat >/dev/null; echo 0".into()],
            },
        )
        .unwrap();
        assert_eq!(outcome, Outcome::Complete);

        let paths = RunPaths::new(&outdir, "orch-demo");
        let matrix = read(&paths.matrices_dir.join("canned.nationalities.mixed.csv"));
        let raw = parse_matrix_csv(&matrix).unwrap();
        assert_eq!(raw.cells.len(), 6);
        assert!(raw.cells.iter().all(|(_, value)| *value == 0.0));

        let grid = read(&paths.grid_csv);
        assert!(grid.lines().last().unwrap().contains("NA;NA;6"), "{grid}");
        let report = read(&paths.report_md);
        assert!(report.contains("zero variance"), "{report}");

        let manifest = RunManifest::load(&paths.manifest).unwrap();
        assert_eq!(manifest.analyzer_id, "zero");
        assert_eq!(manifest.lexicon_checksum, "external:zero");
        assert_eq!(manifest.config.analyzer.analyzer_id, "zero");
    }

    #[test]
    fn cmd_run_unreadable_reference_is_partial_without_grid_or_report() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let toml = base_toml(&outdir).replace("nats.csv", "no-such-reference.csv");
        let config = prepare(dir.path(), &toml);
        let outcome = cmd_run(config, None, None).unwrap();
        let Outcome::Partial { reason } = outcome else {
            panic!("expected partial outcome");
        };
        assert!(reason.contains("reference poll for nationalities"), "{reason}");

        let paths = RunPaths::new(&outdir, "orch-demo");
        // Transcripts and matrices exist; grid and report do not.
        assert!(paths.transcript("canned").is_file());
        assert!(paths
            .matrices_dir
            .join("canned.nationalities.mixed.csv")
            .is_file());
        assert!(!paths.grid_csv.exists());
        assert!(!paths.report_md.exists());
        let manifest = RunManifest::load(&paths.manifest).unwrap();
        assert_eq!(manifest.status, RunStatus::Partial);
    }

    #[test]
    fn cmd_run_missing_fixture_fails_the_backend_combinations() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config_path = dir.path().join("config.toml");
        fs::write(&config_path, base_toml(&outdir)).unwrap();
        fs::write(dir.path().join("nats.csv"), REFERENCE_CSV).unwrap();
        // No fixture file is written.
        let config = RunConfig::load(&config_path).unwrap();
        let outcome = cmd_run(config, None, None).unwrap();
        let Outcome::Partial { reason } = outcome else {
            panic!("expected partial outcome");
        };
        assert!(reason.contains("replay fixture"), "{reason}");

        let paths = RunPaths::new(&outdir, "orch-demo");
        let grid = read(&paths.grid_csv);
        assert_eq!(grid.lines().last().unwrap(), "canned,NA;NA;0,NA;NA;0");
        let report = read(&paths.report_md);
        assert!(report.contains("PARTIAL RESULTS"), "{report}");
        assert!(report.contains("combination failed: replay fixture"), "{report}");
        let manifest = RunManifest::load(&paths.manifest).unwrap();
        assert_eq!(manifest.status, RunStatus::Partial);
        assert!(manifest.combinations.iter().all(|c| c.records == 0));
    }

    #[test]
    fn cmd_run_with_no_pairs_reports_no_data_and_completes() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        // Single-group roster: zero ordered pairs, zero prompts. No
        // reference poll is configured for the attribute.
        let toml = format!(
            r#"
run_id = "empty-run"
output_dir = "{out}"
attributes = ["nationalities"]
settings = ["mixed"]

[analyzer]
analyzer_id = "vader-builtin"
kind = "builtin_lexicon_rules"

[[backends]]
backend_id = "canned"
kind = "replay"
fixture = "fixture.jsonl"

[[rosters.nationalities]]
code = "FR"
base_surface = "French"
"#,
            out = outdir.display()
        );
        let config_path = dir.path().join("config.toml");
        fs::write(&config_path, &toml).unwrap();
        fs::write(dir.path().join("fixture.jsonl"), "").unwrap();
        let config = RunConfig::load(&config_path).unwrap();

        let outcome = cmd_run(config, None, None).unwrap();
        assert_eq!(outcome, Outcome::Complete);
        assert_eq!(outcome.exit_code(), 0);

        let paths = RunPaths::new(&outdir, "empty-run");
        let grid = read(&paths.grid_csv);
        assert_eq!(grid.lines().last().unwrap(), "canned,NA;NA;0");
        let report = read(&paths.report_md);
        assert!(report.contains("_no data_"), "{report}");
        assert!(report.contains("Reference poll: none configured."), "{report}");
        assert!(!report.contains("PARTIAL"), "{report}");
        let manifest = RunManifest::load(&paths.manifest).unwrap();
        assert_eq!(manifest.status, RunStatus::Complete);
        assert_eq!(manifest.combinations[0].records, 0);
    }

    #[test]
    fn cmd_report_rebuilds_grid_and_report_without_touching_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config = prepare(dir.path(), &base_toml(&outdir));
        cmd_run(config, None, None).unwrap();

        let paths = RunPaths::new(&outdir, "orch-demo");
        let grid_before = read(&paths.grid_csv);
        let report_before = read(&paths.report_md);
        let manifest_before = read(&paths.manifest);
        fs::remove_file(&paths.grid_csv).unwrap();
        fs::remove_file(&paths.report_md).unwrap();

        let outcome = cmd_report(&outdir, "orch-demo").unwrap();
        assert_eq!(outcome, Outcome::Complete);
        assert_eq!(read(&paths.grid_csv), grid_before);
        assert_eq!(read(&paths.report_md), report_before);
        assert_eq!(read(&paths.manifest), manifest_before);
    }

    #[test]
    fn cmd_report_missing_matrix_with_scored_responses_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config = prepare(dir.path(), &base_toml(&outdir));
        cmd_run(config, None, None).unwrap();

        let paths = RunPaths::new(&outdir, "orch-demo");
        let matrix = paths.matrices_dir.join("canned.nationalities.mixed.csv");
        fs::remove_file(&matrix).unwrap();

        let err = cmd_report(&outdir, "orch-demo").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let message = err.to_string();
        assert!(message.contains(matrix.to_str().unwrap()), "{message}");
    }

    #[test]
    fn locked_output_directory_rejects_commands_with_exit_2() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let config = prepare(dir.path(), &base_toml(&outdir));
        let _held = RunLock::acquire(&outdir).unwrap();
        let err = cmd_run(config, None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("locked"), "{err}");
    }

    #[test]
    fn analyzer_override_resolution_rules() {
        let configured = AnalyzerConfig {
            analyzer_id: "tweetnlp".into(),
            kind: AnalyzerKind::ExternalCommand,
            command: vec!["analyze".into()],
        };
        let kept = AnalyzerOverride::None.resolve(&configured).unwrap();
        assert_eq!(kept, configured);
        let same = AnalyzerOverride::Id("tweetnlp".into())
            .resolve(&configured)
            .unwrap();
        assert_eq!(same, configured);
        let builtin = AnalyzerOverride::Id(VaderAnalyzer::DEFAULT_ID.into())
            .resolve(&configured)
            .unwrap();
        assert_eq!(builtin, AnalyzerConfig::builtin());
        let unknown = AnalyzerOverride::Id("mystery".into())
            .resolve(&configured)
            .unwrap_err();
        assert_eq!(unknown.exit_code(), 2);
        let external = AnalyzerOverride::Command {
            id: "zero".into(),
            argv: vec!["true".into()],
        }
        .resolve(&configured)
        .unwrap();
        assert_eq!(external.kind, AnalyzerKind::ExternalCommand);
        assert_eq!(external.analyzer_id, "zero");
    }

    #[test]
    fn cmd_validate_config_accepts_good_and_rejects_bad() {
        let dir = tempfile::tempdir().unwrap();
        let outdir = dir.path().join("out");
        let good = dir.path().join("good.toml");
        fs::write(&good, base_toml(&outdir)).unwrap();
        cmd_validate_config(&good).unwrap();

        let bad = dir.path().join("bad.toml");
        fs::write(&bad, base_toml(&outdir).replace("repeats = 2", "repeats = 0")).unwrap();
        let err = cmd_validate_config(&bad).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("repeats"), "{err}");

        let absent = dir.path().join("absent.toml");
        let err = cmd_validate_config(&absent).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
