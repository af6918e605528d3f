//! Run configuration: TOML schema, path resolution, and validation.
//!
//! A run configuration is a UTF-8 TOML file naming the run, the backends to
//! query, the analyzer, the attributes and settings to cover, and where
//! reference polls and output artifacts live. Rosters and templates default
//! to the built-in tables and can be overridden per attribute.
//!
//! Relative *input* paths (replay fixtures, reference CSVs) resolve against
//! the directory containing the config file, so a config can ship next to
//! its fixtures and work from any working directory. The *output* directory
//! resolves against the working directory, like the `--outdir` flag that
//! overrides it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use intersent_core::groups::{
    build_plan, validate_roster, AttributeKind, Group, QuestionTemplate, QuestionType, Setting,
    TemplateSet,
};
use intersent_core::sentiment::{AnalyzerDescriptor, AnalyzerKind};
use intersent_gateway::{BackendDescriptor, BackendKind, GatewayConfig, RetryConfig};

/// One backend entry of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: BackendKind,
    /// Chat-completions URL (`http_chat` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Environment variable holding the bearer token (`http_chat` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_source: Option<String>,
    /// Recorded transcript store to serve responses from (`replay` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    /// Extra request-body fields passed through verbatim.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub generation_params: serde_json::Map<String, serde_json::Value>,
}

impl BackendConfig {
    /// The gateway descriptor this entry configures.
    pub fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: self.backend_id.clone(),
            kind: self.kind,
            endpoint: self.endpoint.clone(),
            auth_source: self.auth_source.clone(),
            generation_params: self.generation_params.clone(),
        }
    }
}

/// Analyzer selection. `builtin_lexicon_rules` scores with the bundled
/// lexicon; `external_command` spawns `command` once per response text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerConfig {
    pub analyzer_id: String,
    pub kind: AnalyzerKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
}

impl AnalyzerConfig {
    pub fn descriptor(&self) -> AnalyzerDescriptor {
        AnalyzerDescriptor {
            analyzer_id: self.analyzer_id.clone(),
            kind: self.kind,
            command: self.command.clone(),
        }
    }

    /// The default builtin analyzer.
    pub fn builtin() -> AnalyzerConfig {
        AnalyzerConfig {
            analyzer_id: intersent_core::sentiment::vader::VaderAnalyzer::DEFAULT_ID.to_string(),
            kind: AnalyzerKind::BuiltinLexiconRules,
            command: Vec::new(),
        }
    }
}

/// One roster entry; the attribute comes from the roster's config key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub code: String,
    pub base_surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plural_surface: Option<String>,
    #[serde(default = "default_true")]
    pub can_be_from: bool,
}

impl GroupSpec {
    fn to_group(&self, attribute: AttributeKind) -> Group {
        Group {
            code: self.code.clone(),
            base_surface: self.base_surface.clone(),
            plural_surface: self.plural_surface.clone(),
            can_be_from: self.can_be_from,
            attribute,
        }
    }
}

/// Optional replacement of the canonical template table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateConfig {
    /// Row indexes the mixed setting selects (default `[1, 3, 5, 7, 9, 11]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_rows: Option<Vec<u8>>,
    /// Full replacement template table; empty keeps the canonical twelve.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<TemplateRowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateRowSpec {
    pub id: String,
    pub qtype: QuestionType,
    pub row_index: u8,
    pub pattern: String,
}

/// Live-traffic tunables, applied to every `http_chat` backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySettings {
    /// Outgoing requests per second per backend.
    pub rate_limit_rps: f64,
    /// Per-request timeout in seconds.
    pub timeout_secs: f64,
    /// Retry budget per prompt for 429/5xx/network failures.
    pub retry_attempts: u32,
    /// A plan aborts once `failed / total` exceeds this fraction.
    pub failure_fraction: f64,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        let defaults = GatewayConfig::default();
        GatewaySettings {
            rate_limit_rps: defaults.rate_limit_rps,
            timeout_secs: defaults.timeout.as_secs_f64(),
            retry_attempts: defaults.retry.max_attempts,
            failure_fraction: defaults.failure_fraction,
        }
    }
}

impl GatewaySettings {
    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            retry: RetryConfig {
                max_attempts: self.retry_attempts,
                ..RetryConfig::default()
            },
            rate_limit_rps: self.rate_limit_rps,
            timeout: std::time::Duration::from_secs_f64(self.timeout_secs),
            failure_fraction: self.failure_fraction,
        }
    }
}

/// A full run configuration, as parsed from `run --config <path>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    /// Where `<run_id>/` artifact directories are created.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Responses requested per (pair, template) cell.
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    /// In-flight completions per backend plan.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub attributes: Vec<AttributeKind>,
    pub settings: Vec<Setting>,
    /// Drop responses matching the documented refusal patterns before
    /// aggregation (default: score everything the analyzer returns).
    #[serde(default)]
    pub drop_refusals: bool,
    pub analyzer: AnalyzerConfig,
    pub backends: Vec<BackendConfig>,
    /// Reference poll CSV per attribute slug. Attributes without an entry
    /// get `NA` grid cells instead of correlations.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub references: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "is_default_gateway")]
    pub gateway: GatewaySettings,
    /// Roster overrides per attribute slug; missing slugs use the built-in
    /// rosters.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rosters: BTreeMap<String, Vec<GroupSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<TemplateConfig>,
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_repeats() -> u32 {
    3
}

fn default_parallelism() -> usize {
    1
}

fn is_default_gateway(settings: &GatewaySettings) -> bool {
    *settings == GatewaySettings::default()
}

/// Filesystem-safe identifier: ASCII letters, digits, `.`, `_`, `-`, and not
/// all dots. Shared by run ids and backend ids (both become path segments).
pub fn is_fs_safe(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        && !id.chars().all(|c| c == '.')
}

impl RunConfig {
    /// Parse TOML text. Unknown fields are rejected.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Read, parse, and resolve a config file: relative input paths become
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut config = RunConfig::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_input_paths(base);
        Ok(config)
    }

    /// Anchor relative fixture and reference paths at `base`.
    pub fn resolve_input_paths(&mut self, base: &Path) {
        for backend in &mut self.backends {
            if let Some(fixture) = &backend.fixture {
                if fixture.is_relative() {
                    backend.fixture = Some(base.join(fixture));
                }
            }
        }
        for path in self.references.values_mut() {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// The roster used for `attribute`: the configured override or the
    /// built-in default.
    pub fn roster_for(&self, attribute: AttributeKind) -> Vec<Group> {
        match self.rosters.get(attribute.slug()) {
            Some(specs) => specs.iter().map(|s| s.to_group(attribute)).collect(),
            None => intersent_core::groups::default_roster(attribute),
        }
    }

    /// The reference CSV path configured for `attribute`, if any.
    pub fn reference_path(&self, attribute: AttributeKind) -> Option<&Path> {
        self.references.get(attribute.slug()).map(PathBuf::as_path)
    }

    /// The template set in effect: configured replacement or the canonical
    /// twelve with the default mixed selection.
    pub fn template_set(&self) -> TemplateSet {
        let mut set = TemplateSet::default();
        if let Some(templates) = &self.templates {
            if !templates.rows.is_empty() {
                set.templates = templates
                    .rows
                    .iter()
                    .map(|row| QuestionTemplate {
                        id: row.id.clone(),
                        qtype: row.qtype,
                        row_index: row.row_index,
                        pattern: row.pattern.clone(),
                    })
                    .collect();
            }
            if let Some(mixed_rows) = &templates.mixed_rows {
                set.mixed_rows = mixed_rows.clone();
            }
        }
        set
    }

    /// Every (backend, attribute, setting) combination in canonical order:
    /// backends outermost, then attributes, then settings, each in config
    /// order.
    pub fn combinations(&self) -> Vec<(&BackendConfig, AttributeKind, Setting)> {
        let mut combos = Vec::new();
        for backend in &self.backends {
            for &attribute in &self.attributes {
                for &setting in &self.settings {
                    combos.push((backend, attribute, setting));
                }
            }
        }
        combos
    }

    /// Check every static invariant, returning all problems found (empty
    /// means valid). File existence is deliberately not checked here: it is
    /// a runtime concern, not a config one.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();

        if !is_fs_safe(&self.run_id) {
            problems.push(format!(
                "run_id {:?} must be non-empty and filesystem-safe \
                 (ASCII letters, digits, `.`, `_`, `-`)",
                self.run_id
            ));
        }
        if self.repeats == 0 {
            problems.push("repeats must be at least 1".to_string());
        }
        if self.parallelism == 0 {
            problems.push("parallelism must be at least 1".to_string());
        }

        if self.backends.is_empty() {
            problems.push("at least one backend is required".to_string());
        }
        let mut backend_ids = BTreeSet::new();
        for backend in &self.backends {
            if let Err(e) = backend.descriptor().validate() {
                problems.push(e.to_string());
            }
            if !backend_ids.insert(backend.backend_id.as_str()) {
                problems.push(format!("duplicate backend_id {:?}", backend.backend_id));
            }
            match backend.kind {
                BackendKind::Replay => {
                    if backend.fixture.is_none() {
                        problems.push(format!(
                            "replay backend {:?} requires a fixture path",
                            backend.backend_id
                        ));
                    }
                }
                BackendKind::HttpChat => {
                    if backend.fixture.is_some() {
                        problems.push(format!(
                            "http_chat backend {:?} must not set a fixture path",
                            backend.backend_id
                        ));
                    }
                }
            }
        }

        if self.attributes.is_empty() {
            problems.push("at least one attribute is required".to_string());
        }
        let mut seen_attributes = BTreeSet::new();
        for attribute in &self.attributes {
            if !seen_attributes.insert(attribute.slug()) {
                problems.push(format!("duplicate attribute {:?}", attribute.slug()));
            }
        }
        if self.settings.is_empty() {
            problems.push("at least one setting is required".to_string());
        }
        let mut seen_settings = BTreeSet::new();
        for setting in &self.settings {
            if !seen_settings.insert(setting.slug()) {
                problems.push(format!("duplicate setting {:?}", setting.slug()));
            }
        }

        if self.analyzer.analyzer_id.is_empty() {
            problems.push("analyzer_id must be non-empty".to_string());
        }
        match self.analyzer.kind {
            AnalyzerKind::BuiltinLexiconRules => {
                if !self.analyzer.command.is_empty() {
                    problems.push(
                        "builtin_lexicon_rules analyzer must not set a command".to_string(),
                    );
                }
            }
            AnalyzerKind::ExternalCommand => {
                if self.analyzer.command.is_empty() {
                    problems.push(
                        "external_command analyzer requires a non-empty command".to_string(),
                    );
                }
            }
        }

        for slug in self.rosters.keys() {
            if AttributeKind::from_slug(slug).is_none() {
                problems.push(format!("rosters: unknown attribute slug {slug:?}"));
            }
        }
        for slug in self.references.keys() {
            if AttributeKind::from_slug(slug).is_none() {
                problems.push(format!("references: unknown attribute slug {slug:?}"));
            }
        }

        let gw = &self.gateway;
        if !(gw.rate_limit_rps.is_finite() && gw.rate_limit_rps > 0.0) {
            problems.push(format!(
                "gateway.rate_limit_rps must be positive and finite, got {}",
                gw.rate_limit_rps
            ));
        }
        if !(gw.timeout_secs.is_finite() && gw.timeout_secs > 0.0) {
            problems.push(format!(
                "gateway.timeout_secs must be positive and finite, got {}",
                gw.timeout_secs
            ));
        }
        if gw.retry_attempts == 0 {
            problems.push("gateway.retry_attempts must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&gw.failure_fraction) {
            problems.push(format!(
                "gateway.failure_fraction must be within [0, 1], got {}",
                gw.failure_fraction
            ));
        }

        if let Some(templates) = &self.templates {
            let mut ids = BTreeSet::new();
            let mut row_indexes = BTreeSet::new();
            for row in &templates.rows {
                if !ids.insert(row.id.as_str()) {
                    problems.push(format!("duplicate template id {:?}", row.id));
                }
                if !row_indexes.insert(row.row_index) {
                    problems.push(format!("duplicate template row_index {}", row.row_index));
                }
            }
        }

        // Roster semantics and template expansion, per selected attribute.
        let template_set = self.template_set();
        for &attribute in &self.attributes {
            let roster = self.roster_for(attribute);
            problems.extend(validate_roster(attribute, &roster));
            for &setting in &self.settings {
                if template_set.select(setting).is_empty() {
                    problems.push(format!(
                        "setting {:?} selects no templates",
                        setting.slug()
                    ));
                    continue;
                }
                // Dry-run expansion surfaces template slot errors with the
                // real rosters. One repeat is enough: repeats only clone.
                if let Err(e) = build_plan(&roster, &template_set, setting, 1) {
                    problems.push(format!(
                        "template expansion for {}/{} failed: {e}",
                        attribute.slug(),
                        setting.slug()
                    ));
                }
            }
        }

        problems.sort();
        problems.dedup();
        problems
    }
}
