//! Emitters for the correlation grid CSV and the Markdown report.
//!
//! Both artifacts are pure functions of already-computed data, formatted
//! with fixed rules (Rust `{}` shortest-round-trip decimals in the CSV,
//! fixed-width rounding in the Markdown), so identical inputs produce
//! byte-identical bytes. Neither contains timestamps: timestamps live in
//! the manifest, keeping re-runs diff-clean.

use std::collections::BTreeMap;

use intersent_core::groups::{AttributeKind, Setting};
use intersent_core::polls::ReferenceMatrix;
use intersent_core::stats::{GridOutcome, PairScoreMatrix};

/// Everything the emitters need, keyed in config order.
pub struct ReportContext<'a> {
    pub run_id: &'a str,
    pub analyzer_id: &'a str,
    pub lexicon_checksum: &'a str,
    pub template_set_hash: &'a str,
    /// Partial-results marker; `None` for a complete run.
    pub partial_reason: Option<&'a str>,
    /// Backend ids in config order (grid rows).
    pub backend_ids: &'a [String],
    /// Attributes in config order (outer column group / report sections).
    pub attributes: &'a [AttributeKind],
    /// Settings in config order (inner column group).
    pub settings: &'a [Setting],
    /// One outcome per (backend, attribute, setting) combination.
    pub outcomes: &'a BTreeMap<(String, AttributeKind, Setting), GridOutcome>,
    /// Score matrices for combinations that produced one.
    pub matrices: &'a BTreeMap<(String, AttributeKind, Setting), PairScoreMatrix>,
    /// Reference matrices for attributes that have one.
    pub references: &'a BTreeMap<AttributeKind, ReferenceMatrix>,
}

fn grid_cell(outcome: &GridOutcome) -> String {
    match outcome {
        GridOutcome::Computed(report) => {
            format!("{};{};{}", report.rho, report.p_value, report.n)
        }
        GridOutcome::Undefined { n, .. } => format!("NA;NA;{n}"),
    }
}

/// Render the correlation grid: two metadata comment lines, a header row,
/// then one row per backend with a `rho;p;n` (or `NA;NA;n`) cell per
/// (attribute, setting) column.
pub fn render_grid_csv(ctx: &ReportContext<'_>) -> String {
    let mut out = String::new();
    out.push_str(&format!("# run_id: {}\n", ctx.run_id));
    out.push_str(&format!("# lexicon: {}\n", ctx.lexicon_checksum));
    out.push_str("backend");
    for &attribute in ctx.attributes {
        for &setting in ctx.settings {
            out.push_str(&format!(",{}:{}", attribute.slug(), setting.slug()));
        }
    }
    out.push('\n');
    for backend_id in ctx.backend_ids {
        out.push_str(backend_id);
        for &attribute in ctx.attributes {
            for &setting in ctx.settings {
                let key = (backend_id.clone(), attribute, setting);
                let cell = ctx
                    .outcomes
                    .get(&key)
                    .map(grid_cell)
                    .unwrap_or_else(|| "NA;NA;0".to_string());
                out.push(',');
                out.push_str(&cell);
            }
        }
        out.push('\n');
    }
    out
}

fn fmt_rho(rho: f64) -> String {
    format!("{rho:.4}")
}

fn fmt_p(p: f64) -> String {
    format!("{p:.4e}")
}

/// Markdown table of a matrix-shaped value table; `cell` returns the
/// already-formatted cell text, or `None` for absent.
fn markdown_matrix(
    row_codes: &[String],
    col_codes: &[String],
    cell: impl Fn(&str, &str) -> Option<String>,
) -> String {
    let mut out = String::new();
    out.push_str("| from\\to |");
    for to in col_codes {
        out.push_str(&format!(" {to} |"));
    }
    out.push('\n');
    out.push_str("| --- |");
    for _ in col_codes {
        out.push_str(" --- |");
    }
    out.push('\n');
    for from in row_codes {
        out.push_str(&format!("| {from} |"));
        for to in col_codes {
            match cell(from, to) {
                Some(text) => out.push_str(&format!(" {text} |")),
                None => out.push_str("  |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Render the Markdown report: run header, correlation grid with undefined-
/// cell footnotes, then per attribute the reference matrix and every
/// combination's score matrix annotated with its ρ, p, and n.
pub fn render_report_md(ctx: &ReportContext<'_>) -> String {
    let mut out = String::new();
    out.push_str("# Inter-group sentiment report\n\n");
    if let Some(reason) = ctx.partial_reason {
        out.push_str(&format!("**PARTIAL RESULTS**: {reason}\n\n"));
    }
    out.push_str(&format!("- run: `{}`\n", ctx.run_id));
    out.push_str(&format!(
        "- tool: `{} {}`\n",
        crate::artifacts::TOOL_NAME,
        crate::artifacts::TOOL_VERSION
    ));
    out.push_str(&format!("- analyzer: `{}`\n", ctx.analyzer_id));
    out.push_str(&format!("- lexicon checksum: `{}`\n", ctx.lexicon_checksum));
    out.push_str(&format!("- template set: `{}`\n", ctx.template_set_hash));
    let backends = ctx
        .backend_ids
        .iter()
        .map(|id| format!("`{id}`"))
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("- backends: {backends}\n\n"));

    // Correlation grid.
    out.push_str("## Correlation grid\n\n");
    out.push_str(
        "Each cell: Pearson ρ between per-pair mean compound scores and the \
         attribute's reference poll, the two-sided non-correlation p-value, \
         and the number of paired cells n.\n\n",
    );
    out.push_str("| backend |");
    for &attribute in ctx.attributes {
        for &setting in ctx.settings {
            out.push_str(&format!(" {} / {} |", attribute.slug(), setting.slug()));
        }
    }
    out.push('\n');
    out.push_str("| --- |");
    for _ in 0..(ctx.attributes.len() * ctx.settings.len()) {
        out.push_str(" --- |");
    }
    out.push('\n');
    let mut undefined: Vec<String> = Vec::new();
    for backend_id in ctx.backend_ids {
        out.push_str(&format!("| `{backend_id}` |"));
        for &attribute in ctx.attributes {
            for &setting in ctx.settings {
                let key = (backend_id.clone(), attribute, setting);
                match ctx.outcomes.get(&key) {
                    Some(GridOutcome::Computed(report)) => out.push_str(&format!(
                        " ρ={}, p={}, n={} |",
                        fmt_rho(report.rho),
                        fmt_p(report.p_value),
                        report.n
                    )),
                    Some(GridOutcome::Undefined { n, reason }) => {
                        out.push_str(&format!(" NA (n={n}) |"));
                        undefined.push(format!(
                            "`{backend_id}` / {} / {} — {reason}",
                            attribute.slug(),
                            setting.slug()
                        ));
                    }
                    None => {
                        out.push_str(" NA (n=0) |");
                        undefined.push(format!(
                            "`{backend_id}` / {} / {} — no outcome recorded",
                            attribute.slug(),
                            setting.slug()
                        ));
                    }
                }
            }
        }
        out.push('\n');
    }
    out.push('\n');
    if !undefined.is_empty() {
        out.push_str("Undefined cells:\n\n");
        for line in &undefined {
            out.push_str(&format!("- {line}\n"));
        }
        out.push('\n');
    }

    // Per-attribute detail.
    for &attribute in ctx.attributes {
        out.push_str(&format!("## {}\n\n", attribute.slug()));
        match ctx.references.get(&attribute) {
            Some(reference) => {
                out.push_str(&format!(
                    "Reference poll ({}), source: `{}`\n\n",
                    reference.unit(),
                    reference.source()
                ));
                if reference.is_empty() {
                    out.push_str("_no data_\n\n");
                } else {
                    out.push_str(&markdown_matrix(
                        reference.row_codes(),
                        reference.col_codes(),
                        |from, to| reference.cell(from, to).map(|v| format!("{v}")),
                    ));
                    out.push('\n');
                }
            }
            None => out.push_str("Reference poll: none configured.\n\n"),
        }

        for backend_id in ctx.backend_ids {
            for &setting in ctx.settings {
                let key = (backend_id.clone(), attribute, setting);
                out.push_str(&format!("### `{backend_id}` — {}", setting.slug()));
                match ctx.outcomes.get(&key) {
                    Some(GridOutcome::Computed(report)) => out.push_str(&format!(
                        " — ρ={}, p={}, n={}\n\n",
                        fmt_rho(report.rho),
                        fmt_p(report.p_value),
                        report.n
                    )),
                    Some(GridOutcome::Undefined { n, reason }) => {
                        out.push_str(&format!(" — correlation undefined (n={n}): {reason}\n\n"))
                    }
                    None => out.push_str(" — no outcome recorded\n\n"),
                }
                match ctx.matrices.get(&key) {
                    Some(matrix) if !matrix.is_empty() => {
                        out.push_str(&markdown_matrix(
                            matrix.row_codes(),
                            matrix.col_codes(),
                            |from, to| matrix.cell(from, to).map(|c| format!("{:.4}", c.mean)),
                        ));
                        out.push('\n');
                    }
                    _ => out.push_str("_no data_\n\n"),
                }
            }
        }
    }
    out
}
