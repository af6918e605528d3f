//! Reference poll matrices: loading, validation, and canonical CSV output.
//!
//! Each attribute has one reference matrix holding real-world poll results
//! in the unit native to its source poll: percent-positive for
//! nationalities, net favorability for religions, and mean feeling-
//! thermometer readings for races/ethnicities. The repository ships
//! synthetic fixtures only; users transcribe real values from the cited
//! poll reports into the same CSV schema.
//!
//! CSV schema (shared with exported score matrices so the two are
//! diff-able): UTF-8, comma-separated, LF line endings; the first header
//! cell is literally `from\to` and the remaining header cells are to-codes;
//! each subsequent row starts with a from-code; an empty cell means
//! "absent" (distinct from 0); numbers are plain decimals with a `.`
//! decimal point — no thousands separators, exponents, or locale forms.
//! Leading lines starting with `#` are metadata comments and are ignored by
//! the parser; exported score matrices use them to reference their run.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groups::{enumerate_pairs, AttributeKind, Group};

/// Literal first header cell of the matrix CSV schema.
pub const MATRIX_HEADER_CELL: &str = "from\\to";

/// Measurement unit of a reference poll, fixed by attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PollUnit {
    /// Percentage of respondents choosing the positive options: [0, 100].
    PercentPositive,
    /// Favorable minus unfavorable percentage: [−100, 100].
    NetFavorability,
    /// Mean 0–100 feeling-thermometer reading: [0, 100].
    MeanThermometer,
}

impl PollUnit {
    /// The unit used by the source poll for `attribute`.
    pub fn for_attribute(attribute: AttributeKind) -> PollUnit {
        match attribute {
            AttributeKind::Nationalities => PollUnit::PercentPositive,
            AttributeKind::Religions => PollUnit::NetFavorability,
            AttributeKind::RacesEthnicities => PollUnit::MeanThermometer,
        }
    }

    /// Inclusive value range for this unit.
    pub fn range(self) -> (f64, f64) {
        match self {
            PollUnit::PercentPositive => (0.0, 100.0),
            PollUnit::NetFavorability => (-100.0, 100.0),
            PollUnit::MeanThermometer => (0.0, 100.0),
        }
    }

    /// Stable lowercase identifier.
    pub fn slug(self) -> &'static str {
        match self {
            PollUnit::PercentPositive => "percent_positive",
            PollUnit::NetFavorability => "net_favorability",
            PollUnit::MeanThermometer => "mean_thermometer",
        }
    }
}

impl fmt::Display for PollUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Error)]
pub enum PollsError {
    #[error("failed to read reference CSV {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("reference CSV schema error: {message}")]
    Schema { message: String },
    #[error("value {value} for cell ({from_code}, {to_code}) outside {unit} range [{min}, {max}]")]
    Range {
        from_code: String,
        to_code: String,
        value: f64,
        unit: PollUnit,
        min: f64,
        max: f64,
    },
    #[error("unknown group code {code:?} for the configured {attribute} roster")]
    UnknownGroup { code: String, attribute: &'static str },
}

/// A validated reference poll matrix for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMatrix {
    attribute: AttributeKind,
    unit: PollUnit,
    source: String,
    row_codes: Vec<String>,
    col_codes: Vec<String>,
    cells: HashMap<(String, String), f64>,
}

impl ReferenceMatrix {
    /// Build a matrix from explicit parts, validating code lists, cell
    /// membership, and value ranges. The unit is derived from `attribute`.
    pub fn new(
        attribute: AttributeKind,
        row_codes: Vec<String>,
        col_codes: Vec<String>,
        cells: impl IntoIterator<Item = ((String, String), f64)>,
        source: impl Into<String>,
    ) -> Result<Self, PollsError> {
        let unit = PollUnit::for_attribute(attribute);
        check_codes_unique("row", &row_codes)?;
        check_codes_unique("column", &col_codes)?;
        let rows: HashSet<&str> = row_codes.iter().map(String::as_str).collect();
        let cols: HashSet<&str> = col_codes.iter().map(String::as_str).collect();
        let (min, max) = unit.range();
        let mut cell_map = HashMap::new();
        for ((from, to), value) in cells {
            if !rows.contains(from.as_str()) {
                return Err(PollsError::Schema {
                    message: format!("cell row code {from:?} is not in the row code list"),
                });
            }
            if !cols.contains(to.as_str()) {
                return Err(PollsError::Schema {
                    message: format!("cell column code {to:?} is not in the column code list"),
                });
            }
            if !value.is_finite() || value < min || value > max {
                return Err(PollsError::Range {
                    from_code: from,
                    to_code: to,
                    value,
                    unit,
                    min,
                    max,
                });
            }
            if cell_map.insert((from.clone(), to.clone()), value).is_some() {
                return Err(PollsError::Schema {
                    message: format!("duplicate cell ({from}, {to})"),
                });
            }
        }
        Ok(ReferenceMatrix {
            attribute,
            unit,
            source: source.into(),
            row_codes,
            col_codes,
            cells: cell_map,
        })
    }

    pub fn attribute(&self) -> AttributeKind {
        self.attribute
    }

    pub fn unit(&self) -> PollUnit {
        self.unit
    }

    /// Free-text citation for where the values were transcribed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn row_codes(&self) -> &[String] {
        &self.row_codes
    }

    pub fn col_codes(&self) -> &[String] {
        &self.col_codes
    }

    pub fn cell(&self, from_code: &str, to_code: &str) -> Option<f64> {
        self.cells
            .get(&(from_code.to_string(), to_code.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Populated cells in from-major order (row order, then column order).
    pub fn cells_from_major(&self) -> Vec<(&str, &str, f64)> {
        let mut out = Vec::with_capacity(self.cells.len());
        for from in &self.row_codes {
            for to in &self.col_codes {
                if let Some(&value) = self.cells.get(&(from.clone(), to.clone())) {
                    out.push((from.as_str(), to.as_str(), value));
                }
            }
        }
        out
    }

    /// Canonical CSV rendering of the matrix (the schema documented at the
    /// module level). Loading this string back yields an equal matrix.
    pub fn to_csv_string(&self) -> String {
        matrix_to_csv(&self.row_codes, &self.col_codes, |from, to| {
            self.cells.get(&(from.to_string(), to.to_string())).copied()
        })
    }

    /// Write the canonical CSV rendering to `path`.
    pub fn save(&self, path: &Path) -> Result<(), PollsError> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| PollsError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn check_codes_unique(what: &str, codes: &[String]) -> Result<(), PollsError> {
    let mut seen = HashSet::new();
    for code in codes {
        if code.trim().is_empty() {
            return Err(PollsError::Schema {
                message: format!("empty {what} code"),
            });
        }
        if !seen.insert(code.as_str()) {
            return Err(PollsError::Schema {
                message: format!("duplicate {what} code {code:?}"),
            });
        }
    }
    Ok(())
}

/// A matrix parsed at the schema level only: codes and plain-decimal cells,
/// before any attribute, range, or roster semantics are applied. Score
/// matrices written by the reporting layer round-trip through this form.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub row_codes: Vec<String>,
    pub col_codes: Vec<String>,
    /// Present cells in row-major order; absent cells simply do not appear.
    pub cells: Vec<((String, String), f64)>,
}

impl RawMatrix {
    pub fn cell(&self, from: &str, to: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|((f, t), _)| f == from && t == to)
            .map(|(_, value)| *value)
    }
}

/// Render a matrix in the canonical CSV schema: `from\to` header cell,
/// column codes across, row codes down, absent cells empty, values in
/// Rust's shortest-round-trip decimal form, LF line endings.
pub fn matrix_to_csv(
    row_codes: &[String],
    col_codes: &[String],
    cell: impl Fn(&str, &str) -> Option<f64>,
) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = Vec::with_capacity(col_codes.len() + 1);
    header.push(MATRIX_HEADER_CELL.to_string());
    header.extend(col_codes.iter().cloned());
    writer.write_record(&header).expect("write to Vec cannot fail");
    for from in row_codes {
        let mut record = Vec::with_capacity(col_codes.len() + 1);
        record.push(from.clone());
        for to in col_codes {
            match cell(from, to) {
                Some(value) => record.push(format!("{value}")),
                None => record.push(String::new()),
            }
        }
        writer.write_record(&record).expect("write to Vec cannot fail");
    }
    let bytes = writer.into_inner().expect("flush to Vec cannot fail");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

/// Parse CSV text against the canonical matrix schema (header cell, ragged
/// rows, duplicate codes, plain decimals), with no attribute semantics.
///
/// Leading lines starting with `#` are metadata comments (exported score
/// matrices carry their run id and lexicon checksum this way) and are
/// skipped; the schema proper starts at the header row.
pub fn parse_matrix_csv(text: &str) -> Result<RawMatrix, PollsError> {
    let mut body = text;
    while body.starts_with('#') {
        body = match body.find('\n') {
            Some(newline) => &body[newline + 1..],
            None => "",
        };
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(body.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(Ok(record)) => record,
        Some(Err(e)) => {
            return Err(PollsError::Schema {
                message: format!("unreadable header row: {e}"),
            })
        }
        None => {
            return Err(PollsError::Schema {
                message: "empty file".to_string(),
            })
        }
    };
    if header.get(0) != Some(MATRIX_HEADER_CELL) {
        return Err(PollsError::Schema {
            message: format!(
                "first header cell must be {MATRIX_HEADER_CELL:?}, found {:?}",
                header.get(0).unwrap_or("")
            ),
        });
    }
    if header.len() < 2 {
        return Err(PollsError::Schema {
            message: "header lists no to-codes".to_string(),
        });
    }
    let col_codes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();

    let mut row_codes = Vec::new();
    let mut cells = Vec::new();
    for (row_idx, record) in records.enumerate() {
        let record = record.map_err(|e| PollsError::Schema {
            message: format!("row {}: {e}", row_idx + 2),
        })?;
        if record.len() != col_codes.len() + 1 {
            return Err(PollsError::Schema {
                message: format!(
                    "row {} has {} fields, expected {}",
                    row_idx + 2,
                    record.len(),
                    col_codes.len() + 1
                ),
            });
        }
        let from = record.get(0).unwrap_or("").to_string();
        for (col_idx, raw) in record.iter().skip(1).enumerate() {
            if raw.is_empty() {
                continue; // absent cell, not zero
            }
            let value = parse_plain_decimal(raw).ok_or_else(|| PollsError::Schema {
                message: format!(
                    "row {} column {:?}: {raw:?} is not a plain decimal",
                    row_idx + 2,
                    col_codes[col_idx]
                ),
            })?;
            cells.push(((from.clone(), col_codes[col_idx].clone()), value));
        }
        row_codes.push(from);
    }
    check_codes_unique("row", &row_codes)?;
    check_codes_unique("column", &col_codes)?;

    Ok(RawMatrix {
        row_codes,
        col_codes,
        cells,
    })
}

/// Parse a matrix from CSV text, validating codes against `roster`.
///
/// `source` is recorded as the matrix's citation string (typically the file
/// path or the poll citation from the run configuration).
pub fn parse_reference(
    attribute: AttributeKind,
    roster: &[Group],
    text: &str,
    source: impl Into<String>,
) -> Result<ReferenceMatrix, PollsError> {
    let raw = parse_matrix_csv(text)?;
    let known: HashSet<&str> = roster.iter().map(|g| g.code.as_str()).collect();
    for code in raw.row_codes.iter().chain(&raw.col_codes) {
        if !known.contains(code.as_str()) {
            return Err(PollsError::UnknownGroup {
                code: code.to_string(),
                attribute: attribute.slug(),
            });
        }
    }
    ReferenceMatrix::new(attribute, raw.row_codes, raw.col_codes, raw.cells, source)
}

/// Load a matrix from a CSV file, validating codes against `roster`. The
/// file path becomes the matrix's source string.
pub fn load_reference(
    attribute: AttributeKind,
    roster: &[Group],
    path: &Path,
) -> Result<ReferenceMatrix, PollsError> {
    let text = std::fs::read_to_string(path).map_err(|source| PollsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_reference(attribute, roster, &text, path.display().to_string())
}

/// Accept only locale-independent plain decimals: optional sign, digits,
/// one optional decimal point. Exponents, infinities, NaN, and grouping
/// separators are rejected.
fn parse_plain_decimal(raw: &str) -> Option<f64> {
    if raw.is_empty()
        || !raw
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == '-' || c == '+')
    {
        return None;
    }
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Result of checking a reference matrix against the pairs implied by a
/// roster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    /// Pairs that enumerate_pairs expects but the matrix lacks.
    pub missing: Vec<(String, String)>,
    /// Cells present in the matrix but not produced by enumerate_pairs
    /// (self-pairs, ineligible sources, codes outside the roster's pairs).
    pub unexpected: Vec<(String, String)>,
}

impl CoverageReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty()
    }
}

/// Compare the matrix's populated cells against the pair set implied by
/// `roster`. Never mutates; ordering is deterministic (pair-enumeration
/// order for missing cells, from-major matrix order for unexpected ones).
pub fn validate_coverage(reference: &ReferenceMatrix, roster: &[Group]) -> CoverageReport {
    let expected: Vec<(String, String)> = enumerate_pairs(roster)
        .iter()
        .map(|(from, to)| (from.code.clone(), to.code.clone()))
        .collect();
    let expected_set: HashSet<&(String, String)> = expected.iter().collect();

    let missing = expected
        .iter()
        .filter(|(from, to)| reference.cell(from, to).is_none())
        .cloned()
        .collect();
    let unexpected = reference
        .cells_from_major()
        .into_iter()
        .map(|(from, to, _)| (from.to_string(), to.to_string()))
        .filter(|pair| !expected_set.contains(pair))
        .collect();

    CoverageReport {
        missing,
        unexpected,
    }
}
