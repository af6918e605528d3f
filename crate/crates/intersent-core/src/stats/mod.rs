//! Aggregation of scored transcripts into per-pair matrices, Pearson
//! correlation against reference polls, and the two-sided non-correlation
//! test.
//!
//! Everything here is pure 64-bit float computation with deterministic
//! results: aggregation sorts its input into a canonical order before
//! summing, so any permutation of the same records produces bit-identical
//! matrices.

pub mod special;

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::groups::{AttributeKind, Setting};
use crate::polls::ReferenceMatrix;

pub use special::{inc_beta, ln_gamma};

/// Minimum number of paired cells for a correlation to be defined.
pub const MIN_PAIRED_CELLS: usize = 3;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("record references pair ({from_code}, {to_code}) outside the matrix roster")]
    UnknownPair { from_code: String, to_code: String },
    #[error("record for self-pair ({code}, {code}) is not allowed")]
    SelfPair { code: String },
    #[error("attribute mismatch: scores are {scores}, reference is {reference}")]
    AttributeMismatch {
        scores: &'static str,
        reference: &'static str,
    },
    #[error("vectors have mismatched lengths ({x_len} vs {y_len})")]
    LengthMismatch { x_len: usize, y_len: usize },
    #[error("only {shared} cells shared between scores and reference; need at least {min}")]
    InsufficientOverlap { shared: usize, min: usize },
    #[error("need at least {min} paired points for correlation, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("the {side} vector has zero variance; correlation is undefined")]
    DegenerateInput { side: &'static str },
    #[error("|rho| = {rho} exceeds 1; correlation coefficient out of domain")]
    RhoOutOfDomain { rho: f64 },
}

/// One scored response, projected down to what aggregation needs.
///
/// The identity fields beyond `(from_code, to_code)` only serve to give the
/// canonical summation order a total key, which is what makes aggregation
/// permutation-invariant at the bit level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredObservation {
    pub from_code: String,
    pub to_code: String,
    pub template_id: String,
    pub repeat_index: u32,
    pub request_key: String,
    pub compound: f64,
}

/// A populated matrix cell: mean compound score and how many responses
/// contributed to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCell {
    pub mean: f64,
    pub count: usize,
}

/// Per-pair mean sentiment for one (backend, attribute, setting)
/// combination. Cells absent for self-pairs, ineligible sources, and pairs
/// with no scored responses.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScoreMatrix {
    attribute: AttributeKind,
    row_codes: Vec<String>,
    col_codes: Vec<String>,
    cells: HashMap<(String, String), PairCell>,
}

impl PairScoreMatrix {
    pub fn attribute(&self) -> AttributeKind {
        self.attribute
    }

    pub fn row_codes(&self) -> &[String] {
        &self.row_codes
    }

    pub fn col_codes(&self) -> &[String] {
        &self.col_codes
    }

    pub fn cell(&self, from_code: &str, to_code: &str) -> Option<PairCell> {
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
    pub fn cells_from_major(&self) -> Vec<(&str, &str, PairCell)> {
        let mut out = Vec::with_capacity(self.cells.len());
        for from in &self.row_codes {
            for to in &self.col_codes {
                if let Some(&cell) = self.cells.get(&(from.clone(), to.clone())) {
                    out.push((from.as_str(), to.as_str(), cell));
                }
            }
        }
        out
    }

    /// Rebuild a matrix from already-aggregated cells (e.g. parsed back from
    /// a matrix CSV, where per-cell counts are no longer known and may be 0).
    /// Cells must reference known non-self pairs.
    pub fn from_cells(
        attribute: AttributeKind,
        row_codes: Vec<String>,
        col_codes: Vec<String>,
        cells: impl IntoIterator<Item = ((String, String), PairCell)>,
    ) -> Result<PairScoreMatrix, StatsError> {
        let rows: HashSet<&str> = row_codes.iter().map(String::as_str).collect();
        let cols: HashSet<&str> = col_codes.iter().map(String::as_str).collect();
        let mut stored = HashMap::new();
        for ((from, to), cell) in cells {
            if from == to {
                return Err(StatsError::SelfPair { code: from });
            }
            if !rows.contains(from.as_str()) || !cols.contains(to.as_str()) {
                return Err(StatsError::UnknownPair {
                    from_code: from,
                    to_code: to,
                });
            }
            stored.insert((from, to), cell);
        }
        Ok(PairScoreMatrix {
            attribute,
            row_codes,
            col_codes,
            cells: stored,
        })
    }
}

/// Average scored observations into a per-pair matrix.
///
/// `row_codes`/`col_codes` fix the matrix shape (normally the from-eligible
/// roster codes and the full roster codes respectively); observations
/// referencing codes outside them are rejected. Observations are summed in
/// canonical order — sorted by (from, to, template, repeat, request key) —
/// so the result is bit-identical for any input permutation.
pub fn aggregate(
    attribute: AttributeKind,
    row_codes: &[String],
    col_codes: &[String],
    observations: &[ScoredObservation],
) -> Result<PairScoreMatrix, StatsError> {
    let rows: HashSet<&str> = row_codes.iter().map(String::as_str).collect();
    let cols: HashSet<&str> = col_codes.iter().map(String::as_str).collect();
    for obs in observations {
        if obs.from_code == obs.to_code {
            return Err(StatsError::SelfPair {
                code: obs.from_code.clone(),
            });
        }
        if !rows.contains(obs.from_code.as_str()) || !cols.contains(obs.to_code.as_str()) {
            return Err(StatsError::UnknownPair {
                from_code: obs.from_code.clone(),
                to_code: obs.to_code.clone(),
            });
        }
    }

    let mut sorted: Vec<&ScoredObservation> = observations.iter().collect();
    sorted.sort_by(|a, b| {
        (
            &a.from_code,
            &a.to_code,
            &a.template_id,
            a.repeat_index,
            &a.request_key,
        )
            .cmp(&(
                &b.from_code,
                &b.to_code,
                &b.template_id,
                b.repeat_index,
                &b.request_key,
            ))
    });

    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for obs in sorted {
        let entry = sums
            .entry((obs.from_code.clone(), obs.to_code.clone()))
            .or_insert((0.0, 0));
        entry.0 += obs.compound;
        entry.1 += 1;
    }

    let cells = sums
        .into_iter()
        .map(|(pair, (sum, count))| {
            (
                pair,
                PairCell {
                    mean: sum / count as f64,
                    count,
                },
            )
        })
        .collect();

    Ok(PairScoreMatrix {
        attribute,
        row_codes: row_codes.to_vec(),
        col_codes: col_codes.to_vec(),
        cells,
    })
}

/// Which side of an alignment a cell was missing from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingIn {
    Scores,
    Reference,
}

/// A cell present on only one side of a score/reference alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedCell {
    pub from_code: String,
    pub to_code: String,
    pub missing_in: MissingIn,
}

/// Paired vectors over the cells shared by a score matrix and a reference
/// matrix, plus the cells skipped on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub skipped: Vec<SkippedCell>,
}

impl Alignment {
    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Pair up score-matrix cells (x) with reference cells (y), from-major over
/// the score matrix. Cells present on only one side are skipped and
/// reported. Errors if the attributes differ or fewer than
/// [`MIN_PAIRED_CELLS`] cells are shared.
pub fn align(
    scores: &PairScoreMatrix,
    reference: &ReferenceMatrix,
) -> Result<Alignment, StatsError> {
    if scores.attribute() != reference.attribute() {
        return Err(StatsError::AttributeMismatch {
            scores: scores.attribute().slug(),
            reference: reference.attribute().slug(),
        });
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut skipped = Vec::new();
    let mut matched: HashSet<(String, String)> = HashSet::new();

    for (from, to, cell) in scores.cells_from_major() {
        match reference.cell(from, to) {
            Some(value) => {
                x.push(cell.mean);
                y.push(value);
                matched.insert((from.to_string(), to.to_string()));
            }
            None => skipped.push(SkippedCell {
                from_code: from.to_string(),
                to_code: to.to_string(),
                missing_in: MissingIn::Reference,
            }),
        }
    }
    for (from, to, _) in reference.cells_from_major() {
        if !matched.contains(&(from.to_string(), to.to_string())) {
            skipped.push(SkippedCell {
                from_code: from.to_string(),
                to_code: to.to_string(),
                missing_in: MissingIn::Scores,
            });
        }
    }

    if x.len() < MIN_PAIRED_CELLS {
        return Err(StatsError::InsufficientOverlap {
            shared: x.len(),
            min: MIN_PAIRED_CELLS,
        });
    }
    Ok(Alignment { x, y, skipped })
}

/// Pearson product-moment correlation, clamped to `[-1, +1]` against
/// floating-point overshoot.
///
/// Uses the two-pass centered formulation `sxy / sqrt(sxx * syy)`; the
/// single product under the square root keeps exactly linear integer inputs
/// at exactly ±1, and negating every x negates the result bit-for-bit.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            x_len: x.len(),
            y_len: y.len(),
        });
    }
    let n = x.len();
    if n < MIN_PAIRED_CELLS {
        return Err(StatsError::TooFewPoints {
            got: n,
            min: MIN_PAIRED_CELLS,
        });
    }

    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateInput { side: "x" });
    }
    if syy == 0.0 {
        return Err(StatsError::DegenerateInput { side: "y" });
    }
    let rho = sxy / (sxx * syy).sqrt();
    Ok(rho.clamp(-1.0, 1.0))
}

/// Two-sided p-value for the non-correlation test.
///
/// Under H0 (no correlation), `t = rho * sqrt((n-2) / (1 - rho^2))` follows
/// a t-distribution with `nu = n - 2` degrees of freedom, and the two-sided
/// p-value is `I_{nu/(nu+t^2)}(nu/2, 1/2)`. The incomplete-beta argument
/// simplifies algebraically to `1 - rho^2`, which is how it is evaluated
/// here; `rho = 0` yields exactly 1 and `|rho| = 1` exactly 0.
pub fn noncorrelation_p(rho: f64, n: usize) -> Result<f64, StatsError> {
    if n < MIN_PAIRED_CELLS {
        return Err(StatsError::TooFewPoints {
            got: n,
            min: MIN_PAIRED_CELLS,
        });
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(StatsError::RhoOutOfDomain { rho });
    }
    if rho == 0.0 {
        return Ok(1.0);
    }
    if rho == 1.0 || rho == -1.0 {
        return Ok(0.0);
    }
    let nu = (n - 2) as f64;
    Ok(special::inc_beta(nu / 2.0, 0.5, 1.0 - rho * rho))
}

/// Correlation result for one grid combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Outcome of one grid cell: a computed correlation or an explicit marker
/// explaining why it is undefined.
#[derive(Debug, Clone, PartialEq)]
pub enum GridOutcome {
    Computed(CorrelationReport),
    Undefined { n: usize, reason: String },
}

/// One (backend, setting, attribute) entry of the correlation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub backend_id: String,
    pub setting: Setting,
    pub attribute: AttributeKind,
    pub outcome: GridOutcome,
}

/// A score matrix labeled with the combination it came from.
#[derive(Debug, Clone)]
pub struct LabeledMatrix<'a> {
    pub backend_id: String,
    pub setting: Setting,
    pub matrix: &'a PairScoreMatrix,
}

/// Correlate every labeled score matrix against the reference for its
/// attribute. Entries come back in input order; combinations that fail
/// alignment or correlation carry an explicit marker instead of being
/// dropped.
pub fn correlation_grid(
    matrices: &[LabeledMatrix<'_>],
    references: &HashMap<AttributeKind, ReferenceMatrix>,
) -> Vec<GridEntry> {
    matrices
        .iter()
        .map(|labeled| {
            let attribute = labeled.matrix.attribute();
            let outcome = match references.get(&attribute) {
                None => GridOutcome::Undefined {
                    n: 0,
                    reason: format!("no reference matrix for attribute {}", attribute.slug()),
                },
                Some(reference) => correlate_one(labeled.matrix, reference),
            };
            GridEntry {
                backend_id: labeled.backend_id.clone(),
                setting: labeled.setting,
                attribute,
                outcome,
            }
        })
        .collect()
}

fn correlate_one(scores: &PairScoreMatrix, reference: &ReferenceMatrix) -> GridOutcome {
    let alignment = match align(scores, reference) {
        Ok(a) => a,
        Err(e) => {
            let n = match e {
                StatsError::InsufficientOverlap { shared, .. } => shared,
                _ => 0,
            };
            return GridOutcome::Undefined {
                n,
                reason: e.to_string(),
            };
        }
    };
    let n = alignment.n();
    let rho = match pearson(&alignment.x, &alignment.y) {
        Ok(r) => r,
        Err(e) => {
            return GridOutcome::Undefined {
                n,
                reason: e.to_string(),
            }
        }
    };
    match noncorrelation_p(rho, n) {
        Ok(p_value) => GridOutcome::Computed(CorrelationReport { rho, p_value, n }),
        Err(e) => GridOutcome::Undefined {
            n,
            reason: e.to_string(),
        },
    }
}
