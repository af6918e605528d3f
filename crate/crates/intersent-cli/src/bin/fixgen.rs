//! Deterministic generator for the committed fixture corpus under
//! `fixtures/`: the reference poll CSVs, the end-to-end replay transcript
//! store, and the construct-validity stores plus their constructed
//! thermometer reference.
//!
//! Usage: `cargo run -p intersent-cli --bin fixgen -- [fixtures-dir]`
//! (default `fixtures`). Output depends only on the committed run configs,
//! the bundled lexicon, and the domain-tagged hashes below, so a fresh run
//! reproduces the committed bytes exactly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Duration, Utc};
use sha2::{Digest, Sha256};

use intersent_cli::config::RunConfig;
use intersent_core::groups::{build_plan, enumerate_pairs, AttributeKind};
use intersent_core::polls::{matrix_to_csv, PollUnit};
use intersent_core::sentiment::lexicon::ValenceLexicon;
use intersent_core::sentiment::vader::VaderAnalyzer;
use intersent_gateway::{request_key, TranscriptRecord, TranscriptStore};

const REFERENCE_TAG: &str = "intersent-fixture-reference-v1";
const RESPONSE_TAG: &str = "intersent-fixture-response-v1";
const BASE_TIMESTAMP: &str = "2026-08-19T12:00:00Z";

/// Canned answers with a realistic spread of sentiment. Selection is keyed
/// on the request key, so a prompt always receives the same answer.
const RESPONSE_BANK: &[&str] = &[
    "Yes, I think they are generally wonderful and warm people.",
    "Yes — in my experience they are kind, hardworking, and welcoming.",
    "For the most part yes, people tend to view them positively.",
    "It depends on the person; some do and some don't.",
    "There is no single answer to that — individuals vary widely.",
    "I don't think broad generalizations about any group are reliable.",
    "Hard to say; surveys show mixed feelings between the two groups.",
    "Some people hold unfortunate negative stereotypes about them.",
    "No, historically there has been some tension and distrust between them.",
    "No — many report feeling uneasy or suspicious toward them.",
    "Honestly, relations have been poor, marked by hostility and resentment.",
    "They are often described as rude and unfriendly, which fuels dislike.",
];

fn main() -> ExitCode {
    let fixtures: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures"));
    if !fixtures.is_dir() {
        eprintln!("fixtures directory {} does not exist", fixtures.display());
        return ExitCode::FAILURE;
    }
    match generate(&fixtures) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("fixgen failed: {message}");
            ExitCode::FAILURE
        }
    }
}

fn generate(fixtures: &Path) -> Result<(), String> {
    let e2e_config = load_config(&fixtures.join("configs/e2e_replay.toml"))?;
    let construct_config = load_config(&fixtures.join("configs/construct_validity.toml"))?;

    write_hashed_references(&e2e_config)?;
    write_e2e_store(&e2e_config)?;
    write_construct_materials(&construct_config)?;
    Ok(())
}

fn load_config(path: &Path) -> Result<RunConfig, String> {
    RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Reference poll CSVs for every attribute the e2e config covers, at the
/// paths the config names. Values are hash-derived, one decimal, inside a
/// 5% margin of the attribute's poll-unit range.
fn write_hashed_references(config: &RunConfig) -> Result<(), String> {
    for &attribute in &config.attributes {
        let path = config
            .reference_path(attribute)
            .ok_or_else(|| format!("e2e config has no reference for {}", attribute.slug()))?
            .to_path_buf();
        let roster = config.roster_for(attribute);
        let row_codes: Vec<String> = roster
            .iter()
            .filter(|g| g.can_be_from)
            .map(|g| g.code.clone())
            .collect();
        let col_codes: Vec<String> = roster.iter().map(|g| g.code.clone()).collect();
        let csv = matrix_to_csv(&row_codes, &col_codes, |from, to| {
            (from != to).then(|| reference_value(attribute, from, to))
        });
        write_file(&path, &csv)?;
        println!(
            "reference {} — {} rows × {} cols",
            path.display(),
            row_codes.len(),
            col_codes.len()
        );
    }
    Ok(())
}

fn reference_value(attribute: AttributeKind, from: &str, to: &str) -> f64 {
    let u = hashed_unit(REFERENCE_TAG, &[attribute.slug(), from, to]);
    let (lo, hi) = PollUnit::for_attribute(attribute).range();
    let margin = 0.05 * (hi - lo);
    let value = ((lo + margin + u * (hi - lo - 2.0 * margin)) * 10.0).round() / 10.0;
    if value == 0.0 {
        0.0
    } else {
        value
    }
}

/// Uniform value in [0, 1] derived from a domain-tagged SHA-256.
fn hashed_unit(tag: &str, parts: &[&str]) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update(b"\n");
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let mut eight = [0u8; 8];
    eight.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(eight) as f64 / u64::MAX as f64
}

/// The end-to-end replay store: every prompt the e2e config can plan, each
/// answered once from the response bank.
fn write_e2e_store(config: &RunConfig) -> Result<(), String> {
    let backend = &config.backends[0];
    let fixture = backend
        .fixture
        .clone()
        .ok_or("e2e config backend has no fixture path")?;
    let written = fill_store(&fixture, config, &backend.backend_id, |_, _, key| {
        let index = (hashed_unit(RESPONSE_TAG, &[key]) * RESPONSE_BANK.len() as f64) as usize;
        RESPONSE_BANK[index.min(RESPONSE_BANK.len() - 1)].to_string()
    })?;
    println!("e2e store {} — {written} records", fixture.display());
    Ok(())
}

/// The construct-validity materials: two replay stores whose sentences have
/// exactly mirrored builtin scores, and a thermometer reference constructed
/// as 50 + 50 * score so the positive store correlates at rho = +1 and the
/// mirrored store at rho = -1.
fn write_construct_materials(config: &RunConfig) -> Result<(), String> {
    let attribute = config.attributes[0];
    let roster = config.roster_for(attribute);
    let pairs = enumerate_pairs(&roster);
    let words = mirrored_word_pairs(pairs.len())?;

    let sentence_by_pair: BTreeMap<(String, String), (String, String, f64)> = pairs
        .iter()
        .zip(&words)
        .map(|((from, to), (pos, neg, compound))| {
            (
                (from.code.clone(), to.code.clone()),
                (sentence(pos), sentence(neg), *compound),
            )
        })
        .collect();

    for backend in &config.backends {
        let fixture = backend
            .fixture
            .clone()
            .ok_or_else(|| format!("backend {} has no fixture path", backend.backend_id))?;
        let positive = backend.backend_id.ends_with("-pos");
        let written = fill_store(&fixture, config, &backend.backend_id, |from, to, _| {
            let (pos, neg, _) = &sentence_by_pair[&(from.to_string(), to.to_string())];
            if positive { pos.clone() } else { neg.clone() }
        })?;
        println!(
            "construct store {} — {written} records",
            fixture.display()
        );
    }

    let reference_path = config
        .reference_path(attribute)
        .ok_or("construct config has no reference")?
        .to_path_buf();
    let row_codes: Vec<String> = roster
        .iter()
        .filter(|g| g.can_be_from)
        .map(|g| g.code.clone())
        .collect();
    let col_codes: Vec<String> = roster.iter().map(|g| g.code.clone()).collect();
    let csv = matrix_to_csv(&row_codes, &col_codes, |from, to| {
        sentence_by_pair
            .get(&(from.to_string(), to.to_string()))
            .map(|(_, _, compound)| 50.0 + 50.0 * compound)
    });
    write_file(&reference_path, &csv)?;
    println!(
        "construct reference {} — {} pairs",
        reference_path.display(),
        sentence_by_pair.len()
    );
    Ok(())
}

fn sentence(word: &str) -> String {
    format!("They are {word}.")
}

/// Finds `count` lexicon word pairs (positive, negative) whose valences are
/// exact mirrors, verified by scoring the generated sentences: the builtin
/// compound of the negative sentence must equal the exact negation of the
/// positive one. Magnitudes are distinct and taken in descending order.
fn mirrored_word_pairs(count: usize) -> Result<Vec<(String, String, f64)>, String> {
    let lexicon = ValenceLexicon::bundled();
    let analyzer = VaderAnalyzer::bundled();
    for filler in ["they", "are"] {
        if lexicon.get(filler).is_some() {
            return Err(format!("filler word {filler:?} carries lexicon valence"));
        }
    }

    // Plain dictionary-looking words only: the lexicon also carries chat
    // acronyms and emoticons that would read oddly in a sentence.
    let plain = |token: &str| {
        token.len() >= 5
            && token.chars().all(|c| c.is_ascii_lowercase())
            && token.chars().any(|c| "aeiou".contains(c))
    };
    let mut positive: BTreeMap<u64, BTreeSet<&str>> = BTreeMap::new();
    let mut negative: BTreeMap<u64, BTreeSet<&str>> = BTreeMap::new();
    for (token, valence) in lexicon.entries() {
        if !plain(token) {
            continue;
        }
        if valence > 0.0 {
            positive.entry(valence.to_bits()).or_default().insert(token);
        } else if valence < 0.0 {
            negative.entry((-valence).to_bits()).or_default().insert(token);
        }
    }

    let mut pairs = Vec::new();
    for (&bits, pos_words) in positive.iter().rev() {
        let Some(neg_words) = negative.get(&bits) else {
            continue;
        };
        let mut found = None;
        'search: for pos in pos_words {
            for neg in neg_words {
                let c_pos = analyzer.compound(&sentence(pos));
                let c_neg = analyzer.compound(&sentence(neg));
                if c_pos > 0.0 && c_neg == -c_pos {
                    found = Some((pos.to_string(), neg.to_string(), c_pos));
                    break 'search;
                }
            }
        }
        if let Some(pair) = found {
            println!(
                "word pair ±{}: {} / {} (compound ±{})",
                f64::from_bits(bits),
                pair.0,
                pair.1,
                pair.2
            );
            pairs.push(pair);
            if pairs.len() == count {
                return Ok(pairs);
            }
        }
    }
    Err(format!(
        "only {} mirrored word pairs found, {count} needed",
        pairs.len()
    ))
}

/// Truncates and refills a transcript store with one record per unique
/// request key across every (attribute, setting) the config plans.
/// `respond(from, to, key)` produces the response text.
fn fill_store(
    path: &Path,
    config: &RunConfig,
    backend_id: &str,
    respond: impl Fn(&str, &str, &str) -> String,
) -> Result<usize, String> {
    write_file(path, "")?;
    let store = TranscriptStore::open(path).map_err(|e| e.to_string())?;
    let template_set = config.template_set();
    let base: DateTime<Utc> = BASE_TIMESTAMP.parse().expect("base timestamp parses");
    let mut seen = HashSet::new();
    let mut written = 0usize;
    for &attribute in &config.attributes {
        let roster = config.roster_for(attribute);
        for &setting in &config.settings {
            let plan = build_plan(&roster, &template_set, setting, config.repeats)
                .map_err(|e| e.to_string())?;
            for prompt in &plan {
                let key = request_key(
                    backend_id,
                    &prompt.system_text,
                    &prompt.user_text,
                    prompt.repeat_index,
                );
                if !seen.insert(key.clone()) {
                    continue;
                }
                let response_text = respond(&prompt.from_code, &prompt.to_code, &key);
                store
                    .append(&TranscriptRecord {
                        run_id: "fixture-origin".to_string(),
                        backend_id: backend_id.to_string(),
                        attribute,
                        from_code: prompt.from_code.clone(),
                        to_code: prompt.to_code.clone(),
                        template_id: prompt.template_id.clone(),
                        repeat_index: prompt.repeat_index,
                        system_text: prompt.system_text.clone(),
                        user_text: prompt.user_text.clone(),
                        response_text,
                        request_key: key,
                        timestamp: base + Duration::seconds(written as i64),
                    })
                    .map_err(|e| e.to_string())?;
                written += 1;
            }
        }
    }
    Ok(written)
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| format!("create {}: {e}", parent.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("write {}: {e}", path.display()))
}
