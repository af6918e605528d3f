//! End-to-end tests of the `intersent` binary: real process invocations
//! asserting exit codes, user-facing messages, and on-disk effects. The
//! orchestration internals are covered by unit tests; this file pins the
//! process contract (0 success, 1 partial/runtime failure, 2 config error).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chrono::{TimeZone, Utc};
use intersent_cli::artifacts::RunLock;
use intersent_cli::config::RunConfig;
use intersent_core::groups::build_plan;
use intersent_gateway::{request_key, TranscriptRecord, TranscriptStore};

const CONFIG: &str = r#"
run_id = "cli-run"
output_dir = "runs"
repeats = 2
attributes = ["nationalities"]
settings = ["yes_no_only"]

[analyzer]
analyzer_id = "vader-builtin"
kind = "builtin_lexicon_rules"

[[backends]]
backend_id = "canned"
kind = "replay"
fixture = "fixture.jsonl"

[references]
nationalities = "nats.csv"

[rosters]
nationalities = [
    { code = "FR", base_surface = "French" },
    { code = "DE", base_surface = "German" },
    { code = "IT", base_surface = "Italian" },
]
"#;

const REFERENCE: &str = "from\\to,FR,DE,IT\nFR,,61.0,55.5\nDE,72.0,,49.0\nIT,66.5,58.0,\n";

const ANSWERS: [&str; 3] = [
    "Yes, they are wonderful neighbors and get along well.",
    "Opinions are mixed; it depends on the region.",
    "No, there is a lot of resentment and distrust.",
];

/// Lay out a config, its replay fixture, and its reference CSV in `dir`.
fn prepare(dir: &Path) {
    fs::write(dir.join("config.toml"), CONFIG).unwrap();
    fs::write(dir.join("nats.csv"), REFERENCE).unwrap();

    let config = RunConfig::load(&dir.join("config.toml")).unwrap();
    let store = TranscriptStore::open(dir.join("fixture.jsonl")).unwrap();
    let roster = config.roster_for(config.attributes[0]);
    let plan = build_plan(
        &roster,
        &config.template_set(),
        config.settings[0],
        config.repeats,
    )
    .unwrap();
    for (i, prompt) in plan.iter().enumerate() {
        let key = request_key("canned", &prompt.system_text, &prompt.user_text, prompt.repeat_index);
        store
            .append(&TranscriptRecord {
                run_id: "origin".into(),
                backend_id: "canned".into(),
                attribute: prompt.attribute,
                from_code: prompt.from_code.clone(),
                to_code: prompt.to_code.clone(),
                template_id: prompt.template_id.clone(),
                repeat_index: prompt.repeat_index,
                system_text: prompt.system_text.clone(),
                user_text: prompt.user_text.clone(),
                response_text: ANSWERS[key.as_bytes()[0] as usize % ANSWERS.len()].into(),
                request_key: key,
                timestamp: Utc.with_ymd_and_hms(2026, 8, 19, 12, 0, 0).unwrap()
                    + chrono::Duration::seconds(i as i64),
            })
            .unwrap();
    }
}

fn intersent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intersent"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn intersent")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn validate_config_accepts_the_shipped_and_local_configs() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    let out = intersent(dir.path(), &["validate-config", "--config", "config.toml"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("configuration OK: config.toml"));
}

#[test]
fn validate_config_rejects_a_broken_config_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "run_id = \"x\"\n").unwrap();
    let out = intersent(dir.path(), &["validate-config", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error: configuration error:"), "{}", stderr(&out));

    let missing = intersent(dir.path(), &["validate-config", "--config", "absent.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("cannot read config"), "{}", stderr(&missing));
}

#[test]
fn run_score_report_round_trip_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());

    let run = intersent(dir.path(), &["run", "--config", "config.toml"]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr(&run));
    assert!(stdout(&run).contains("run artifacts written to"), "{}", stdout(&run));

    let run_dir = dir.path().join("runs/cli-run");
    for artifact in ["manifest.json", "grid.csv", "report.md", "transcripts/canned.jsonl"] {
        assert!(run_dir.join(artifact).is_file(), "{artifact} must exist");
    }
    let grid_before = fs::read(run_dir.join("grid.csv")).unwrap();

    let score = intersent(dir.path(), &["score", "--run", "cli-run"]);
    assert_eq!(score.status.code(), Some(0), "stderr: {}", stderr(&score));
    assert!(stdout(&score).contains("re-scored run cli-run"), "{}", stdout(&score));
    assert_eq!(fs::read(run_dir.join("grid.csv")).unwrap(), grid_before);

    let report = intersent(dir.path(), &["report", "--run", "cli-run"]);
    assert_eq!(report.status.code(), Some(0), "stderr: {}", stderr(&report));
    assert!(stdout(&report).contains("report rebuilt for run cli-run"), "{}", stdout(&report));
    assert_eq!(fs::read(run_dir.join("grid.csv")).unwrap(), grid_before);
}

#[test]
fn run_with_missing_fixture_exits_1_and_reports_partial() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    fs::remove_file(dir.path().join("fixture.jsonl")).unwrap();

    let out = intersent(dir.path(), &["run", "--config", "config.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("partial results:"), "{}", stderr(&out));
    assert!(stderr(&out).contains("replay fixture"), "{}", stderr(&out));
    // Partial runs still leave a manifest behind for diagnosis.
    assert!(dir.path().join("runs/cli-run/manifest.json").is_file());
}

#[test]
fn score_with_deleted_transcript_exits_1_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    let run = intersent(dir.path(), &["run", "--config", "config.toml"]);
    assert_eq!(run.status.code(), Some(0));

    fs::remove_file(dir.path().join("runs/cli-run/transcripts/canned.jsonl")).unwrap();
    let score = intersent(dir.path(), &["score", "--run", "cli-run"]);
    assert_eq!(score.status.code(), Some(1));
    let err = stderr(&score);
    assert!(err.contains("MissingTranscriptError"), "{err}");
    assert!(err.contains("canned.jsonl"), "{err}");
}

#[test]
fn locked_output_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    let lock_dir = dir.path().join("runs");
    fs::create_dir_all(&lock_dir).unwrap();
    fs::write(lock_dir.join(RunLock::FILE_NAME), "12345\n").unwrap();

    let out = intersent(dir.path(), &["run", "--config", "config.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("locked by another run"), "{}", stderr(&out));
}

#[test]
fn analyzer_cmd_without_analyzer_id_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    let run = intersent(dir.path(), &["run", "--config", "config.toml"]);
    assert_eq!(run.status.code(), Some(0));

    let out = intersent(
        dir.path(),
        &["score", "--run", "cli-run", "--analyzer-cmd", "cat"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--analyzer"), "{}", stderr(&out));
}

#[test]
fn version_and_help_are_available() {
    let dir = tempfile::tempdir().unwrap();
    let version = intersent(dir.path(), &["--version"]);
    assert_eq!(version.status.code(), Some(0));
    assert!(stdout(&version).starts_with("intersent "));

    let help = intersent(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for subcommand in ["run", "score", "report", "validate-config"] {
        assert!(stdout(&help).contains(subcommand));
    }
}
