//! Shared fixtures for CLI tests: synthetic datasets, stub configs, and a
//! runner for the compiled binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contam_core::dataset::CategoryMap;
use contam_core::providers::pseudo_words;

/// Write a JSONL dataset covering all 57 subjects with deterministic
/// pseudo-word stems (>= 8 tokens, always WM-eligible).
pub fn write_synthetic_dataset(path: &Path, per_subject: usize) -> usize {
    let map = CategoryMap::default_map();
    let mut lines = Vec::new();
    for subject in map.subjects() {
        for i in 0..per_subject {
            let id = format!("{subject}-{i:03}");
            let stem = format!(
                "In the study of {subject} researchers observed {} and asked which outcome follows",
                pseudo_words(&id, 8)
            );
            let choices: Vec<String> = (0..4)
                .map(|k| pseudo_words(&format!("{id}-opt{k}"), 3))
                .collect();
            let row = serde_json::json!({
                "id": id,
                "subject": subject,
                "question": stem,
                "choices": choices,
                "answer": i % 4,
            });
            lines.push(row.to_string());
        }
    }
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
    57 * per_subject
}

/// A stub-only config: echoing search plus three stub models (varied
/// letters, fixed letter, gibberish generator). `search_provider` is one of
/// "dataset_echo", "empty".
pub fn write_stub_config(
    path: &Path,
    dataset: &Path,
    cache_dir: &Path,
    search_provider: &str,
) -> PathBuf {
    let config = format!(
        r#"dataset = {dataset:?}
cache_dir = {cache:?}
seed = 42
threshold = 0.30
parallelism = 4
generator_model = "gen"

[search]
provider = "{search_provider}"

[[models]]
name = "alpha"
provider = "stub"
stub_mode = "letter_by_hash"

[[models]]
name = "beta"
provider = "stub"
stub_mode = "fixed"
stub_text = "B"

[[models]]
name = "gen"
provider = "stub"
stub_mode = "gibberish"

[accuracies]
all = 0.74
STEM = 0.74
Humanities = 0.72
Professional = 0.78
"Social Sciences" = 0.76
"#,
        dataset = dataset.to_str().unwrap(),
        cache = cache_dir.to_str().unwrap(),
    );
    std::fs::write(path, config).unwrap();
    path.to_path_buf()
}

pub fn contam() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contam"))
}

pub fn run_ok(config: &Path, out: &Path, args: &[&str]) -> Output {
    let output = contam()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "contam {:?} failed with {:?}\nstdout: {}\nstderr: {}",
        args,
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// All files under `dir` keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        if let Ok(entries) = std::fs::read_dir(dir) {
            for entry in entries.flatten() {
                let path = entry.path();
                if path.is_dir() {
                    walk(root, &path, out);
                } else {
                    let rel = path.strip_prefix(root).unwrap().to_path_buf();
                    out.insert(rel, std::fs::read(&path).unwrap());
                }
            }
        }
    }
    walk(dir, dir, &mut out);
    out
}

/// Run the full stub pipeline (sample -> exp1 -> exp2 -> exp3 -> report)
/// into `out`.
pub fn run_full_pipeline(config: &Path, out: &Path) {
    run_ok(config, out, &["sample"]);
    run_ok(config, out, &["exp1"]);
    run_ok(config, out, &["exp2", "generate"]);
    run_ok(config, out, &["exp2", "evaluate"]);
    run_ok(config, out, &["exp2", "report"]);
    run_ok(config, out, &["exp3", "run"]);
    run_ok(config, out, &["exp3", "report"]);
    run_ok(config, out, &["report"]);
}
