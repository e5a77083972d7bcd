//! Subcommand implementations. Every command resolves one run directory,
//! verifies it was created with the same effective configuration, and
//! writes its artifacts there atomically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use contam_core::config::RunConfig;
use contam_core::dataset::{self, CategoryMap, Question, SampleSet};
use contam_core::lexical::{self, Exp1Params, Grouping, JudgeConfig};
use contam_core::perturb::{self, GenParams};
use contam_core::providers::ChatClient;
use contam_core::report::{self, EVALS_FILE, PROBES_FILE, SNIPPETS_FILE, VARIANTS_FILE, VERDICTS_FILE};
use contam_core::textproc::StopwordList;
use contam_core::tsguess::{self, Exp3Params};
use contam_core::util::{parallel_map, read_jsonl, write_atomic, write_jsonl};

use crate::wiring;

/// The effective configuration snapshot every command dumps into the run
/// directory for audit, and checks on re-entry so runs with different
/// thresholds or seeds can never silently mix artifacts.
#[derive(Serialize, Deserialize)]
struct EffectiveConfig {
    run_id: String,
    sample_digest: Option<String>,
    config: RunConfig,
}

const EFFECTIVE_FILE: &str = "config.effective.json";

fn resolve_out(config: &RunConfig, out: Option<&Path>) -> PathBuf {
    match out {
        Some(path) => path.to_path_buf(),
        None => PathBuf::from("runs").join(config.run_id(None)),
    }
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_effective(out: &Path, config: &RunConfig, sample_digest: Option<String>) -> Result<()> {
    let path = out.join(EFFECTIVE_FILE);
    let mut digest = sample_digest;
    if path.exists() {
        let existing: EffectiveConfig =
            serde_json::from_str(&std::fs::read_to_string(&path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
        if existing.config.run_id(None) != config.run_id(None) {
            bail!(
                "run directory {} was created with a different configuration; \
                 use a fresh --out or matching config",
                out.display()
            );
        }
        if let (Some(old), Some(new)) = (&existing.sample_digest, &digest) {
            if old != new {
                bail!(
                    "run directory {} used a different sample file; refusing to mix runs",
                    out.display()
                );
            }
        }
        digest = digest.or(existing.sample_digest);
    }
    let effective = EffectiveConfig {
        run_id: config.run_id(digest.as_deref()),
        sample_digest: digest,
        config: config.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&effective)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(())
}

fn load_dataset(config: &RunConfig) -> Result<Vec<Question>> {
    let format = config.dataset_format();
    Ok(dataset::load_questions(&config.dataset, format)?)
}

fn load_categories(config: &RunConfig) -> Result<CategoryMap> {
    Ok(match &config.category_map {
        Some(path) => CategoryMap::from_path(path)?,
        None => CategoryMap::default_map(),
    })
}

fn load_stopwords(config: &RunConfig) -> Result<StopwordList> {
    Ok(match &config.stopwords {
        Some(path) => StopwordList::from_path(path)?,
        None => StopwordList::default_english(),
    })
}

fn sample_path(out: &Path, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf).unwrap_or_else(|| out.join("sample.json"))
}

fn load_sample(path: &Path) -> Result<SampleSet> {
    SampleSet::load(path).with_context(|| {
        format!(
            "cannot read sample {} (run `contam sample` first or pass --sample)",
            path.display()
        )
    })
}

/// The root sample carries the seed and per-subject quota it was drawn
/// with; commands operating on it adopt those so CLI overrides at sampling
/// time cannot desynchronize later stages. Commands without a sample adopt
/// the run directory's recorded values.
fn adopt_run_context(config: &mut RunConfig, out: &Path, sample: Option<&SampleSet>) -> Result<()> {
    match sample {
        Some(s) => {
            config.seed = s.seed;
            if s.per_subject > 0 {
                config.per_subject = s.per_subject;
            }
        }
        None => {
            let path = out.join(EFFECTIVE_FILE);
            if path.exists() {
                let effective: EffectiveConfig =
                    serde_json::from_str(&std::fs::read_to_string(&path)?)?;
                config.seed = effective.config.seed;
                config.per_subject = effective.config.per_subject;
            }
        }
    }
    Ok(())
}

pub fn sample(config: &RunConfig, out: Option<&Path>) -> Result<u8> {
    let out = resolve_out(config, out);
    let questions = load_dataset(config)?;
    let sample = dataset::sample_stratified(&questions, config.per_subject, config.seed)?;
    let path = out.join("sample.json");
    std::fs::create_dir_all(&out)?;
    sample.save(&path)?;
    write_effective(&out, config, Some(file_digest(&path)?))?;
    let subjects = dataset::subject_counts(&sample, &dataset::index_by_id(&questions)).len();
    println!(
        "sampled {} questions ({} per subject, {} subjects, seed {}) -> {}",
        sample.question_ids.len(),
        config.per_subject,
        subjects,
        config.seed,
        path.display()
    );
    Ok(0)
}

pub fn exp1(config: &RunConfig, out: Option<&Path>, sample_flag: Option<&Path>) -> Result<u8> {
    let out = resolve_out(config, out);
    let sample_file = sample_path(&out, sample_flag);
    let sample = load_sample(&sample_file)?;
    let mut config = config.clone();
    adopt_run_context(&mut config, &out, Some(&sample))?;
    let config = &config;
    write_effective(&out, config, Some(file_digest(&sample_file)?))?;

    let questions = load_dataset(config)?;
    let categories = load_categories(config)?;
    let cache = wiring::cache(config);
    let search = wiring::build_search(config, cache, &questions)?;
    let params = Exp1Params {
        judge: JudgeConfig::new(config.threshold, config.threshold_mode, config.ngram_size)
            .map_err(|e| anyhow!(e.to_string()))?,
        top_k: config.top_k,
        parallelism: config.parallelism,
    };
    let output = lexical::run_experiment1(&sample, &questions, &categories, &search, &params)?;
    write_jsonl(&out.join(VERDICTS_FILE), &output.verdicts)?;
    write_jsonl(&out.join(SNIPPETS_FILE), &output.snippets)?;

    let resolved: Vec<_> = output.verdicts.iter().filter(|v| v.resolved).cloned().collect();
    if !resolved.is_empty() {
        let accuracies =
            lexical::accuracy_map_for(Grouping::All, &resolved, &config.accuracies)?;
        let rows = lexical::aggregate(&resolved, Grouping::All, &accuracies)?;
        for row in &rows {
            println!(
                "overall: n={} contaminated={:.1}% any_overlap={:.1}% answer_present={:.1}% epg={:+.3}",
                row.n,
                row.contamination_rate * 100.0,
                row.any_overlap_rate * 100.0,
                row.answer_present_rate * 100.0,
                row.epg
            );
        }
    }
    println!(
        "wrote {} verdicts ({} unresolved) -> {}",
        output.verdicts.len(),
        output.unresolved,
        out.join(VERDICTS_FILE).display()
    );
    Ok(if output.unresolved > 0 { 1 } else { 0 })
}

pub fn exp2_generate(
    config: &RunConfig,
    out: Option<&Path>,
    sample_flag: Option<&Path>,
) -> Result<u8> {
    let out = resolve_out(config, out);
    let exclude_file = sample_path(&out, sample_flag);
    let exclude = load_sample(&exclude_file)?;
    write_effective(&out, config, Some(file_digest(&exclude_file)?))?;

    let generator_name = config
        .generator_model
        .as_deref()
        .ok_or_else(|| anyhow!("generator_model must be set for exp2 generate"))?;
    let generator_cfg = config
        .model(generator_name)
        .ok_or_else(|| anyhow!("generator_model '{generator_name}' not in models list"))?;

    let questions = load_dataset(config)?;
    let exp2_sample = dataset::sample_exclusive(
        &questions,
        &config.exp2.subjects,
        config.exp2.total,
        &exclude,
        config.seed,
    )?;
    exp2_sample.save(&out.join("exp2_sample.json"))?;

    let cache = wiring::cache(config);
    let generator = wiring::build_chat(config, cache, generator_cfg)?;
    let stopwords = load_stopwords(config)?;
    let index = dataset::index_by_id(&questions);
    let params = GenParams {
        temperature: config.generator_temperature,
        max_tokens: config.probe_max_tokens,
        attempts: 3,
    };

    let targets: Vec<&Question> = exp2_sample
        .question_ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| anyhow!("sample references unknown question '{id}'"))
        })
        .collect::<Result<_>>()?;
    let outcomes = parallel_map(&targets, config.parallelism, |question| {
        perturb::generate_variants(
            question,
            &generator,
            generator_cfg.model_id(),
            &stopwords,
            &params,
        )
    });

    let mut variants = Vec::new();
    let mut dropped = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(set) => variants.push(set),
            Err(drop) => dropped.push(drop),
        }
    }
    variants.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    dropped.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    write_jsonl(&out.join(VARIANTS_FILE), &variants)?;
    write_jsonl(&out.join("exp2/dropped.jsonl"), &dropped)?;
    println!(
        "generated variants for {} questions ({} dropped) -> {}",
        variants.len(),
        dropped.len(),
        out.join(VARIANTS_FILE).display()
    );
    Ok(if dropped.is_empty() { 0 } else { 1 })
}

pub fn exp2_evaluate(config: &RunConfig, out: Option<&Path>, models: Option<&str>) -> Result<u8> {
    let out = resolve_out(config, out);
    write_effective(&out, config, None)?;
    let variants: Vec<perturb::VariantSet> = read_jsonl(&out.join(VARIANTS_FILE))
        .with_context(|| "no variants found (run `contam exp2 generate` first)")?;
    let selected = wiring::select_models(config, models)?;
    let cache = wiring::cache(config);
    let clients: Vec<(ChatClient, String)> = selected
        .iter()
        .map(|m| Ok((wiring::build_chat(config, cache.clone(), m)?, m.model_id().to_string())))
        .collect::<Result<_>>()?;
    let handles: Vec<(&ChatClient, &str)> = clients
        .iter()
        .map(|(client, model_id)| (client, model_id.as_str()))
        .collect();
    let records = perturb::evaluate_all(&variants, &handles, config.mcq_max_tokens, config.parallelism);
    let unresolved = records.iter().filter(|r| !r.resolved).count();
    write_jsonl(&out.join(EVALS_FILE), &records)?;
    println!(
        "evaluated {} (question, model, form) records ({} unresolved) -> {}",
        records.len(),
        unresolved,
        out.join(EVALS_FILE).display()
    );
    Ok(if unresolved > 0 { 1 } else { 0 })
}

pub fn exp2_report(config: &RunConfig, out: Option<&Path>) -> Result<u8> {
    let out = resolve_out(config, out);
    let records: Vec<perturb::EvalRecord> = read_jsonl(&out.join(EVALS_FILE))
        .with_context(|| "no eval records found (run `contam exp2 evaluate` first)")?;
    let by_model = perturb::compute_drops(&records, perturb::DropGrouping::Model)?;
    let by_subject = perturb::compute_drops(&records, perturb::DropGrouping::Subject)?;
    let unparsed = perturb::unparsed_rates(&records);
    write_json(&out.join("exp2/drops_by_model.json"), &by_model)?;
    write_json(&out.join("exp2/drops_by_subject.json"), &by_subject)?;
    write_json(&out.join("exp2/unparsed.json"), &unparsed)?;
    for row in &by_model {
        println!(
            "{:<24} orig={:.3} para={:.3} ({:+.3}) indirect={:.3} ({:+.3})",
            row.group, row.acc_original, row.acc_paraphrased, row.drop_p, row.acc_indirect, row.drop_i
        );
    }
    Ok(0)
}

pub fn exp3_run(
    config: &RunConfig,
    out: Option<&Path>,
    sample_flag: Option<&Path>,
    models: Option<&str>,
) -> Result<u8> {
    let out = resolve_out(config, out);
    let sample_file = sample_path(&out, sample_flag);
    let sample = load_sample(&sample_file)?;
    write_effective(&out, config, Some(file_digest(&sample_file)?))?;

    let questions = load_dataset(config)?;
    let categories = load_categories(config)?;
    let stopwords = load_stopwords(config)?;
    let selected = wiring::select_models(config, models)?;
    let cache = wiring::cache(config);
    let clients: Vec<(ChatClient, String)> = selected
        .iter()
        .map(|m| Ok((wiring::build_chat(config, cache.clone(), m)?, m.model_id().to_string())))
        .collect::<Result<_>>()?;
    let handles: Vec<(&ChatClient, &str)> = clients
        .iter()
        .map(|(client, model_id)| (client, model_id.as_str()))
        .collect();
    let params = Exp3Params {
        seed: config.seed,
        min_word_len: config.min_word_len,
        max_tokens: config.probe_max_tokens,
        parallelism: config.parallelism,
    };
    let results =
        tsguess::run_probes(&sample, &questions, &categories, &handles, &stopwords, &params)?;
    let unresolved = results.iter().filter(|r| !r.resolved).count();
    let wm_excluded = results.iter().filter(|r| r.masked_word.is_none()).count();
    write_jsonl(&out.join(PROBES_FILE), &results)?;
    println!(
        "probed {} (question, model) pairs ({} unresolved, {} WM-excluded) -> {}",
        results.len(),
        unresolved,
        wm_excluded,
        out.join(PROBES_FILE).display()
    );
    Ok(if unresolved > 0 { 1 } else { 0 })
}

pub fn exp3_report(config: &RunConfig, out: Option<&Path>) -> Result<u8> {
    let out = resolve_out(config, out);
    let results: Vec<tsguess::ProbeResult> = read_jsonl(&out.join(PROBES_FILE))
        .with_context(|| "no probe results found (run `contam exp3 run` first)")?;
    let by_model = tsguess::aggregate_by_model(&results);
    let by_category: Vec<(String, f64)> = tsguess::aggregate_by_category(&results)
        .into_iter()
        .map(|(category, rate)| (category.to_string(), rate))
        .collect();
    write_json(&out.join("exp3/rates_by_model.json"), &by_model)?;
    write_json(&out.join("exp3/rates_by_category.json"), &by_category)?;
    for row in &by_model {
        println!(
            "{:<24} om_exact={:.1}% om_partial={:.1}% wm_exact={:.1}% combined={:.1}%",
            row.model_id,
            row.om_exact_rate * 100.0,
            row.om_partial_rate * 100.0,
            row.wm_exact_rate * 100.0,
            row.combined_rate * 100.0
        );
    }
    Ok(0)
}

pub fn report(config: &RunConfig, out: Option<&Path>, runs: Option<&Path>) -> Result<u8> {
    let runs = runs
        .map(Path::to_path_buf)
        .unwrap_or_else(|| resolve_out(config, out));
    // Prefer the accuracies the run was actually executed with.
    let effective_path = runs.join(EFFECTIVE_FILE);
    let accuracies: BTreeMap<String, f64> = if effective_path.exists() {
        let effective: EffectiveConfig =
            serde_json::from_str(&std::fs::read_to_string(&effective_path)?)?;
        effective.config.accuracies
    } else {
        config.accuracies.clone()
    };
    let report_dir = runs.join("report");
    let tables = report::render_tables(&runs, &report_dir, &accuracies)?;
    let plots = report::emit_plot_data(&runs, &report_dir, &accuracies)?;
    for path in tables.tables.iter().chain(plots.plots.iter()) {
        println!("wrote {}", path.display());
    }
    if let Some(convergence) = &tables.convergence {
        println!(
            "convergence: agreement={} tau={:?}",
            convergence.agreement,
            convergence.kendall_tau.get("exp1_vs_exp3").copied().flatten()
        );
    }
    for note in tables.skipped.iter().chain(plots.skipped.iter()) {
        eprintln!("skipped: {note}");
    }
    Ok(0)
}

pub fn cache_export(config: &RunConfig, file: &Path) -> Result<u8> {
    let cache = wiring::cache(config);
    let count = cache.export(file)?;
    println!("exported {count} cache entries -> {}", file.display());
    Ok(0)
}

pub fn cache_import(config: &RunConfig, file: &Path) -> Result<u8> {
    let cache = wiring::cache(config);
    let stats = cache.import(file)?;
    println!(
        "imported {} cache entries ({} corrupt lines skipped) from {}",
        stats.imported,
        stats.skipped,
        file.display()
    );
    Ok(0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}
