//! Render result tables from persisted run artifacts, emit plot-ready CSV
//! panels, and quantify cross-method agreement.
//!
//! Everything here re-derives its numbers from the JSONL artifacts; nothing
//! is carried over from in-memory pipeline state. That keeps every rendered
//! cell auditable against the raw records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Category;
use crate::lexical::{self, Grouping, RateRow, VerdictRecord};
use crate::perturb::{self, DropGrouping, DropRow, EvalRecord};
use crate::tsguess::{self, ProbeResult};
use crate::util::{read_jsonl, write_atomic};

pub const VERDICTS_FILE: &str = "exp1/verdicts.jsonl";
pub const SNIPPETS_FILE: &str = "exp1/snippets.jsonl";
pub const VARIANTS_FILE: &str = "exp2/variants.jsonl";
pub const EVALS_FILE: &str = "exp2/evals.jsonl";
pub const PROBES_FILE: &str = "exp3/probes.jsonl";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("rankings must be permutations of the same items")]
    NotAPermutation,
    #[error("need at least 2 items to rank")]
    TooFewItems,
    #[error("missing category '{0}' in rate input")]
    MissingCategory(String),
    #[error("no artifacts found under '{0}'")]
    NothingToRender(String),
    #[error(transparent)]
    Lexical(#[from] lexical::LexicalError),
    #[error(transparent)]
    Perturb(#[from] perturb::PerturbError),
}

/// Kendall rank correlation between two orderings of the same item set.
/// The inputs are permutations (no ties possible), so this is the classic
/// (C - D) / (n(n-1)/2).
pub fn kendall_tau<T: Eq + Ord + Clone>(rank_a: &[T], rank_b: &[T]) -> Result<f64, ReportError> {
    let n = rank_a.len();
    if n < 2 {
        return Err(ReportError::TooFewItems);
    }
    if rank_b.len() != n {
        return Err(ReportError::NotAPermutation);
    }
    let mut sorted_a: Vec<&T> = rank_a.iter().collect();
    let mut sorted_b: Vec<&T> = rank_b.iter().collect();
    sorted_a.sort();
    sorted_b.sort();
    if sorted_a != sorted_b || sorted_a.windows(2).any(|w| w[0] == w[1]) {
        return Err(ReportError::NotAPermutation);
    }
    let position = |list: &[T], item: &T| list.iter().position(|x| x == item).unwrap();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let a_order = position(rank_a, &rank_a[i]) < position(rank_a, &rank_a[j]);
            let b_order = position(rank_b, &rank_a[i]) < position(rank_b, &rank_a[j]);
            if a_order == b_order {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let total = (n * (n - 1) / 2) as f64;
    Ok((concordant - discordant) as f64 / total)
}

/// Tie-adjusted Kendall tau (tau-b) over paired score vectors. Returns None
/// when either vector is fully tied (the statistic is undefined).
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len();
    let mut concordant = 0f64;
    let mut discordant = 0f64;
    let mut ties_x = 0f64;
    let mut ties_y = 0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xs[i] - xs[j];
            let dy = ys[i] - ys[j];
            if dx == 0.0 && dy == 0.0 {
                // tied in both: contributes to neither adjustment
            } else if dx == 0.0 {
                ties_x += 1.0;
            } else if dy == 0.0 {
                ties_y += 1.0;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    let total = (n * (n - 1) / 2) as f64;
    let denom = ((total - ties_x) * (total - ties_y)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((concordant - discordant) / denom)
}

/// Cross-method agreement summary between the web-overlap and TS-Guessing
/// category rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    /// Method name -> categories ordered by descending rate.
    pub rankings: BTreeMap<String, Vec<String>>,
    /// Method pair -> tie-adjusted Kendall tau (null when undefined).
    pub kendall_tau: BTreeMap<String, Option<f64>>,
    /// True iff both methods produce the identical ordering.
    pub agreement: bool,
}

fn ranked_categories(rates: &[(Category, f64)]) -> Vec<String> {
    let mut sorted: Vec<&(Category, f64)> = rates.iter().collect();
    // Descending rate; ties broken by category name for determinism.
    sorted.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.as_str().cmp(b.0.as_str()))
    });
    sorted.iter().map(|(c, _)| c.to_string()).collect()
}

/// Rank both methods' category rates and measure their agreement.
pub fn convergence(
    exp1: &[(Category, f64)],
    exp3: &[(Category, f64)],
) -> Result<ConvergenceSummary, ReportError> {
    for required in Category::ALL {
        for (name, rates) in [("exp1", exp1), ("exp3", exp3)] {
            if !rates.iter().any(|(c, _)| *c == required) {
                return Err(ReportError::MissingCategory(format!(
                    "{required} ({name})"
                )));
            }
        }
    }
    let aligned = |rates: &[(Category, f64)]| -> Vec<f64> {
        Category::ALL
            .iter()
            .map(|c| rates.iter().find(|(rc, _)| rc == c).unwrap().1)
            .collect()
    };
    let ranking1 = ranked_categories(exp1);
    let ranking3 = ranked_categories(exp3);
    let tau = kendall_tau_b(&aligned(exp1), &aligned(exp3));
    let agreement = ranking1 == ranking3;
    let mut rankings = BTreeMap::new();
    rankings.insert("exp1_web".to_string(), ranking1);
    rankings.insert("exp3_tsguess".to_string(), ranking3);
    let mut taus = BTreeMap::new();
    taus.insert("exp1_vs_exp3".to_string(), tau);
    Ok(ConvergenceSummary {
        rankings,
        kendall_tau: taus,
        agreement,
    })
}

/// A rendered table: one CSV and one aligned-text file per table.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn write(&self, tables_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
        let csv_path = tables_dir.join(format!("{}.csv", self.name));
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&self.header)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        for row in &self.rows {
            writer
                .write_record(row)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        write_atomic(&csv_path, &bytes)?;

        let txt_path = tables_dir.join(format!("{}.txt", self.name));
        write_atomic(&txt_path, self.aligned_text().as_bytes())?;
        Ok(vec![csv_path, txt_path])
    }

    fn aligned_text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let render_row = |cells: &[String]| {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = String::new();
        out.push_str(&render_row(&self.header));
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&render_row(row));
            out.push('\n');
        }
        out
    }
}

fn pct(rate: f64) -> String {
    format!("{:.1}", rate * 100.0)
}

fn acc(value: f64) -> String {
    format!("{value:.3}")
}

fn signed3(value: f64) -> String {
    format!("{value:+.3}")
}

/// Artifacts of one run directory; absent files load as None.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub verdicts: Option<Vec<VerdictRecord>>,
    pub evals: Option<Vec<EvalRecord>>,
    pub probes: Option<Vec<ProbeResult>>,
}

impl RunArtifacts {
    pub fn load(runs: &Path) -> Result<Self, ReportError> {
        let load_opt = |rel: &str| -> Result<Option<_>, std::io::Error> {
            let path = runs.join(rel);
            if path.exists() {
                Ok(Some(path))
            } else {
                Ok(None)
            }
        };
        Ok(RunArtifacts {
            verdicts: match load_opt(VERDICTS_FILE)? {
                Some(p) => Some(read_jsonl(&p)?),
                None => None,
            },
            evals: match load_opt(EVALS_FILE)? {
                Some(p) => Some(read_jsonl(&p)?),
                None => None,
            },
            probes: match load_opt(PROBES_FILE)? {
                Some(p) => Some(read_jsonl(&p)?),
                None => None,
            },
        })
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_none() && self.evals.is_none() && self.probes.is_none()
    }
}

fn exp1_category_rows(
    verdicts: &[VerdictRecord],
    accuracies: &BTreeMap<String, f64>,
) -> Result<(Vec<RateRow>, RateRow), ReportError> {
    let cat_map = lexical::accuracy_map_for(Grouping::Category, verdicts, accuracies)?;
    let rows = lexical::aggregate(verdicts, Grouping::Category, &cat_map)?;
    let all_map = lexical::accuracy_map_for(Grouping::All, verdicts, accuracies)?;
    let all = lexical::aggregate(verdicts, Grouping::All, &all_map)?
        .pop()
        .expect("non-empty verdicts produce an overall row");
    Ok((rows, all))
}

fn exp1_tables(
    verdicts: &[VerdictRecord],
    accuracies: &BTreeMap<String, f64>,
) -> Result<Vec<Table>, ReportError> {
    let (category_rows, all_row) = exp1_category_rows(verdicts, accuracies)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for row in category_rows.iter().chain(std::iter::once(&all_row)) {
        let label = if row.group == "all" { "All" } else { row.group.as_str() };
        rows.push(vec![
            label.to_string(),
            row.n.to_string(),
            pct(row.contamination_rate),
            pct(row.any_overlap_rate),
            pct(row.answer_present_rate),
            acc(row.avg_overlap),
            format!("{:.2}", row.reported_accuracy),
            signed3(row.epg),
        ]);
    }
    let by_category = Table {
        name: "exp1_by_category".into(),
        header: vec![
            "category".into(),
            "n".into(),
            "contaminated_pct".into(),
            "any_overlap_pct".into(),
            "answer_present_pct".into(),
            "avg_overlap".into(),
            "reported_accuracy".into(),
            "epg".into(),
        ],
        rows,
    };

    let subject_map = lexical::accuracy_map_for(Grouping::Subject, verdicts, accuracies)?;
    let mut subject_rows = lexical::aggregate(verdicts, Grouping::Subject, &subject_map)?;
    // Most-contaminated first; ties by mean overlap, then name.
    subject_rows.sort_by(|a, b| {
        b.contamination_rate
            .partial_cmp(&a.contamination_rate)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                b.avg_overlap
                    .partial_cmp(&a.avg_overlap)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.group.cmp(&b.group))
    });
    let top_subjects = Table {
        name: "exp1_top_subjects".into(),
        header: vec![
            "subject".into(),
            "n".into(),
            "contaminated_pct".into(),
            "avg_overlap".into(),
        ],
        rows: subject_rows
            .iter()
            .take(15)
            .map(|row| {
                vec![
                    row.group.clone(),
                    row.n.to_string(),
                    pct(row.contamination_rate),
                    acc(row.avg_overlap),
                ]
            })
            .collect(),
    };
    Ok(vec![by_category, top_subjects])
}

fn drop_table(name: &str, label: &str, rows: &[DropRow]) -> Table {
    Table {
        name: name.into(),
        header: vec![
            label.into(),
            "n".into(),
            "acc_original".into(),
            "acc_paraphrased".into(),
            "drop_p".into(),
            "acc_indirect".into(),
            "drop_i".into(),
        ],
        rows: rows
            .iter()
            .map(|row| {
                vec![
                    row.group.clone(),
                    row.n.to_string(),
                    acc(row.acc_original),
                    acc(row.acc_paraphrased),
                    signed3(row.drop_p),
                    acc(row.acc_indirect),
                    signed3(row.drop_i),
                ]
            })
            .collect(),
    }
}

fn exp2_tables(evals: &[EvalRecord]) -> Result<Vec<Table>, ReportError> {
    let by_model = perturb::compute_drops(evals, DropGrouping::Model)?;
    let by_subject = perturb::compute_drops(evals, DropGrouping::Subject)?;
    let unparsed = perturb::unparsed_rates(evals);
    let unparsed_table = Table {
        name: "exp2_unparsed".into(),
        header: vec!["model".into(), "form".into(), "n".into(), "unparsed_pct".into()],
        rows: unparsed
            .iter()
            .map(|row| {
                vec![
                    row.model_id.clone(),
                    row.form.to_string(),
                    row.n.to_string(),
                    pct(row.unparsed_rate),
                ]
            })
            .collect(),
    };
    Ok(vec![
        drop_table("exp2_by_model", "model", &by_model),
        drop_table("exp2_by_subject", "subject", &by_subject),
        unparsed_table,
    ])
}

fn exp3_tables(probes: &[ProbeResult]) -> Vec<Table> {
    let rows = tsguess::aggregate_by_model(probes);
    let mut table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            vec![
                row.model_id.clone(),
                row.n.to_string(),
                pct(row.om_exact_rate),
                pct(row.om_partial_rate),
                pct(row.wm_exact_rate),
                pct(row.combined_rate),
            ]
        })
        .collect();
    if !rows.is_empty() {
        let count = rows.len() as f64;
        let mean = |f: fn(&tsguess::ModelRateRow) -> f64| rows.iter().map(f).sum::<f64>() / count;
        table_rows.push(vec![
            "average".into(),
            rows.iter().map(|r| r.n).sum::<usize>().to_string(),
            pct(mean(|r| r.om_exact_rate)),
            pct(mean(|r| r.om_partial_rate)),
            pct(mean(|r| r.wm_exact_rate)),
            pct(mean(|r| r.combined_rate)),
        ]);
    }
    let by_model = Table {
        name: "exp3_by_model".into(),
        header: vec![
            "model".into(),
            "n".into(),
            "om_exact_pct".into(),
            "om_partial_pct".into(),
            "wm_exact_pct".into(),
            "combined_pct".into(),
        ],
        rows: table_rows,
    };
    let category_rows = tsguess::aggregate_by_category(probes);
    let by_category = Table {
        name: "exp3_by_category".into(),
        header: vec!["category".into(), "om_partial_pct".into()],
        rows: category_rows
            .iter()
            .map(|(category, rate)| vec![category.to_string(), pct(*rate)])
            .collect(),
    };
    vec![by_model, by_category]
}

fn category_rates_exp1(
    verdicts: &[VerdictRecord],
    accuracies: &BTreeMap<String, f64>,
) -> Result<Vec<(Category, f64)>, ReportError> {
    let (rows, _) = exp1_category_rows(verdicts, accuracies)?;
    Ok(rows
        .iter()
        .map(|row| {
            let category = Category::parse(&row.group).expect("category label round-trips");
            (category, row.contamination_rate)
        })
        .collect())
}

fn comparison_table(
    exp1: &[(Category, f64)],
    exp3: &[(Category, f64)],
) -> Table {
    let lookup = |rates: &[(Category, f64)], c: Category| {
        rates.iter().find(|(rc, _)| *rc == c).map(|(_, r)| *r).unwrap_or(0.0)
    };
    let mut rows: Vec<(Category, f64, f64)> = Category::ALL
        .iter()
        .map(|c| (*c, lookup(exp1, *c), lookup(exp3, *c)))
        .collect();
    // Highest combined signal first.
    rows.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal));
    Table {
        name: "method_comparison".into(),
        header: vec![
            "category".into(),
            "exp1_web_pct".into(),
            "exp3_tsguess_pct".into(),
            "difference_pp".into(),
        ],
        rows: rows
            .iter()
            .map(|(category, web, probe)| {
                vec![
                    category.to_string(),
                    pct(*web),
                    pct(*probe),
                    format!("{:+.1}", (probe - web) * 100.0),
                ]
            })
            .collect(),
    }
}

/// Everything the `report` command produces.
#[derive(Debug, Default)]
pub struct RenderSummary {
    pub tables: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub convergence: Option<ConvergenceSummary>,
    pub skipped: Vec<String>,
}

/// Render every table whose artifacts are present under `runs`, writing
/// CSV + aligned text into `out/tables/`. Missing artifacts skip their
/// tables with a note; a run directory with no artifacts at all is an
/// error.
pub fn render_tables(
    runs: &Path,
    out: &Path,
    accuracies: &BTreeMap<String, f64>,
) -> Result<RenderSummary, ReportError> {
    let artifacts = RunArtifacts::load(runs)?;
    if artifacts.is_empty() {
        return Err(ReportError::NothingToRender(runs.display().to_string()));
    }
    let tables_dir = out.join("tables");
    let mut summary = RenderSummary::default();

    let mut tables: Vec<Table> = Vec::new();
    match &artifacts.verdicts {
        Some(verdicts) => tables.extend(exp1_tables(verdicts, accuracies)?),
        None => summary.skipped.push(format!("exp1 tables ({VERDICTS_FILE} missing)")),
    }
    match &artifacts.evals {
        Some(evals) => tables.extend(exp2_tables(evals)?),
        None => summary.skipped.push(format!("exp2 tables ({EVALS_FILE} missing)")),
    }
    match &artifacts.probes {
        Some(probes) => tables.extend(exp3_tables(probes)),
        None => summary.skipped.push(format!("exp3 tables ({PROBES_FILE} missing)")),
    }

    if let (Some(verdicts), Some(probes)) = (&artifacts.verdicts, &artifacts.probes) {
        let exp1_rates = category_rates_exp1(verdicts, accuracies)?;
        let exp3_rates = tsguess::aggregate_by_category(probes);
        tables.push(comparison_table(&exp1_rates, &exp3_rates));
        match convergence(&exp1_rates, &exp3_rates) {
            Ok(conv) => {
                let mut bytes = serde_json::to_vec_pretty(&conv)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
                bytes.push(b'\n');
                write_atomic(&out.join("convergence.json"), &bytes)?;
                summary.convergence = Some(conv);
            }
            Err(e) => summary.skipped.push(format!("convergence ({e})")),
        }
    } else {
        summary
            .skipped
            .push("method comparison (needs both exp1 and exp3 artifacts)".into());
    }

    for table in &tables {
        summary.tables.extend(table.write(&tables_dir)?);
    }
    Ok(summary)
}

/// Emit one CSV per figure panel into `out/plots/`: exp2 accuracy by form
/// and model, exp2 drop by subject, exp3 rates by model, the exp3
/// model x category heatmap matrix, and the exp1-vs-exp3 category
/// comparison. Panels whose artifacts are missing are skipped.
pub fn emit_plot_data(
    runs: &Path,
    out: &Path,
    accuracies: &BTreeMap<String, f64>,
) -> Result<RenderSummary, ReportError> {
    let artifacts = RunArtifacts::load(runs)?;
    if artifacts.is_empty() {
        return Err(ReportError::NothingToRender(runs.display().to_string()));
    }
    let plots_dir = out.join("plots");
    let mut summary = RenderSummary::default();

    let write_csv = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<PathBuf, ReportError> {
        let path = plots_dir.join(format!("{name}.csv"));
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(header)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        for row in rows {
            writer
                .write_record(&row)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        write_atomic(&path, &bytes)?;
        Ok(path)
    };

    if let Some(evals) = &artifacts.evals {
        let by_model = perturb::compute_drops(evals, DropGrouping::Model)?;
        let mut rows = Vec::new();
        for row in by_model.iter().filter(|r| r.group != perturb::AVERAGE_ROW) {
            rows.push(vec![row.group.clone(), "original".into(), acc(row.acc_original)]);
            rows.push(vec![row.group.clone(), "paraphrased".into(), acc(row.acc_paraphrased)]);
            rows.push(vec![row.group.clone(), "indirect".into(), acc(row.acc_indirect)]);
        }
        summary.plots.push(write_csv(
            "exp2_accuracy_by_form_model",
            &["model", "form", "accuracy"],
            rows,
        )?);

        let by_subject = perturb::compute_drops(evals, DropGrouping::Subject)?;
        let rows = by_subject
            .iter()
            .filter(|r| r.group != perturb::AVERAGE_ROW)
            .map(|row| vec![row.group.clone(), signed3(row.drop_i)])
            .collect();
        summary
            .plots
            .push(write_csv("exp2_drop_by_subject", &["subject", "drop_indirect"], rows)?);
    } else {
        summary.skipped.push("exp2 plot panels".into());
    }

    if let Some(probes) = &artifacts.probes {
        let rows = tsguess::aggregate_by_model(probes)
            .iter()
            .map(|row| {
                vec![
                    row.model_id.clone(),
                    acc(row.om_exact_rate),
                    acc(row.om_partial_rate),
                    acc(row.wm_exact_rate),
                    acc(row.combined_rate),
                ]
            })
            .collect();
        summary.plots.push(write_csv(
            "exp3_rates_by_model",
            &["model", "om_exact", "om_partial", "wm_exact", "combined"],
            rows,
        )?);

        // Heatmap matrix: one row per model, one column per category.
        let models: Vec<String> = tsguess::aggregate_by_model(probes)
            .iter()
            .map(|r| r.model_id.clone())
            .collect();
        let mut rows = Vec::new();
        for model in &models {
            let subset: Vec<ProbeResult> = probes
                .iter()
                .filter(|p| &p.model_id == model)
                .cloned()
                .collect();
            let rates: BTreeMap<Category, f64> =
                tsguess::aggregate_by_category(&subset).into_iter().collect();
            let mut row = vec![model.clone()];
            for category in Category::ALL {
                row.push(acc(rates.get(&category).copied().unwrap_or(0.0)));
            }
            rows.push(row);
        }
        let header: Vec<String> = std::iter::once("model".to_string())
            .chain(Category::ALL.iter().map(|c| c.to_string()))
            .collect();
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        summary
            .plots
            .push(write_csv("exp3_model_category_heatmap", &header_refs, rows)?);
    } else {
        summary.skipped.push("exp3 plot panels".into());
    }

    if let (Some(verdicts), Some(probes)) = (&artifacts.verdicts, &artifacts.probes) {
        let exp1_rates = category_rates_exp1(verdicts, accuracies)?;
        let exp3_rates: BTreeMap<Category, f64> =
            tsguess::aggregate_by_category(probes).into_iter().collect();
        let rows = exp1_rates
            .iter()
            .map(|(category, web)| {
                vec![
                    category.to_string(),
                    acc(*web),
                    acc(exp3_rates.get(category).copied().unwrap_or(0.0)),
                ]
            })
            .collect();
        summary.plots.push(write_csv(
            "exp1_vs_exp3_category",
            &["category", "exp1_rate", "exp3_rate"],
            rows,
        )?);
    } else {
        summary.skipped.push("exp1 vs exp3 category panel".into());
    }

    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn categories(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tau_identical_rankings() {
        let a = categories(&["STEM", "Professional", "Social Sciences", "Humanities"]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn tau_reversed_rankings() {
        let a = categories(&["STEM", "Professional", "Social Sciences", "Humanities"]);
        let b: Vec<String> = a.iter().rev().cloned().collect();
        assert_eq!(kendall_tau(&a, &b).unwrap(), -1.0);
    }

    #[test]
    fn tau_bottom_swap() {
        // 5 concordant pairs, 1 discordant: (5 - 1) / 6.
        let a = categories(&["STEM", "Prof", "Soc", "Hum"]);
        let b = categories(&["STEM", "Prof", "Hum", "Soc"]);
        let got = kendall_tau(&a, &b).unwrap();
        assert!((got - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn tau_rejects_non_permutations() {
        let a = categories(&["x", "y"]);
        let b = categories(&["x", "z"]);
        assert!(matches!(kendall_tau(&a, &b), Err(ReportError::NotAPermutation)));
        let dup = categories(&["x", "x"]);
        assert!(kendall_tau(&dup, &dup).is_err());
        let single = categories(&["x"]);
        assert!(matches!(kendall_tau(&single, &single), Err(ReportError::TooFewItems)));
    }

    /// Brute-force tie-adjusted oracle, written independently of
    /// kendall_tau_b: explicit pair classification with tie counting.
    fn tau_b_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
        let n = xs.len();
        let mut c = 0.0;
        let mut d = 0.0;
        let mut tx = 0.0;
        let mut ty = 0.0;
        let mut txy = 0.0;
        for i in 0..n {
            for j in 0..i {
                let sx = (xs[i] - xs[j]).partial_cmp(&0.0).unwrap();
                let sy = (ys[i] - ys[j]).partial_cmp(&0.0).unwrap();
                use std::cmp::Ordering::*;
                match (sx, sy) {
                    (Equal, Equal) => txy += 1.0,
                    (Equal, _) => tx += 1.0,
                    (_, Equal) => ty += 1.0,
                    (a, b) if a == b => c += 1.0,
                    _ => d += 1.0,
                }
            }
        }
        let _ = txy;
        let n0 = (n * (n - 1) / 2) as f64;
        let denom = ((n0 - tx) * (n0 - ty)).sqrt();
        if denom == 0.0 {
            None
        } else {
            Some((c - d) / denom)
        }
    }

    #[test]
    fn tau_b_matches_oracle_on_grids() {
        let cases: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]),
            (vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]),
            (vec![1.0, 1.0, 2.0, 3.0], vec![2.0, 1.0, 3.0, 4.0]),
            (vec![0.5, 0.5, 0.5, 0.7], vec![0.1, 0.2, 0.2, 0.4]),
            (vec![1.0, 2.0, 2.0, 3.0], vec![1.0, 2.0, 3.0, 3.0]),
        ];
        for (xs, ys) in cases {
            assert_eq!(kendall_tau_b(&xs, &ys), tau_b_oracle(&xs, &ys), "{xs:?} vs {ys:?}");
        }
    }

    #[test]
    fn tau_b_fully_tied_is_undefined() {
        assert_eq!(kendall_tau_b(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn convergence_on_reported_rates() {
        let exp1 = vec![
            (Category::Stem, 0.181),
            (Category::Professional, 0.127),
            (Category::SocialSciences, 0.121),
            (Category::Humanities, 0.103),
        ];
        let exp3 = vec![
            (Category::Stem, 0.559),
            (Category::Professional, 0.448),
            (Category::SocialSciences, 0.391),
            (Category::Humanities, 0.380),
        ];
        let summary = convergence(&exp1, &exp3).unwrap();
        assert!(summary.agreement);
        assert_eq!(summary.kendall_tau["exp1_vs_exp3"], Some(1.0));
        assert_eq!(
            summary.rankings["exp1_web"],
            vec!["STEM", "Professional", "Social Sciences", "Humanities"]
        );
        assert_eq!(summary.rankings["exp1_web"], summary.rankings["exp3_tsguess"]);
    }

    #[test]
    fn convergence_bottom_swap_disagrees() {
        let exp1 = vec![
            (Category::Stem, 0.4),
            (Category::Professional, 0.3),
            (Category::SocialSciences, 0.2),
            (Category::Humanities, 0.1),
        ];
        let exp3 = vec![
            (Category::Stem, 0.4),
            (Category::Professional, 0.3),
            (Category::SocialSciences, 0.1),
            (Category::Humanities, 0.2),
        ];
        let summary = convergence(&exp1, &exp3).unwrap();
        assert!(!summary.agreement);
        let tau = summary.kendall_tau["exp1_vs_exp3"].unwrap();
        assert!((tau - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn convergence_with_all_ties_reports_undefined_tau() {
        let exp1 = vec![
            (Category::Stem, 0.2),
            (Category::Professional, 0.2),
            (Category::SocialSciences, 0.2),
            (Category::Humanities, 0.2),
        ];
        let exp3 = vec![
            (Category::Stem, 0.5),
            (Category::Professional, 0.4),
            (Category::SocialSciences, 0.3),
            (Category::Humanities, 0.2),
        ];
        let summary = convergence(&exp1, &exp3).unwrap();
        assert_eq!(summary.kendall_tau["exp1_vs_exp3"], None);
    }

    #[test]
    fn convergence_missing_category_errors() {
        let exp1 = vec![(Category::Stem, 0.4)];
        let exp3 = vec![
            (Category::Stem, 0.4),
            (Category::Professional, 0.3),
            (Category::SocialSciences, 0.2),
            (Category::Humanities, 0.1),
        ];
        assert!(matches!(
            convergence(&exp1, &exp3),
            Err(ReportError::MissingCategory(_))
        ));
    }

    #[test]
    fn aligned_text_is_padded_and_stable() {
        let table = Table {
            name: "t".into(),
            header: vec!["a".into(), "long_header".into()],
            rows: vec![
                vec!["wide cell".into(), "x".into()],
                vec!["y".into(), "z".into()],
            ],
        };
        let text = table.aligned_text();
        assert_eq!(text, table.aligned_text());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("a"));
        assert!(lines[1].starts_with("---"));
    }
}
