//! Experiment orchestration: dataset emission, the run matrix, model
//! cards, aggregates, and comparison tables.
//!
//! Matrix cells execute in a worker pool; each cell is an isolated
//! sequential run that streams its curve to `<name>.csv.partial` and
//! renames it into place on completion, so a crash leaves partial curves
//! plus a manifest of the cells that finished.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{
    finalize_for_dataset, CellConfig, ExperimentConfig, RunOverrides, MODE_MINIBATCH,
};
use crate::curvefile::{read_curve_file, CurveFile, CurveHeader, CurveWriter};
use crate::dataset::{OfflineDataset, Tier};
use crate::engine::{run_id_for, run_minibatch_with, run_seqeval_with, LearningCurve, Phase, RunOutcome};
use crate::error::{Result, SeqEvalError};
use crate::mdp::MdpSpec;
use crate::metrics::{build_model_card, AggregateReport, CurveSet, ModelCard};

pub const ENV_FILE: &str = "env.mdp";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Builds the configured tiers and writes one dataset file per tier, plus
/// the environment spec and the policy checkpoints behind the medium and
/// expert tiers. Returns the paths written.
pub fn cmd_make_datasets(cfg: &ExperimentConfig, out_dir: Option<&str>) -> Result<Vec<PathBuf>> {
    let out_dir = PathBuf::from(out_dir.unwrap_or(&cfg.datasets.out_dir));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| SeqEvalError::io(out_dir.display().to_string(), e))?;
    let mdp = cfg.env.build()?;
    let tiers = cfg.datasets.parsed_tiers()?;
    let built = crate::tiers::build_tier_datasets(&mdp, &tiers, &cfg.datasets.build)?;

    let mut written = Vec::new();
    let env_path = out_dir.join(ENV_FILE);
    mdp.save(&env_path)?;
    written.push(env_path);
    for (tier, dataset) in &built.datasets {
        let path = out_dir.join(format!("{tier}.ds"));
        dataset.persist(&path)?;
        written.push(path);
    }
    let medium_path = out_dir.join("checkpoint-medium.json");
    built.medium_checkpoint.save_checkpoint(&medium_path)?;
    written.push(medium_path);
    let expert_path = out_dir.join("checkpoint-expert.json");
    built.expert_checkpoint.save_checkpoint(&expert_path)?;
    written.push(expert_path);
    Ok(written)
}

/// One finished (or failed) matrix cell.
#[derive(Debug)]
pub struct CellResult {
    pub cell: CellConfig,
    pub file_name: String,
    pub outcome: Result<RunOutcome>,
}

/// Output of [`cmd_run`].
#[derive(Debug)]
pub struct MatrixOutcome {
    pub out_dir: PathBuf,
    pub results: Vec<CellResult>,
    pub failed: usize,
}

fn execute_cell(
    mdp: &MdpSpec,
    dataset: &OfflineDataset,
    cell: &CellConfig,
    out_dir: &Path,
) -> (String, Result<RunOutcome>) {
    let file_name = format!("{}.csv", cell.file_stem());
    let run = |file_name: &str| -> Result<RunOutcome> {
        let header = CurveHeader {
            run_id: run_id_for(&cell.mode, dataset, &cell.run),
            algorithm: cell.algorithm.to_string(),
            dataset: cell.dataset.clone(),
            mode: cell.mode.clone(),
            seed: cell.run.seed,
            config: serde_json::to_value(cell).expect("cell config serializes"),
        };
        let partial = out_dir.join(format!("{file_name}.partial"));
        let mut writer = CurveWriter::create(&partial, &header)?;
        let outcome = if cell.mode == MODE_MINIBATCH {
            let steps = cell.minibatch_grad_steps.unwrap_or(0);
            run_minibatch_with(mdp, dataset, &cell.run, steps, &mut writer)?
        } else {
            run_seqeval_with(mdp, dataset, &cell.run, &mut writer)?
        };
        drop(writer);
        let final_path = out_dir.join(file_name);
        std::fs::rename(&partial, &final_path)
            .map_err(|e| SeqEvalError::io(final_path.display().to_string(), e))?;
        Ok(outcome)
    };
    let outcome = run(&file_name);
    (file_name, outcome)
}

/// Loads the environment and datasets, runs every cell of the plan in a
/// worker pool, and writes curves, the manifest, model cards, and the
/// aggregate report. Cells that fail leave their partial output behind;
/// the error count is reported in the outcome.
pub fn cmd_run(cfg: &ExperimentConfig, overrides: &RunOverrides) -> Result<MatrixOutcome> {
    let plan = crate::config::resolve_run_plan(cfg, overrides)?;
    let mdp = MdpSpec::load(plan.datasets_dir.join(ENV_FILE))?;
    let mut datasets: BTreeMap<String, OfflineDataset> = BTreeMap::new();
    for name in &plan.dataset_names {
        let path = plan.datasets_dir.join(format!("{name}.ds"));
        let dataset = OfflineDataset::load(&path)?;
        if dataset.meta.env_name != mdp.name {
            return Err(SeqEvalError::Config(format!(
                "dataset '{name}' belongs to environment '{}', not '{}'",
                dataset.meta.env_name, mdp.name
            )));
        }
        datasets.insert(name.clone(), dataset);
    }
    std::fs::create_dir_all(&plan.out_dir)
        .map_err(|e| SeqEvalError::io(plan.out_dir.display().to_string(), e))?;

    // Size-dependent defaults become explicit before anything runs, so the
    // echoed configs are complete.
    let mut cells = plan.cells.clone();
    for cell in &mut cells {
        let dataset = &datasets[&cell.dataset];
        finalize_for_dataset(cell, dataset.len());
        cell.run.validate(dataset.len())?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| SeqEvalError::Config(format!("worker pool: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let dataset = &datasets[&cell.dataset];
                let (file_name, outcome) = execute_cell(&mdp, dataset, cell, &plan.out_dir);
                CellResult {
                    cell: cell.clone(),
                    file_name,
                    outcome,
                }
            })
            .collect()
    });

    let config_json = serde_json::to_string(cfg).expect("config serializes");
    write_manifest(&plan.out_dir, &results, &config_json)?;
    write_resolved_config(&plan.out_dir, cfg, &cells)?;
    write_model_cards(&plan.out_dir, &results, cfg)?;
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();
    Ok(MatrixOutcome {
        out_dir: plan.out_dir,
        results,
        failed,
    })
}

fn write_manifest(out_dir: &Path, results: &[CellResult], config_json: &str) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "# config: {config_json}").unwrap();
    for r in results {
        match &r.outcome {
            Ok(_) => writeln!(text, "ok {}", r.file_name).unwrap(),
            Err(e) => writeln!(text, "failed {} {e}", r.file_name).unwrap(),
        }
    }
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| SeqEvalError::io(path.display().to_string(), e))
}

fn write_resolved_config(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    cells: &[CellConfig],
) -> Result<()> {
    let value = serde_json::json!({
        "experiment": cfg,
        "cells": cells,
    });
    let path = out_dir.join("config-resolved.json");
    std::fs::write(&path, serde_json::to_string_pretty(&value).expect("config serializes"))
        .map_err(|e| SeqEvalError::io(path.display().to_string(), e))
}

/// Model cards cover the main matrix; replay-ratio sweep cells are curve
/// files only. Every emitted file embeds the resolved experiment config.
fn write_model_cards(out_dir: &Path, results: &[CellResult], cfg: &ExperimentConfig) -> Result<()> {
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<LearningCurve>>> = BTreeMap::new();
    for r in results {
        if r.cell.replay_ratio.is_some() {
            continue;
        }
        if let Ok(outcome) = &r.outcome {
            grouped
                .entry(r.cell.algorithm.to_string())
                .or_default()
                .entry(r.cell.dataset.clone())
                .or_default()
                .push(outcome.curve.clone());
        }
    }
    let mut cards: Vec<ModelCard> = Vec::new();
    for (algorithm, by_dataset) in &grouped {
        let sets: Vec<CurveSet> = by_dataset
            .iter()
            .map(|(dataset, curves)| CurveSet {
                dataset: dataset.clone(),
                curves: curves.clone(),
            })
            .collect();
        let card = build_model_card(algorithm, &sets)?;
        let json_path = out_dir.join(format!("modelcard_{algorithm}.json"));
        let envelope = serde_json::json!({ "config": cfg, "card": card });
        std::fs::write(
            &json_path,
            serde_json::to_string_pretty(&envelope).expect("card serializes"),
        )
        .map_err(|e| SeqEvalError::io(json_path.display().to_string(), e))?;
        let text_path = out_dir.join(format!("modelcard_{algorithm}.txt"));
        let text = format!(
            "# config: {}\n{}",
            serde_json::to_string(cfg).expect("config serializes"),
            card.to_text()
        );
        std::fs::write(&text_path, text)
            .map_err(|e| SeqEvalError::io(text_path.display().to_string(), e))?;
        cards.push(card);
    }
    if !cards.is_empty() {
        let mut agg_text = String::new();
        writeln!(agg_text, "# config: {}", serde_json::to_string(cfg).expect("config serializes"))
            .unwrap();
        writeln!(
            agg_text,
            "{:<10} {:>8} {:>8} {:>8} {:>16}",
            "algorithm", "mean", "median", "iqm", "optimality_gap"
        )
        .unwrap();
        let mut agg_json: BTreeMap<String, Option<AggregateReport>> = BTreeMap::new();
        for card in &cards {
            match &card.aggregates {
                Some(a) => writeln!(
                    agg_text,
                    "{:<10} {:>8.2} {:>8.2} {:>8.2} {:>16.2}",
                    card.algorithm, a.mean, a.median, a.iqm, a.optimality_gap
                )
                .unwrap(),
                None => writeln!(agg_text, "{:<10} n/a", card.algorithm).unwrap(),
            }
            agg_json.insert(card.algorithm.clone(), card.aggregates.clone());
        }
        let path = out_dir.join("aggregate.txt");
        std::fs::write(&path, agg_text)
            .map_err(|e| SeqEvalError::io(path.display().to_string(), e))?;
        let path = out_dir.join("aggregate.json");
        let envelope = serde_json::json!({ "config": cfg, "aggregates": agg_json });
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&envelope).expect("aggregates serialize"),
        )
        .map_err(|e| SeqEvalError::io(path.display().to_string(), e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// dataset -> algorithm -> per-seed values.
type ScoreTable = BTreeMap<String, BTreeMap<String, Vec<f64>>>;

/// Final scores keyed by (dataset, algorithm), averaged over seeds.
struct TableData {
    offline: ScoreTable,
    online: ScoreTable,
    algorithms: Vec<String>,
    rr_files: usize,
}

fn collect_tables(files: &[CurveFile]) -> TableData {
    let mut offline = ScoreTable::new();
    let mut online = ScoreTable::new();
    let mut algorithms = Vec::new();
    let mut rr_files = 0;
    for file in files {
        let is_rr_cell = file
            .header
            .config
            .get("replay_ratio")
            .map(|v| !v.is_null())
            .unwrap_or(false);
        if is_rr_cell {
            rr_files += 1;
            continue;
        }
        let algorithm = file.header.algorithm.clone();
        if !algorithms.contains(&algorithm) {
            algorithms.push(algorithm.clone());
        }
        let dataset = file.header.dataset.clone();
        if let Some(last_offline) = file.curve.points.iter().rev().find(|p| p.phase == Phase::Offline)
        {
            offline
                .entry(dataset.clone())
                .or_default()
                .entry(algorithm.clone())
                .or_default()
                .push(last_offline.norm_score);
        }
        if let Some(last_online) = file.curve.points.iter().rev().find(|p| p.phase == Phase::Online)
        {
            online
                .entry(dataset)
                .or_default()
                .entry(algorithm)
                .or_default()
                .push(last_online.norm_score);
        }
    }
    algorithms.sort();
    TableData {
        offline,
        online,
        algorithms,
        rr_files,
    }
}

fn render_table(title: &str, data: &ScoreTable, algorithms: &[String], out: &mut String) {
    writeln!(out, "{title}").unwrap();
    write!(out, "{:<16}", "dataset").unwrap();
    for a in algorithms {
        write!(out, " {a:>10}").unwrap();
    }
    writeln!(out).unwrap();
    for (dataset, row) in data {
        write!(out, "{dataset:<16}").unwrap();
        for a in algorithms {
            match row.get(a) {
                Some(values) if !values.is_empty() => {
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    write!(out, " {mean:>10.2}").unwrap();
                }
                _ => write!(out, " {:>10}", "n/a").unwrap(),
            }
        }
        writeln!(out).unwrap();
    }
    writeln!(out).unwrap();
}

/// Reads every completed curve file in `run_dir` and renders the
/// comparison tables: final offline scores, fine-tuning finals (when an
/// online phase exists), the mixed-dataset slice, and per-algorithm
/// aggregates. The text is also written to `report.txt` in the directory.
pub fn cmd_report(run_dir: impl AsRef<Path>) -> Result<String> {
    let run_dir = run_dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(run_dir)
        .map_err(|e| SeqEvalError::io(run_dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(SeqEvalError::InvalidInput(format!(
            "no curve files in {}",
            run_dir.display()
        )));
    }
    let files: Vec<CurveFile> = paths
        .iter()
        .map(read_curve_file)
        .collect::<Result<Vec<_>>>()?;
    let data = collect_tables(&files);

    let mut out = String::new();
    writeln!(
        out,
        "# source: {} ({} curve file(s), each carrying its resolved cell config)",
        run_dir.display(),
        files.len()
    )
    .unwrap();
    writeln!(out, "curves: {} file(s)", files.len()).unwrap();
    if data.rr_files > 0 {
        writeln!(
            out,
            "replay-ratio sweep curves: {} file(s), excluded from the tables",
            data.rr_files
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    render_table(
        "final offline scores (normalized, seed-averaged)",
        &data.offline,
        &data.algorithms,
        &mut out,
    );
    if data.online.is_empty() {
        writeln!(out, "fine-tuning table: no online phase in this run directory\n").unwrap();
    } else {
        render_table(
            "final fine-tuned scores (normalized, seed-averaged)",
            &data.online,
            &data.algorithms,
            &mut out,
        );
    }
    let mixed: ScoreTable = data
        .offline
        .iter()
        .filter(|(d, _)| d.as_str() == Tier::Mixed.as_str())
        .map(|(d, v)| (d.clone(), v.clone()))
        .collect();
    if mixed.is_empty() {
        writeln!(out, "mixed table: no mixed-dataset curves in this run directory\n").unwrap();
    } else {
        render_table(
            "mixed-dataset final scores (normalized, seed-averaged)",
            &mixed,
            &data.algorithms,
            &mut out,
        );
    }

    writeln!(out, "aggregates over per-dataset final scores").unwrap();
    writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>8} {:>16}",
        "algorithm", "mean", "median", "iqm", "optimality_gap"
    )
    .unwrap();
    for algorithm in &data.algorithms {
        let finals: Vec<f64> = data
            .offline
            .values()
            .filter_map(|row| row.get(algorithm))
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect();
        if finals.is_empty() {
            writeln!(out, "{algorithm:<10} n/a").unwrap();
        } else {
            let agg = AggregateReport::over(&finals)?;
            writeln!(
                out,
                "{:<10} {:>8.2} {:>8.2} {:>8.2} {:>16.2}",
                algorithm, agg.mean, agg.median, agg.iqm, agg.optimality_gap
            )
            .unwrap();
        }
    }

    let report_path = run_dir.join("report.txt");
    std::fs::write(&report_path, &out)
        .map_err(|e| SeqEvalError::io(report_path.display().to_string(), e))?;
    Ok(out)
}
