//! Data-scaling metrics and model cards: Perf@X%, fine-tuning uplift, and
//! aggregate statistics (mean, median, interquartile mean, optimality gap)
//! over normalized scores.

use serde::{Deserialize, Serialize};

use crate::engine::{EvalPoint, LearningCurve, Phase};
use crate::error::{Result, SeqEvalError};

/// Normalized score at the last offline point with
/// `data_count <= fraction * dataset_size`, where the dataset size is the
/// final offline point's data count. `None` when no point qualifies.
pub fn perf_at(curve: &LearningCurve, fraction: f64) -> Result<Option<f64>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SeqEvalError::InvalidInput(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    let offline: Vec<&EvalPoint> = curve
        .points
        .iter()
        .filter(|p| p.phase == Phase::Offline)
        .collect();
    let last = match offline.last() {
        Some(p) => p,
        None => {
            return Err(SeqEvalError::InvalidInput(
                "curve has no offline points".into(),
            ))
        }
    };
    let threshold = fraction * last.data_count as f64;
    Ok(offline
        .iter()
        .rev()
        .find(|p| p.data_count as f64 <= threshold)
        .map(|p| p.norm_score))
}

/// Final online score minus final offline score; `None` without an online
/// phase.
pub fn finetune_uplift(curve: &LearningCurve) -> Option<f64> {
    let final_online = curve.points.iter().rev().find(|p| p.phase == Phase::Online)?;
    let final_offline = curve.points.iter().rev().find(|p| p.phase == Phase::Offline)?;
    Some(final_online.norm_score - final_offline.norm_score)
}

/// Mean of the middle half: drop `floor(n / 4)` scores from each end of the
/// sorted list.
pub fn iqm(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(SeqEvalError::InvalidInput("iqm of an empty list".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let drop = sorted.len() / 4;
    let middle = &sorted[drop..sorted.len() - drop];
    Ok(middle.iter().sum::<f64>() / middle.len() as f64)
}

/// Mean shortfall below `threshold`: `mean(max(threshold - score, 0))`.
/// Lower is better.
pub fn optimality_gap(scores: &[f64], threshold: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(SeqEvalError::InvalidInput(
            "optimality gap of an empty list".into(),
        ));
    }
    Ok(scores.iter().map(|&s| (threshold - s).max(0.0)).sum::<f64>() / scores.len() as f64)
}

pub fn median(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(SeqEvalError::InvalidInput("median of an empty list".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

pub fn mean(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(SeqEvalError::InvalidInput("mean of an empty list".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Averages seed curves pointwise. All curves must share the evaluation
/// grid (identical data counts, grad steps, and phases), which holds for
/// runs that differ only by seed.
pub fn mean_curve(curves: &[LearningCurve]) -> Result<LearningCurve> {
    let first = curves
        .first()
        .ok_or_else(|| SeqEvalError::InvalidInput("no curves to average".into()))?;
    for c in curves {
        if c.points.len() != first.points.len() {
            return Err(SeqEvalError::InvalidInput(format!(
                "curve '{}' has {} points, expected {}",
                c.run_id,
                c.points.len(),
                first.points.len()
            )));
        }
        for (a, b) in c.points.iter().zip(&first.points) {
            if a.data_count != b.data_count || a.grad_steps != b.grad_steps || a.phase != b.phase {
                return Err(SeqEvalError::InvalidInput(format!(
                    "curve '{}' is on a different evaluation grid",
                    c.run_id
                )));
            }
        }
    }
    let n = curves.len() as f64;
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| EvalPoint {
            raw_score: curves.iter().map(|c| c.points[i].raw_score).sum::<f64>() / n,
            norm_score: curves.iter().map(|c| c.points[i].norm_score).sum::<f64>() / n,
            ..*p
        })
        .collect();
    Ok(LearningCurve {
        run_id: format!("{}-mean", first.run_id),
        seed: first.seed,
        points,
    })
}

/// Aggregate statistics over per-dataset normalized final scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub mean: f64,
    pub median: f64,
    pub iqm: f64,
    pub optimality_gap: f64,
}

/// The optimum of the normalized scale, used as the optimality-gap
/// threshold.
pub const NORMALIZED_OPTIMUM: f64 = 100.0;

impl AggregateReport {
    pub fn over(scores: &[f64]) -> Result<Self> {
        Ok(AggregateReport {
            mean: mean(scores)?,
            median: median(scores)?,
            iqm: iqm(scores)?,
            optimality_gap: optimality_gap(scores, NORMALIZED_OPTIMUM)?,
        })
    }
}

/// Per-dataset card entries. Undefined values serialize as `null` and print
/// as "n/a".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCardRow {
    pub dataset: String,
    pub perf50: Option<f64>,
    pub perf100: Option<f64>,
    /// `perf50 / perf100`, undefined when `perf100` is 0 or either input is
    /// undefined.
    pub ratio: Option<f64>,
    /// `perf100 - perf50`.
    pub diff: Option<f64>,
    pub uplift: Option<f64>,
    pub seeds: usize,
}

/// Data-scaling summary for one algorithm across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub algorithm: String,
    pub per_dataset: Vec<DatasetCardRow>,
    /// Aggregates over the per-dataset final normalized scores.
    pub aggregates: Option<AggregateReport>,
    /// These are point estimates; no interval estimates are attached.
    pub estimate_kind: String,
}

/// Seed curves for one dataset.
#[derive(Debug, Clone)]
pub struct CurveSet {
    pub dataset: String,
    pub curves: Vec<LearningCurve>,
}

/// Builds the model card for one algorithm: seed curves are averaged
/// pointwise per dataset, Perf@50%/Perf@100% and their ratio and difference
/// are read off the mean curve, and aggregates summarize the final scores.
pub fn build_model_card(algorithm: &str, sets: &[CurveSet]) -> Result<ModelCard> {
    if sets.is_empty() {
        return Err(SeqEvalError::InvalidInput(
            "model card needs at least one dataset".into(),
        ));
    }
    let mut per_dataset = Vec::new();
    let mut finals = Vec::new();
    for set in sets {
        if set.curves.is_empty() {
            return Err(SeqEvalError::InvalidInput(format!(
                "dataset '{}' has no seed curves",
                set.dataset
            )));
        }
        let avg = mean_curve(&set.curves)?;
        let perf50 = perf_at(&avg, 0.5)?;
        let perf100 = perf_at(&avg, 1.0)?;
        let ratio = match (perf50, perf100) {
            (Some(p50), Some(p100)) if p100 != 0.0 => Some(p50 / p100),
            _ => None,
        };
        let diff = match (perf50, perf100) {
            (Some(p50), Some(p100)) => Some(p100 - p50),
            _ => None,
        };
        if let Some(p100) = perf100 {
            finals.push(p100);
        }
        per_dataset.push(DatasetCardRow {
            dataset: set.dataset.clone(),
            perf50,
            perf100,
            ratio,
            diff,
            uplift: finetune_uplift(&avg),
            seeds: set.curves.len(),
        });
    }
    let aggregates = if finals.is_empty() {
        None
    } else {
        Some(AggregateReport::over(&finals)?)
    };
    Ok(ModelCard {
        algorithm: algorithm.to_string(),
        per_dataset,
        aggregates,
        estimate_kind: "point".into(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "n/a".into(),
    }
}

impl ModelCard {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model card serializes")
    }

    /// Human-readable rendering with one row per dataset and the aggregate
    /// block underneath.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        use std::fmt::Write as _;
        writeln!(out, "model card: {}", self.algorithm).unwrap();
        writeln!(
            out,
            "{:<24} {:>8} {:>8} {:>13} {:>13} {:>8} {:>6}",
            "dataset", "perf@50%", "perf@100%", "perf50/perf100", "perf100-perf50", "uplift", "seeds"
        )
        .unwrap();
        for row in &self.per_dataset {
            writeln!(
                out,
                "{:<24} {:>8} {:>8} {:>13} {:>13} {:>8} {:>6}",
                row.dataset,
                fmt_opt(row.perf50),
                fmt_opt(row.perf100),
                fmt_opt(row.ratio),
                fmt_opt(row.diff),
                fmt_opt(row.uplift),
                row.seeds
            )
            .unwrap();
        }
        match &self.aggregates {
            Some(agg) => {
                writeln!(
                    out,
                    "aggregates over final scores: mean {:.2}, median {:.2}, iqm {:.2}, optimality gap {:.2}",
                    agg.mean, agg.median, agg.iqm, agg.optimality_gap
                )
                .unwrap();
            }
            None => writeln!(out, "aggregates: n/a").unwrap(),
        }
        writeln!(out, "estimates: point (no interval estimates)").unwrap();
        out
    }
}
