//! Experiment configuration: one structured text file drives dataset
//! construction and the run matrix. Command-line flags override config
//! fields, and every output file carries the fully resolved values it was
//! produced under.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmKind, Hyperparams};
use crate::dataset::Tier;
use crate::engine::{EvalMetric, RunConfig};
use crate::envs::{chain, gridworld, GridworldConfig, StartMode};
use crate::error::{Result, SeqEvalError};
use crate::mdp::MdpSpec;
use crate::tiers::TierBuildConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvConfig {
    Chain {
        name: String,
        n_states: usize,
        #[serde(default)]
        step_reward: f64,
        #[serde(default = "default_goal_reward")]
        goal_reward: f64,
        horizon: usize,
    },
    Gridworld {
        name: String,
        width: usize,
        height: usize,
        #[serde(default)]
        walls: Vec<(usize, usize)>,
        #[serde(default)]
        slip: f64,
        #[serde(default)]
        step_reward: f64,
        #[serde(default = "default_goal_reward")]
        goal_reward: f64,
        /// `[x, y]` start cell; omit for a uniform start over free cells.
        #[serde(default)]
        start: Option<(usize, usize)>,
        goal: (usize, usize),
        horizon: usize,
    },
}

fn default_goal_reward() -> f64 {
    1.0
}

impl EnvConfig {
    pub fn build(&self) -> Result<MdpSpec> {
        match self {
            EnvConfig::Chain {
                name,
                n_states,
                step_reward,
                goal_reward,
                horizon,
            } => {
                if *n_states < 2 {
                    return Err(SeqEvalError::Config("chain needs at least 2 states".into()));
                }
                Ok(chain(name, *n_states, *step_reward, *goal_reward, *horizon))
            }
            EnvConfig::Gridworld {
                name,
                width,
                height,
                walls,
                slip,
                step_reward,
                goal_reward,
                start,
                goal,
                horizon,
            } => gridworld(&GridworldConfig {
                name: name.clone(),
                width: *width,
                height: *height,
                walls: walls.clone(),
                slip: *slip,
                step_reward: *step_reward,
                goal_reward: *goal_reward,
                start: match start {
                    Some((x, y)) => StartMode::Fixed(*x, *y),
                    None => StartMode::UniformFree,
                },
                goal: *goal,
                horizon: *horizon,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetsConfig {
    /// Tier names to emit; empty means all six.
    pub tiers: Vec<String>,
    pub out_dir: String,
    #[serde(flatten)]
    pub build: TierBuildConfig,
}

impl Default for DatasetsConfig {
    fn default() -> Self {
        DatasetsConfig {
            tiers: Vec::new(),
            out_dir: "datasets".into(),
            build: TierBuildConfig::default(),
        }
    }
}

impl DatasetsConfig {
    pub fn parsed_tiers(&self) -> Result<Vec<Tier>> {
        self.tiers.iter().map(|t| Tier::from_str(t)).collect()
    }
}

pub const MODE_SEQEVAL: &str = "seqeval";
pub const MODE_MINIBATCH: &str = "minibatch";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub algorithms: Vec<String>,
    /// Tier names to run on; empty means every tier file present.
    pub datasets: Vec<String>,
    pub seeds: Vec<u64>,
    /// 0 picks the default: min(500, dataset size).
    pub t0: usize,
    pub gamma_increment: usize,
    pub k_steps: usize,
    /// 0 picks the default: dataset size / 100, at least 1.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub online_steps: usize,
    pub mode: String,
    /// Total gradient steps for minibatch mode; 0 matches the sequential
    /// accounting for the same dataset.
    pub minibatch_grad_steps: u64,
    /// Replay ratios to sweep; empty runs the configured (gamma, k) only.
    pub replay_ratios: Vec<f64>,
    pub workers: usize,
    pub out_dir: String,
    pub eval_metric: String,
    pub fqe_iterations: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            algorithms: vec!["bc".into(), "ql".into(), "cql".into(), "bcreg".into()],
            datasets: Vec::new(),
            seeds: vec![0, 1, 2, 3, 4],
            t0: 0,
            gamma_increment: 1,
            k_steps: 1,
            eval_every: 0,
            eval_episodes: 10,
            online_steps: 0,
            mode: MODE_SEQEVAL.into(),
            minibatch_grad_steps: 0,
            replay_ratios: Vec::new(),
            workers: 1,
            out_dir: "runs".into(),
            eval_metric: "rollout".into(),
            fqe_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    #[serde(default)]
    pub datasets: DatasetsConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub hyper: Hyperparams,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SeqEvalError::Config(format!("{path}: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SeqEvalError::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seeds: Option<Vec<u64>>,
    pub replay_ratios: Option<Vec<f64>>,
    pub mode: Option<String>,
    pub finetune_steps: Option<usize>,
    pub workers: Option<usize>,
    pub out_dir: Option<String>,
}

/// A fully resolved matrix cell: everything one run needs, echoed verbatim
/// into its curve file header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellConfig {
    pub algorithm: AlgorithmKind,
    pub dataset: String,
    pub mode: String,
    /// Only set when the cell comes from a replay-ratio sweep.
    pub replay_ratio: Option<f64>,
    pub minibatch_grad_steps: Option<u64>,
    pub run: RunConfig,
}

impl CellConfig {
    pub fn file_stem(&self) -> String {
        let rr = match self.replay_ratio {
            Some(rr) => format!("_rr{rr}"),
            None => String::new(),
        };
        let mode = if self.mode == MODE_SEQEVAL {
            String::new()
        } else {
            format!("_{}", self.mode)
        };
        format!(
            "{}_{}{mode}{rr}_s{}",
            self.algorithm, self.dataset, self.run.seed
        )
    }
}

/// Expands a replay ratio into `(gamma_increment, k_steps)`.
pub fn replay_ratio_increments(rr: f64) -> Result<(usize, usize)> {
    if rr <= 0.0 {
        return Err(SeqEvalError::Config(format!(
            "replay ratio {rr} must be positive"
        )));
    }
    if rr >= 1.0 {
        let k = rr.round();
        if (rr - k).abs() > 1e-9 {
            return Err(SeqEvalError::Config(format!(
                "replay ratio {rr} >= 1 must be an integer"
            )));
        }
        Ok((1, k as usize))
    } else {
        let gamma = (1.0 / rr).round();
        if (1.0 / rr - gamma).abs() > 1e-9 {
            return Err(SeqEvalError::Config(format!(
                "replay ratio {rr} < 1 must be the reciprocal of an integer"
            )));
        }
        Ok((gamma as usize, 1))
    }
}

/// The resolved plan for one `run` invocation.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub datasets_dir: PathBuf,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub cells: Vec<CellConfig>,
    /// Dataset tier names the cells reference, deduplicated and ordered.
    pub dataset_names: Vec<String>,
}

/// Resolves the matrix: algorithms x datasets x seeds (x replay ratios when
/// swept). Per-dataset values that depend on the dataset size (t0,
/// eval_every, matched minibatch steps) are filled in by the runner once
/// the files are loaded.
pub fn resolve_run_plan(cfg: &ExperimentConfig, overrides: &RunOverrides) -> Result<RunPlan> {
    let run = &cfg.run;
    let seeds = overrides.seeds.clone().unwrap_or_else(|| run.seeds.clone());
    if seeds.is_empty() {
        return Err(SeqEvalError::Config("no seeds selected".into()));
    }
    let mode = overrides.mode.clone().unwrap_or_else(|| run.mode.clone());
    if mode != MODE_SEQEVAL && mode != MODE_MINIBATCH {
        return Err(SeqEvalError::Config(format!(
            "mode must be '{MODE_SEQEVAL}' or '{MODE_MINIBATCH}', found '{mode}'"
        )));
    }
    let online_steps = overrides.finetune_steps.unwrap_or(run.online_steps);
    let workers = overrides.workers.unwrap_or(run.workers).max(1);
    let out_dir = PathBuf::from(overrides.out_dir.clone().unwrap_or_else(|| run.out_dir.clone()));

    let algorithms: Vec<AlgorithmKind> = run
        .algorithms
        .iter()
        .map(|a| AlgorithmKind::from_str(a))
        .collect::<Result<_>>()?;
    if algorithms.is_empty() {
        return Err(SeqEvalError::Config("no algorithms selected".into()));
    }
    let dataset_names: Vec<String> = if run.datasets.is_empty() {
        Tier::ALL.iter().map(|t| t.to_string()).collect()
    } else {
        for name in &run.datasets {
            Tier::from_str(name)?;
        }
        run.datasets.clone()
    };
    let eval_metric = match run.eval_metric.as_str() {
        "rollout" => EvalMetric::Rollout,
        "fqe" => EvalMetric::Fqe {
            iterations: run.fqe_iterations,
        },
        other => {
            return Err(SeqEvalError::Config(format!(
                "eval_metric must be 'rollout' or 'fqe', found '{other}'"
            )))
        }
    };

    let rr_variants: Vec<Option<f64>> = match overrides
        .replay_ratios
        .clone()
        .unwrap_or_else(|| run.replay_ratios.clone())
    {
        ratios if ratios.is_empty() => vec![None],
        ratios => ratios.into_iter().map(Some).collect(),
    };

    let mut cells = Vec::new();
    for algorithm in &algorithms {
        for dataset in &dataset_names {
            for &seed in &seeds {
                for &rr in &rr_variants {
                    let (gamma_increment, k_steps) = match rr {
                        Some(rr) => replay_ratio_increments(rr)?,
                        None => (run.gamma_increment, run.k_steps),
                    };
                    cells.push(CellConfig {
                        algorithm: *algorithm,
                        dataset: dataset.clone(),
                        mode: mode.clone(),
                        replay_ratio: rr,
                        minibatch_grad_steps: if mode == MODE_MINIBATCH {
                            Some(run.minibatch_grad_steps)
                        } else {
                            None
                        },
                        run: RunConfig {
                            algorithm: *algorithm,
                            hyper: cfg.hyper,
                            t0: run.t0,
                            gamma_increment,
                            k_steps,
                            eval_every: run.eval_every,
                            eval_episodes: run.eval_episodes,
                            online_steps,
                            seed,
                            eval_metric,
                        },
                    });
                }
            }
        }
    }
    Ok(RunPlan {
        datasets_dir: PathBuf::from(&cfg.datasets.out_dir),
        out_dir,
        workers,
        cells,
        dataset_names,
    })
}

/// Fills the size-dependent defaults once the dataset is known: t0 of 500
/// capped at the dataset size, an evaluation grid of one percent of the
/// data, and minibatch budgets matched to the sequential accounting.
pub fn finalize_for_dataset(cell: &mut CellConfig, dataset_len: usize) {
    if cell.run.t0 == 0 {
        cell.run.t0 = 500.min(dataset_len);
    }
    if cell.run.eval_every == 0 {
        cell.run.eval_every = (dataset_len / 100).max(1);
    }
    if cell.mode == MODE_MINIBATCH {
        if let Some(0) = cell.minibatch_grad_steps {
            cell.minibatch_grad_steps = Some(crate::engine::expected_offline_grad_steps(
                dataset_len,
                cell.run.t0,
                cell.run.gamma_increment,
                cell.run.k_steps,
            ));
        }
    }
}
