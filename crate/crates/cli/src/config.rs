//! The JSON run config behind `gnet train`.

use std::path::{Path, PathBuf};

use gnet_core::data::Task;
use gnet_core::esqn::{EsqnConfig, DEFAULT_TRIALS};
use gnet_core::network::Role;
use gnet_core::optim::TrainerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `trainer.rng_seed`, `esqn.reservoir.seed` and the task
    /// seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub task: Option<TaskSpec>,
    #[serde(default)]
    pub dataset: Option<DatasetRef>,
    #[serde(default)]
    pub topology: Option<Topology>,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub esqn: Option<EsqnBlock>,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Generated data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TaskSpec {
    Xor,
    Parity { n: usize },
    Sine { samples: usize },
    /// Frequency-modulated sine series, for ESQN runs.
    FmSine {
        length: usize,
        #[serde(default)]
        noise: f64,
    },
}

impl TaskSpec {
    /// The pattern task, or `None` for a series.
    pub fn pattern_task(self) -> Option<Task> {
        match self {
            TaskSpec::Xor => Some(Task::Xor),
            TaskSpec::Parity { n } => Some(Task::Parity { n }),
            TaskSpec::Sine { samples } => Some(Task::Sine { samples }),
            TaskSpec::FmSine { .. } => None,
        }
    }
}

/// A CSV file; relative paths are taken from the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    /// Fully connected consecutive layers, inputs first.
    Layers(Vec<usize>),
    Edges(EdgeTopology),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeTopology {
    pub roles: Vec<Role>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsqnBlock {
    pub reservoir: EsqnConfig,
    pub lag: usize,
    pub horizon: usize,
    /// Windows used for fitting; the rest is the held-out continuation.
    /// Defaults to 70% of the windows.
    pub train_len: Option<usize>,
    /// Independent reservoirs for the mean ± CI summary; below 2 skips it.
    pub trials: usize,
}

impl Default for EsqnBlock {
    fn default() -> Self {
        EsqnBlock { reservoir: EsqnConfig::default(), lag: 8, horizon: 1, train_len: None, trials: DEFAULT_TRIALS }
    }
}

/// File names are joined to `dir`, which is relative to the working
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub model: PathBuf,
    pub report: PathBuf,
    pub trace: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            dir: PathBuf::from("."),
            model: PathBuf::from("model.json"),
            report: PathBuf::from("report.json"),
            trace: PathBuf::from("trace.csv"),
        }
    }
}

impl OutputPaths {
    pub fn model_path(&self) -> PathBuf {
        self.dir.join(&self.model)
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(&self.report)
    }

    pub fn trace_path(&self) -> PathBuf {
        self.dir.join(&self.trace)
    }
}

impl RunConfig {
    /// Pushes the top-level seed into every consumer.
    pub fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.trainer.rng_seed = s;
            if let Some(e) = self.esqn.as_mut() {
                e.reservoir.seed = s;
            }
        }
    }

    pub fn task_seed(&self) -> u64 {
        self.seed.unwrap_or(self.trainer.rng_seed)
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> CliResult<()> {
        match (&self.task, &self.dataset) {
            (Some(_), Some(_)) => return Err(CliError::usage("config: give either `task` or `dataset`, not both")),
            (None, None) => return Err(CliError::usage("config: one of `task` or `dataset` is required")),
            _ => {}
        }
        if let Some(d) = &self.dataset {
            if d.inputs.is_empty() {
                return Err(CliError::usage("config: field `dataset.inputs` must name at least one column"));
            }
        }
        if let Some(Topology::Layers(sizes)) = &self.topology {
            if sizes.len() < 2 || sizes.contains(&0) {
                return Err(CliError::usage(format!(
                    "config: field `topology.layers` needs at least two positive sizes, got {sizes:?}"
                )));
            }
        }
        self.trainer.validate().map_err(|e| CliError::usage(format!("config: field `trainer`: {e}")))?;
        match &self.esqn {
            Some(block) => {
                block.reservoir.validate().map_err(|e| CliError::usage(format!("config: field `esqn.reservoir`: {e}")))?;
                if block.lag == 0 || block.horizon == 0 {
                    return Err(CliError::usage("config: `esqn.lag` and `esqn.horizon` must be >= 1"));
                }
                if self.topology.is_some() {
                    return Err(CliError::usage("config: `topology` is not used by ESQN runs, remove it"));
                }
                match (&self.task, &self.dataset) {
                    (Some(TaskSpec::FmSine { .. }), _) => {}
                    (None, Some(d)) if d.inputs.len() == 1 && d.targets.is_empty() => {}
                    _ => {
                        return Err(CliError::usage(
                            "config: ESQN runs need a series: task `fm_sine` or a dataset with one input column and no targets",
                        ))
                    }
                }
            }
            None => {
                if self.topology.is_none() {
                    return Err(CliError::usage("config: field `topology` is required"));
                }
                if let Some(TaskSpec::FmSine { .. }) = self.task {
                    return Err(CliError::usage("config: task `fm_sine` is a series; add an `esqn` block"));
                }
                if let Some(d) = &self.dataset {
                    if d.targets.is_empty() {
                        return Err(CliError::usage("config: field `dataset.targets` must name at least one column"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Resolves a data path against the directory of the config file.
pub fn resolve(base: Option<&Path>, path: &Path) -> PathBuf {
    match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path.to_path_buf(),
    }
}
