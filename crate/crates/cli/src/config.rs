//! TOML run configuration with strict parsing and range validation.
//!
//! Every table rejects unknown keys, so a misspelled setting fails before any
//! compute starts. Errors carry the 1-based line of the offending key when it
//! can be located in the source text.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use questa_core::ablation::AblationConfig;
use questa_core::analysis::AnalysisConfig;
use questa_core::circuit::{GateVocabulary, ReuploadTemplate};
use questa_core::evolution::{EvolutionConfig, SearchSpace};
use questa_core::tasks::{
    build_heisenberg_field, build_tfim, gaussian_blobs, load_csv_dataset, Boundary, ClassificationTask, Dataset,
    DatasetSchema, Hamiltonian, RepresentationTask, Task,
};
use questa_core::training::OptimizerConfig;
use serde::{Deserialize, Serialize};

/// A configuration problem, optionally pinned to a line of the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }

    fn at(mut self, line: Option<usize>) -> Self {
        self.line = self.line.or(line);
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// The optimization target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaskSpec {
    Tfim {
        #[serde(default)]
        boundary: Boundary,
    },
    Heisenberg {
        #[serde(default)]
        boundary: Boundary,
        #[serde(default = "unit")]
        field: f64,
    },
    /// A Pauli-sum Hamiltonian read from a JSON file.
    Hamiltonian { path: PathBuf },
    /// Fit a 1D signal: from a CSV file when `dataset` is set, otherwise the
    /// synthetic sin(2πx) + 0.5·sin(6πx) on `points` samples.
    Representation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset: Option<PathBuf>,
        #[serde(default = "default_x")]
        x_column: String,
        #[serde(default = "default_y")]
        y_column: String,
        #[serde(default = "default_points")]
        points: usize,
    },
    /// Classify rows: from a CSV file when `dataset` is set, otherwise two
    /// synthetic Gaussian blobs.
    Classification {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset: Option<PathBuf>,
        #[serde(default = "default_label")]
        label_column: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        classes: Option<usize>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default)]
        data_seed: u64,
    },
}

fn unit() -> f64 {
    1.0
}
fn default_x() -> String {
    "x".into()
}
fn default_y() -> String {
    "y".into()
}
fn default_points() -> usize {
    64
}
fn default_label() -> String {
    "label".into()
}
fn default_samples() -> usize {
    200
}
fn default_features() -> usize {
    4
}
fn default_separation() -> f64 {
    3.0
}

/// Circuit search space. `features` defaults to the qubit count for
/// representation tasks (the coordinate is encoded on every wire), to the
/// feature dimension for classification, and to 0 for VQE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub qubits: usize,
    pub layers: usize,
    #[serde(default)]
    pub vocabulary: GateVocabulary,
    #[serde(default = "one")]
    pub reuploads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    #[serde(default = "pi")]
    pub scale: f64,
    #[serde(default)]
    pub tie_parameters: bool,
}

fn one() -> usize {
    1
}
fn pi() -> f64 {
    PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub task: TaskSpec,
    pub circuit: CircuitSpec,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub training: OptimizerConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
}

/// 1-based line of `key` inside `[table]` (top level when `table` is empty).
pub fn locate(text: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[') {
            current = header.trim_end_matches(']').trim().to_owned();
            if key.is_empty() && current == table {
                return Some(i + 1);
            }
            continue;
        }
        if current != table {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim().trim_matches('"') == key {
                return Some(i + 1);
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses and validates a config document. `base` resolves relative paths.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_owned(),
        })?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        cfg.validate().map_err(|(table, key, e)| e.at(locate(text, table, key)))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.task {
            TaskSpec::Hamiltonian { path } => fix(path),
            TaskSpec::Representation { dataset: Some(p), .. } | TaskSpec::Classification { dataset: Some(p), .. } => {
                fix(p)
            }
            _ => {}
        }
    }

    /// Range checks; errors name the table and key they concern.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, ConfigError)> {
        let fail = |table, key, msg: String| Err((table, key, ConfigError::new(msg)));
        let c = &self.circuit;
        if !(1..=12).contains(&c.qubits) {
            return fail("circuit", "qubits", format!("circuit.qubits must lie in 1..=12, got {}", c.qubits));
        }
        if c.layers == 0 {
            return fail("circuit", "layers", "circuit.layers must be at least 1".into());
        }
        if c.reuploads == 0 {
            return fail("circuit", "reuploads", "circuit.reuploads must be at least 1".into());
        }
        if !c.scale.is_finite() {
            return fail("circuit", "scale", "circuit.scale must be finite".into());
        }
        if let Some(f) = c.features {
            if f > c.qubits {
                return fail(
                    "circuit",
                    "features",
                    format!("circuit.features ({f}) exceeds circuit.qubits ({})", c.qubits),
                );
            }
        }
        match &self.task {
            TaskSpec::Tfim { .. } | TaskSpec::Heisenberg { .. } if c.qubits < 2 => {
                return fail("circuit", "qubits", "spin-chain tasks need circuit.qubits >= 2".into());
            }
            TaskSpec::Heisenberg { field, .. } if !field.is_finite() => {
                return fail("task", "field", "task.field must be finite".into());
            }
            TaskSpec::Representation { points, dataset: None, .. } if *points < 2 => {
                return fail("task", "points", "task.points must be at least 2".into());
            }
            TaskSpec::Classification {
                samples,
                features,
                separation,
                dataset: None,
                ..
            } => {
                if *samples < 2 {
                    return fail("task", "samples", "task.samples must be at least 2".into());
                }
                if *features == 0 || *features > c.qubits {
                    return fail(
                        "task",
                        "features",
                        format!("task.features must lie in 1..=circuit.qubits ({}), got {features}", c.qubits),
                    );
                }
                if !separation.is_finite() {
                    return fail("task", "separation", "task.separation must be finite".into());
                }
            }
            _ => {}
        }
        let e = &self.evolution;
        if e.top_k > e.population {
            return fail(
                "evolution",
                "top_k",
                format!(
                    "evolution.top_k ({}) must not exceed evolution.population ({})",
                    e.top_k, e.population
                ),
            );
        }
        if let Err(err) = e.validate() {
            return fail("evolution", "", err.to_string());
        }
        if let Err(err) = self.training.validate() {
            return fail("training", "", err.to_string());
        }
        if self.analysis.samples < 100 {
            return fail("analysis", "samples", "analysis.samples must be at least 100".into());
        }
        if self.analysis.bins < 10 {
            return fail("analysis", "bins", "analysis.bins must be at least 10".into());
        }
        if let Err(err) = self.ablation.validate() {
            return fail("ablation", "", err.to_string());
        }
        Ok(())
    }

    /// Builds the task, reading any referenced files.
    pub fn build_task(&self) -> Result<Task, String> {
        let n = self.circuit.qubits;
        match &self.task {
            TaskSpec::Tfim { boundary } => build_tfim(n, *boundary).map(Task::Vqe).map_err(|e| e.to_string()),
            TaskSpec::Heisenberg { boundary, field } => build_heisenberg_field(n, *boundary, *field)
                .map(Task::Vqe)
                .map_err(|e| e.to_string()),
            TaskSpec::Hamiltonian { path } => {
                let h = Hamiltonian::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
                if h.qubits() != n {
                    return Err(format!(
                        "{}: Hamiltonian acts on {} qubits but circuit.qubits is {n}",
                        path.display(),
                        h.qubits()
                    ));
                }
                Ok(Task::Vqe(h))
            }
            TaskSpec::Representation {
                dataset,
                x_column,
                y_column,
                points,
            } => match dataset {
                None => RepresentationTask::two_tone(*points)
                    .map(Task::Representation)
                    .map_err(|e| e.to_string()),
                Some(path) => {
                    let schema = DatasetSchema::Representation {
                        x_column: x_column.clone(),
                        y_column: y_column.clone(),
                    };
                    match load_csv_dataset(path, &schema).map_err(|e| format!("{}: {e}", path.display()))? {
                        Dataset::Representation(t) => Ok(Task::Representation(t)),
                        Dataset::Classification(_) => unreachable!("schema selects the dataset kind"),
                    }
                }
            },
            TaskSpec::Classification {
                dataset,
                label_column,
                classes,
                samples,
                features,
                separation,
                data_seed,
            } => {
                let task = match dataset {
                    None => {
                        let (raw, labels) = gaussian_blobs(*data_seed, *samples, *features, *separation);
                        ClassificationTask::new(raw, labels, 2).map_err(|e| e.to_string())?
                    }
                    Some(path) => {
                        let schema = DatasetSchema::Classification {
                            label_column: label_column.clone(),
                            classes: *classes,
                        };
                        match load_csv_dataset(path, &schema).map_err(|e| format!("{}: {e}", path.display()))? {
                            Dataset::Classification(t) => t,
                            Dataset::Representation(_) => unreachable!("schema selects the dataset kind"),
                        }
                    }
                };
                if task.feature_dim() > n || task.classes() > n {
                    return Err(format!(
                        "dataset has {} features and {} classes; circuit.qubits ({n}) must cover both",
                        task.feature_dim(),
                        task.classes()
                    ));
                }
                Ok(Task::Classification(task))
            }
        }
    }

    /// The circuit search space for `task`.
    pub fn search_space(&self, task: &Task) -> SearchSpace {
        let c = &self.circuit;
        let features = c.features.unwrap_or(match task {
            Task::Vqe(_) => 0,
            Task::Representation(_) => c.qubits,
            Task::Classification(t) => t.feature_dim(),
        });
        SearchSpace {
            qubits: c.qubits,
            layers: c.layers,
            vocab: c.vocabulary.clone(),
            template: ReuploadTemplate {
                reuploads: c.reuploads,
                features,
                scale: c.scale,
                tie_parameters: c.tie_parameters,
            },
        }
    }

    /// Evolution settings with the run seed applied.
    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            seed: self.seed,
            ..self.evolution.clone()
        }
    }
}
