//! Config-driven runner for the questa search engine: `run`, `analyze` and
//! `ablate`, with deterministic, plot-ready outputs.

pub mod circuit_file;
pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use questa_core::ablation::{run_ablation, AblationOutcome};
use questa_core::analysis::{build_dag, expressivity, AnalysisConfig, DagReport, ExpressivityReport};
use questa_core::evolution::{run_quest_a_with, GenerationRecord, Individual};
use questa_core::serde_float;
use questa_core::tasks::{exact_ground_energy, EnergyEstimate, Task};
use questa_core::training::{classification_accuracy, loss, ParameterVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use circuit_file::CircuitFile;
pub use config::{ConfigError, RunConfig};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Failure classes with stable process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable input: exit code 2.
    #[error("{0}")]
    Config(String),
    /// Failure after validation succeeded: exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Loads a config and applies overrides. Returns the config and output dir.
pub fn prepare(config_path: &Path, overrides: &Overrides) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(t) = overrides.threads {
        cfg.threads = t;
    }
    let out = overrides
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("questa-out"));
    Ok((cfg, out))
}

/// Runs `f` on a pool with `threads` workers (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Task-specific quality of the best circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Metric {
    Energy(EnergyEstimate),
    Representation {
        mse: f64,
        #[serde(with = "serde_float")]
        fitness: f64,
    },
    Classification { cross_entropy: f64, accuracy: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub circuit: CircuitFile,
    pub metric: Metric,
    #[serde(with = "serde_float::option")]
    pub task_fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    /// Effective configuration; runtime-only settings (threads, output
    /// directory) are left out so reports compare equal across machines.
    pub config: RunConfig,
    pub best: BestSummary,
    pub generations: usize,
    pub history: Vec<GenerationRecord>,
    pub wall_time_secs: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_error(path))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Streams history.jsonl and history.csv as generations complete, so a
/// failed run still leaves its partial history behind.
struct HistoryWriter {
    jsonl: BufWriter<File>,
    csv: csv::Writer<File>,
    error: Option<CliError>,
}

impl HistoryWriter {
    fn create(out: &Path) -> Result<Self, CliError> {
        let jp = out.join("history.jsonl");
        let cp = out.join("history.csv");
        let jsonl = BufWriter::new(File::create(&jp).map_err(io_error(&jp))?);
        let mut csv = csv::Writer::from_path(&cp).map_err(|e| CliError::Runtime(format!("{}: {e}", cp.display())))?;
        csv.write_record(["generation", "best_proxy", "best_task_fitness", "mean_task_fitness"])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Self { jsonl, csv, error: None })
    }

    fn push(&mut self, rec: &GenerationRecord) {
        if self.error.is_some() {
            return;
        }
        let result = (|| -> Result<(), Box<dyn std::error::Error>> {
            serde_json::to_writer(&mut self.jsonl, rec)?;
            self.jsonl.write_all(b"\n")?;
            self.jsonl.flush()?;
            self.csv.write_record([
                rec.generation.to_string(),
                fmt_opt(rec.best_proxy),
                rec.best_task_fitness.to_string(),
                fmt_opt(rec.mean_task_fitness),
            ])?;
            self.csv.flush()?;
            Ok(())
        })();
        if let Err(e) = result {
            self.error = Some(CliError::Runtime(format!("writing history: {e}")));
        }
    }
}

fn metric_for(task: &Task, circuit: &questa_core::CompiledCircuit, params: &ParameterVector) -> Result<Metric, CliError> {
    let runtime = |e: questa_core::training::TrainError| CliError::Runtime(e.to_string());
    let value = loss(circuit, params, task).map_err(runtime)?;
    Ok(match task {
        Task::Vqe(h) => {
            let reference = exact_ground_energy(h).map_err(|e| CliError::Runtime(e.to_string()))?;
            Metric::Energy(EnergyEstimate::new(value, reference))
        }
        Task::Representation(_) => Metric::Representation {
            mse: value,
            fitness: task.fitness(value),
        },
        Task::Classification(_) => Metric::Classification {
            cross_entropy: value,
            accuracy: classification_accuracy(circuit, params, task)
                .map_err(runtime)?
                .unwrap_or(f64::NAN),
        },
    })
}

/// Executes the search and writes report.json, history.jsonl, history.csv
/// and best_circuit.json into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let task = cfg.build_task().map_err(CliError::Config)?;
    let space = cfg.search_space(&task);
    let evo = cfg.evolution();
    fs::create_dir_all(out).map_err(io_error(out))?;
    let mut history = HistoryWriter::create(out)?;

    let outcome = with_threads(cfg.threads, || {
        run_quest_a_with(&task, &space, &evo, &cfg.analysis, &cfg.training, |rec| history.push(rec))
    })?
    .map_err(|e| CliError::Runtime(format!("search failed: {e}")))?;
    if let Some(e) = history.error.take() {
        return Err(e);
    }

    let Individual {
        genome,
        params,
        task_fitness,
        ..
    } = outcome.best;
    let params = params.unwrap_or_default();
    let mut circuit = CircuitFile::new(genome, space.vocab.clone(), &space.template);
    let compiled = circuit.compile().map_err(|e| CliError::Runtime(e.to_string()))?;
    let metric = metric_for(&task, &compiled, &params)?;
    circuit.params = Some(params);
    write_json(&out.join("best_circuit.json"), &circuit)?;

    let mut echo = cfg.clone();
    echo.threads = 0;
    echo.out_dir = None;
    let report = RunReport {
        version: VERSION.to_owned(),
        config: echo,
        best: BestSummary {
            circuit,
            metric,
            task_fitness,
        },
        generations: outcome.history.len(),
        history: outcome.history,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub qubits: usize,
    pub params: usize,
    pub cnots: usize,
    pub dag: DagReport,
    pub expressivity: ExpressivityReport,
    pub seed: u64,
}

/// Scores a circuit file and writes `<stem>.analysis.json` and
/// `<stem>.histogram.csv` into `out` (default: next to the circuit file).
/// Returns the report and the histogram path.
pub fn analyze(
    circuit_path: &Path,
    out: Option<&Path>,
    analysis: &AnalysisConfig,
    seed: u64,
) -> Result<(AnalysisReport, PathBuf), CliError> {
    let file = CircuitFile::load(circuit_path).map_err(CliError::Config)?;
    let circuit = file.compile().map_err(|e| CliError::Config(e.to_string()))?;
    let dag = build_dag(&circuit);
    let expr = expressivity(&circuit, analysis.samples, analysis.bins, seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let report = AnalysisReport {
        qubits: circuit.qubits(),
        params: circuit.num_params(),
        cnots: circuit.cnot_count(),
        dag,
        expressivity: expr,
        seed,
    };
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => circuit_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let stem = circuit_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "circuit".into());
    write_json(&dir.join(format!("{stem}.analysis.json")), &report)?;
    let hist_path = dir.join(format!("{stem}.histogram.csv"));
    let mut w = csv::Writer::from_path(&hist_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    let bins = report.expressivity.bins;
    let rows = (|| -> Result<(), csv::Error> {
        w.write_record(["bin_lo", "bin_hi", "empirical", "haar"])?;
        for (b, (p, q)) in report
            .expressivity
            .histogram
            .iter()
            .zip(&report.expressivity.reference)
            .enumerate()
        {
            w.write_record([
                (b as f64 / bins as f64).to_string(),
                ((b + 1) as f64 / bins as f64).to_string(),
                p.to_string(),
                q.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    rows.map_err(|e| CliError::Runtime(format!("{}: {e}", hist_path.display())))?;
    Ok((report, hist_path))
}

/// Runs the three filtering cases and writes one loss-curve CSV per case and
/// seed under `out/curves`, plus ablation_summary.csv and ablation.json.
pub fn ablate(cfg: &RunConfig, out: &Path) -> Result<AblationOutcome, CliError> {
    let task = cfg.build_task().map_err(CliError::Config)?;
    let space = cfg.search_space(&task);
    let evo = cfg.evolution();
    let outcome = with_threads(cfg.threads, || {
        run_ablation(&task, &space, &evo, &cfg.analysis, &cfg.training, &cfg.ablation)
    })?
    .map_err(|e| CliError::Runtime(format!("ablation failed: {e}")))?;

    let curves = out.join("curves");
    fs::create_dir_all(&curves).map_err(io_error(&curves))?;
    let csv_err = |p: &Path| {
        let p = p.display().to_string();
        move |e: csv::Error| CliError::Runtime(format!("{p}: {e}"))
    };
    for r in &outcome.runs {
        let path = curves.join(format!("{}_seed{}.csv", r.case.label(), r.seed));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["epoch", "loss"]).map_err(csv_err(&path))?;
        for (i, l) in r.curve.iter().enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string()]).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_error(&path))?;
    }
    let path = out.join("ablation_summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["case", "median_epochs_to_target", "reached", "runs"])
        .map_err(csv_err(&path))?;
    for s in &outcome.summary {
        w.write_record([
            s.case.label().to_owned(),
            s.median_epochs.to_string(),
            s.reached.to_string(),
            s.runs.to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_error(&path))?;
    write_json(&out.join("ablation.json"), &outcome)?;
    Ok(outcome)
}
