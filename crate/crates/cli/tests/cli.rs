use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use questa_cli::{AnalysisReport, CircuitFile, Metric, RunConfig, RunReport};
use questa_core::ablation::AblationOutcome;
use questa_core::GenerationRecord;
use tempfile::TempDir;

fn questa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_questa"))
        .args(args)
        .env_remove("QUESTA_THREADS")
        .output()
        .expect("binary runs")
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL_VQE: &str = r#"
seed = 3

[task]
kind = "tfim"

[circuit]
qubits = 3
layers = 4

[evolution]
generations = 3
population = 4
top_k = 3

[training]
max_steps = 15

[analysis]
samples = 200
bins = 20
"#;

fn run_ok(config: &Path, out: &Path, extra: &[&str]) -> RunReport {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = questa(&args);
    assert!(o.status.success(), "run failed: {}", stderr(&o));
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_consistent_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "vqe.toml", SMALL_VQE);
    let out = dir.path().join("out");
    let report = run_ok(&cfg, &out, &[]);

    assert_eq!(report.generations, 3);
    assert_eq!(report.config.seed, 3);
    assert!(report.version.starts_with("questa-cli "));
    let Metric::Energy(e) = report.best.metric else {
        panic!("expected an energy metric")
    };
    assert!(e.gap >= -1e-9);
    assert_eq!(report.best.task_fitness, Some(-e.estimate));

    // history.jsonl round-trips to the report's history
    let lines: Vec<GenerationRecord> = fs::read_to_string(out.join("history.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines, report.history);

    // history.csv carries the summary columns losslessly
    let mut rdr = csv::Reader::from_path(out.join("history.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["generation", "best_proxy", "best_task_fitness", "mean_task_fitness"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (row, rec) in rows.iter().zip(&report.history) {
        assert_eq!(row[0].parse::<usize>().unwrap(), rec.generation);
        assert_eq!(row[1].parse::<f64>().ok(), rec.best_proxy);
        assert_eq!(row[2].parse::<f64>().unwrap(), rec.best_task_fitness);
        assert_eq!(row[3].parse::<f64>().ok(), rec.mean_task_fitness);
    }

    let best = CircuitFile::load(&out.join("best_circuit.json")).unwrap();
    assert_eq!(best, report.best.circuit);
    assert!(best.params.is_some());

    // the config echo is itself a valid config
    let echo = RunConfig::parse(&report.config.to_toml(), None).unwrap();
    assert_eq!(echo, report.config);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "vqe.toml", SMALL_VQE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = run_ok(&cfg, &a, &["--threads", "1"]);
    let o = Command::new(env!("CARGO_BIN_EXE_questa"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .env("QUESTA_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let rb: RunReport = serde_json::from_str(&fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
    assert_eq!(
        fs::read(a.join("history.jsonl")).unwrap(),
        fs::read(b.join("history.jsonl")).unwrap()
    );
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());
    assert_eq!(ra.best, rb.best);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "vqe.toml", SMALL_VQE);
    let report = run_ok(&cfg, &dir.path().join("o"), &["--seed", "11"]);
    assert_eq!(report.config.seed, 11);
}

#[test]
fn representation_and_classification_runs() {
    let dir = TempDir::new().unwrap();
    let rep = write_config(
        dir.path(),
        "rep.toml",
        r#"
[task]
kind = "representation"
points = 16

[circuit]
qubits = 2
layers = 3
reuploads = 2

[evolution]
generations = 2
population = 3
top_k = 2

[training]
max_steps = 10
gradient = "adjoint"

[analysis]
samples = 200
bins = 20
"#,
    );
    let report = run_ok(&rep, &dir.path().join("rep"), &[]);
    let Metric::Representation { mse, .. } = report.best.metric else {
        panic!("expected an MSE metric")
    };
    assert!(mse.is_finite() && mse >= 0.0);
    assert!(report.best.circuit.params.unwrap().affine.is_some());

    let csv_path = dir.path().join("blobs.csv");
    fs::write(
        &csv_path,
        "a,b,label\n0.1,0.2,0\n0.3,0.1,0\n0.2,0.0,0\n0.9,0.8,1\n0.8,1.0,1\n1.0,0.9,1\n",
    )
    .unwrap();
    let cls = write_config(
        dir.path(),
        "cls.toml",
        r#"
[task]
kind = "classification"
dataset = "blobs.csv"

[circuit]
qubits = 2
layers = 3

[evolution]
generations = 2
population = 3
top_k = 2

[training]
max_steps = 10

[analysis]
samples = 200
bins = 20
"#,
    );
    let report = run_ok(&cls, &dir.path().join("cls"), &[]);
    let Metric::Classification { accuracy, cross_entropy } = report.best.metric else {
        panic!("expected a classification metric")
    };
    assert!((0.0..=1.0).contains(&accuracy));
    assert!(cross_entropy > 0.0);
}

#[test]
fn hamiltonian_file_task() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("h.json"),
        r#"{"n": 2, "terms": [{"coeff": -1.0, "paulis": "ZZ"}, {"coeff": 0.5, "paulis": "XI"}]}"#,
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "h.toml",
        r#"
[task]
kind = "hamiltonian"
path = "h.json"

[circuit]
qubits = 2
layers = 3

[evolution]
generations = 2
population = 3
top_k = 3

[training]
max_steps = 30

[analysis]
samples = 200
bins = 20
"#,
    );
    let report = run_ok(&cfg, &dir.path().join("o"), &[]);
    let Metric::Energy(e) = report.best.metric else {
        panic!("expected an energy metric")
    };
    // −ZZ + ½X₀ has spectrum ±√(1 + ¼)
    assert!((e.reference + 1.25f64.sqrt()).abs() < 1e-12);
    assert!(e.estimate >= e.reference - 1e-9);
}

#[test]
fn analyze_matches_the_golden_report() {
    let dir = TempDir::new().unwrap();
    let circuit = repo_path("configs/circuits/example.json");
    let o = questa(&["analyze", circuit.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("path_count: 13"));

    let got: AnalysisReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("example.analysis.json")).unwrap()).unwrap();
    let golden: AnalysisReport =
        serde_json::from_str(&fs::read_to_string(repo_path("crates/cli/tests/golden/example.analysis.json")).unwrap())
            .unwrap();
    assert_eq!(got, golden);

    let mut rdr = csv::Reader::from_path(dir.path().join("example.histogram.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["bin_lo", "bin_hi", "empirical", "haar"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), golden.expressivity.bins);
    for (row, (p, q)) in rows
        .iter()
        .zip(golden.expressivity.histogram.iter().zip(&golden.expressivity.reference))
    {
        assert_eq!((row[2], row[3]), (*p, *q));
    }
    let total: f64 = rows.iter().map(|r| r[2]).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn ablate_writes_curves_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "abl.toml",
        r#"
[task]
kind = "classification"
samples = 20
features = 2

[circuit]
qubits = 2
layers = 3

[training]
max_steps = 8
gradient = "adjoint"

[analysis]
samples = 200
bins = 20

[ablation]
candidates = 6
selected = 2
seeds = [1, 2]
"#,
    );
    let out = dir.path().join("abl");
    let o = questa(&["ablate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let outcome: AblationOutcome = serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    assert_eq!(outcome.runs.len(), 6);
    assert_eq!(fs::read_dir(out.join("curves")).unwrap().count(), 6);
    for run in &outcome.runs {
        let path = out.join("curves").join(format!("{}_seed{}.csv", run.case.label(), run.seed));
        let losses: Vec<f64> = csv::Reader::from_path(path)
            .unwrap()
            .records()
            .map(|r| r.unwrap()[1].parse().unwrap())
            .collect();
        assert_eq!(losses, run.curve);
    }
    let summary = fs::read_to_string(out.join("ablation_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn config_errors_exit_with_code_2_and_a_line() {
    let dir = TempDir::new().unwrap();
    let typo = SMALL_VQE.replace("top_k = 3", "topk = 3");
    let cfg = write_config(dir.path(), "typo.toml", &typo);
    let o = questa(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let line = typo.lines().position(|l| l.starts_with("topk")).unwrap() + 1;
    assert!(stderr(&o).contains(&format!("line {line}")), "{}", stderr(&o));
    assert!(!dir.path().join("o").exists(), "no output before validation");

    let bad = SMALL_VQE.replace("top_k = 3", "top_k = 9");
    let cfg = write_config(dir.path(), "range.toml", &bad);
    let o = questa(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("top_k"));

    let o = questa(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(dir.path().join("c.json"), r#"{"genome": [[7]]}"#).unwrap();
    let o = questa(&["analyze", dir.path().join("c.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_code_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "vqe.toml", SMALL_VQE);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = questa(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    for name in ["tfim4", "heisenberg4", "representation", "classification", "ablation"] {
        let path = repo_path(&format!("configs/{name}.toml"));
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(RunConfig::parse(&cfg.to_toml(), None).unwrap(), cfg, "{name}");
        cfg.build_task().unwrap();
    }
}

#[test]
fn every_misspelled_key_is_rejected() {
    let text = fs::read_to_string(repo_path("configs/tfim4.toml")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut edited = lines.clone();
        let typo = format!("{}x ={}", key.trim_end(), value);
        edited[i] = &typo;
        let err = RunConfig::parse(&edited.join("\n"), None).expect_err(&typo);
        // a lost required key is reported at its table header
        let header = lines[..i].iter().rposition(|l| l.starts_with('[')).map(|h| h + 1);
        assert!(err.line == Some(i + 1) || err.line == header, "{typo}: {err}");
    }
}
