//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Runs against the shipped configs in `configs/` through the release-shaped
//! `questa` binary; artifacts land under the cargo target tmpdir.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use questa_cli::{Metric, RunConfig, RunReport};
use questa_core::ablation::{AblationCase, AblationOutcome};
use questa_core::analysis::{build_dag, expressivity, expressivity_from_fidelities};
use questa_core::circuit::{build_reupload, decode, random_genome, CompiledCircuit, GateVocabulary, ReuploadTemplate};
use questa_core::seed;
use questa_core::statevector::{full_unitary, Gate, PauliString, StateVector};
use questa_core::tasks::{
    build_heisenberg_field, build_tfim, exact_ground_energy, gaussian_blobs, Boundary, ClassificationTask,
    Hamiltonian, RepresentationTask, Task,
};
use questa_core::training::{gradient, loss, reuse, Affine, ParameterVector, ReuseConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn work_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).expect("create acceptance work dir");
    dir
}

fn questa(args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_questa"))
        .args(args)
        .env_remove("QUESTA_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn run_config(config: &str, seed: u64, out: &Path, threads: Option<usize>) -> Result<RunReport, String> {
    let mut args = vec![
        "run".to_owned(),
        "--config".to_owned(),
        repo(config).display().to_string(),
        "--seed".to_owned(),
        seed.to_string(),
        "--out".to_owned(),
        out.display().to_string(),
    ];
    if let Some(t) = threads {
        args.extend(["--threads".to_owned(), t.to_string()]);
    }
    questa(&args)?;
    let text = fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn random_gates(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> Vec<(Gate, Vec<usize>)> {
    (0..depth)
        .map(|_| {
            let w = rng.random_range(0..n);
            let theta = rng.random_range(-2.0 * PI..2.0 * PI);
            match rng.random_range(0..5) {
                0 => (Gate::Identity, vec![w]),
                1 => (Gate::Rx(theta), vec![w]),
                2 => (Gate::Ry(theta), vec![w]),
                3 => (Gate::Rz(theta), vec![w]),
                _ if n == 1 => (Gate::Rx(theta), vec![w]),
                _ => (Gate::Cnot, vec![w, (w + rng.random_range(1..n)) % n]),
            }
        })
        .collect()
}

fn simulate(n: usize, gates: &[(Gate, Vec<usize>)]) -> StateVector {
    let mut psi = StateVector::zero(n);
    for (g, w) in gates {
        psi.apply_gate_mut(*g, w).expect("valid gate");
    }
    psi
}

fn random_pauli_sum(rng: &mut ChaCha8Rng, n: usize) -> Hamiltonian {
    let terms = (0..rng.random_range(1..6))
        .map(|_| {
            let letters: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
            PauliString::parse(rng.random_range(-2.0..2.0), &letters).expect("valid letters")
        })
        .collect();
    Hamiltonian::new(n, terms).expect("valid terms")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::stream(1, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let depth = rng.random_range(0..=8);
        let gates = random_gates(&mut rng, n, depth);
        let psi = simulate(n, &gates);
        let u = full_unitary(n, gates.iter().map(|(g, w)| (*g, w.as_slice()))).expect("small register");
        for (i, a) in psi.amplitudes().iter().enumerate() {
            worst = worst.max((a - u[(i, 0)]).norm());
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-10 && t < Duration::from_secs(10),
        format!("200 circuits, max amplitude diff {worst:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::stream(2, &[]);
    let vocab = GateVocabulary::default();
    let mut worst: f64 = 0.0;
    let mut kinds = [0usize; 3];
    for trial in 0..100u64 {
        let n = rng.random_range(1..=3);
        let genome = random_genome(seed::derive(2, &[trial]), n, rng.random_range(1..=5), &vocab).expect("genome");
        let kind = if n == 1 { rng.random_range(0..2) } else { rng.random_range(0..3) };
        kinds[kind] += 1;
        let (task, features) = match kind {
            0 => (Task::Vqe(random_pauli_sum(&mut rng, n)), 0),
            1 => {
                let xs: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
                let ys = xs.iter().map(|x| (2.0 * PI * x).sin() + 0.5 * (6.0 * PI * x).sin()).collect();
                (Task::Representation(RepresentationTask::new(xs, ys).expect("data")), n)
            }
            _ => {
                let (x, y) = gaussian_blobs(trial, 8, n, 2.0);
                (Task::Classification(ClassificationTask::new(x, y, 2).expect("data")), n)
            }
        };
        let c = build_reupload(&genome, &vocab, &ReuploadTemplate::new(1, features)).expect("circuit");
        let values: Vec<f64> = (0..c.num_params()).map(|_| rng.random_range(-PI..PI)).collect();
        let p = if task.uses_affine() {
            ParameterVector::with_affine(values, Affine { w: 1.3, b: -0.2 })
        } else {
            ParameterVector::new(values)
        };
        let g = gradient(&c, &p, &task).expect("gradient");
        let h = 1e-5;
        for (k, gk) in g.iter().enumerate() {
            let (mut up, mut down) = (p.clone(), p.clone());
            up.values[k] += h;
            down.values[k] -= h;
            let fd = (loss(&c, &up, &task).expect("loss") - loss(&c, &down, &task).expect("loss")) / (2.0 * h);
            worst = worst.max((gk - fd).abs());
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-6 && t < Duration::from_secs(60),
        format!(
            "100 triples (vqe {}, representation {}, classification {}), max |shift - fd| {worst:.2e}, {:.2}s",
            kinds[0],
            kinds[1],
            kinds[2],
            t.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for n in 1..=4u32 {
        let dim = 2f64.powi(n as i32);
        let mut rng = seed::stream(3, &[n as u64]);
        // inverse CDF of the Haar fidelity law: F = 1 − (1 − u)^(1/(N−1))
        let fids: Vec<f64> = (0..5000)
            .map(|_| 1.0 - (1.0 - rng.random::<f64>()).powf(1.0 / (dim - 1.0)))
            .collect();
        let e = expressivity_from_fidelities(&fids, 75, dim).expect("valid").expressivity;
        pass &= e.abs() < 0.01;
        details.push(format!("haar n={n}: {e:.4}"));
        if n >= 2 {
            let idle = CompiledCircuit::from_ops(n as usize, Vec::new()).expect("empty circuit");
            let e0 = expressivity(&idle, 5000, 75, 3).expect("valid").expressivity;
            pass &= e0 < -2.0;
            details.push(format!("idle n={n}: {e0:.2}"));
        }
    }
    let t = start.elapsed();
    outcome(
        pass && t < Duration::from_secs(30),
        format!("{}; {:.2}s", details.join(", "), t.as_secs_f64()),
    )
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let vocab = GateVocabulary::default();
    let (mut log_p, mut cnots) = (Vec::new(), Vec::new());
    for s in 0..500 {
        let c = decode(&random_genome(seed::derive(4, &[s]), 8, 12, &vocab).expect("genome"), &vocab).expect("decode");
        log_p.push(build_dag(&c).log_path_count);
        cnots.push(c.cnot_count() as f64);
    }
    let rho = spearman(&log_p, &cnots);
    let t = start.elapsed();
    outcome(
        rho > 0.5 && t < Duration::from_secs(30),
        format!("Spearman rho {rho:.3} over 500 genomes, {:.2}s", t.as_secs_f64()),
    )
}

struct VqeRuns {
    tfim: Vec<Result<RunReport, String>>,
    heis: Vec<Result<RunReport, String>>,
    dir: PathBuf,
}

fn vqe_gap(r: &Result<RunReport, String>) -> Option<f64> {
    match r {
        Ok(RunReport {
            best: questa_cli::BestSummary {
                metric: Metric::Energy(e), ..
            },
            ..
        }) => Some(e.gap.abs()),
        _ => None,
    }
}

fn criterion_5(dir: &Path) -> (Outcome, VqeRuns) {
    let start = Instant::now();
    let dir = dir.join("vqe");
    let tfim: Vec<_> = (1..=5)
        .map(|s| run_config("configs/tfim4.toml", s, &dir.join(format!("tfim4_seed{s}")), None))
        .collect();
    let heis: Vec<_> = (1..=5)
        .map(|s| run_config("configs/heisenberg4.toml", s, &dir.join(format!("heisenberg4_seed{s}")), None))
        .collect();
    let t = start.elapsed();
    let fmt = |gaps: &[Option<f64>]| {
        gaps.iter()
            .map(|g| g.map_or("error".to_owned(), |g| format!("{g:.1e}")))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let tg: Vec<Option<f64>> = tfim.iter().map(vqe_gap).collect();
    let hg: Vec<Option<f64>> = heis.iter().map(vqe_gap).collect();
    let t_ok = tg.iter().filter(|g| g.is_some_and(|g| g <= 1e-3)).count();
    let h_ok = hg.iter().filter(|g| g.is_some_and(|g| g <= 5e-3)).count();
    let errors: Vec<&String> = tfim.iter().chain(&heis).filter_map(|r| r.as_ref().err()).collect();
    let mut detail = format!(
        "TFIM4 gaps [{}] ({t_ok}/5 <= 1e-3), Heisenberg4 gaps [{}] ({h_ok}/5 <= 5e-3), {:.0}s",
        fmt(&tg),
        fmt(&hg),
        t.as_secs_f64()
    );
    if let Some(e) = errors.first() {
        detail.push_str(&format!("; first error: {}", e.trim()));
    }
    (
        outcome(t_ok >= 4 && h_ok >= 4 && t < Duration::from_secs(15 * 60), detail),
        VqeRuns { tfim, heis, dir },
    )
}

fn criterion_6(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mses: Vec<Option<f64>> = (1..=5)
        .map(|s| {
            match run_config("configs/representation.toml", s, &dir.join(format!("representation_seed{s}")), None) {
                Ok(RunReport {
                    best: questa_cli::BestSummary {
                        metric: Metric::Representation { mse, .. },
                        ..
                    },
                    ..
                }) => Some(mse),
                _ => None,
            }
        })
        .collect();
    let t = start.elapsed();
    let ok = mses.iter().filter(|m| m.is_some_and(|m| m <= 1e-2)).count();
    let list: Vec<String> = mses
        .iter()
        .map(|m| m.map_or("error".to_owned(), |m| format!("{m:.1e}")))
        .collect();
    outcome(
        ok >= 4 && t < Duration::from_secs(10 * 60),
        format!("MSE [{}] ({ok}/5 <= 1e-2), {:.0}s", list.join(" "), t.as_secs_f64()),
    )
}

fn criterion_7(dir: &Path) -> Outcome {
    let start = Instant::now();
    let out = dir.join("ablation");
    let args: Vec<String> = vec![
        "ablate".into(),
        "--config".into(),
        repo("configs/ablation.toml").display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    if let Err(e) = questa(&args) {
        return outcome(false, format!("ablate failed: {}", e.trim()));
    }
    let text = match fs::read_to_string(out.join("ablation.json")) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let result: AblationOutcome = match serde_json::from_str(&text) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let t = start.elapsed();
    let m = |c| result.median(c);
    outcome(
        result.ordering_holds() && t < Duration::from_secs(15 * 60),
        format!(
            "median epochs to target: dag-kl {}, dag-only {}, random {} (need dag-kl <= dag-only <= random), {:.0}s",
            m(AblationCase::DagKl),
            m(AblationCase::DagOnly),
            m(AblationCase::Random),
            t.as_secs_f64()
        ),
    )
}

fn criterion_8(runs: &VqeRuns) -> Outcome {
    let reference = runs.dir.join("tfim4_seed1").join("history.jsonl");
    let Ok(expected) = fs::read(&reference) else {
        return outcome(false, "criterion 5 artifact missing");
    };
    let mut details = Vec::new();
    let mut pass = true;
    for threads in [1usize, 4] {
        let out = runs.dir.join(format!("tfim4_seed1_threads{threads}"));
        match run_config("configs/tfim4.toml", 1, &out, Some(threads)).map(|_| fs::read(out.join("history.jsonl"))) {
            Ok(Ok(bytes)) => {
                let same = bytes == expected;
                pass &= same;
                details.push(format!("--threads {threads}: {}", if same { "identical" } else { "DIFFERS" }));
            }
            Ok(Err(e)) => {
                pass = false;
                details.push(format!("--threads {threads}: {e}"));
            }
            Err(e) => {
                pass = false;
                details.push(format!("--threads {threads}: {}", e.trim()));
            }
        }
    }
    outcome(pass, format!("TFIM4 seed 1 history.jsonl vs default pool: {}", details.join(", ")))
}

fn criterion_9(runs: &VqeRuns) -> Outcome {
    let start = Instant::now();
    let mut rng = seed::stream(9, &[]);
    let mut failures = Vec::new();

    let mut norm_dev: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let depth = rng.random_range(0..40);
        norm_dev = norm_dev.max((simulate(n, &random_gates(&mut rng, n, depth)).norm_sqr() - 1.0).abs());
    }
    if norm_dev >= 1e-10 {
        failures.push(format!("norm deviation {norm_dev:.1e}"));
    }

    let vocab = GateVocabulary::default();
    let mut max_e = f64::NEG_INFINITY;
    for s in 0..30 {
        let c = decode(&random_genome(seed::derive(9, &[s]), 3, 4, &vocab).expect("genome"), &vocab).expect("decode");
        max_e = max_e.max(expressivity(&c, 1000, 75, s).expect("valid").expressivity);
    }
    if max_e > 0.0 {
        failures.push(format!("positive expressivity {max_e}"));
    }

    let mut bound_violation: f64 = 0.0;
    for s in 0..40u64 {
        let n = 2 + (s as usize % 5);
        let h = if s % 2 == 0 {
            build_tfim(n, Boundary::Periodic)
        } else {
            build_heisenberg_field(n, Boundary::Periodic, 1.0)
        }
        .expect("hamiltonian");
        let e0 = exact_ground_energy(&h).expect("exact");
        let c = decode(&random_genome(seed::derive(9, &[100 + s]), n, 8, &vocab).expect("genome"), &vocab)
            .expect("decode");
        let p = ParameterVector::new((0..c.num_params()).map(|_| rng.random_range(-PI..PI)).collect());
        bound_violation = bound_violation.max(e0 - 1e-9 - loss(&c, &p, &Task::Vqe(h)).expect("loss"));
    }
    if bound_violation > 0.0 {
        failures.push(format!("variational bound violated by {bound_violation:.1e}"));
    }

    for _ in 0..200 {
        let d = rng.random_range(0..30);
        let p = ParameterVector::with_affine(
            (0..d).map(|_| rng.random_range(-PI..PI)).collect(),
            Affine {
                w: rng.random_range(-2.0..2.0),
                b: rng.random_range(-1.0..1.0),
            },
        );
        let alpha = rng.random_range(0.0..=1.0);
        if reuse(&p, &p, &ReuseConfig { alpha }).expect("valid alpha") != p {
            failures.push("reuse is not idempotent".into());
            break;
        }
    }

    for name in ["tfim4", "heisenberg4", "representation", "classification", "ablation"] {
        let path = repo(&format!("configs/{name}.toml"));
        match RunConfig::load(&path) {
            Ok(cfg) if RunConfig::parse(&cfg.to_toml(), None).as_ref() == Ok(&cfg) => {}
            Ok(_) => failures.push(format!("{name}.toml does not round-trip")),
            Err(e) => failures.push(format!("{name}.toml: {e}")),
        }
    }

    let mut histories = 0;
    for report in runs.tfim.iter().chain(&runs.heis).filter_map(|r| r.as_ref().ok()) {
        histories += 1;
        let mut prev = f64::NEG_INFINITY;
        for rec in &report.history {
            if rec.best_task_fitness < prev {
                failures.push(format!("elitism broken at generation {}", rec.generation));
            }
            prev = rec.best_task_fitness;
            if rec
                .individuals
                .iter()
                .any(|i| i.focused && i.proxy.is_some_and(|p| p.fitness == f64::NEG_INFINITY))
            {
                failures.push(format!("filtered-out individual focused at generation {}", rec.generation));
            }
        }
    }
    if histories == 0 {
        failures.push("no search histories to check".into());
    }

    let t = start.elapsed();
    let summary = format!(
        "norm, KL sign, variational bound, reuse idempotence, config round-trip, elitism and filter soundness over {histories} histories; {:.1}s",
        t.as_secs_f64()
    );
    if failures.is_empty() {
        outcome(true, summary)
    } else {
        outcome(false, format!("{summary}; {}", failures.join("; ")))
    }
}

fn main() -> ExitCode {
    let dir = work_dir();
    let mut results: Vec<(u8, Outcome)> = Vec::new();
    let mut report = |n: u8, o: Outcome| {
        println!("criterion {n}: {} — {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    let (c5, runs) = criterion_5(&dir);
    report(5, c5);
    report(6, criterion_6(&dir));
    report(7, criterion_7(&dir));
    report(8, criterion_8(&runs));
    report(9, criterion_9(&runs));
    let failed: Vec<u8> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
