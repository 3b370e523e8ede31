//! Task definitions: Pauli-sum Hamiltonians with an exact ground-energy
//! oracle, 1D signal representation, and CSV-backed classification.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::statevector::{Pauli, PauliString, SimError};

/// Largest register accepted by [`exact_ground_energy`].
pub const MAX_EXACT_QUBITS: usize = 12;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{model} needs at least 2 sites, got {n}")]
    TooFewSites { model: &'static str, n: usize },
    #[error("term {index} has {got} Pauli letters, expected {expected}")]
    TermLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("Hamiltonian has no qubits")]
    NoQubits,
    #[error("{qubits} qubits exceeds the exact-diagonalization limit of {max}")]
    TooLarge { qubits: usize, max: usize },
    #[error(transparent)]
    Pauli(#[from] SimError),
    #[error("invalid Hamiltonian JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row} has {got} cells, header has {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row}, column {column:?}: {value:?} is not a number")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: unknown label {value:?}")]
    UnknownLabel { row: usize, value: String },
    #[error("dataset is empty")]
    Empty,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("mean squared error must be nonnegative, got {0}")]
    NegativeMse(f64),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TaskError + '_ {
    move |source| TaskError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

impl Boundary {
    fn bonds(self, n: usize) -> impl Iterator<Item = (usize, usize)> {
        let count = match self {
            Boundary::Periodic => n,
            Boundary::Open => n - 1,
        };
        (0..count).map(move |i| (i, (i + 1) % n))
    }
}

/// A real-weighted sum of Pauli strings on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    qubits: usize,
    terms: Vec<PauliString>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianDoc {
    n: usize,
    terms: Vec<TermDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    coeff: f64,
    paulis: String,
}

impl Hamiltonian {
    pub fn new(qubits: usize, terms: Vec<PauliString>) -> Result<Self, TaskError> {
        if qubits == 0 {
            return Err(TaskError::NoQubits);
        }
        for (index, t) in terms.iter().enumerate() {
            if t.len() != qubits {
                return Err(TaskError::TermLength {
                    index,
                    expected: qubits,
                    got: t.len(),
                });
            }
        }
        Ok(Self { qubits, terms })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    /// Parses `{"n": 2, "terms": [{"coeff": -1.0, "paulis": "ZZ"}]}`.
    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let doc: HamiltonianDoc = serde_json::from_str(text)?;
        let terms = doc
            .terms
            .iter()
            .map(|t| PauliString::parse(t.coeff, &t.paulis))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(doc.n, terms)
    }

    pub fn to_json(&self) -> String {
        let doc = HamiltonianDoc {
            n: self.qubits,
            terms: self
                .terms
                .iter()
                .map(|t| TermDoc {
                    coeff: t.coeff(),
                    paulis: t.letters(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("finite coefficients")
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    /// Dense matrix Σ c_k P_k, assembled entry by entry from the 2×2 Pauli
    /// matrices (qubit 0 is the most significant index bit).
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>, TaskError> {
        if self.qubits > MAX_EXACT_QUBITS {
            return Err(TaskError::TooLarge {
                qubits: self.qubits,
                max: MAX_EXACT_QUBITS,
            });
        }
        let n = self.qubits;
        let dim = 1usize << n;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for term in &self.terms {
            let mats: Vec<_> = term.paulis().iter().map(Pauli::matrix).collect();
            for row in 0..dim {
                // each single-qubit factor has exactly one nonzero per row
                let mut col = 0usize;
                let mut value = Complex64::new(term.coeff(), 0.0);
                for (q, mat) in mats.iter().enumerate() {
                    let r = (row >> (n - 1 - q)) & 1;
                    let c = if mat[r][0].norm_sqr() > 0.0 { 0 } else { 1 };
                    value *= mat[r][c];
                    col |= c << (n - 1 - q);
                }
                m[(row, col)] += value;
            }
        }
        Ok(m)
    }
}

/// H = Σ Z_i Z_{i+1} − Σ X_i.
pub fn build_tfim(n: usize, boundary: Boundary) -> Result<Hamiltonian, TaskError> {
    if n < 2 {
        return Err(TaskError::TooFewSites { model: "TFIM", n });
    }
    let mut terms = Vec::new();
    for (a, b) in boundary.bonds(n) {
        terms.push(PauliString::from_sites(1.0, n, &[(a, Pauli::Z), (b, Pauli::Z)])?);
    }
    for i in 0..n {
        terms.push(PauliString::from_sites(-1.0, n, &[(i, Pauli::X)])?);
    }
    Hamiltonian::new(n, terms)
}

/// H = Σ (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}) + Σ Z_i.
pub fn build_heisenberg(n: usize, boundary: Boundary) -> Result<Hamiltonian, TaskError> {
    build_heisenberg_field(n, boundary, 1.0)
}

/// Heisenberg chain with a uniform Z field of strength `field`; a zero field
/// emits no field terms.
pub fn build_heisenberg_field(n: usize, boundary: Boundary, field: f64) -> Result<Hamiltonian, TaskError> {
    if n < 2 {
        return Err(TaskError::TooFewSites {
            model: "Heisenberg",
            n,
        });
    }
    let mut terms = Vec::new();
    for (a, b) in boundary.bonds(n) {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            terms.push(PauliString::from_sites(1.0, n, &[(a, p), (b, p)])?);
        }
    }
    if field != 0.0 {
        for i in 0..n {
            terms.push(PauliString::from_sites(field, n, &[(i, Pauli::Z)])?);
        }
    }
    Hamiltonian::new(n, terms)
}

/// Smallest eigenvalue of the dense Hamiltonian matrix.
pub fn exact_ground_energy(h: &Hamiltonian) -> Result<f64, TaskError> {
    let m = h.dense_matrix()?;
    let min = if m.iter().all(|z| z.im == 0.0) {
        let real = m.map(|z| z.re);
        SymmetricEigen::new(real).eigenvalues.min()
    } else {
        SymmetricEigen::new(m).eigenvalues.min()
    };
    Ok(min)
}

/// VQE outcome relative to the exact ground energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub estimate: f64,
    pub reference: f64,
    pub gap: f64,
}

impl EnergyEstimate {
    pub fn new(estimate: f64, reference: f64) -> Self {
        Self {
            estimate,
            reference,
            gap: estimate - reference,
        }
    }
}

/// −ln(MSE). A zero error maps to +∞.
pub fn representation_fitness(mse: f64) -> Result<f64, TaskError> {
    if mse < 0.0 || mse.is_nan() {
        return Err(TaskError::NegativeMse(mse));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-mse.ln())
}

/// Maps each column to [−1, 1] by min-max scaling; constant columns become 0.
pub fn normalize_columns(rows: &mut [Vec<f64>]) {
    let Some(width) = rows.first().map(Vec::len) else {
        return;
    };
    for j in 0..width {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
        let range = hi - lo;
        for r in rows.iter_mut() {
            r[j] = if range > 0.0 { 2.0 * (r[j] - lo) / range - 1.0 } else { 0.0 };
        }
    }
}

/// Fit y = f(x) from samples; x is stored normalized to [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationTask {
    coords: Vec<f64>,
    targets: Vec<f64>,
}

impl RepresentationTask {
    /// `coords` are raw coordinates and are normalized here.
    pub fn new(coords: Vec<f64>, targets: Vec<f64>) -> Result<Self, TaskError> {
        if coords.is_empty() || coords.len() != targets.len() {
            return Err(TaskError::Empty);
        }
        let mut rows: Vec<Vec<f64>> = coords.into_iter().map(|x| vec![x]).collect();
        normalize_columns(&mut rows);
        Ok(Self {
            coords: rows.into_iter().map(|r| r[0]).collect(),
            targets,
        })
    }

    /// sin(2πx) + 0.5·sin(6πx) on `points` uniform points of [0, 1].
    pub fn two_tone(points: usize) -> Result<Self, TaskError> {
        if points < 2 {
            return Err(TaskError::Empty);
        }
        let xs: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let ys = xs
            .iter()
            .map(|x| (2.0 * PI * x).sin() + 0.5 * (6.0 * PI * x).sin())
            .collect();
        Self::new(xs, ys)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Labelled feature rows, features normalized to [−1, 1] per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTask {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl ClassificationTask {
    /// `features` are raw values and are normalized here.
    pub fn new(mut features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self, TaskError> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(TaskError::Empty);
        }
        let width = features[0].len();
        if width == 0 {
            return Err(TaskError::NoFeatures);
        }
        for (row, f) in features.iter().enumerate() {
            if f.len() != width {
                return Err(TaskError::Ragged {
                    row,
                    expected: width,
                    got: f.len(),
                });
            }
        }
        if let Some((row, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(TaskError::UnknownLabel {
                row,
                value: l.to_string(),
            });
        }
        normalize_columns(&mut features);
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Raw (unnormalized) two-class Gaussian blobs centred at ±`separation`/2 on
/// every axis with unit variance. Labels alternate 0, 1, 0, ...
pub fn gaussian_blobs(rng_seed: u64, samples: usize, features: usize, separation: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = seed::stream(rng_seed, &[seed::purpose::DATA]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let label = i % 2;
        let centre = if label == 0 { -separation / 2.0 } else { separation / 2.0 };
        rows.push((0..features).map(|_| centre + normal.sample(&mut rng)).collect());
        labels.push(label);
    }
    (rows, labels)
}

/// How to interpret the columns of a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSchema {
    /// Every column except `label_column` is a feature. Labels are integers
    /// in 0..classes (classes inferred as max+1 when absent).
    Classification {
        label_column: String,
        #[serde(default)]
        classes: Option<usize>,
    },
    Representation { x_column: String, y_column: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Classification(ClassificationTask),
    Representation(RepresentationTask),
}

pub fn load_csv_dataset(path: &Path, schema: &DatasetSchema) -> Result<Dataset, TaskError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_csv_dataset(file, schema)
}

pub fn read_csv_dataset<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset, TaskError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TaskError::MissingColumn(name.to_owned()))
    };
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(TaskError::Ragged {
                row: i + 1,
                expected: header.len(),
                got: rec.len(),
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(TaskError::Empty);
    }
    let number = |row: usize, col: usize, rec: &csv::StringRecord| {
        let cell = &rec[col];
        cell.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| TaskError::NotNumeric {
                row: row + 1,
                column: header[col].clone(),
                value: cell.to_owned(),
            })
    };
    match schema {
        DatasetSchema::Classification { label_column, classes } => {
            let label_col = column(label_column)?;
            let mut features = Vec::with_capacity(records.len());
            let mut labels = Vec::with_capacity(records.len());
            for (i, rec) in records.iter().enumerate() {
                let value = &rec[label_col];
                let label = value.parse::<usize>().map_err(|_| TaskError::UnknownLabel {
                    row: i + 1,
                    value: value.to_owned(),
                })?;
                if classes.is_some_and(|c| label >= c) {
                    return Err(TaskError::UnknownLabel {
                        row: i + 1,
                        value: value.to_owned(),
                    });
                }
                labels.push(label);
                features.push(
                    (0..header.len())
                        .filter(|&c| c != label_col)
                        .map(|c| number(i, c, rec))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
            Ok(Dataset::Classification(ClassificationTask::new(features, labels, classes)?))
        }
        DatasetSchema::Representation { x_column, y_column } => {
            let (xc, yc) = (column(x_column)?, column(y_column)?);
            let mut xs = Vec::with_capacity(records.len());
            let mut ys = Vec::with_capacity(records.len());
            for (i, rec) in records.iter().enumerate() {
                xs.push(number(i, xc, rec)?);
                ys.push(number(i, yc, rec)?);
            }
            Ok(Dataset::Representation(RepresentationTask::new(xs, ys)?))
        }
    }
}

/// Writes raw classification rows with header `x0,…,x{F-1},label`.
pub fn write_classification_csv<W: Write>(out: W, features: &[Vec<f64>], labels: &[usize]) -> Result<(), TaskError> {
    let mut w = csv::Writer::from_writer(out);
    let width = features.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..width).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in features.iter().zip(labels) {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| TaskError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// A search objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    /// Minimize ⟨H⟩.
    Vqe(Hamiltonian),
    /// Minimize the MSE of w·⟨Z₀⟩ + b against the targets.
    Representation(RepresentationTask),
    /// Minimize the cross-entropy of softmax(⟨Z_0⟩, …, ⟨Z_{C−1}⟩).
    Classification(ClassificationTask),
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Vqe(_) => "vqe",
            Task::Representation(_) => "representation",
            Task::Classification(_) => "classification",
        }
    }

    /// Higher is better. VQE and classification use −loss; representation
    /// uses −ln(MSE).
    pub fn fitness(&self, loss: f64) -> f64 {
        if !loss.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self {
            Task::Representation(_) => representation_fitness(loss.max(0.0)).unwrap_or(f64::NEG_INFINITY),
            _ => -loss,
        }
    }

    /// Whether the task trains a classical affine readout.
    pub fn uses_affine(&self) -> bool {
        matches!(self, Task::Representation(_))
    }
}
