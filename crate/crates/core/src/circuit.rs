//! Genome encoding and compilation into executable gate sequences.
//!
//! A genome is an N×L matrix of gate codes (rows are qubits, columns are
//! layers). Decoding walks the columns left to right and the rows top to
//! bottom. A `CNOT` code at row `i` means CNOT(control = i, target = i+1 mod N);
//! if the target wire was already used by an earlier gate in the same column
//! the CNOT is demoted to identity. Every rotation code allocates a fresh
//! parameter slot.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::statevector::{Axis, Gate, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("gate vocabulary needs at least 2 codes, got {0}")]
    VocabularyTooSmall(usize),
    #[error("gate vocabulary lists {0:?} more than once")]
    DuplicateCode(GateCode),
    #[error("genome must have at least one row and one column")]
    EmptyGenome,
    #[error("genome rows have unequal lengths ({expected} vs {got})")]
    Ragged { expected: usize, got: usize },
    #[error("genome entry {value} at ({row}, {col}) is outside the vocabulary of size {q}")]
    EntryOutOfRange {
        row: usize,
        col: usize,
        value: u8,
        q: usize,
    },
    #[error("genome is {got_rows}×{got_cols}, expected {rows}×{cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("re-upload count must be at least 1")]
    NoReuploads,
    #[error("{features} features cannot be encoded on {qubits} qubits")]
    TooManyFeatures { features: usize, qubits: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("expected {expected} features, got {got}")]
    FeatureCount { expected: usize, got: usize },
}

/// One vocabulary entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateCode {
    #[serde(rename = "I")]
    Identity,
    #[serde(rename = "RX")]
    Rx,
    #[serde(rename = "RY")]
    Ry,
    #[serde(rename = "RZ")]
    Rz,
    /// CNOT from this row onto the next row (cyclically).
    #[serde(rename = "CNOT")]
    CnotNext,
}

impl GateCode {
    fn axis(self) -> Option<Axis> {
        match self {
            GateCode::Rx => Some(Axis::X),
            GateCode::Ry => Some(Axis::Y),
            GateCode::Rz => Some(Axis::Z),
            _ => None,
        }
    }
}

/// Ordered gate codes; a genome entry `k` means `codes[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GateCode>", into = "Vec<GateCode>")]
pub struct GateVocabulary {
    codes: Vec<GateCode>,
}

impl GateVocabulary {
    pub fn new(codes: Vec<GateCode>) -> Result<Self, CircuitError> {
        if codes.len() < 2 {
            return Err(CircuitError::VocabularyTooSmall(codes.len()));
        }
        for (i, c) in codes.iter().enumerate() {
            if codes[..i].contains(c) {
                return Err(CircuitError::DuplicateCode(*c));
            }
        }
        Ok(Self { codes })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[GateCode] {
        &self.codes
    }

    pub fn get(&self, index: u8) -> Option<GateCode> {
        self.codes.get(index as usize).copied()
    }

    pub fn index_of(&self, code: GateCode) -> Option<u8> {
        self.codes.iter().position(|&c| c == code).map(|i| i as u8)
    }
}

impl Default for GateVocabulary {
    fn default() -> Self {
        Self {
            codes: vec![
                GateCode::Identity,
                GateCode::Rx,
                GateCode::Ry,
                GateCode::Rz,
                GateCode::CnotNext,
            ],
        }
    }
}

impl TryFrom<Vec<GateCode>> for GateVocabulary {
    type Error = CircuitError;
    fn try_from(codes: Vec<GateCode>) -> Result<Self, Self::Error> {
        Self::new(codes)
    }
}

impl From<GateVocabulary> for Vec<GateCode> {
    fn from(v: GateVocabulary) -> Self {
        v.codes
    }
}

/// N×L matrix of vocabulary indices. Serializes as an array of rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct CircuitGenome {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl CircuitGenome {
    pub fn filled(rows: usize, cols: usize, value: u8) -> Result<Self, CircuitError> {
        if rows == 0 || cols == 0 {
            return Err(CircuitError::EmptyGenome);
        }
        Ok(Self {
            rows,
            cols,
            cells: vec![value; rows * cols],
        })
    }

    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self, CircuitError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(CircuitError::EmptyGenome);
        }
        let mut cells = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(CircuitError::Ragged {
                    expected: cols,
                    got: r.len(),
                });
            }
            cells.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            cells,
        })
    }

    /// i.i.d. uniform entries over the vocabulary.
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        rows: usize,
        cols: usize,
        vocab: &GateVocabulary,
    ) -> Result<Self, CircuitError> {
        let mut g = Self::filled(rows, cols, 0)?;
        let q = vocab.len() as u8;
        for c in &mut g.cells {
            *c = rng.random_range(0..q);
        }
        Ok(g)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.cols).map(<[u8]>::to_vec).collect()
    }

    pub fn validate(&self, vocab: &GateVocabulary) -> Result<(), CircuitError> {
        for (i, &v) in self.cells.iter().enumerate() {
            if v as usize >= vocab.len() {
                return Err(CircuitError::EntryOutOfRange {
                    row: i / self.cols,
                    col: i % self.cols,
                    value: v,
                    q: vocab.len(),
                });
            }
        }
        Ok(())
    }

    pub fn check_dims(&self, rows: usize, cols: usize) -> Result<(), CircuitError> {
        if self.rows != rows || self.cols != cols {
            return Err(CircuitError::DimensionMismatch {
                rows,
                cols,
                got_rows: self.rows,
                got_cols: self.cols,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<u8>>> for CircuitGenome {
    type Error = CircuitError;
    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self, Self::Error> {
        Self::from_rows(rows)
    }
}

impl From<CircuitGenome> for Vec<Vec<u8>> {
    fn from(g: CircuitGenome) -> Self {
        g.to_rows()
    }
}

impl fmt::Display for CircuitGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Uniformly random genome from a seed.
pub fn random_genome(
    rng_seed: u64,
    rows: usize,
    cols: usize,
    vocab: &GateVocabulary,
) -> Result<CircuitGenome, CircuitError> {
    let mut rng = seed::stream(rng_seed, &[seed::purpose::SAMPLE]);
    CircuitGenome::sample(&mut rng, rows, cols, vocab)
}

/// Layout of a data re-uploading circuit: `reuploads` repetitions of
/// [RY(scale·x_j) on qubit j for each feature j; decoded genome block].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReuploadTemplate {
    pub reuploads: usize,
    pub features: usize,
    pub scale: f64,
    /// Share one parameter set across all blocks.
    pub tie_parameters: bool,
}

impl Default for ReuploadTemplate {
    fn default() -> Self {
        Self {
            reuploads: 1,
            features: 0,
            scale: PI,
            tie_parameters: false,
        }
    }
}

impl ReuploadTemplate {
    pub fn new(reuploads: usize, features: usize) -> Self {
        Self {
            reuploads,
            features,
            ..Self::default()
        }
    }
}

/// Source of a rotation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Param(usize),
    Feature { index: usize, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Rotation { axis: Axis, wire: usize, angle: Angle },
    Cnot { control: usize, target: usize },
}

impl Op {
    pub fn gate(&self, params: &[f64], features: &[f64]) -> Gate {
        match *self {
            Op::Rotation { axis, angle, .. } => Gate::rotation(axis, resolve(angle, params, features)),
            Op::Cnot { .. } => Gate::Cnot,
        }
    }

    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Op::Rotation { wire, .. } => vec![wire],
            Op::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn param_slot(&self) -> Option<usize> {
        match *self {
            Op::Rotation {
                angle: Angle::Param(p),
                ..
            } => Some(p),
            _ => None,
        }
    }

    /// Applies the op with `shift` added to its angle. No bounds checks.
    #[inline]
    pub(crate) fn apply(&self, state: &mut StateVector, params: &[f64], features: &[f64], shift: f64) {
        match *self {
            Op::Rotation { axis, wire, angle } => {
                state.rotate(axis, resolve(angle, params, features) + shift, wire)
            }
            Op::Cnot { control, target } => state.cnot(control, target),
        }
    }

    /// Applies the inverse of the op. No bounds checks.
    #[inline]
    pub(crate) fn apply_inverse(&self, state: &mut StateVector, params: &[f64], features: &[f64]) {
        match *self {
            Op::Rotation { axis, wire, angle } => {
                state.rotate(axis, -resolve(angle, params, features), wire)
            }
            Op::Cnot { control, target } => state.cnot(control, target),
        }
    }
}

#[inline]
fn resolve(angle: Angle, params: &[f64], features: &[f64]) -> f64 {
    match angle {
        Angle::Param(p) => params[p],
        Angle::Feature { index, scale } => scale * features[index],
    }
}

/// Genome cell an op or parameter slot was decoded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Placement {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

/// An executable circuit with parameter and feature slots.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    qubits: usize,
    layers: usize,
    ops: Vec<Op>,
    origins: Vec<Option<Placement>>,
    slot_origins: Vec<Placement>,
    num_features: usize,
    reuploads: usize,
}

impl CompiledCircuit {
    /// A circuit built directly from ops on `qubits` wires. Parameter slots
    /// must be numbered 0..d without gaps.
    pub fn from_ops(qubits: usize, ops: Vec<Op>) -> Result<Self, CircuitError> {
        let mut slot_origins = Vec::new();
        let mut num_features = 0;
        for (i, op) in ops.iter().enumerate() {
            match *op {
                Op::Rotation {
                    angle: Angle::Param(p),
                    wire,
                    ..
                } => {
                    if p > slot_origins.len() {
                        return Err(CircuitError::ParamCount {
                            expected: slot_origins.len(),
                            got: p,
                        });
                    }
                    if p == slot_origins.len() {
                        slot_origins.push(Placement {
                            block: 0,
                            row: wire,
                            col: i,
                        });
                    }
                }
                Op::Rotation {
                    angle: Angle::Feature { index, .. },
                    ..
                } => num_features = num_features.max(index + 1),
                Op::Cnot { .. } => {}
            }
        }
        Ok(Self {
            qubits,
            layers: ops.len(),
            origins: vec![None; ops.len()],
            ops,
            slot_origins,
            num_features,
            reuploads: 1,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn origins(&self) -> &[Option<Placement>] {
        &self.origins
    }

    pub fn num_params(&self) -> usize {
        self.slot_origins.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn reuploads(&self) -> usize {
        self.reuploads
    }

    pub fn cnot_count(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, Op::Cnot { .. })).count()
    }

    pub fn encoding_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|o| {
                matches!(
                    o,
                    Op::Rotation {
                        angle: Angle::Feature { .. },
                        ..
                    }
                )
            })
            .count()
    }

    pub fn slot_origins(&self) -> &[Placement] {
        &self.slot_origins
    }

    /// Parameter slots decoded from column `col` of block `block`, in order.
    pub fn slots_at(&self, block: usize, col: usize) -> Vec<usize> {
        self.slot_origins
            .iter()
            .enumerate()
            .filter(|(_, p)| p.block == block && p.col == col)
            .map(|(i, _)| i)
            .collect()
    }

    /// Gate list with resolved angles.
    pub fn bind(&self, params: &[f64], features: &[f64]) -> Result<Vec<(Gate, Vec<usize>)>, CircuitError> {
        self.check_inputs(params, features)?;
        Ok(self
            .ops
            .iter()
            .map(|op| (op.gate(params, features), op.wires()))
            .collect())
    }

    pub fn check_inputs(&self, params: &[f64], features: &[f64]) -> Result<(), CircuitError> {
        if params.len() != self.num_params() {
            return Err(CircuitError::ParamCount {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        if features.len() < self.num_features {
            return Err(CircuitError::FeatureCount {
                expected: self.num_features,
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Runs the circuit on |0…0⟩.
    pub fn simulate(&self, params: &[f64], features: &[f64]) -> Result<StateVector, CircuitError> {
        self.check_inputs(params, features)?;
        Ok(self.run(params, features))
    }

    pub(crate) fn run(&self, params: &[f64], features: &[f64]) -> StateVector {
        let mut state = StateVector::zero(self.qubits);
        for op in &self.ops {
            op.apply(&mut state, params, features, 0.0);
        }
        state
    }

    /// The genome this circuit decodes from, with demoted CNOTs written as
    /// identity. Uses the ops of the first block.
    pub fn effective_genome(&self, vocab: &GateVocabulary) -> Option<CircuitGenome> {
        let identity = vocab.index_of(GateCode::Identity)?;
        let mut g = CircuitGenome::filled(self.qubits, self.layers, identity).ok()?;
        for (op, origin) in self.ops.iter().zip(&self.origins) {
            let Some(p) = origin else { continue };
            if p.block != 0 {
                continue;
            }
            let code = match op {
                Op::Rotation { axis: Axis::X, .. } => GateCode::Rx,
                Op::Rotation { axis: Axis::Y, .. } => GateCode::Ry,
                Op::Rotation { axis: Axis::Z, .. } => GateCode::Rz,
                Op::Cnot { .. } => GateCode::CnotNext,
            };
            g.set(p.row, p.col, vocab.index_of(code)?);
        }
        Some(g)
    }
}

/// Decodes a genome into a plain variational circuit (no data encoding).
pub fn decode(genome: &CircuitGenome, vocab: &GateVocabulary) -> Result<CompiledCircuit, CircuitError> {
    build_reupload(genome, vocab, &ReuploadTemplate::default())
}

/// Builds the re-uploading circuit for `genome`.
pub fn build_reupload(
    genome: &CircuitGenome,
    vocab: &GateVocabulary,
    template: &ReuploadTemplate,
) -> Result<CompiledCircuit, CircuitError> {
    genome.validate(vocab)?;
    if template.reuploads == 0 {
        return Err(CircuitError::NoReuploads);
    }
    let n = genome.rows();
    if template.features > n {
        return Err(CircuitError::TooManyFeatures {
            features: template.features,
            qubits: n,
        });
    }
    let mut circuit = CompiledCircuit {
        qubits: n,
        layers: genome.cols(),
        ops: Vec::new(),
        origins: Vec::new(),
        slot_origins: Vec::new(),
        num_features: template.features,
        reuploads: template.reuploads,
    };
    for block in 0..template.reuploads {
        for j in 0..template.features {
            circuit.ops.push(Op::Rotation {
                axis: Axis::Y,
                wire: j,
                angle: Angle::Feature {
                    index: j,
                    scale: template.scale,
                },
            });
            circuit.origins.push(None);
        }
        let tied = template.tie_parameters && block > 0;
        let mut next_local = 0usize;
        for col in 0..genome.cols() {
            let mut consumed = vec![false; n];
            for row in 0..n {
                let code = vocab.get(genome.get(row, col)).expect("validated");
                let placement = Placement { block, row, col };
                let op = match code {
                    GateCode::Identity => continue,
                    GateCode::CnotNext => {
                        let target = (row + 1) % n;
                        if target == row || consumed[target] {
                            continue;
                        }
                        consumed[target] = true;
                        Op::Cnot {
                            control: row,
                            target,
                        }
                    }
                    rot => {
                        let slot = if tied {
                            next_local
                        } else {
                            let s = circuit.slot_origins.len();
                            circuit.slot_origins.push(placement);
                            s
                        };
                        next_local += 1;
                        Op::Rotation {
                            axis: rot.axis().expect("rotation code"),
                            wire: row,
                            angle: Angle::Param(slot),
                        }
                    }
                };
                consumed[row] = true;
                circuit.ops.push(op);
                circuit.origins.push(Some(placement));
            }
        }
    }
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::full_unitary;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn vocab() -> GateVocabulary {
        GateVocabulary::default()
    }

    // I=0 RX=1 RY=2 RZ=3 CNOT=4
    #[test]
    fn identity_genome_compiles_empty() {
        let g = CircuitGenome::filled(3, 4, 0).unwrap();
        let c = decode(&g, &vocab()).unwrap();
        assert!(c.ops().is_empty());
        assert_eq!(c.num_params(), 0);
    }

    #[test]
    fn single_rx() {
        let mut g = CircuitGenome::filled(3, 4, 0).unwrap();
        g.set(0, 0, 1);
        let c = decode(&g, &vocab()).unwrap();
        assert_eq!(c.ops().len(), 1);
        assert_eq!(c.num_params(), 1);
    }

    #[test]
    fn second_cnot_in_column_is_demoted() {
        let g = CircuitGenome::from_rows(vec![vec![4], vec![4]]).unwrap();
        let c = decode(&g, &vocab()).unwrap();
        assert_eq!(
            c.ops(),
            &[Op::Cnot {
                control: 0,
                target: 1
            }]
        );
        assert_eq!(c.num_params(), 0);
    }

    #[test]
    fn wraparound_cnot_emitted_when_row_zero_idle() {
        let g = CircuitGenome::from_rows(vec![vec![0], vec![0], vec![4]]).unwrap();
        let c = decode(&g, &vocab()).unwrap();
        assert_eq!(
            c.ops(),
            &[Op::Cnot {
                control: 2,
                target: 0
            }]
        );
    }

    #[test]
    fn single_qubit_cnot_is_demoted() {
        let g = CircuitGenome::from_rows(vec![vec![4, 1]]).unwrap();
        let c = decode(&g, &vocab()).unwrap();
        assert_eq!(c.ops().len(), 1);
        assert_eq!(c.num_params(), 1);
    }

    #[test]
    fn out_of_range_entry() {
        let g = CircuitGenome::from_rows(vec![vec![0, 5]]).unwrap();
        assert!(matches!(
            decode(&g, &vocab()),
            Err(CircuitError::EntryOutOfRange { value: 5, .. })
        ));
    }

    #[test]
    fn reupload_degenerate_matches_decode() {
        let g = CircuitGenome::from_rows(vec![vec![1, 4, 2], vec![3, 0, 4]]).unwrap();
        let a = decode(&g, &vocab()).unwrap();
        let b = build_reupload(&g, &vocab(), &ReuploadTemplate::new(1, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reupload_counts() {
        // three rotations per block
        let g = CircuitGenome::from_rows(vec![vec![1, 2], vec![3, 0]]).unwrap();
        let c = build_reupload(&g, &vocab(), &ReuploadTemplate::new(2, 2)).unwrap();
        assert_eq!(c.num_params(), 6);
        assert_eq!(c.encoding_count(), 4);
        assert_eq!(c.slots_at(1, 0), vec![3, 4]);
        let tied = ReuploadTemplate {
            tie_parameters: true,
            ..ReuploadTemplate::new(2, 2)
        };
        assert_eq!(build_reupload(&g, &vocab(), &tied).unwrap().num_params(), 3);
    }

    #[test]
    fn reupload_ten_qubits_three_blocks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = CircuitGenome::sample(&mut rng, 10, 4, &vocab()).unwrap();
        let c = build_reupload(&g, &vocab(), &ReuploadTemplate::new(3, 10)).unwrap();
        assert_eq!(c.encoding_count(), 30);
        // encoding layers start each block
        let mut starts = Vec::new();
        let mut prev_encoding = false;
        for (i, op) in c.ops().iter().enumerate() {
            let enc = matches!(op, Op::Rotation { angle: Angle::Feature { .. }, .. });
            if enc && !prev_encoding {
                starts.push(i);
            }
            prev_encoding = enc;
        }
        assert_eq!(starts.len(), 3);
    }

    #[test]
    fn too_many_features() {
        let g = CircuitGenome::filled(2, 2, 0).unwrap();
        assert!(matches!(
            build_reupload(&g, &vocab(), &ReuploadTemplate::new(1, 3)),
            Err(CircuitError::TooManyFeatures { .. })
        ));
        assert!(matches!(
            build_reupload(&g, &vocab(), &ReuploadTemplate::new(0, 1)),
            Err(CircuitError::NoReuploads)
        ));
    }

    #[test]
    fn random_genome_is_deterministic() {
        let a = random_genome(11, 10, 12, &vocab()).unwrap();
        let b = random_genome(11, 10, 12, &vocab()).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.rows(), a.cols()), (10, 12));
        assert!(a.cells().iter().all(|&v| v < 5));
    }

    #[test]
    fn random_genome_is_uniform() {
        let mut counts = [0usize; 5];
        for s in 0..400 {
            let g = random_genome(s, 5, 5, &vocab()).unwrap();
            for &v in g.cells() {
                counts[v as usize] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        assert_eq!(total, 10_000);
        let expected = total as f64 / 5.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% quantile of chi-square with 4 dof
        assert!(chi2 < 18.47, "chi2 = {chi2}");
        for c in counts {
            assert!((c as f64 / total as f64 - 0.2).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn vocabulary_validation() {
        assert!(GateVocabulary::new(vec![GateCode::Rx]).is_err());
        assert!(GateVocabulary::new(vec![GateCode::Rx, GateCode::Rx]).is_err());
        let v: GateVocabulary = serde_json::from_str(r#"["I","RY","CNOT"]"#).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn genome_json_shape() {
        let g = CircuitGenome::from_rows(vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(serde_json::to_string(&g).unwrap(), "[[0,1],[2,3]]");
        assert!(serde_json::from_str::<CircuitGenome>("[[0,1],[2]]").is_err());
        assert!(serde_json::from_str::<CircuitGenome>("[]").is_err());
    }

    proptest! {
        #[test]
        fn decode_reencode_is_stable(cells in proptest::collection::vec(0u8..5, 12), seed in 0u64..1000) {
            let _ = seed;
            let rows: Vec<Vec<u8>> = cells.chunks(4).map(|c| c.to_vec()).collect();
            let g = CircuitGenome::from_rows(rows).unwrap();
            let c = decode(&g, &vocab()).unwrap();
            let eff = c.effective_genome(&vocab()).unwrap();
            let again = decode(&eff, &vocab()).unwrap();
            prop_assert_eq!(&again, &c);
            let rotations = c.ops().iter().filter(|o| matches!(o, Op::Rotation { .. })).count();
            prop_assert_eq!(c.num_params(), rotations);
        }

        #[test]
        fn genome_json_round_trip(cells in proptest::collection::vec(0u8..5, 1..40), width in 1usize..6) {
            let width = width.min(cells.len());
            let used = cells.len() / width * width;
            let rows: Vec<Vec<u8>> = cells[..used].chunks(width).map(|c| c.to_vec()).collect();
            let g = CircuitGenome::from_rows(rows).unwrap();
            let json = serde_json::to_string(&g).unwrap();
            prop_assert_eq!(serde_json::from_str::<CircuitGenome>(&json).unwrap(), g);
        }

        #[test]
        fn compiled_circuit_matches_unitary(cells in proptest::collection::vec(0u8..5, 9), theta in proptest::collection::vec(-3.2f64..3.2, 9)) {
            let rows: Vec<Vec<u8>> = cells.chunks(3).map(|c| c.to_vec()).collect();
            let g = CircuitGenome::from_rows(rows).unwrap();
            let c = decode(&g, &vocab()).unwrap();
            let params = &theta[..c.num_params()];
            let gates = c.bind(params, &[]).unwrap();
            let u = full_unitary(3, gates.iter().map(|(g, w)| (*g, w.as_slice()))).unwrap();
            let state = c.simulate(params, &[]).unwrap();
            for (i, amp) in state.amplitudes().iter().enumerate() {
                let expected: Complex64 = u[(i, 0)];
                prop_assert!((amp - expected).norm() < 1e-10);
            }
        }
    }
}
