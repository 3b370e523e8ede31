//! Dense statevector simulation.
//!
//! Amplitudes are stored in a flat array indexed by the computational-basis
//! integer, with qubit 0 as the most significant bit: on three qubits the
//! basis state |q0 q1 q2⟩ = |100⟩ lives at index 4. Pauli strings and CNOT
//! wiring follow the same convention.
//!
//! Gates are applied in place by stride iteration over amplitude pairs. The
//! dense [`full_unitary`] builder exists only as an oracle for small circuits.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest register accepted by [`full_unitary`].
pub const MAX_UNITARY_QUBITS: usize = 10;

/// Tolerance for treating an amplitude vector as normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Imaginary parts of expectation values above this are reported as errors.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("wire {wire} out of range for a {qubits}-qubit register")]
    WireOutOfRange { wire: usize, qubits: usize },
    #[error("gate wires must be distinct, got {0:?}")]
    DuplicateWires(Vec<usize>),
    #[error("{gate} acts on {expected} wire(s), got {got}")]
    WrongArity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("qubit count mismatch: expected {expected}, got {got}")]
    QubitMismatch { expected: usize, got: usize },
    #[error("amplitude vector length {0} is not a nonzero power of two")]
    InvalidLength(usize),
    #[error("amplitude vector is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("{qubits} qubits exceeds the dense limit of {max}")]
    TooLarge { qubits: usize, max: usize },
    #[error("expectation value has imaginary residue {0:e}")]
    ImaginaryResidue(f64),
    #[error("invalid Pauli letter {0:?}")]
    InvalidPauli(char),
    #[error("non-finite Pauli coefficient")]
    NonFiniteCoefficient,
}

/// Rotation axis of a single-qubit rotation gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A gate from the simulator's native set. Rotation angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Identity,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    Cnot,
}

impl Gate {
    pub fn rotation(axis: Axis, theta: f64) -> Self {
        match axis {
            Axis::X => Gate::Rx(theta),
            Axis::Y => Gate::Ry(theta),
            Axis::Z => Gate::Rz(theta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::Identity => "I",
            Gate::Rx(_) => "RX",
            Gate::Ry(_) => "RY",
            Gate::Rz(_) => "RZ",
            Gate::Cnot => "CNOT",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::Cnot => 2,
            _ => 1,
        }
    }

    /// Dense row-major matrix of the gate on its own wires (2×2 or 4×4).
    ///
    /// For CNOT the first wire is the control and is the more significant bit.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        match *self {
            Gate::Identity => DMatrix::identity(2, 2),
            Gate::Rx(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[c.into(), -I * s, -I * s, c.into()],
                )
            }
            Gate::Ry(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                DMatrix::from_row_slice(2, 2, &[c.into(), (-s).into(), s.into(), c.into()])
            }
            Gate::Rz(t) => DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::from_polar(1.0, -t / 2.0),
                    ZERO,
                    ZERO,
                    Complex64::from_polar(1.0, t / 2.0),
                ],
            ),
            Gate::Cnot => {
                let mut m = DMatrix::from_element(4, 4, ZERO);
                m[(0, 0)] = ONE;
                m[(1, 1)] = ONE;
                m[(2, 3)] = ONE;
                m[(3, 2)] = ONE;
                m
            }
        }
    }
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn letter(&self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Result<Self, SimError> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(SimError::InvalidPauli(other)),
        }
    }

    /// The 2×2 matrix, row-major.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

/// A weighted tensor product of Paulis, one letter per qubit (index 0 leftmost).
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    paulis: Vec<Pauli>,
    coeff: f64,
}

impl PauliString {
    pub fn new(coeff: f64, paulis: Vec<Pauli>) -> Result<Self, SimError> {
        if !coeff.is_finite() {
            return Err(SimError::NonFiniteCoefficient);
        }
        Ok(Self { paulis, coeff })
    }

    /// Builds a string on `n` qubits that is the identity except at `sites`.
    pub fn from_sites(coeff: f64, n: usize, sites: &[(usize, Pauli)]) -> Result<Self, SimError> {
        let mut paulis = vec![Pauli::I; n];
        for &(q, p) in sites {
            if q >= n {
                return Err(SimError::WireOutOfRange { wire: q, qubits: n });
            }
            paulis[q] = p;
        }
        Self::new(coeff, paulis)
    }

    pub fn parse(coeff: f64, letters: &str) -> Result<Self, SimError> {
        let paulis = letters
            .chars()
            .map(Pauli::from_letter)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(coeff, paulis)
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn paulis(&self) -> &[Pauli] {
        &self.paulis
    }

    pub fn len(&self) -> usize {
        self.paulis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paulis.is_empty()
    }

    pub fn letters(&self) -> String {
        self.paulis.iter().map(Pauli::letter).collect()
    }

    /// Bit masks (flip, phase) and the number of Y factors, in basis-index bit order.
    fn masks(&self) -> (usize, usize, u32) {
        let n = self.paulis.len();
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut ys = 0u32;
        for (q, p) in self.paulis.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Z => phase |= bit,
                Pauli::Y => {
                    flip |= bit;
                    phase |= bit;
                    ys += 1;
                }
            }
        }
        (flip, phase, ys)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+} {}", self.coeff, self.letters())
    }
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

/// A normalized pure state on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `qubits` qubits.
    pub fn zero(qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << qubits];
        amps[0] = ONE;
        Self { qubits, amps }
    }

    /// The computational basis state with the given index.
    pub fn basis(qubits: usize, index: usize) -> Result<Self, SimError> {
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(SimError::InvalidLength(index));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(SimError::InvalidLength(len));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(Self {
            qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `gate` to `wires` and returns the new state.
    pub fn apply_gate(mut self, gate: Gate, wires: &[usize]) -> Result<Self, SimError> {
        self.apply_gate_mut(gate, wires)?;
        Ok(self)
    }

    pub fn apply_gate_mut(&mut self, gate: Gate, wires: &[usize]) -> Result<(), SimError> {
        self.check_wires(gate, wires)?;
        match gate {
            Gate::Identity => {}
            Gate::Rx(t) => self.rotate(Axis::X, t, wires[0]),
            Gate::Ry(t) => self.rotate(Axis::Y, t, wires[0]),
            Gate::Rz(t) => self.rotate(Axis::Z, t, wires[0]),
            Gate::Cnot => self.cnot(wires[0], wires[1]),
        }
        Ok(())
    }

    fn check_wires(&self, gate: Gate, wires: &[usize]) -> Result<(), SimError> {
        if wires.len() != gate.arity() {
            return Err(SimError::WrongArity {
                gate: gate.name(),
                expected: gate.arity(),
                got: wires.len(),
            });
        }
        for &w in wires {
            if w >= self.qubits {
                return Err(SimError::WireOutOfRange {
                    wire: w,
                    qubits: self.qubits,
                });
            }
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(SimError::DuplicateWires(wires.to_vec()));
        }
        Ok(())
    }

    #[inline]
    fn stride(&self, wire: usize) -> usize {
        1 << (self.qubits - 1 - wire)
    }

    /// exp(−iθσ/2) on `wire`. No bounds checks.
    pub(crate) fn rotate(&mut self, axis: Axis, theta: f64, wire: usize) {
        let stride = self.stride(wire);
        let (s, c) = (theta / 2.0).sin_cos();
        let dim = self.amps.len();
        match axis {
            Axis::X => {
                let ms = Complex64::new(0.0, -s);
                for base in (0..dim).step_by(2 * stride) {
                    for i in base..base + stride {
                        let a0 = self.amps[i];
                        let a1 = self.amps[i + stride];
                        self.amps[i] = a0 * c + a1 * ms;
                        self.amps[i + stride] = a0 * ms + a1 * c;
                    }
                }
            }
            Axis::Y => {
                for base in (0..dim).step_by(2 * stride) {
                    for i in base..base + stride {
                        let a0 = self.amps[i];
                        let a1 = self.amps[i + stride];
                        self.amps[i] = a0 * c - a1 * s;
                        self.amps[i + stride] = a0 * s + a1 * c;
                    }
                }
            }
            Axis::Z => {
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                for base in (0..dim).step_by(2 * stride) {
                    for i in base..base + stride {
                        self.amps[i] *= lo;
                        self.amps[i + stride] *= hi;
                    }
                }
            }
        }
    }

    /// CNOT with the given control and target. No bounds checks.
    pub(crate) fn cnot(&mut self, control: usize, target: usize) {
        let cmask = self.stride(control);
        let tmask = self.stride(target);
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    /// Applies the bare Pauli σ_axis on `wire`. No bounds checks.
    pub(crate) fn pauli(&mut self, axis: Axis, wire: usize) {
        let stride = self.stride(wire);
        let dim = self.amps.len();
        for base in (0..dim).step_by(2 * stride) {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                match axis {
                    Axis::X => {
                        self.amps[i] = a1;
                        self.amps[i + stride] = a0;
                    }
                    Axis::Y => {
                        self.amps[i] = -I * a1;
                        self.amps[i + stride] = I * a0;
                    }
                    Axis::Z => self.amps[i + stride] = -a1,
                }
            }
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64, SimError> {
        if self.qubits != other.qubits {
            return Err(SimError::QubitMismatch {
                expected: self.qubits,
                got: other.qubits,
            });
        }
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    /// Σ_k c_k ⟨ψ|P_k|ψ⟩ for a weighted Pauli sum.
    pub fn expectation(&self, observable: &[PauliString]) -> Result<f64, SimError> {
        let mut total = ZERO;
        for term in observable {
            if term.len() != self.qubits {
                return Err(SimError::QubitMismatch {
                    expected: self.qubits,
                    got: term.len(),
                });
            }
            total += self.pauli_expectation(term) * term.coeff;
        }
        let scale = observable.iter().map(|t| t.coeff.abs()).sum::<f64>().max(1.0);
        if total.im.abs() > IMAGINARY_TOLERANCE * scale {
            return Err(SimError::ImaginaryResidue(total.im));
        }
        Ok(total.re)
    }

    /// ⟨ψ|P|ψ⟩ for an unweighted string, complex. No length checks.
    pub(crate) fn pauli_expectation(&self, term: &PauliString) -> Complex64 {
        let (flip, phase, ys) = term.masks();
        let mut acc = ZERO;
        for (b, amp) in self.amps.iter().enumerate() {
            let mut v = self.amps[b ^ flip].conj() * amp;
            if (b & phase).count_ones() % 2 == 1 {
                v = -v;
            }
            acc += v;
        }
        acc * i_pow(ys)
    }

    /// The unnormalized vector (Σ_k c_k P_k)|ψ⟩. No length checks.
    pub(crate) fn apply_observable(&self, observable: &[(f64, &PauliString)]) -> StateVector {
        let mut out = vec![ZERO; self.amps.len()];
        for &(weight, term) in observable {
            let (flip, phase, ys) = term.masks();
            let factor = i_pow(ys) * (weight * term.coeff);
            for (b, amp) in self.amps.iter().enumerate() {
                let sign = if (b & phase).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                out[b ^ flip] += factor * amp * sign;
            }
        }
        StateVector {
            qubits: self.qubits,
            amps: out,
        }
    }
}

/// |⟨a|b⟩|², clamped to [0, 1].
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, SimError> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

/// Builds the dense 2^n × 2^n unitary of a gate sequence by Kronecker
/// expansion of every gate. Intended for testing on small registers.
pub fn full_unitary<'a, I>(qubits: usize, ops: I) -> Result<DMatrix<Complex64>, SimError>
where
    I: IntoIterator<Item = (Gate, &'a [usize])>,
{
    if qubits > MAX_UNITARY_QUBITS {
        return Err(SimError::TooLarge {
            qubits,
            max: MAX_UNITARY_QUBITS,
        });
    }
    let dim = 1usize << qubits;
    let mut total = DMatrix::<Complex64>::identity(dim, dim);
    let probe = StateVector::zero(qubits);
    for (gate, wires) in ops {
        probe.check_wires(gate, wires)?;
        let full = match gate {
            Gate::Cnot => expand_controlled(qubits, wires[0], wires[1]),
            g => expand_single(qubits, wires[0], &g.matrix()),
        };
        total = full * total;
    }
    Ok(total)
}

fn kron_chain(factors: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

fn expand_single(qubits: usize, wire: usize, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let factors: Vec<_> = (0..qubits)
        .map(|q| if q == wire { m.clone() } else { DMatrix::identity(2, 2) })
        .collect();
    kron_chain(&factors)
}

// |0⟩⟨0|_c ⊗ 1 + |1⟩⟨1|_c ⊗ X_t
fn expand_controlled(qubits: usize, control: usize, target: usize) -> DMatrix<Complex64> {
    let p0 = DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
    let p1 = DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
    let x = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let id = DMatrix::<Complex64>::identity(2, 2);
    let build = |cm: &DMatrix<Complex64>, tm: &DMatrix<Complex64>| {
        let factors: Vec<_> = (0..qubits)
            .map(|q| {
                if q == control {
                    cm.clone()
                } else if q == target {
                    tm.clone()
                } else {
                    id.clone()
                }
            })
            .collect();
        kron_chain(&factors)
    };
    build(&p0, &id) + build(&p1, &x)
}

impl FromStr for PauliString {
    type Err = SimError;

    /// Parses `"XZIY"` with unit coefficient.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PauliString::parse(1.0, s)
    }
}
