//! Training-free circuit proxies.
//!
//! * Path count P(c): the circuit is a DAG whose nodes are gates plus one
//!   input and one output node per qubit, and whose edges follow each wire.
//!   P(c) is the number of input-to-output paths, counted exactly.
//! * Expressivity E(c): minus the KL divergence between the histogram of
//!   fidelities |⟨ψ(θ)|ψ(φ)⟩|² over random parameter pairs and the Haar
//!   fidelity law with density (N−1)(1−F)^(N−2), N = 2^n.

use std::f64::consts::{LN_2, PI};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CompiledCircuit, Op};
use crate::seed;
use crate::statevector::fidelity;

pub const DEFAULT_SAMPLES: usize = 5000;
pub const DEFAULT_BINS: usize = 75;
/// Additive smoothing applied to both histograms inside the KL logarithm.
pub const KL_EPSILON: f64 = 1e-10;

/// Sampling settings for the expressivity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub samples: usize,
    pub bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid fidelity bin [{lo}, {hi}) for Hilbert dimension {dim}")]
    InvalidBin { lo: f64, hi: f64, dim: f64 },
    #[error("at least {min} fidelity samples required, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("at least {min} histogram bins required, got {got}")]
    TooFewBins { min: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Input(usize),
    Output(usize),
    Gate(usize),
}

/// Explicit gate DAG of a compiled circuit. Node ids are a topological order.
#[derive(Debug, Clone)]
pub struct CircuitDag {
    nodes: Vec<NodeKind>,
    edges: Vec<(usize, usize)>,
}

impl CircuitDag {
    pub fn new(circuit: &CompiledCircuit) -> Self {
        let n = circuit.qubits();
        let mut nodes: Vec<NodeKind> = (0..n).map(NodeKind::Input).collect();
        let mut edges = Vec::new();
        let mut frontier: Vec<usize> = (0..n).collect();
        for (i, op) in circuit.ops().iter().enumerate() {
            let id = nodes.len();
            nodes.push(NodeKind::Gate(i));
            for w in op.wires() {
                edges.push((frontier[w], id));
                frontier[w] = id;
            }
        }
        for (w, &last) in frontier.iter().enumerate() {
            let id = nodes.len();
            nodes.push(NodeKind::Output(w));
            edges.push((last, id));
        }
        Self { nodes, edges }
    }

    pub fn nodes(&self) -> &[NodeKind] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Total number of input→output paths by forward dynamic programming.
    pub fn path_count(&self) -> BigUint {
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            incoming[b].push(a);
        }
        let mut count: Vec<BigUint> = Vec::with_capacity(self.nodes.len());
        let mut total = BigUint::zero();
        for (id, kind) in self.nodes.iter().enumerate() {
            let c = match kind {
                NodeKind::Input(_) => BigUint::one(),
                _ => incoming[id]
                    .iter()
                    .fold(BigUint::zero(), |acc, &p| acc + &count[p]),
            };
            if matches!(kind, NodeKind::Output(_)) {
                total += &c;
            }
            count.push(c);
        }
        total
    }
}

/// Natural log of a big integer without overflowing `f64`.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let head = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    head.ln() + shift as f64 * LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagReport {
    pub nodes: usize,
    pub edges: usize,
    #[serde(with = "decimal")]
    pub path_count: BigUint,
    pub log_path_count: f64,
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom("invalid decimal integer"))
    }
}

pub fn build_dag(circuit: &CompiledCircuit) -> DagReport {
    let dag = CircuitDag::new(circuit);
    let path_count = dag.path_count();
    DagReport {
        nodes: dag.nodes.len(),
        edges: dag.edges.len(),
        log_path_count: ln_biguint(&path_count),
        path_count,
    }
}

/// Haar probability mass of fidelities in `[lo, hi)` for Hilbert dimension `dim`.
pub fn haar_bin_mass(lo: f64, hi: f64, dim: f64) -> Result<f64, AnalysisError> {
    if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) || !(2.0..).contains(&dim) {
        return Err(AnalysisError::InvalidBin { lo, hi, dim });
    }
    // survival function (1 − F)^(N−1), evaluated in log space
    let survival = |f: f64| {
        if f >= 1.0 {
            0.0
        } else {
            ((dim - 1.0) * (-f).ln_1p()).exp()
        }
    };
    Ok(survival(lo) - survival(hi))
}

/// Haar fidelity density (N−1)(1−F)^(N−2).
pub fn haar_density(f: f64, dim: f64) -> f64 {
    (dim - 1.0) * (1.0 - f).powf(dim - 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressivityReport {
    pub expressivity: f64,
    pub samples: usize,
    pub bins: usize,
    pub hilbert_dim: f64,
    /// Empirical bin probabilities on [0, 1].
    pub histogram: Vec<f64>,
    /// Haar bin masses for the same bins.
    pub reference: Vec<f64>,
}

/// Histograms `fidelities` into `bins` equal-width bins and scores them
/// against the Haar law.
pub fn expressivity_from_fidelities(
    fidelities: &[f64],
    bins: usize,
    hilbert_dim: f64,
) -> Result<ExpressivityReport, AnalysisError> {
    if bins < 10 {
        return Err(AnalysisError::TooFewBins { min: 10, got: bins });
    }
    if fidelities.is_empty() {
        return Err(AnalysisError::TooFewSamples { min: 1, got: 0 });
    }
    let mut counts = vec![0usize; bins];
    for &f in fidelities {
        let b = ((f * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = fidelities.len() as f64;
    let histogram: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let reference = (0..bins)
        .map(|b| haar_bin_mass(b as f64 / bins as f64, (b + 1) as f64 / bins as f64, hilbert_dim))
        .collect::<Result<Vec<_>, _>>()?;
    let kl: f64 = histogram
        .iter()
        .zip(&reference)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * ((p + KL_EPSILON) / (q + KL_EPSILON)).ln())
        .sum();
    Ok(ExpressivityReport {
        expressivity: -kl,
        samples: fidelities.len(),
        bins,
        hilbert_dim,
        histogram,
        reference,
    })
}

/// Samples `samples` independent parameter pairs uniformly from [0, 2π)^d and
/// scores the resulting fidelity distribution. Encoding inputs are held at 0.
pub fn expressivity(
    circuit: &CompiledCircuit,
    samples: usize,
    bins: usize,
    rng_seed: u64,
) -> Result<ExpressivityReport, AnalysisError> {
    if samples < 100 {
        return Err(AnalysisError::TooFewSamples {
            min: 100,
            got: samples,
        });
    }
    let mut rng = seed::stream(rng_seed, &[seed::purpose::PROXY]);
    let d = circuit.num_params();
    let features = vec![0.0; circuit.num_features()];
    let mut theta = vec![0.0; d];
    let mut phi = vec![0.0; d];
    let mut fids = Vec::with_capacity(samples);
    for _ in 0..samples {
        theta.iter_mut().for_each(|t| *t = rng.random_range(0.0..2.0 * PI));
        phi.iter_mut().for_each(|t| *t = rng.random_range(0.0..2.0 * PI));
        let a = circuit.run(&theta, &features);
        let b = circuit.run(&phi, &features);
        fids.push(fidelity(&a, &b).expect("same register"));
    }
    let dim = (circuit.qubits() as f64).exp2();
    expressivity_from_fidelities(&fids, bins, dim)
}

/// Number of CNOT gates, the circuit-scale measure the path count tracks.
pub fn cnot_count(circuit: &CompiledCircuit) -> usize {
    circuit
        .ops()
        .iter()
        .filter(|o| matches!(o, Op::Cnot { .. }))
        .count()
}
