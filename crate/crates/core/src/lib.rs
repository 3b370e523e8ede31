//! Quantum architecture search by evolutionary synthesis.
//!
//! Candidate circuits are indexed by an integer genome over a small gate
//! vocabulary. Each generation is screened without training (DAG path count
//! and fidelity-distribution expressivity), the survivors are trained with
//! exact gradients, and the best trained parameters are blended back into the
//! population before crossover and mutation produce the next generation.
//!
//! Everything runs on the dense statevector simulator in [`statevector`];
//! ground-state energies for the VQE tasks come from the exact solver in
//! [`tasks`].

pub mod ablation;
pub mod analysis;
pub mod circuit;
pub mod evolution;
pub mod seed;
pub mod serde_float;
pub mod statevector;
pub mod tasks;
pub mod training;

pub use analysis::{DagReport, ExpressivityReport};
pub use circuit::{CircuitGenome, CompiledCircuit, GateCode, GateVocabulary, ReuploadTemplate};
pub use evolution::{EvolutionConfig, GenerationRecord, Individual, SearchOutcome};
pub use statevector::{Gate, Pauli, PauliString, StateVector};
pub use tasks::{Hamiltonian, Task};
pub use training::{OptimizerConfig, ParameterVector, ReuseConfig, TrainReport};
pub use ablation::{AblationConfig, AblationOutcome};
pub use analysis::AnalysisConfig;
pub use evolution::SearchSpace;
