//! Trained focusing: task losses, exact gradients, an Adam optimizer with
//! best-seen semantics, and the parameter-reuse blend.
//!
//! Every loss is a smooth function of a handful of Pauli expectation values
//! per sample, so the gradient with respect to the circuit parameters is the
//! derivative of one chained observable O = Σ_k (∂L/∂e_k) P_k. Two exact
//! methods compute it: the parameter-shift rule (two shifted circuit runs per
//! rotation) and the adjoint method (one forward and one reverse sweep).

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CircuitError, CompiledCircuit};
use crate::statevector::{Pauli, PauliString, SimError, StateVector};
use crate::tasks::Task;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("task and circuit disagree: {0}")]
    Incompatible(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite parameter at index {0}")]
    NonFiniteParameter(usize),
    #[error("loss diverged to {loss} at step {step}")]
    Diverged { step: usize, loss: f64 },
    #[error("reuse rate must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("invalid optimizer setting: {0}")]
    InvalidOptimizer(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Classical output map y = w·⟨Z₀⟩ + b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: f64,
    pub b: f64,
}

impl Default for Affine {
    fn default() -> Self {
        Self { w: 1.0, b: 0.0 }
    }
}

/// Circuit angles plus the optional classical affine readout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<Affine>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, affine: None }
    }

    pub fn with_affine(values: Vec<f64>, affine: Affine) -> Self {
        Self {
            values,
            affine: Some(affine),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        if let Some(a) = self.affine {
            v.extend([a.w, a.b]);
        }
        v
    }

    fn unflatten(&self, flat: &[f64]) -> Self {
        let d = self.values.len();
        Self {
            values: flat[..d].to_vec(),
            affine: self.affine.map(|_| Affine {
                w: flat[d],
                b: flat[d + 1],
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReuseConfig {
    pub alpha: f64,
}

impl Default for ReuseConfig {
    fn default() -> Self {
        Self { alpha: 0.9 }
    }
}

impl ReuseConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(TrainError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    #[default]
    ParameterShift,
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Early stop once |ΔL| < tol for `patience` consecutive steps.
    pub tol: f64,
    pub patience: usize,
    pub gradient: GradientMethod,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_steps: 500,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            tol: 1e-8,
            patience: 20,
            gradient: GradientMethod::ParameterShift,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidOptimizer(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !(0.0..).contains(&self.tol) {
            return bad("epsilon must be positive and tol nonnegative");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss after the last step; the initial loss when no step ran.
    pub final_loss: f64,
    /// Lowest loss seen, including the initial point.
    pub best_loss: f64,
    pub initial_loss: f64,
    /// Loss after each optimizer step.
    pub trajectory: Vec<f64>,
    pub steps: usize,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Writes `step,loss` rows, steps counted from 1.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "loss"])?;
        for (i, l) in self.trajectory.iter().enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// First step (1-based) whose loss is at or below `target`.
    pub fn steps_to_target(&self, target: f64) -> Option<usize> {
        self.trajectory.iter().position(|&l| l <= target).map(|i| i + 1)
    }
}

/// Loss value together with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    /// ∂L/∂θ, one entry per circuit parameter slot.
    pub params: Vec<f64>,
    /// (∂L/∂w, ∂L/∂b) when the affine readout is active.
    pub affine: Option<(f64, f64)>,
}

impl LossGradient {
    fn flatten(&self) -> Vec<f64> {
        let mut v = self.params.clone();
        if let Some((w, b)) = self.affine {
            v.extend([w, b]);
        }
        v
    }
}

/// A task bound to a circuit: per-sample inputs and readout observables.
struct Problem<'a> {
    task: &'a Task,
    readout: Vec<PauliString>,
    inputs: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    fn new(circuit: &CompiledCircuit, task: &'a Task) -> Result<Self, TrainError> {
        let n = circuit.qubits();
        let z = |q: usize| PauliString::from_sites(1.0, n, &[(q, Pauli::Z)]);
        match task {
            Task::Vqe(h) => {
                if h.qubits() != n {
                    return Err(TrainError::Incompatible(format!(
                        "Hamiltonian acts on {} qubits, circuit has {n}",
                        h.qubits()
                    )));
                }
                if circuit.num_features() != 0 {
                    return Err(TrainError::Incompatible("VQE circuits take no data features".into()));
                }
                Ok(Self {
                    task,
                    readout: h.terms().to_vec(),
                    inputs: vec![Vec::new()],
                })
            }
            Task::Representation(t) => {
                if t.is_empty() {
                    return Err(TrainError::EmptyDataset);
                }
                // the scalar coordinate is replicated onto every encoding wire
                let f = circuit.num_features();
                Ok(Self {
                    task,
                    readout: vec![z(0)?],
                    inputs: t.coords().iter().map(|&x| vec![x; f]).collect(),
                })
            }
            Task::Classification(t) => {
                if t.is_empty() {
                    return Err(TrainError::EmptyDataset);
                }
                if t.classes() > n {
                    return Err(TrainError::Incompatible(format!(
                        "{} classes need at least as many qubits, circuit has {n}",
                        t.classes()
                    )));
                }
                if circuit.num_features() > t.feature_dim() {
                    return Err(TrainError::Incompatible(format!(
                        "circuit encodes {} features, dataset has {}",
                        circuit.num_features(),
                        t.feature_dim()
                    )));
                }
                Ok(Self {
                    task,
                    readout: (0..t.classes()).map(z).collect::<Result<_, _>>()?,
                    inputs: t.features().to_vec(),
                })
            }
        }
    }

    fn check_params(&self, circuit: &CompiledCircuit, params: &ParameterVector) -> Result<(), TrainError> {
        circuit.check_inputs(&params.values, &[])
            .or_else(|e| match e {
                CircuitError::FeatureCount { .. } => Ok(()),
                e => Err(e),
            })?;
        if let Some(i) = params.flatten().iter().position(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteParameter(i));
        }
        if self.task.uses_affine() && params.affine.is_none() {
            return Err(TrainError::Incompatible("representation tasks need an affine readout".into()));
        }
        Ok(())
    }

    fn expectations(&self, state: &StateVector) -> Vec<f64> {
        self.readout
            .iter()
            .map(|p| state.pauli_expectation(p).re * p.coeff())
            .collect()
    }

    /// Per-sample loss and its partial derivatives: (loss, ∂L/∂e_k, ∂L/∂w, ∂L/∂b).
    fn sample_loss(&self, index: usize, e: &[f64], affine: Option<Affine>) -> (f64, Vec<f64>, f64, f64) {
        match self.task {
            Task::Vqe(_) => (e.iter().sum(), vec![1.0; e.len()], 0.0, 0.0),
            Task::Representation(t) => {
                let a = affine.unwrap_or_default();
                let r = a.w * e[0] + a.b - t.targets()[index];
                (r * r, vec![2.0 * r * a.w], 2.0 * r * e[0], 2.0 * r)
            }
            Task::Classification(t) => {
                let label = t.labels()[index];
                let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = e.iter().map(|v| (v - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                let loss = z.ln() + max - e[label];
                let grad = exps
                    .iter()
                    .enumerate()
                    .map(|(c, x)| x / z - if c == label { 1.0 } else { 0.0 })
                    .collect();
                (loss, grad, 0.0, 0.0)
            }
        }
    }

    fn loss(&self, circuit: &CompiledCircuit, params: &ParameterVector) -> f64 {
        let m = self.inputs.len() as f64;
        self.inputs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let e = self.expectations(&circuit.run(&params.values, x));
                self.sample_loss(i, &e, params.affine).0
            })
            .sum::<f64>()
            / m
    }

    fn loss_and_gradient(
        &self,
        circuit: &CompiledCircuit,
        params: &ParameterVector,
        method: GradientMethod,
    ) -> LossGradient {
        let m = self.inputs.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; circuit.num_params()];
        let (mut gw, mut gb) = (0.0, 0.0);
        for (i, x) in self.inputs.iter().enumerate() {
            let state = circuit.run(&params.values, x);
            let e = self.expectations(&state);
            let (l, de, dw, db) = self.sample_loss(i, &e, params.affine);
            loss += l;
            gw += dw;
            gb += db;
            let observable: Vec<(f64, &PauliString)> = de.iter().cloned().zip(&self.readout).collect();
            match method {
                GradientMethod::ParameterShift => {
                    shift_gradient(circuit, &params.values, x, &observable, &mut grad)
                }
                GradientMethod::Adjoint => adjoint_gradient(circuit, &params.values, x, state, &observable, &mut grad),
            }
        }
        grad.iter_mut().for_each(|g| *g /= m);
        LossGradient {
            loss: loss / m,
            params: grad,
            affine: params.affine.map(|_| (gw / m, gb / m)),
        }
    }
}

fn weighted_expectation(state: &StateVector, observable: &[(f64, &PauliString)]) -> f64 {
    observable
        .iter()
        .map(|(w, p)| w * p.coeff() * state.pauli_expectation(p).re)
        .sum()
}

/// Accumulates ∂⟨O⟩/∂θ into `grad` by the ±π/2 shift rule, one op at a time
/// (a slot shared by several ops receives the sum of their contributions).
fn shift_gradient(
    circuit: &CompiledCircuit,
    params: &[f64],
    features: &[f64],
    observable: &[(f64, &PauliString)],
    grad: &mut [f64],
) {
    let ops = circuit.ops();
    for (k, op) in ops.iter().enumerate() {
        let Some(slot) = op.param_slot() else { continue };
        let mut value = [0.0; 2];
        for (v, shift) in value.iter_mut().zip([FRAC_PI_2, -FRAC_PI_2]) {
            let mut state = StateVector::zero(circuit.qubits());
            for (j, o) in ops.iter().enumerate() {
                o.apply(&mut state, params, features, if j == k { shift } else { 0.0 });
            }
            *v = weighted_expectation(&state, observable);
        }
        grad[slot] += 0.5 * (value[0] - value[1]);
    }
}

/// Accumulates ∂⟨O⟩/∂θ into `grad` by reverse-mode sweep: with ψ_k the state
/// after op k and λ_k = U_{k+1}†…U_N† O ψ_N, a rotation exp(−iθσ/2) at op k
/// contributes Im⟨λ_k|σ|ψ_k⟩.
fn adjoint_gradient(
    circuit: &CompiledCircuit,
    params: &[f64],
    features: &[f64],
    mut psi: StateVector,
    observable: &[(f64, &PauliString)],
    grad: &mut [f64],
) {
    let mut lambda = psi.apply_observable(observable);
    for op in circuit.ops().iter().rev() {
        if let (Some(slot), crate::circuit::Op::Rotation { axis, wire, .. }) = (op.param_slot(), *op) {
            let mut mu = psi.clone();
            mu.pauli(axis, wire);
            grad[slot] += lambda.inner_unchecked(&mu).im;
        }
        op.apply_inverse(&mut psi, params, features);
        op.apply_inverse(&mut lambda, params, features);
    }
}

/// Mean task loss: ⟨H⟩ for VQE, MSE of w·⟨Z₀⟩ + b for representation, and
/// cross-entropy of softmax(⟨Z_0⟩, …, ⟨Z_{C−1}⟩) for classification.
pub fn loss(circuit: &CompiledCircuit, params: &ParameterVector, task: &Task) -> Result<f64, TrainError> {
    let problem = Problem::new(circuit, task)?;
    problem.check_params(circuit, params)?;
    Ok(problem.loss(circuit, params))
}

/// Fraction of samples whose largest ⟨Z_c⟩ is on the labelled class; `None`
/// for tasks other than classification.
pub fn classification_accuracy(
    circuit: &CompiledCircuit,
    params: &ParameterVector,
    task: &Task,
) -> Result<Option<f64>, TrainError> {
    let Task::Classification(t) = task else {
        return Ok(None);
    };
    let problem = Problem::new(circuit, task)?;
    problem.check_params(circuit, params)?;
    let correct = problem
        .inputs
        .iter()
        .zip(t.labels())
        .filter(|(x, &label)| {
            let e = problem.expectations(&circuit.run(&params.values, x));
            let predicted = e
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(c, _)| c);
            predicted == Some(label)
        })
        .count();
    Ok(Some(correct as f64 / t.len() as f64))
}

/// ∂L/∂θ by the parameter-shift rule, one entry per parameter slot.
pub fn gradient(circuit: &CompiledCircuit, params: &ParameterVector, task: &Task) -> Result<Vec<f64>, TrainError> {
    Ok(loss_and_gradient(circuit, params, task, GradientMethod::ParameterShift)?.params)
}

/// Loss plus the full gradient (including the affine readout) by `method`.
pub fn loss_and_gradient(
    circuit: &CompiledCircuit,
    params: &ParameterVector,
    task: &Task,
    method: GradientMethod,
) -> Result<LossGradient, TrainError> {
    let problem = Problem::new(circuit, task)?;
    problem.check_params(circuit, params)?;
    Ok(problem.loss_and_gradient(circuit, params, method))
}

/// Adam from `init`, returning the best parameters seen and the run report.
pub fn focus(
    circuit: &CompiledCircuit,
    init: &ParameterVector,
    task: &Task,
    cfg: &OptimizerConfig,
) -> Result<(ParameterVector, TrainReport), TrainError> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = Problem::new(circuit, task)?;
    problem.check_params(circuit, init)?;

    let mut current = problem.loss_and_gradient(circuit, init, cfg.gradient);
    if !current.loss.is_finite() {
        return Err(TrainError::Diverged {
            step: 0,
            loss: current.loss,
        });
    }
    let initial_loss = current.loss;
    let mut x = init.flatten();
    let mut best = (initial_loss, x.clone());
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut trajectory = Vec::with_capacity(cfg.max_steps);
    let mut quiet = 0usize;
    let mut previous = initial_loss;

    for step in 1..=cfg.max_steps {
        let g = current.flatten();
        let b1t = 1.0 - cfg.beta1.powi(step as i32);
        let b2t = 1.0 - cfg.beta2.powi(step as i32);
        for i in 0..x.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            x[i] -= cfg.learning_rate * (m[i] / b1t) / ((v[i] / b2t).sqrt() + cfg.epsilon);
        }
        let params = init.unflatten(&x);
        current = problem.loss_and_gradient(circuit, &params, cfg.gradient);
        let loss = current.loss;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { step, loss });
        }
        trajectory.push(loss);
        if loss < best.0 {
            best = (loss, x.clone());
        }
        if (loss - previous).abs() < cfg.tol {
            quiet += 1;
            if quiet >= cfg.patience {
                break;
            }
        } else {
            quiet = 0;
        }
        previous = loss;
    }

    let report = TrainReport {
        final_loss: trajectory.last().copied().unwrap_or(initial_loss),
        best_loss: best.0,
        initial_loss,
        steps: trajectory.len(),
        trajectory,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((init.unflatten(&best.1), report))
}

/// θ_new = α·θ_best + (1 − α)·θ_i over the common prefix; entries beyond the
/// prefix are kept from θ_i. The affine readout is blended when both have one.
pub fn reuse(
    theta_i: &ParameterVector,
    theta_best: &ParameterVector,
    cfg: &ReuseConfig,
) -> Result<ParameterVector, TrainError> {
    cfg.validate()?;
    let a = cfg.alpha;
    // own + α·(best − own) returns `own` exactly when the two agree
    let blend = |own: f64, best: f64| if a == 1.0 { best } else { own + a * (best - own) };
    let mut values = theta_i.values.clone();
    for (v, &b) in values.iter_mut().zip(&theta_best.values) {
        *v = blend(*v, b);
    }
    let affine = match (theta_i.affine, theta_best.affine) {
        (Some(own), Some(best)) => Some(Affine {
            w: blend(own.w, best.w),
            b: blend(own.b, best.b),
        }),
        (own, _) => own,
    };
    Ok(ParameterVector { values, affine })
}
