//! The evolutionary search loop.
//!
//! Each generation:
//! 1. every individual is scored without training: ln P(c) from the circuit
//!    DAG and E(c) from the fidelity distribution;
//! 2. individuals whose ln P(c) lies outside a percentile band of the current
//!    population get proxy fitness −∞; the rest are ranked by E(c) and the top
//!    K survivors are trained;
//! 3. the parameters of every trained individual are blended toward those of
//!    the generation's best (parameter reuse);
//! 4. the best individual found so far is carried over unchanged, and the
//!    remaining slots are filled by tournament selection, single-point column
//!    crossover and per-cell mutation, or by a sampler biased toward the
//!    best genome.
//!
//! All randomness is drawn from streams keyed by (seed, generation, index,
//! purpose), and parallel results are collected by index, so the outcome does
//! not depend on the number of worker threads.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{build_dag, expressivity, AnalysisConfig, AnalysisError};
use crate::circuit::{build_reupload, CircuitError, CircuitGenome, CompiledCircuit, GateVocabulary, ReuploadTemplate};
use crate::seed::{self, purpose};
use crate::serde_float;
use crate::tasks::Task;
use crate::training::{focus, reuse, Affine, OptimizerConfig, ParameterVector, ReuseConfig, TrainError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Which untrained proxies gate the trained stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// No proxies: the first K individuals are trained.
    None,
    /// Path-count band only; in-band individuals are ranked by ln P(c).
    Dag,
    /// Path-count band, then ranking by expressivity.
    #[default]
    DagKl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub generations: usize,
    pub population: usize,
    pub top_k: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Probability that a non-elite slot is drawn from the biased sampler
    /// instead of being bred.
    pub immigrant_rate: f64,
    /// Probability that the biased sampler copies a cell of the best genome.
    pub sampler_bias: f64,
    /// Percentile band [lo, hi] on ln P(c), in percent.
    pub band: [f64; 2],
    pub reuse_alpha: f64,
    pub filter: FilterMode,
    /// Run seed; supplied by the caller rather than read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            generations: 10,
            population: 5,
            top_k: 5,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            immigrant_rate: 0.2,
            sampler_bias: 0.5,
            band: [25.0, 90.0],
            reuse_alpha: 0.9,
            filter: FilterMode::DagKl,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: String| Err(EvolutionError::InvalidConfig(m));
        if self.generations == 0 {
            return bad("generations must be at least 1".into());
        }
        if self.population == 0 {
            return bad("population must be at least 1".into());
        }
        if self.top_k == 0 || self.top_k > self.population {
            return bad(format!(
                "top_k ({}) must lie in 1..=population ({})",
                self.top_k, self.population
            ));
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
            ("immigrant_rate", self.immigrant_rate),
            ("sampler_bias", self.sampler_bias),
            ("reuse_alpha", self.reuse_alpha),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        let [lo, hi] = self.band;
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return bad(format!("band must satisfy 0 <= lo < hi <= 100, got [{lo}, {hi}]"));
        }
        Ok(())
    }
}

/// Circuit shape shared by every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub qubits: usize,
    pub layers: usize,
    pub vocab: GateVocabulary,
    pub template: ReuploadTemplate,
}

impl SearchSpace {
    pub fn new(qubits: usize, layers: usize) -> Self {
        Self {
            qubits,
            layers,
            vocab: GateVocabulary::default(),
            template: ReuploadTemplate::default(),
        }
    }

    pub fn compile(&self, genome: &CircuitGenome) -> Result<CompiledCircuit, CircuitError> {
        genome.check_dims(self.qubits, self.layers)?;
        build_reupload(genome, &self.vocab, &self.template)
    }
}

/// Untrained scores of one individual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyScore {
    pub log_path_count: f64,
    #[serde(with = "serde_float::option")]
    pub expressivity: Option<f64>,
    #[serde(with = "serde_float")]
    pub fitness: f64,
}

/// Proxy and task fitness side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    #[serde(with = "serde_float")]
    pub proxy_fitness: f64,
    #[serde(with = "serde_float::option")]
    pub task_fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: CircuitGenome,
    pub params: Option<ParameterVector>,
    pub proxy: Option<ProxyScore>,
    #[serde(with = "serde_float::option")]
    pub task_fitness: Option<f64>,
    #[serde(with = "serde_float::option")]
    pub loss: Option<f64>,
}

impl Individual {
    pub fn new(genome: CircuitGenome, params: ParameterVector) -> Self {
        Self {
            genome,
            params: Some(params),
            proxy: None,
            task_fitness: None,
            loss: None,
        }
    }

    pub fn score(&self) -> FitnessScore {
        FitnessScore {
            proxy_fitness: self.proxy.map_or(f64::NEG_INFINITY, |p| p.fitness),
            task_fitness: self.task_fitness,
        }
    }

    fn task_or_min(&self) -> f64 {
        self.task_fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

/// Values of ln P(c) at the band's lower and upper percentiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// Percentiles use linear interpolation between order statistics.
    pub fn from_values(values: &[f64], lo_pct: f64, hi_pct: f64) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            lo: percentile(&sorted, lo_pct),
            hi: percentile(&sorted, hi_pct),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let slack = 1e-12 * (1.0 + v.abs());
        v >= self.lo - slack && v <= self.hi + slack
    }
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// E(c) when ln P(c) is inside the band, −∞ otherwise.
pub fn proxy_fitness(log_path_count: f64, expressivity: f64, band: &Band) -> f64 {
    if band.contains(log_path_count) {
        expressivity
    } else {
        f64::NEG_INFINITY
    }
}

/// Scores every individual and returns the indices of at most `k` survivors,
/// best first. Individuals with proxy fitness −∞ never survive; ties are
/// broken by genome order, then by index.
pub fn filter_population(
    population: &mut [Individual],
    k: usize,
    space: &SearchSpace,
    analysis: &AnalysisConfig,
    evo: &EvolutionConfig,
    generation: usize,
) -> Result<Vec<usize>, EvolutionError> {
    if evo.filter == FilterMode::None {
        for ind in population.iter_mut() {
            ind.proxy = None;
        }
        return Ok((0..k.min(population.len())).collect());
    }
    let scored: Vec<Result<(f64, Option<f64>), EvolutionError>> = population
        .par_iter()
        .enumerate()
        .map(|(idx, ind)| {
            let circuit = space.compile(&ind.genome)?;
            let log_p = build_dag(&circuit).log_path_count;
            let e = match evo.filter {
                FilterMode::DagKl => {
                    let s = seed::derive(evo.seed, &[generation as u64, idx as u64, purpose::PROXY]);
                    Some(expressivity(&circuit, analysis.samples, analysis.bins, s)?.expressivity)
                }
                _ => None,
            };
            Ok((log_p, e))
        })
        .collect();
    let scored = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    let logs: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let band = Band::from_values(&logs, evo.band[0], evo.band[1]);
    for (ind, &(log_p, e)) in population.iter_mut().zip(&scored) {
        // without an expressivity score the path count itself ranks the band
        let rank_value = e.unwrap_or(log_p);
        ind.proxy = Some(ProxyScore {
            log_path_count: log_p,
            expressivity: e,
            fitness: proxy_fitness(log_p, rank_value, &band),
        });
    }
    let mut order: Vec<usize> = (0..population.len())
        .filter(|&i| population[i].score().proxy_fitness > f64::NEG_INFINITY)
        .collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (population[a].score().proxy_fitness, population[b].score().proxy_fitness);
        pb.total_cmp(&pa)
            .then_with(|| population[a].genome.cmp(&population[b].genome))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

/// Single-point column crossover with the cut at `cut` (1 ≤ cut < L):
/// children take columns [0, cut) from one parent and [cut, L) from the other.
pub fn crossover_at(
    a: &CircuitGenome,
    b: &CircuitGenome,
    cut: usize,
) -> Result<(CircuitGenome, CircuitGenome), CircuitError> {
    b.check_dims(a.rows(), a.cols())?;
    let (mut ca, mut cb) = (a.clone(), b.clone());
    for col in cut..a.cols() {
        for row in 0..a.rows() {
            ca.set(row, col, b.get(row, col));
            cb.set(row, col, a.get(row, col));
        }
    }
    Ok((ca, cb))
}

/// Crossover with a uniform cut in 1..L; parents with a single column are
/// returned unchanged. Also returns the cut used (L when there was none).
pub fn crossover<R: Rng + ?Sized>(
    a: &CircuitGenome,
    b: &CircuitGenome,
    rng: &mut R,
) -> Result<(CircuitGenome, CircuitGenome, usize), CircuitError> {
    b.check_dims(a.rows(), a.cols())?;
    if a.cols() < 2 {
        return Ok((a.clone(), b.clone(), a.cols()));
    }
    let cut = rng.random_range(1..a.cols());
    let (ca, cb) = crossover_at(a, b, cut)?;
    Ok((ca, cb, cut))
}

/// Resamples each cell uniformly over the vocabulary with probability `p_mut`.
pub fn mutate<R: Rng + ?Sized>(genome: &CircuitGenome, p_mut: f64, vocab: &GateVocabulary, rng: &mut R) -> CircuitGenome {
    let mut g = genome.clone();
    for row in 0..g.rows() {
        for col in 0..g.cols() {
            if rng.random_bool(p_mut.clamp(0.0, 1.0)) {
                g.set(row, col, rng.random_range(0..vocab.len() as u8));
            }
        }
    }
    g
}

/// Draws a genome that copies each cell of `best` with probability `bias`
/// and is uniform otherwise.
pub fn biased_sample<R: Rng + ?Sized>(
    best: &CircuitGenome,
    bias: f64,
    vocab: &GateVocabulary,
    rng: &mut R,
) -> CircuitGenome {
    let mut g = best.clone();
    for row in 0..g.rows() {
        for col in 0..g.cols() {
            let copy = rng.random_bool(bias.clamp(0.0, 1.0));
            let fresh = rng.random_range(0..vocab.len() as u8);
            if !copy {
                g.set(row, col, fresh);
            }
        }
    }
    g
}

/// Parameters for `child`, copied column by column from the parent that
/// supplied each column when the slot counts of that column agree, and zero
/// otherwise. `source[col]` indexes into `parents`.
pub fn inherit_params(
    space: &SearchSpace,
    child: &CircuitGenome,
    parents: &[(&CircuitGenome, &ParameterVector)],
    source: &[usize],
) -> Result<ParameterVector, CircuitError> {
    let circuit = space.compile(child)?;
    let parent_circuits = parents
        .iter()
        .map(|(g, _)| space.compile(g))
        .collect::<Result<Vec<_>, _>>()?;
    let mut values = vec![0.0; circuit.num_params()];
    let blocks = if space.template.tie_parameters { 1 } else { space.template.reuploads };
    for block in 0..blocks {
        for (col, &src) in source.iter().enumerate() {
            let mine = circuit.slots_at(block, col);
            let theirs = parent_circuits[src].slots_at(block, col);
            let params = parents[src].1;
            if mine.len() == theirs.len() && theirs.iter().all(|&s| s < params.len()) {
                for (&m, &t) in mine.iter().zip(&theirs) {
                    values[m] = params.values[t];
                }
            }
        }
    }
    Ok(ParameterVector {
        values,
        affine: parents.first().and_then(|(_, p)| p.affine),
    })
}

/// Fresh parameters drawn uniformly from [−π, π), with the identity affine
/// readout when the task uses one.
pub fn initial_params(stream_seed: u64, d: usize, affine: bool) -> ParameterVector {
    let mut rng = seed::stream(stream_seed, &[purpose::INIT]);
    let values = (0..d).map(|_| rng.random_range(-PI..PI)).collect();
    ParameterVector {
        values,
        affine: affine.then(Affine::default),
    }
}

/// Per-individual summary kept in the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub genome: CircuitGenome,
    pub params: usize,
    pub cnots: usize,
    pub proxy: Option<ProxyScore>,
    pub focused: bool,
    #[serde(with = "serde_float::option")]
    pub task_fitness: Option<f64>,
    #[serde(with = "serde_float::option")]
    pub loss: Option<f64>,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub focused: usize,
    #[serde(with = "serde_float::option")]
    pub best_proxy: Option<f64>,
    #[serde(with = "serde_float::option")]
    pub mean_proxy: Option<f64>,
    /// Best task fitness present in the generation, including the carried
    /// elite whether or not it was re-trained.
    #[serde(with = "serde_float")]
    pub best_task_fitness: f64,
    /// Mean over the individuals trained in this generation.
    #[serde(with = "serde_float::option")]
    pub mean_task_fitness: Option<f64>,
    #[serde(with = "serde_float")]
    pub best_so_far_task_fitness: f64,
    #[serde(with = "serde_float::option")]
    pub best_so_far_loss: Option<f64>,
    pub individuals: Vec<IndividualRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Individual,
    pub history: Vec<GenerationRecord>,
}

struct FocusResult {
    params: ParameterVector,
    loss: f64,
    fitness: f64,
    steps: usize,
    failure: Option<String>,
}

/// Runs the search. See [`run_quest_a_with`] for a per-generation callback.
pub fn run_quest_a(
    task: &Task,
    space: &SearchSpace,
    evo: &EvolutionConfig,
    analysis: &AnalysisConfig,
    optimizer: &OptimizerConfig,
) -> Result<SearchOutcome, EvolutionError> {
    run_quest_a_with(task, space, evo, analysis, optimizer, |_| {})
}

/// Runs the search, calling `on_generation` after each generation completes.
pub fn run_quest_a_with(
    task: &Task,
    space: &SearchSpace,
    evo: &EvolutionConfig,
    analysis: &AnalysisConfig,
    optimizer: &OptimizerConfig,
    mut on_generation: impl FnMut(&GenerationRecord),
) -> Result<SearchOutcome, EvolutionError> {
    evo.validate()?;
    optimizer.validate()?;
    ReuseConfig { alpha: evo.reuse_alpha }.validate()?;
    let reuse_cfg = ReuseConfig { alpha: evo.reuse_alpha };
    let vocab = &space.vocab;
    let affine = task.uses_affine();

    let mut population = (0..evo.population)
        .map(|idx| {
            let mut rng = seed::stream(evo.seed, &[0, idx as u64, purpose::SAMPLE]);
            let genome = CircuitGenome::sample(&mut rng, space.qubits, space.layers, vocab)?;
            let d = space.compile(&genome)?.num_params();
            let s = seed::derive(evo.seed, &[0, idx as u64]);
            Ok(Individual::new(genome, initial_params(s, d, affine)))
        })
        .collect::<Result<Vec<_>, EvolutionError>>()?;

    let mut best: Option<Individual> = None;
    let mut history = Vec::with_capacity(evo.generations);

    for generation in 0..evo.generations {
        for ind in population.iter_mut() {
            ind.proxy = None;
        }
        let survivors = filter_population(&mut population, evo.top_k, space, analysis, evo, generation)?;

        let results: Vec<Result<FocusResult, EvolutionError>> = survivors
            .par_iter()
            .map(|&idx| {
                let ind = &population[idx];
                let circuit = space.compile(&ind.genome)?;
                let init = ind.params.clone().expect("every individual carries parameters");
                Ok(match focus(&circuit, &init, task, optimizer) {
                    Ok((params, report)) => FocusResult {
                        params,
                        loss: report.best_loss,
                        fitness: task.fitness(report.best_loss),
                        steps: report.steps,
                        failure: None,
                    },
                    Err(e @ TrainError::Diverged { .. }) => FocusResult {
                        params: init,
                        loss: f64::NAN,
                        fitness: f64::NEG_INFINITY,
                        steps: 0,
                        failure: Some(e.to_string()),
                    },
                    Err(e) => return Err(e.into()),
                })
            })
            .collect();

        let mut steps = vec![0usize; population.len()];
        let mut failures: Vec<Option<String>> = vec![None; population.len()];
        let mut focused = vec![false; population.len()];
        for (&idx, result) in survivors.iter().zip(results) {
            let r = result?;
            let ind = &mut population[idx];
            ind.params = Some(r.params);
            ind.task_fitness = Some(r.fitness);
            ind.loss = r.loss.is_finite().then_some(r.loss);
            steps[idx] = r.steps;
            failures[idx] = r.failure;
            focused[idx] = true;
        }

        // generation best among the trained individuals, earliest index on ties
        let gen_best = survivors
            .iter()
            .copied()
            .max_by(|&a, &b| {
                population[a]
                    .task_or_min()
                    .total_cmp(&population[b].task_or_min())
                    .then(b.cmp(&a))
            });
        if let Some(gb) = gen_best {
            let candidate = &population[gb];
            if best.as_ref().is_none_or(|b| candidate.task_or_min() > b.task_or_min()) {
                best = Some(candidate.clone());
            }
        }

        let record = generation_record(generation, space, &population, &focused, &steps, &failures, best.as_ref());
        on_generation(&record);
        history.push(record);

        if generation + 1 == evo.generations {
            break;
        }

        // parameter reuse toward the generation's best trained individual
        if let Some(gb) = gen_best {
            let best_params = population[gb].params.clone().expect("trained");
            for &idx in &survivors {
                if idx != gb {
                    let own = population[idx].params.as_ref().expect("trained");
                    population[idx].params = Some(reuse(own, &best_params, &reuse_cfg)?);
                }
            }
        }

        population = next_generation(&population, best.as_ref(), space, evo, generation + 1, affine, &reuse_cfg)?;
    }

    let best = best.expect("at least one generation ran");
    Ok(SearchOutcome { best, history })
}

fn tournament<R: Rng + ?Sized>(population: &[Individual], rng: &mut R) -> usize {
    let a = rng.random_range(0..population.len());
    let b = rng.random_range(0..population.len());
    match population[a].task_or_min().total_cmp(&population[b].task_or_min()) {
        Ordering::Less => b,
        Ordering::Greater => a,
        Ordering::Equal => a.min(b),
    }
}

fn next_generation(
    population: &[Individual],
    elite: Option<&Individual>,
    space: &SearchSpace,
    evo: &EvolutionConfig,
    generation: usize,
    affine: bool,
    reuse_cfg: &ReuseConfig,
) -> Result<Vec<Individual>, EvolutionError> {
    let mut next = Vec::with_capacity(evo.population);
    if let Some(e) = elite {
        next.push(Individual {
            proxy: None,
            ..e.clone()
        });
    }
    let best_genome = elite.map(|e| &e.genome);
    let best_params = elite.and_then(|e| e.params.as_ref());
    let cols = space.layers;
    for idx in next.len()..evo.population {
        let mut rng = seed::stream(evo.seed, &[generation as u64, idx as u64, purpose::BREED]);
        let immigrant = best_genome.is_some() && rng.random_bool(evo.immigrant_rate);
        let (genome, params) = if immigrant {
            let g = biased_sample(best_genome.expect("checked"), evo.sampler_bias, &space.vocab, &mut rng);
            let d = space.compile(&g)?.num_params();
            let s = seed::derive(evo.seed, &[generation as u64, idx as u64]);
            (g.clone(), initial_params(s, d, affine))
        } else {
            let pa = tournament(population, &mut rng);
            let pb = tournament(population, &mut rng);
            let (a, b) = (&population[pa], &population[pb]);
            let (child, cut) = if rng.random_bool(evo.crossover_rate) {
                let (ca, _, cut) = crossover(&a.genome, &b.genome, &mut rng)?;
                (ca, cut)
            } else {
                (a.genome.clone(), cols)
            };
            let child = mutate(&child, evo.mutation_rate, &space.vocab, &mut rng);
            let source: Vec<usize> = (0..cols).map(|c| usize::from(c >= cut)).collect();
            let pa_params = a.params.as_ref().expect("every individual carries parameters");
            let pb_params = b.params.as_ref().expect("every individual carries parameters");
            let params = inherit_params(space, &child, &[(&a.genome, pa_params), (&b.genome, pb_params)], &source)?;
            (child, params)
        };
        let params = match best_params {
            Some(bp) => reuse(&params, bp, reuse_cfg)?,
            None => params,
        };
        next.push(Individual::new(genome, params));
    }
    Ok(next)
}

fn generation_record(
    generation: usize,
    space: &SearchSpace,
    population: &[Individual],
    focused: &[bool],
    steps: &[usize],
    failures: &[Option<String>],
    best: Option<&Individual>,
) -> GenerationRecord {
    let proxies: Vec<f64> = population
        .iter()
        .filter_map(|i| i.proxy.map(|p| p.fitness))
        .filter(|f| f.is_finite())
        .collect();
    let task: Vec<f64> = population
        .iter()
        .zip(focused)
        .filter(|(_, &f)| f)
        .filter_map(|(i, _)| i.task_fitness)
        .filter(|f| f.is_finite())
        .collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    // the carried elite keeps its fitness even when the filter skips it
    let best_task = population
        .iter()
        .map(Individual::task_or_min)
        .fold(f64::NEG_INFINITY, f64::max);
    let individuals = population
        .iter()
        .enumerate()
        .map(|(i, ind)| {
            let circuit = space.compile(&ind.genome).ok();
            IndividualRecord {
                genome: ind.genome.clone(),
                params: circuit.as_ref().map_or(0, |c| c.num_params()),
                cnots: circuit.as_ref().map_or(0, |c| c.cnot_count()),
                proxy: ind.proxy,
                focused: focused[i],
                task_fitness: ind.task_fitness,
                loss: ind.loss,
                steps: steps[i],
                failure: failures[i].clone(),
            }
        })
        .collect();
    GenerationRecord {
        generation,
        focused: focused.iter().filter(|&&f| f).count(),
        best_proxy: proxies.iter().cloned().reduce(f64::max),
        mean_proxy: mean(&proxies),
        best_task_fitness: best_task,
        mean_task_fitness: mean(&task),
        best_so_far_task_fitness: best.map_or(f64::NEG_INFINITY, Individual::task_or_min),
        best_so_far_loss: best.and_then(|b| b.loss),
        individuals,
    }
}
