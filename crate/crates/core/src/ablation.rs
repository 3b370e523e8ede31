//! Filtering ablation: how quickly does training reach a target loss when
//! the trained circuits are (i) drawn at random, (ii) screened by the
//! path-count band alone, or (iii) screened by the band and ranked by
//! expressivity?
//!
//! For each seed a shared pool of random candidate genomes is drawn. Case (i)
//! trains the first `selected` candidates of the pool; cases (ii) and (iii)
//! run the corresponding proxy filter over the whole pool and train its top
//! `selected` survivors. Every case uses the same optimizer budget and each
//! candidate starts from the same initial parameters in every case. A case's
//! loss curve is the per-epoch mean (or minimum) over its trained circuits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::circuit::CircuitGenome;
use crate::evolution::{filter_population, initial_params, EvolutionConfig, EvolutionError, FilterMode, Individual, SearchSpace};
use crate::seed::{self, purpose};
use crate::tasks::Task;
use crate::training::{focus, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationCase {
    Random,
    DagOnly,
    DagKl,
}

impl AblationCase {
    pub const ALL: [AblationCase; 3] = [AblationCase::Random, AblationCase::DagOnly, AblationCase::DagKl];

    pub fn label(self) -> &'static str {
        match self {
            AblationCase::Random => "random",
            AblationCase::DagOnly => "dag-only",
            AblationCase::DagKl => "dag-kl",
        }
    }

    fn filter(self) -> FilterMode {
        match self {
            AblationCase::Random => FilterMode::None,
            AblationCase::DagOnly => FilterMode::Dag,
            AblationCase::DagKl => FilterMode::DagKl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    /// Size of the random candidate pool per seed.
    pub candidates: usize,
    /// Circuits trained per case.
    pub selected: usize,
    pub seeds: Vec<u64>,
    pub target_loss: f64,
    pub curve: CurveAggregate,
}

/// How the per-epoch losses of a case's trained circuits are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveAggregate {
    #[default]
    Mean,
    Min,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            candidates: 100,
            selected: 5,
            seeds: vec![1, 2, 3, 4, 5],
            target_loss: 0.4,
            curve: CurveAggregate::Mean,
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.selected == 0 || self.selected > self.candidates {
            return Err(EvolutionError::InvalidConfig(format!(
                "selected ({}) must lie in 1..=candidates ({})",
                self.selected, self.candidates
            )));
        }
        if self.seeds.is_empty() {
            return Err(EvolutionError::InvalidConfig("at least one ablation seed is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRun {
    pub case: AblationCase,
    pub seed: u64,
    pub genomes: Vec<CircuitGenome>,
    /// Per-epoch aggregate loss over the trained circuits.
    pub curve: Vec<f64>,
    /// First epoch (1-based) at which the curve reaches the target.
    pub epochs_to_target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: AblationCase,
    /// Median epochs-to-target; runs that never reach it count as budget + 1.
    pub median_epochs: f64,
    pub reached: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub runs: Vec<CaseRun>,
    pub summary: Vec<CaseSummary>,
}

impl AblationOutcome {
    pub fn median(&self, case: AblationCase) -> f64 {
        self.summary
            .iter()
            .find(|s| s.case == case)
            .map_or(f64::NAN, |s| s.median_epochs)
    }

    /// Whether the medians satisfy dag-kl ≤ dag-only ≤ random.
    pub fn ordering_holds(&self) -> bool {
        self.median(AblationCase::DagKl) <= self.median(AblationCase::DagOnly)
            && self.median(AblationCase::DagOnly) <= self.median(AblationCase::Random)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs all three cases for every seed.
pub fn run_ablation(
    task: &Task,
    space: &SearchSpace,
    evo: &EvolutionConfig,
    analysis: &AnalysisConfig,
    optimizer: &OptimizerConfig,
    cfg: &AblationConfig,
) -> Result<AblationOutcome, EvolutionError> {
    cfg.validate()?;
    evo.validate()?;
    optimizer.validate()?;
    let mut runs = Vec::new();
    for &s in &cfg.seeds {
        let pool: Vec<Individual> = (0..cfg.candidates)
            .map(|i| {
                let mut rng = seed::stream(s, &[i as u64, purpose::ABLATION]);
                let genome = CircuitGenome::sample(&mut rng, space.qubits, space.layers, &space.vocab)?;
                let d = space.compile(&genome)?.num_params();
                let params = initial_params(seed::derive(s, &[i as u64, purpose::ABLATION]), d, task.uses_affine());
                Ok(Individual::new(genome, params))
            })
            .collect::<Result<_, EvolutionError>>()?;
        for case in AblationCase::ALL {
            let mut candidates = pool.clone();
            let filter_cfg = EvolutionConfig {
                filter: case.filter(),
                seed: s,
                ..evo.clone()
            };
            let chosen = filter_population(&mut candidates, cfg.selected, space, analysis, &filter_cfg, 0)?;
            let trajectories: Vec<Result<Vec<f64>, EvolutionError>> = chosen
                .par_iter()
                .map(|&i| {
                    let ind = &candidates[i];
                    let circuit = space.compile(&ind.genome)?;
                    let (_, report) = focus(&circuit, ind.params.as_ref().expect("initialized"), task, optimizer)?;
                    Ok(report.trajectory)
                })
                .collect();
            let trajectories = trajectories.into_iter().collect::<Result<Vec<_>, _>>()?;
            let epochs = trajectories.iter().map(Vec::len).max().unwrap_or(0);
            let curve: Vec<f64> = (0..epochs)
                .map(|t| {
                    // runs that stopped early hold their last loss
                    let at = trajectories
                        .iter()
                        .filter(|tr| !tr.is_empty())
                        .map(|tr| tr[t.min(tr.len() - 1)]);
                    match cfg.curve {
                        CurveAggregate::Mean => at.sum::<f64>() / trajectories.len() as f64,
                        CurveAggregate::Min => at.fold(f64::INFINITY, f64::min),
                    }
                })
                .collect();
            let epochs_to_target = curve.iter().position(|&l| l <= cfg.target_loss).map(|i| i + 1);
            runs.push(CaseRun {
                case,
                seed: s,
                genomes: chosen.iter().map(|&i| candidates[i].genome.clone()).collect(),
                curve,
                epochs_to_target,
            });
        }
    }
    let censored = (optimizer.max_steps + 1) as f64;
    let summary = AblationCase::ALL
        .iter()
        .map(|&case| {
            let mine: Vec<&CaseRun> = runs.iter().filter(|r| r.case == case).collect();
            let mut epochs: Vec<f64> = mine
                .iter()
                .map(|r| r.epochs_to_target.map_or(censored, |e| e as f64))
                .collect();
            CaseSummary {
                case,
                median_epochs: median(&mut epochs),
                reached: mine.iter().filter(|r| r.epochs_to_target.is_some()).count(),
                runs: mine.len(),
            }
        })
        .collect();
    Ok(AblationOutcome { runs, summary })
}
