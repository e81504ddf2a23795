//! The active learning loop.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Dist, Split};
use super::scenario::{generate, ScenarioSpec};
use crate::error::{Error, Result};
use crate::kernel::EmbeddingMatrix;
use crate::model::{SoftmaxClassifier, TrainConfig};
use crate::strategies::{select, PoolView, StrategyKind, StrategySpec};

/// Labeled/unlabeled bookkeeping for one run. The ground-truth ID/OOD flag
/// of a point is read only in [`ALState::reveal`].
#[derive(Debug, Clone)]
pub struct ALState<'d> {
    data: &'d Dataset,
    labeled: Vec<usize>,
    known_id: Vec<(usize, usize)>,
    known_ood: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl<'d> ALState<'d> {
    /// `L` is the labeled split (all ID), `I = L`, `O = ∅`, `U` the unlabeled
    /// split.
    pub fn new(data: &'d Dataset) -> Self {
        let labeled = data.indices(Split::Labeled);
        let known_id = labeled.iter().map(|&i| (i, data.reveal(i).0)).collect();
        Self {
            data,
            labeled,
            known_id,
            known_ood: Vec::new(),
            unlabeled: data.indices(Split::Unlabeled),
        }
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn known_id(&self) -> &[(usize, usize)] {
        &self.known_id
    }

    pub fn known_ood(&self) -> &[usize] {
        &self.known_ood
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// Labeled features and training targets, OOD points as the last class.
    pub fn training_set(&self) -> Result<(EmbeddingMatrix, Vec<usize>)> {
        Ok((
            self.data.rows_of(&self.labeled)?,
            self.data.labels_of(&self.labeled),
        ))
    }

    pub fn view<'a>(&'a self, model: &'a SoftmaxClassifier) -> PoolView<'a> {
        PoolView {
            features: self.data.features(),
            model,
            unlabeled: &self.unlabeled,
            known_id: &self.known_id,
            known_ood: &self.known_ood,
        }
    }

    /// Labels `chosen`, moves it from `U` to `L` and sorts it into `I` and
    /// `O`. Returns how many of the chosen points were ID.
    pub fn reveal(&mut self, chosen: &[usize]) -> Result<usize> {
        let mut sorted = chosen.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::logic("selection contains duplicates"));
        }
        for &i in &sorted {
            if self.unlabeled.binary_search(&i).is_err() {
                return Err(Error::logic(format!("index {i} is not unlabeled")));
            }
        }
        self.unlabeled.retain(|i| sorted.binary_search(i).is_err());
        let mut n_id = 0;
        for &i in chosen {
            let (label, dist) = self.data.reveal(i);
            self.labeled.push(i);
            match dist {
                Dist::Id => {
                    self.known_id.push((i, label));
                    n_id += 1;
                }
                Dist::Ood => self.known_ood.push(i),
            }
        }
        Ok(n_id)
    }
}

/// Where the pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Scenario(ScenarioSpec),
    /// A dataset CSV or a binary manifest (`.json`).
    File(PathBuf),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Scenario(spec) => generate(spec),
            DataSource::File(path) => Dataset::load(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub strategies: Vec<StrategySpec>,
    pub budget: usize,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(data: DataSource, strategies: Vec<StrategySpec>) -> Self {
        Self {
            data,
            strategies,
            budget: 30,
            rounds: 10,
            seeds: (0..5).collect(),
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.rounds == 0 || self.seeds.is_empty() {
            return Err(Error::config(
                "budget, rounds and seeds must all be at least 1",
            ));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("no strategy given"));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// 1-based.
    pub round: usize,
    /// Accuracy on the ID test split of the model trained at the start of
    /// this round.
    pub test_accuracy: f64,
    pub train_epochs: usize,
    pub selected: Vec<usize>,
    pub selected_id: usize,
    /// ID points acquired so far, this round included.
    pub cumulative_id: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: String,
    pub seed: u64,
    pub strategy: StrategySpec,
    pub budget: usize,
    pub rounds_requested: usize,
    pub train: TrainConfig,
    pub data: DataSource,
    /// Representation used by coreset: gradient embeddings, the same as
    /// every other geometric strategy.
    pub coreset_representation: String,
    pub initial_labeled: usize,
    pub unlabeled_id: usize,
    pub unlabeled_ood: usize,
    pub rounds: Vec<RoundMetrics>,
    /// Accuracy after retraining on the final labeled set.
    pub final_test_accuracy: f64,
}

impl ExperimentRecord {
    pub fn accuracy_trace(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.test_accuracy).collect()
    }

    pub fn file_name(&self) -> String {
        format!("{}_seed{}.json", self.method, self.seed)
    }

    /// Copy with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for m in &mut r.rounds {
            m.wall_time_s = 0.0;
        }
        r
    }
}

// splitmix64 finalizer: decorrelates (seed, round, purpose) triples
fn mix(seed: u64, round: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(round.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(salt);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn train_round(
    state: &ALState<'_>,
    data: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(SoftmaxClassifier, usize)> {
    let (x, y) = state.training_set()?;
    let cfg = TrainConfig { seed, ..*cfg };
    let (m, report) = SoftmaxClassifier::train(&x, &y, data.n_classes(), &cfg)?;
    Ok((m, report.epochs))
}

/// One strategy, one seed.
pub fn run_single(
    data: &Dataset,
    source: &DataSource,
    spec: &StrategySpec,
    seed: u64,
    budget: usize,
    rounds: usize,
    train: &TrainConfig,
) -> Result<ExperimentRecord> {
    let test = data.indices(Split::Test);
    let test_x = data.rows_of(&test)?;
    let test_y = data.labels_of(&test);
    let mut state = ALState::new(data);
    let mut metrics = Vec::with_capacity(rounds);
    let mut cumulative = 0;

    for round in 1..=rounds {
        let started = Instant::now();
        let r = round as u64;
        let step = || -> Result<RoundMetrics> {
            let (model, epochs) = train_round(&state, data, train, mix(seed, r, 1))?;
            let acc = model.accuracy(&test_x, &test_y)?;
            let round_spec = spec.with_seed(mix(seed, r, 2));
            let chosen = select(&state.view(&model), &round_spec, budget)?;
            Ok(RoundMetrics {
                round,
                test_accuracy: acc,
                train_epochs: epochs,
                selected: chosen,
                selected_id: 0,
                cumulative_id: 0,
                wall_time_s: 0.0,
            })
        };
        let mut m = step().map_err(|e| e.in_round(round))?;
        m.selected_id = state.reveal(&m.selected).map_err(|e| e.in_round(round))?;
        cumulative += m.selected_id;
        m.cumulative_id = cumulative;
        m.wall_time_s = started.elapsed().as_secs_f64();
        log::info!(
            "{} seed {seed} round {round}: acc {:.4}, {} of {} ID",
            spec.kind,
            m.test_accuracy,
            m.selected_id,
            m.selected.len()
        );
        metrics.push(m);
        if state.unlabeled().is_empty() {
            break;
        }
    }

    let (model, _) = train_round(&state, data, train, mix(seed, rounds as u64 + 1, 1))
        .map_err(|e| e.in_round(rounds + 1))?;
    let final_acc = model.accuracy(&test_x, &test_y)?;

    Ok(ExperimentRecord {
        method: spec.kind.name().to_string(),
        seed,
        strategy: *spec,
        budget,
        rounds_requested: rounds,
        train: *train,
        data: source.clone(),
        coreset_representation: "gradient".into(),
        initial_labeled: data.indices(Split::Labeled).len(),
        unlabeled_id: data.count(Split::Unlabeled, Dist::Id),
        unlabeled_ood: data.count(Split::Unlabeled, Dist::Ood),
        rounds: metrics,
        final_test_accuracy: final_acc,
    })
}

/// Every (strategy, seed) pair as an independent job. Records come back
/// ordered by strategy, then seed.
pub fn run_al_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let data = cfg.data.load()?;
    run_on_dataset(cfg, &data)
}

/// As [`run_al_experiment`] with the dataset already in memory.
pub fn run_on_dataset(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let jobs: Vec<(&StrategySpec, u64)> = cfg
        .strategies
        .iter()
        .flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    jobs.par_iter()
        .map(|(spec, seed)| {
            run_single(
                data, &cfg.data, spec, *seed, cfg.budget, cfg.rounds, &cfg.train,
            )
        })
        .collect()
}

/// Writes one pretty-printed JSON file per record into `dir`.
pub fn write_records(records: &[ExperimentRecord], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    records
        .iter()
        .map(|r| {
            let path = dir.join(r.file_name());
            fs::write(&path, serde_json::to_string_pretty(r)?)?;
            Ok(path)
        })
        .collect()
}

pub fn read_records(dir: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let bytes = fs::read(&p)?;
        // skip unrelated JSON such as dataset manifests
        if let Ok(r) = serde_json::from_slice::<ExperimentRecord>(&bytes) {
            out.push(r);
        }
    }
    if out.is_empty() {
        return Err(Error::data(format!(
            "no experiment records in {}",
            dir.as_ref().display()
        )));
    }
    Ok(out)
}

/// Strategy specs for a list of kinds sharing optimizer settings.
pub fn specs_for(kinds: &[StrategyKind], template: StrategySpec) -> Vec<StrategySpec> {
    kinds
        .iter()
        .map(|&kind| StrategySpec { kind, ..template })
        .collect()
}
