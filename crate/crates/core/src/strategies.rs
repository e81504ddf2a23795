//! One acquisition round for each supported strategy.
//!
//! Strategies see the pool through [`PoolView`], which carries features, the
//! trained model, the unlabeled indices and the revealed labels of the
//! labeled set. Ground-truth ID/OOD flags of unlabeled points are not part of
//! the view.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{assemble_joint_kernel, EmbeddingMatrix, Region};
use crate::model::SoftmaxClassifier;
use crate::optimizer::{maximize, GreedyOptions, OptimizerKind, DEFAULT_EPSILON};
use crate::sim::{AcquisitionObjective, SimParams, SimVariant};

type Rows = Vec<Vec<f64>>;

/// Ridge added to the raw cosine kernel for log-determinant measures.
pub const DEFAULT_RIDGE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyKind {
    Sim(SimVariant),
    Entropy,
    Margin,
    Coreset,
    Badge,
    Random,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 11] = [
        StrategyKind::Sim(SimVariant::Flmi),
        StrategyKind::Sim(SimVariant::Logdetmi),
        StrategyKind::Sim(SimVariant::Flcg),
        StrategyKind::Sim(SimVariant::Logdetcg),
        StrategyKind::Sim(SimVariant::Flcmi),
        StrategyKind::Sim(SimVariant::Logdetcmi),
        StrategyKind::Entropy,
        StrategyKind::Margin,
        StrategyKind::Coreset,
        StrategyKind::Badge,
        StrategyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Sim(v) => v.name(),
            StrategyKind::Entropy => "entropy",
            StrategyKind::Margin => "margin",
            StrategyKind::Coreset => "coreset",
            StrategyKind::Badge => "badge",
            StrategyKind::Random => "random",
        }
    }

    pub fn uses_seed(self) -> bool {
        matches!(self, StrategyKind::Badge | StrategyKind::Random)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown strategy '{s}'")))
    }
}

impl TryFrom<String> for StrategyKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategyKind> for String {
    fn from(k: StrategyKind) -> String {
        k.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub optimizer: OptimizerKind,
    /// Stochastic greedy sampling parameter.
    pub epsilon: f64,
    /// Diagonal ridge for log-determinant kernels.
    pub ridge: f64,
    pub eta: f64,
    pub seed: u64,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            optimizer: OptimizerKind::Lazy,
            epsilon: DEFAULT_EPSILON,
            ridge: DEFAULT_RIDGE,
            eta: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// What a strategy may look at during one round.
#[derive(Debug, Clone, Copy)]
pub struct PoolView<'a> {
    /// Feature rows for every item; indices below refer to these rows.
    pub features: &'a EmbeddingMatrix,
    pub model: &'a SoftmaxClassifier,
    pub unlabeled: &'a [usize],
    /// Labeled in-distribution items with their revealed labels.
    pub known_id: &'a [(usize, usize)],
    /// Labeled items revealed as OOD; they train as the model's last class.
    pub known_ood: &'a [usize],
}

impl PoolView<'_> {
    pub fn ood_class(&self) -> usize {
        self.model.n_classes() - 1
    }

    fn hypothesized_gradients(&self, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|&i| {
                let x = self.features.row(i);
                let y = self.model.hypothesized_label(x)?;
                self.model.gradient_embedding(x, y)
            })
            .collect()
    }

    // (query rows from I, private rows from O)
    fn labeled_gradients(&self) -> Result<(Rows, Rows)> {
        let id = self
            .known_id
            .iter()
            .map(|&(i, y)| self.model.gradient_embedding(self.features.row(i), y))
            .collect::<Result<_>>()?;
        let ood = self.ood_class();
        let o = self
            .known_ood
            .iter()
            .map(|&i| self.model.gradient_embedding(self.features.row(i), ood))
            .collect::<Result<_>>()?;
        Ok((id, o))
    }

    fn probabilities(&self) -> Result<Vec<Vec<f64>>> {
        self.unlabeled
            .iter()
            .map(|&i| self.model.predict_proba(self.features.row(i)))
            .collect()
    }
}

/// Runs one acquisition round and returns `min(budget, |U|)` distinct
/// unlabeled indices.
pub fn select(view: &PoolView<'_>, spec: &StrategySpec, budget: usize) -> Result<Vec<usize>> {
    let chosen = match spec.kind {
        StrategyKind::Sim(v) => sim_select(view, v, spec, budget)?,
        StrategyKind::Entropy => entropy_select(view, budget)?,
        StrategyKind::Margin => margin_select(view, budget)?,
        StrategyKind::Coreset => coreset_select(view, budget)?,
        StrategyKind::Badge => badge_select(view, budget, spec.seed)?,
        StrategyKind::Random => random_select(view.unlabeled, budget, spec.seed),
    };
    debug_assert_eq!(chosen.len(), budget.min(view.unlabeled.len()));
    Ok(chosen)
}

/// Returns the variant actually optimized for the given labeled state.
pub fn effective_variant(variant: SimVariant, n_id: usize, n_ood: usize) -> Result<SimVariant> {
    if variant.uses_query() && n_id == 0 {
        return Err(Error::config(format!(
            "{variant} needs at least one known in-distribution point as query; \
             use flcg or logdetcg when none are labeled"
        )));
    }
    if n_ood == 0 {
        return Ok(variant.without_private());
    }
    Ok(variant)
}

// Rows scaled to unit max-abs entry so tiny gradients of confident
// predictions keep their direction through the cosine; rows that are
// exactly zero come back as None.
fn normalized(rows: Vec<Vec<f64>>) -> Vec<Option<Vec<f64>>> {
    rows.into_iter()
        .map(|mut r| {
            let m = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                r.iter_mut().for_each(|v| *v /= m);
                Some(r)
            } else {
                None
            }
        })
        .collect()
}

fn stack(rows: &[Vec<f64>], dim: usize) -> Result<EmbeddingMatrix> {
    if rows.is_empty() {
        EmbeddingMatrix::empty(dim)
    } else {
        EmbeddingMatrix::from_rows(dim, rows)
    }
}

/// Query ← known ID, private ← known OOD, maximize the measure over the
/// unlabeled pool.
pub fn sim_select(
    view: &PoolView<'_>,
    variant: SimVariant,
    spec: &StrategySpec,
    budget: usize,
) -> Result<Vec<usize>> {
    let variant = effective_variant(variant, view.known_id.len(), view.known_ood.len())?;
    let b = budget.min(view.unlabeled.len());
    if b == 0 {
        return Ok(Vec::new());
    }
    let dim = view.model.n_classes() * view.model.dim();

    let mut pool = Vec::new();
    let mut pool_rows = Vec::new();
    let mut stuck = Vec::new();
    for (k, g) in normalized(view.hypothesized_gradients(view.unlabeled)?)
        .into_iter()
        .enumerate()
    {
        match g {
            Some(g) => {
                pool.push(view.unlabeled[k]);
                pool_rows.push(g);
            }
            None => stuck.push(view.unlabeled[k]),
        }
    }
    let (gi, go) = view.labeled_gradients()?;
    let keep = |rows: Vec<Vec<f64>>, used: bool| -> Vec<Vec<f64>> {
        if used {
            normalized(rows).into_iter().flatten().collect()
        } else {
            Vec::new()
        }
    };
    let q_rows = keep(gi, variant.uses_query());
    let p_rows = keep(go, variant.uses_private());
    if variant.uses_query() && q_rows.is_empty() {
        return Err(Error::Degenerate(
            "every query point has a zero gradient embedding".into(),
        ));
    }

    let fl = variant.is_facility_location();
    let kernel = assemble_joint_kernel(
        &stack(&pool_rows, dim)?,
        &stack(&q_rows, dim)?,
        &stack(&p_rows, dim)?,
        fl,
        if fl { 0.0 } else { spec.ridge },
    )?;
    let mut obj = AcquisitionObjective::new(
        variant,
        &kernel,
        kernel.indices(Region::Query),
        kernel.indices(Region::Private),
        SimParams {
            eta: spec.eta,
            ridge: 0.0,
        },
    )?;
    let candidates = obj.candidates().to_vec();
    let result = maximize(
        &mut obj,
        &candidates,
        b.min(candidates.len()),
        spec.optimizer,
        spec.epsilon,
        spec.seed,
        &GreedyOptions::default(),
    )?;
    let mut chosen: Vec<usize> = result.chosen.iter().map(|&k| pool[k]).collect();
    if chosen.len() < b {
        // greedy stops early on a singular step, and zero-gradient points
        // never enter the kernel; fill from the rest in index order
        log::warn!(
            "{variant} produced {} of {b} picks; filling the remainder in index order",
            chosen.len()
        );
        let mut rest: Vec<usize> = pool
            .iter()
            .chain(&stuck)
            .copied()
            .filter(|i| !chosen.contains(i))
            .collect();
        rest.sort_unstable();
        chosen.extend(rest.into_iter().take(b - chosen.len()));
    }
    Ok(chosen)
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

fn margin(p: &[f64]) -> f64 {
    let (mut a, mut b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in p {
        if v > a {
            b = a;
            a = v;
        } else if v > b {
            b = v;
        }
    }
    a - b
}

// indices of the `b` best scores (higher first when `descending`), ties by
// pool index
fn top_by(view: &PoolView<'_>, scores: &[f64], b: usize, descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| {
        let c = scores[x].partial_cmp(&scores[y]).unwrap_or(Ordering::Equal);
        let c = if descending { c.reverse() } else { c };
        c.then(view.unlabeled[x].cmp(&view.unlabeled[y]))
    });
    order.truncate(b);
    order.into_iter().map(|k| view.unlabeled[k]).collect()
}

/// Highest predictive entropy first.
pub fn entropy_select(view: &PoolView<'_>, budget: usize) -> Result<Vec<usize>> {
    let scores: Vec<f64> = view.probabilities()?.iter().map(|p| entropy(p)).collect();
    Ok(top_by(view, &scores, budget, true))
}

/// Smallest gap between the two most probable classes first.
pub fn margin_select(view: &PoolView<'_>, budget: usize) -> Result<Vec<usize>> {
    if view.model.n_classes() < 2 {
        return Err(Error::config("margin sampling needs at least two classes"));
    }
    let scores: Vec<f64> = view.probabilities()?.iter().map(|p| margin(p)).collect();
    Ok(top_by(view, &scores, budget, false))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy k-center over gradient embeddings: each pick is the unlabeled
/// point farthest from everything labeled or already picked.
pub fn coreset_select(view: &PoolView<'_>, budget: usize) -> Result<Vec<usize>> {
    let pool = view.hypothesized_gradients(view.unlabeled)?;
    let (gi, go) = view.labeled_gradients()?;
    let centers: Vec<&Vec<f64>> = gi.iter().chain(&go).collect();
    Ok(k_center(&pool, &centers, budget)
        .into_iter()
        .map(|k| view.unlabeled[k])
        .collect())
}

/// Positions in `pool` picked by greedy k-center starting from `centers`.
/// With no centers the first pick is position 0.
pub fn k_center(pool: &[Vec<f64>], centers: &[&Vec<f64>], budget: usize) -> Vec<usize> {
    let mut nearest: Vec<f64> = pool
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|c| sq_dist(p, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::with_capacity(budget.min(pool.len()));
    while out.len() < budget.min(pool.len()) {
        let mut best = None;
        for (k, &d) in nearest.iter().enumerate() {
            if taken[k] {
                continue;
            }
            match best {
                Some((_, bd)) if d <= bd => {}
                _ => best = Some((k, d)),
            }
        }
        let (k, _) = best.expect("pool has untaken points");
        taken[k] = true;
        out.push(k);
        for (m, p) in pool.iter().enumerate() {
            if !taken[m] {
                nearest[m] = nearest[m].min(sq_dist(p, &pool[k]));
            }
        }
    }
    out
}

/// k-means++ seeding on hypothesized-label gradient embeddings.
pub fn badge_select(view: &PoolView<'_>, budget: usize, seed: u64) -> Result<Vec<usize>> {
    let pool = view.hypothesized_gradients(view.unlabeled)?;
    Ok(kmeans_pp(&pool, budget, seed)
        .into_iter()
        .map(|k| view.unlabeled[k])
        .collect())
}

// draws a position with probability proportional to `w`; uniform over the
// untaken positions when all weight is zero
fn draw(w: &[f64], taken: &[bool], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (k, &v) in w.iter().enumerate() {
            if v > 0.0 {
                acc += v;
                last = Some(k);
                if acc > u {
                    return k;
                }
            }
        }
        if let Some(k) = last {
            return k;
        }
    }
    let free: Vec<usize> = (0..taken.len()).filter(|&k| !taken[k]).collect();
    free[rng.random_range(0..free.len())]
}

/// Positions picked by k-means++ seeding: the first proportional to squared
/// norm, the rest proportional to squared distance to the nearest pick.
pub fn kmeans_pp(pool: &[Vec<f64>], budget: usize, seed: u64) -> Vec<usize> {
    let b = budget.min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::with_capacity(b);
    if b == 0 {
        return out;
    }
    let mut w: Vec<f64> = pool.iter().map(|g| g.iter().map(|v| v * v).sum()).collect();
    while out.len() < b {
        let k = draw(&w, &taken, &mut rng);
        taken[k] = true;
        out.push(k);
        for (m, g) in pool.iter().enumerate() {
            w[m] = if taken[m] {
                0.0
            } else if out.len() == 1 {
                sq_dist(g, &pool[k])
            } else {
                w[m].min(sq_dist(g, &pool[k]))
            };
        }
    }
    out
}

/// Uniform sample without replacement.
pub fn random_select(unlabeled: &[usize], budget: usize, seed: u64) -> Vec<usize> {
    let b = budget.min(unlabeled.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, unlabeled.len(), b)
        .into_iter()
        .map(|k| unlabeled[k])
        .collect()
}
