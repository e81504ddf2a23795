//! Budget-constrained greedy maximization.
//!
//! Three variants share one contract: every step commits the candidate with
//! the largest marginal gain among those examined, ties go to the lowest
//! index, and the run is deterministic (for stochastic greedy, given the
//! seed) regardless of how gain queries are scheduled across threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// below this many candidates a step is evaluated on the calling thread
const PAR_THRESHOLD: usize = 512;

/// A set function under incremental construction.
///
/// `gain` must be a pure read of the current state so it can be queried from
/// several threads between commits. It is only called for indices that have
/// not been committed.
pub trait SetObjective: Sync {
    /// Marginal gain `f(A ∪ {j}) − f(A)` of an uncommitted index.
    fn gain(&self, j: usize) -> f64;

    /// Adds `j` to the selection and returns the gain it realised.
    fn commit(&mut self, j: usize) -> Result<f64>;

    /// Current value `f(A)`.
    fn value(&self) -> f64;

    fn selected(&self) -> &[usize];

    fn is_monotone(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Vec<usize>,
    pub gains: Vec<f64>,
    pub objective_value: f64,
    /// Number of gain queries issued.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Naive,
    Lazy,
    Stochastic,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Naive => "naive",
            OptimizerKind::Lazy => "lazy",
            OptimizerKind::Stochastic => "stochastic",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(OptimizerKind::Naive),
            "lazy" => Ok(OptimizerKind::Lazy),
            "stochastic" => Ok(OptimizerKind::Stochastic),
            other => Err(Error::config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    /// Stop at the first step whose best gain is not positive. Off by
    /// default so that a run always fills its budget.
    pub stop_on_nonpositive: bool,
    /// Evaluate a step's gain queries on the rayon pool.
    pub parallel: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            stop_on_nonpositive: false,
            parallel: true,
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 0.01;

fn prepare<O: SetObjective>(obj: &O, candidates: &[usize], budget: usize) -> Result<Vec<usize>> {
    let mut pool: Vec<usize> = candidates.to_vec();
    pool.sort_unstable();
    if pool.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("candidate list contains duplicates"));
    }
    let taken = obj.selected();
    pool.retain(|j| !taken.contains(j));
    if budget > 0 && pool.is_empty() {
        return Err(Error::config("no candidates to select from"));
    }
    if budget > pool.len() {
        log::warn!(
            "budget {budget} exceeds the {} available candidates; selecting all of them",
            pool.len()
        );
    }
    Ok(pool)
}

fn gains_for<O: SetObjective>(obj: &O, pool: &[usize], opts: &GreedyOptions) -> Vec<f64> {
    if opts.parallel && pool.len() >= PAR_THRESHOLD {
        pool.par_iter().map(|&j| obj.gain(j)).collect()
    } else {
        pool.iter().map(|&j| obj.gain(j)).collect()
    }
}

// position of the best gain; `pool` is sorted so the first maximum is the
// lowest index. NaN never wins.
fn best_of(gains: &[f64], pool: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (p, &g) in gains.iter().enumerate() {
        if g.is_nan() {
            continue;
        }
        match best {
            None => best = Some(p),
            Some(b) if g > gains[b] || (g == gains[b] && pool[p] < pool[b]) => best = Some(p),
            _ => {}
        }
    }
    best
}

struct Picker<'a, O> {
    obj: &'a mut O,
    opts: GreedyOptions,
    result: SelectionResult,
}

impl<'a, O: SetObjective> Picker<'a, O> {
    fn new(obj: &'a mut O, opts: &GreedyOptions) -> Self {
        Self {
            obj,
            opts: *opts,
            result: SelectionResult {
                chosen: Vec::new(),
                gains: Vec::new(),
                objective_value: 0.0,
                evaluations: 0,
            },
        }
    }

    /// Commits `j` unless the run should stop here. Returns false to stop.
    fn take(&mut self, j: usize, gain: f64) -> Result<bool> {
        if gain == f64::NEG_INFINITY {
            log::warn!("no candidate with a finite gain remains; stopping early");
            return Ok(false);
        }
        if self.opts.stop_on_nonpositive && gain <= 0.0 {
            return Ok(false);
        }
        let realised = self.obj.commit(j)?;
        self.result.chosen.push(j);
        self.result.gains.push(realised);
        Ok(true)
    }

    fn finish(mut self) -> SelectionResult {
        self.result.objective_value = self.obj.value();
        self.result
    }
}

/// Evaluates every remaining candidate at every step.
pub fn naive_greedy<O: SetObjective>(
    obj: &mut O,
    candidates: &[usize],
    budget: usize,
    opts: &GreedyOptions,
) -> Result<SelectionResult> {
    let mut pool = prepare(obj, candidates, budget)?;
    let steps = budget.min(pool.len());
    let mut picker = Picker::new(obj, opts);
    for _ in 0..steps {
        let gains = gains_for(&*picker.obj, &pool, opts);
        picker.result.evaluations += pool.len();
        let Some(b) = best_of(&gains, &pool) else {
            break;
        };
        if !picker.take(pool[b], gains[b])? {
            break;
        }
        pool.remove(b);
    }
    Ok(picker.finish())
}

#[derive(Debug)]
struct Bound {
    gain: f64,
    index: usize,
    // number of commits when `gain` was computed
    stamp: usize,
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Bound {}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    // max-heap on gain, then on the lowest index
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn sanitize(g: f64) -> f64 {
    if g.is_nan() {
        f64::NEG_INFINITY
    } else {
        g
    }
}

/// Lazy (accelerated) greedy. Stale gains serve as upper bounds, which is
/// valid for submodular objectives; selections equal those of
/// [`naive_greedy`] with at most as many gain queries.
pub fn lazy_greedy<O: SetObjective>(
    obj: &mut O,
    candidates: &[usize],
    budget: usize,
    opts: &GreedyOptions,
) -> Result<SelectionResult> {
    let pool = prepare(obj, candidates, budget)?;
    let steps = budget.min(pool.len());
    let mut picker = Picker::new(obj, opts);
    if steps == 0 {
        return Ok(picker.finish());
    }
    let initial = gains_for(&*picker.obj, &pool, opts);
    picker.result.evaluations += pool.len();
    let mut heap: BinaryHeap<Bound> = pool
        .iter()
        .zip(initial)
        .map(|(&index, g)| Bound {
            gain: sanitize(g),
            index,
            stamp: 0,
        })
        .collect();

    let mut step = 0;
    while step < steps {
        let Some(top) = heap.pop() else { break };
        if top.stamp == step {
            if !picker.take(top.index, top.gain)? {
                break;
            }
            step += 1;
        } else {
            let g = sanitize(picker.obj.gain(top.index));
            picker.result.evaluations += 1;
            heap.push(Bound {
                gain: g,
                index: top.index,
                stamp: step,
            });
        }
    }
    Ok(picker.finish())
}

/// Per-step sample size of stochastic greedy:
/// `min(⌈(n / B) · ln(1/ε)⌉, n)` with `B` capped at `n`.
pub fn stochastic_sample_size(n: usize, budget: usize, epsilon: f64) -> usize {
    if n == 0 || budget == 0 {
        return 0;
    }
    let b = budget.min(n) as f64;
    let s = ((n as f64 / b) * (1.0 / epsilon).ln()).ceil() as usize;
    s.clamp(1, n)
}

/// Stochastic greedy: each step examines a uniform random sample (without
/// replacement) of the remaining candidates and commits its best element.
pub fn stochastic_greedy<O: SetObjective>(
    obj: &mut O,
    candidates: &[usize],
    budget: usize,
    epsilon: f64,
    seed: u64,
    opts: &GreedyOptions,
) -> Result<SelectionResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!(
            "stochastic greedy epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let mut pool = prepare(obj, candidates, budget)?;
    let steps = budget.min(pool.len());
    let sample = stochastic_sample_size(pool.len(), steps, epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picker = Picker::new(obj, opts);
    for _ in 0..steps {
        let s = sample.min(pool.len());
        let mut picks: Vec<usize> = index::sample(&mut rng, pool.len(), s).into_vec();
        picks.sort_unstable();
        let subset: Vec<usize> = picks.iter().map(|&p| pool[p]).collect();
        let gains = gains_for(&*picker.obj, &subset, opts);
        picker.result.evaluations += subset.len();
        let Some(b) = best_of(&gains, &subset) else {
            break;
        };
        if !picker.take(subset[b], gains[b])? {
            break;
        }
        pool.remove(picks[b]);
    }
    Ok(picker.finish())
}

/// Dispatches on `kind`; `epsilon` and `seed` only matter for stochastic
/// greedy.
pub fn maximize<O: SetObjective>(
    obj: &mut O,
    candidates: &[usize],
    budget: usize,
    kind: OptimizerKind,
    epsilon: f64,
    seed: u64,
    opts: &GreedyOptions,
) -> Result<SelectionResult> {
    match kind {
        OptimizerKind::Naive => naive_greedy(obj, candidates, budget, opts),
        OptimizerKind::Lazy => lazy_greedy(obj, candidates, budget, opts),
        OptimizerKind::Stochastic => {
            stochastic_greedy(obj, candidates, budget, epsilon, seed, opts)
        }
    }
}
