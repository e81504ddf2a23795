//! Synthetic ID/OOD pools.
//!
//! In-distribution class `k` is a unit-variance Gaussian around
//! `class_spread · e_k`. OOD points depend on the kind:
//!
//! - `A`: unrelated data, Gaussian clusters (per-coordinate std `ood_std`)
//!   around `separation · e_m` in coordinates no ID class uses;
//! - `B`: corrupted ID samples, heavy additive noise plus random masking of
//!   coordinates;
//! - `C`: a different view, ID class means moved by a fixed orthogonal map;
//! - `D`: domain shift, every class mean translated by one shift vector of
//!   norm `separation`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Dist, Split};
use crate::error::{Error, Result};
use crate::kernel::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    A,
    B,
    C,
    D,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ScenarioKind::A),
            "B" => Ok(ScenarioKind::B),
            "C" => Ok(ScenarioKind::C),
            "D" => Ok(ScenarioKind::D),
            other => Err(Error::config(format!(
                "unknown scenario kind '{other}' (expected A, B, C or D)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub labeled: usize,
    pub unlabeled_id: usize,
    pub unlabeled_ood: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.labeled + self.unlabeled_id + self.unlabeled_ood + self.test
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n_id_classes: usize,
    pub sizes: SplitSizes,
    pub dim: usize,
    pub separation: f64,
    pub class_spread: f64,
    /// Number of remote clusters for kind A.
    pub ood_clusters: usize,
    /// Per-coordinate standard deviation of the kind A remote clusters.
    pub ood_std: f64,
    pub seed: u64,
}

/// Batch size used with the presets.
pub const PRESET_BUDGET: usize = 30;

impl ScenarioSpec {
    /// Split sizes of the reference experiments. The test split is not given
    /// there and is fixed at 500; kind D has no published sizes at all.
    pub fn preset(kind: ScenarioKind) -> Self {
        let (n_id, labeled, unlabeled_id, unlabeled_ood) = match kind {
            ScenarioKind::A => (7, 140, 1061, 5000),
            ScenarioKind::B => (11, 110, 1650, 8000),
            ScenarioKind::C => (11, 50, 750, 8000),
            ScenarioKind::D => (2, 20, 1000, 4000),
        };
        Self {
            kind,
            n_id_classes: n_id,
            sizes: SplitSizes {
                labeled,
                unlabeled_id,
                unlabeled_ood,
                test: 500,
            },
            dim: n_id + 3 + 2,
            separation: 10.0,
            class_spread: 10.0,
            ood_clusters: 3,
            ood_std: 1.0,
            seed: 0,
        }
    }

    /// Every split divided by `divisor`, rounding down but keeping at least
    /// one row.
    pub fn scaled(mut self, divisor: usize) -> Self {
        let d = divisor.max(1);
        let s = &mut self.sizes;
        for v in [
            &mut s.labeled,
            &mut s.unlabeled_id,
            &mut s.unlabeled_ood,
            &mut s.test,
        ] {
            *v = (*v / d).max(1);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_id_classes == 0 {
            return Err(Error::config("need at least one in-distribution class"));
        }
        let s = &self.sizes;
        if s.labeled == 0 || s.unlabeled_id + s.unlabeled_ood == 0 || s.test == 0 {
            return Err(Error::config("split sizes must be positive"));
        }
        if !(self.separation >= 0.0) || !(self.class_spread > 0.0) || !(self.ood_std >= 0.0) {
            return Err(Error::config(
                "separation and ood_std must be ≥ 0 and class_spread > 0",
            ));
        }
        let need = match self.kind {
            ScenarioKind::A => {
                if self.ood_clusters == 0 {
                    return Err(Error::config("kind A needs at least one OOD cluster"));
                }
                self.n_id_classes + self.ood_clusters
            }
            _ => self.n_id_classes,
        };
        if self.dim < need {
            return Err(Error::config(format!(
                "dim {} is too small, kind {} with {} classes needs {need}",
                self.dim, self.kind, self.n_id_classes
            )));
        }
        Ok(())
    }

    pub fn id_mean(&self, class: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        m[class] = self.class_spread;
        m
    }
}

struct Sampler<'s> {
    spec: &'s ScenarioSpec,
    rng: ChaCha8Rng,
    rotation: Option<DMatrix<f64>>,
    shift: Option<Vec<f64>>,
}

impl<'s> Sampler<'s> {
    fn new(spec: &'s ScenarioSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let d = spec.dim;
        let rotation = (spec.kind == ScenarioKind::C).then(|| {
            let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = g.qr();
            let (mut q, r) = (qr.q(), qr.r());
            // sign fix makes the map unique for a given Gaussian draw
            for k in 0..d {
                if r[(k, k)] < 0.0 {
                    q.column_mut(k).neg_mut();
                }
            }
            q
        });
        let shift = (spec.kind == ScenarioKind::D).then(|| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| spec.separation * x / n).collect()
        });
        Self {
            spec,
            rng,
            rotation,
            shift,
        }
    }

    fn noise(&mut self, mean: &[f64]) -> Vec<f64> {
        mean.iter()
            .map(|m| m + self.rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn id(&mut self, class: usize) -> Vec<f64> {
        let m = self.spec.id_mean(class);
        self.noise(&m)
    }

    fn ood(&mut self) -> Vec<f64> {
        let spec = self.spec;
        let class = self.rng.random_range(0..spec.n_id_classes);
        match spec.kind {
            ScenarioKind::A => {
                let c = self.rng.random_range(0..spec.ood_clusters);
                let mut m = vec![0.0; spec.dim];
                m[spec.n_id_classes + c] = spec.separation;
                m.iter()
                    .map(|v| v + spec.ood_std * self.rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            ScenarioKind::B => {
                let scale = spec.separation / (spec.dim as f64).sqrt();
                let mut x = self.id(class);
                for v in &mut x {
                    *v += scale * self.rng.sample::<f64, _>(StandardNormal);
                    if self.rng.random_bool(0.5) {
                        *v = 0.0;
                    }
                }
                x
            }
            ScenarioKind::C => {
                let m = nalgebra::DVector::from_vec(spec.id_mean(class));
                let rotated = self.rotation.as_ref().expect("kind C has a rotation") * m;
                self.noise(rotated.as_slice())
            }
            ScenarioKind::D => {
                let mut m = spec.id_mean(class);
                for (v, s) in m
                    .iter_mut()
                    .zip(self.shift.as_ref().expect("kind D has a shift"))
                {
                    *v += s;
                }
                self.noise(&m)
            }
        }
    }
}

/// Rows come out as labeled, then unlabeled (ID and OOD shuffled together),
/// then test. Labeled and test rows are ID only with classes assigned round
/// robin; unlabeled ID classes are uniform.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let s = spec.sizes;
    let n_id = spec.n_id_classes;
    let mut sampler = Sampler::new(spec);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(s.total());
    let mut labels = Vec::with_capacity(s.total());
    let mut split = Vec::with_capacity(s.total());
    let mut dist = Vec::with_capacity(s.total());

    for i in 0..s.labeled {
        rows.push(sampler.id(i % n_id));
        labels.push(i % n_id);
        split.push(Split::Labeled);
        dist.push(Dist::Id);
    }

    let mut pool: Vec<(Vec<f64>, usize, Dist)> =
        Vec::with_capacity(s.unlabeled_id + s.unlabeled_ood);
    for _ in 0..s.unlabeled_id {
        let c = sampler.rng.random_range(0..n_id);
        pool.push((sampler.id(c), c, Dist::Id));
    }
    for _ in 0..s.unlabeled_ood {
        pool.push((sampler.ood(), n_id, Dist::Ood));
    }
    pool.shuffle(&mut sampler.rng);
    for (x, y, d) in pool {
        rows.push(x);
        labels.push(y);
        split.push(Split::Unlabeled);
        dist.push(d);
    }

    for i in 0..s.test {
        rows.push(sampler.id(i % n_id));
        labels.push(i % n_id);
        split.push(Split::Test);
        dist.push(Dist::Id);
    }

    let features = EmbeddingMatrix::from_rows(spec.dim, &rows)?;
    Dataset::new(features, labels, split, dist, n_id)
}
