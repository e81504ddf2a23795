//! Facility location and log-determinant set functions.
//!
//! Both come in two forms: a direct evaluator (`fl_eval`, `logdet_eval`) and
//! a memoized state that answers marginal-gain queries without re-evaluating
//! the whole set. The states are single-writer: `gain` takes `&self` and can
//! be queried concurrently, `commit` takes `&mut self`.

use crate::error::{Error, Result};
use crate::kernel::{dot, Region, SimilarityKernel};
use crate::optimizer::SetObjective;

/// Schur complements below this are treated as a loss of positive
/// definiteness.
pub const SCHUR_FLOOR: f64 = 1e-12;

fn check_index(kernel: &SimilarityKernel, j: usize) -> Result<()> {
    if j < kernel.size() {
        Ok(())
    } else {
        Err(Error::data(format!(
            "index {j} out of bounds for kernel of size {}",
            kernel.size()
        )))
    }
}

/// `Σ_{i ∈ ground} max_{j ∈ a} S_ij`, with the max over an empty set taken as 0.
pub fn fl_eval(kernel: &SimilarityKernel, ground: &[usize], a: &[usize]) -> Result<f64> {
    for &j in ground.iter().chain(a) {
        check_index(kernel, j)?;
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(ground
        .iter()
        .map(|&i| {
            a.iter()
                .map(|&j| kernel.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

/// Running per-element maxima for facility location over a fixed ground set.
#[derive(Debug, Clone)]
pub struct FacilityLocationState {
    ground: Vec<usize>,
    // start of the ground set when it is a contiguous index range
    contiguous: Option<usize>,
    current_max: Vec<f64>,
    selected: Vec<usize>,
    in_set: Vec<bool>,
}

impl FacilityLocationState {
    pub fn new(kernel: &SimilarityKernel, ground: Vec<usize>) -> Result<Self> {
        for &i in &ground {
            check_index(kernel, i)?;
        }
        let contiguous = match ground.first() {
            Some(&s) if ground.iter().enumerate().all(|(k, &i)| i == s + k) => Some(s),
            None => Some(0),
            _ => None,
        };
        Ok(Self {
            current_max: vec![0.0; ground.len()],
            ground,
            contiguous,
            selected: Vec::new(),
            in_set: vec![false; kernel.size()],
        })
    }

    pub fn ground(&self) -> &[usize] {
        &self.ground
    }

    pub fn current_max(&self) -> &[f64] {
        &self.current_max
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn contains(&self, j: usize) -> bool {
        self.in_set.get(j).copied().unwrap_or(false)
    }

    pub fn value(&self) -> f64 {
        self.current_max.iter().sum()
    }

    /// Calls `f(current_max_i, S_ij)` for every ground element `i`, in ground order.
    #[inline]
    pub(crate) fn fold_column<F>(&self, kernel: &SimilarityKernel, j: usize, f: F) -> f64
    where
        F: Fn(usize, f64, f64) -> f64,
    {
        let row = kernel.row(j);
        match self.contiguous {
            Some(start) => row[start..start + self.ground.len()]
                .iter()
                .zip(&self.current_max)
                .enumerate()
                .map(|(k, (&s, &m))| f(k, m, s))
                .sum(),
            None => self
                .ground
                .iter()
                .zip(&self.current_max)
                .enumerate()
                .map(|(k, (&i, &m))| f(k, m, row[i]))
                .sum(),
        }
    }

    pub(crate) fn gain_unchecked(&self, kernel: &SimilarityKernel, j: usize) -> f64 {
        self.fold_column(kernel, j, |_, m, s| if s > m { s - m } else { 0.0 })
    }

    /// `Σ_i max(S_ij − current_max_i, 0)`.
    pub fn gain(&self, kernel: &SimilarityKernel, j: usize) -> Result<f64> {
        check_index(kernel, j)?;
        if self.contains(j) {
            return Err(Error::logic(format!("index {j} is already selected")));
        }
        Ok(self.gain_unchecked(kernel, j))
    }

    pub fn commit(&mut self, kernel: &SimilarityKernel, j: usize) -> Result<()> {
        check_index(kernel, j)?;
        if self.contains(j) {
            return Err(Error::logic(format!("index {j} is already selected")));
        }
        let row = kernel.row(j);
        for (m, &i) in self.current_max.iter_mut().zip(&self.ground) {
            if row[i] > *m {
                *m = row[i];
            }
        }
        self.selected.push(j);
        self.in_set[j] = true;
        Ok(())
    }
}

/// Facility location over a fixed ground set, as a greedy objective.
#[derive(Debug, Clone)]
pub struct FacilityLocation<'k> {
    kernel: &'k SimilarityKernel,
    state: FacilityLocationState,
    value: f64,
}

impl<'k> FacilityLocation<'k> {
    pub fn new(kernel: &'k SimilarityKernel, ground: Vec<usize>) -> Result<Self> {
        if !kernel.is_nonnegative() {
            return Err(Error::config(
                "facility location needs a nonnegative (rescaled) kernel",
            ));
        }
        Ok(Self {
            kernel,
            state: FacilityLocationState::new(kernel, ground)?,
            value: 0.0,
        })
    }

    /// Ground set = every unlabeled index of the kernel.
    pub fn over_unlabeled(kernel: &'k SimilarityKernel) -> Result<Self> {
        Self::new(kernel, kernel.indices(Region::Unlabeled))
    }

    pub fn state(&self) -> &FacilityLocationState {
        &self.state
    }

    pub fn evaluate(&self, a: &[usize]) -> Result<f64> {
        fl_eval(self.kernel, self.state.ground(), a)
    }
}

impl SetObjective for FacilityLocation<'_> {
    fn gain(&self, j: usize) -> f64 {
        self.state.gain_unchecked(self.kernel, j)
    }

    fn commit(&mut self, j: usize) -> Result<f64> {
        let g = self.state.gain(self.kernel, j)?;
        self.state.commit(self.kernel, j)?;
        self.value += g;
        Ok(g)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn selected(&self) -> &[usize] {
        self.state.selected()
    }
}

/// Read access to kernel entries with the query cross-similarities scaled by
/// `query_scale` (the query-relevance weight of the information measures).
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelView<'k> {
    pub kernel: &'k SimilarityKernel,
    pub query_scale: f64,
}

impl<'k> KernelView<'k> {
    pub fn plain(kernel: &'k SimilarityKernel) -> Self {
        Self {
            kernel,
            query_scale: 1.0,
        }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let s = self.kernel.get(i, j);
        if self.query_scale != 1.0
            && (self.kernel.region(i) == Region::Query) != (self.kernel.region(j) == Region::Query)
        {
            s * self.query_scale
        } else {
            s
        }
    }
}

/// `log det(S_A + ridge·I)` by a dense Cholesky factorization; 0 for the
/// empty set.
pub fn logdet_eval(kernel: &SimilarityKernel, a: &[usize], ridge: f64) -> Result<f64> {
    for &j in a {
        check_index(kernel, j)?;
    }
    logdet_dense(KernelView::plain(kernel), a, ridge)
}

pub(crate) fn logdet_dense(view: KernelView<'_>, a: &[usize], ridge: f64) -> Result<f64> {
    let n = a.len();
    let mut l = vec![0.0; n * n];
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..=r {
            let mut s = view.entry(a[r], a[c]);
            if r == c {
                s += ridge;
            }
            s -= dot(&l[r * n..r * n + c], &l[c * n..c * n + c]);
            if r == c {
                if !(s > 0.0) {
                    return Err(Error::numeric(format!(
                        "submatrix is not positive definite at pivot {r} (value {s:e}); \
                         try a larger ridge"
                    )));
                }
                l[r * n + r] = s.sqrt();
                acc += s.ln();
            } else {
                l[r * n + c] = s / l[c * n + c];
            }
        }
    }
    Ok(acc)
}

/// Incrementally grown lower-triangular factor of `S_A + ridge·I`.
///
/// Optionally tracks a candidate list: for each tracked candidate the state
/// keeps its forward-substituted cross column `w` and the Schur complement
/// `S_jj + ridge − |w|²`, extending both by one entry per commit. Gains of
/// tracked candidates are then `O(1)`; others are solved on demand in
/// `O(|A|²)`.
#[derive(Debug, Clone)]
pub struct LogDetState<'k> {
    view: KernelView<'k>,
    ridge: f64,
    factor: Vec<Vec<f64>>,
    selected: Vec<usize>,
    in_set: Vec<bool>,
    log_det: f64,
    slot: Vec<Option<usize>>,
    tracked: Vec<usize>,
    proj: Vec<Vec<f64>>,
    resid: Vec<f64>,
}

impl<'k> LogDetState<'k> {
    pub fn new(kernel: &'k SimilarityKernel, ridge: f64) -> Result<Self> {
        Self::with_view(KernelView::plain(kernel), ridge, &[])
    }

    pub fn with_candidates(
        kernel: &'k SimilarityKernel,
        ridge: f64,
        candidates: &[usize],
    ) -> Result<Self> {
        Self::with_view(KernelView::plain(kernel), ridge, candidates)
    }

    pub(crate) fn with_view(
        view: KernelView<'k>,
        ridge: f64,
        candidates: &[usize],
    ) -> Result<Self> {
        if !(ridge >= 0.0) {
            return Err(Error::config(format!(
                "ridge must be non-negative, got {ridge}"
            )));
        }
        let n = view.kernel.size();
        let mut slot = vec![None; n];
        let mut tracked = Vec::with_capacity(candidates.len());
        for &c in candidates {
            check_index(view.kernel, c)?;
            if slot[c].is_none() {
                slot[c] = Some(tracked.len());
                tracked.push(c);
            }
        }
        let resid = tracked.iter().map(|&c| view.entry(c, c) + ridge).collect();
        Ok(Self {
            view,
            ridge,
            factor: Vec::new(),
            selected: Vec::new(),
            in_set: vec![false; n],
            log_det: 0.0,
            slot,
            proj: vec![Vec::new(); tracked.len()],
            tracked,
            resid,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Rows of the lower-triangular factor; row `t` has `t + 1` entries.
    pub fn factor(&self) -> &[Vec<f64>] {
        &self.factor
    }

    pub fn contains(&self, j: usize) -> bool {
        self.in_set.get(j).copied().unwrap_or(false)
    }

    // forward substitution L w = S_{A,j}
    fn solve_cross(&self, j: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.factor.len());
        for (t, row) in self.factor.iter().enumerate() {
            let s = self.view.entry(self.selected[t], j);
            let v = (s - dot(&row[..t], &w)) / row[t];
            w.push(v);
        }
        w
    }

    /// Schur complement of `S_A + ridge·I` for candidate `j`.
    pub(crate) fn schur(&self, j: usize) -> f64 {
        match self.slot[j] {
            Some(k) => self.resid[k],
            None => {
                let w = self.solve_cross(j);
                self.view.entry(j, j) + self.ridge - dot(&w, &w)
            }
        }
    }

    pub(crate) fn gain_unchecked(&self, j: usize) -> f64 {
        let d = self.schur(j);
        if d < SCHUR_FLOOR {
            f64::NEG_INFINITY
        } else {
            d.ln()
        }
    }

    /// `log(S_jj + ridge − |w|²)`, or `-inf` once the Schur complement drops
    /// below [`SCHUR_FLOOR`].
    pub fn gain(&self, j: usize) -> Result<f64> {
        check_index(self.view.kernel, j)?;
        if self.contains(j) {
            return Err(Error::logic(format!("index {j} is already selected")));
        }
        Ok(self.gain_unchecked(j))
    }

    pub fn commit(&mut self, j: usize) -> Result<f64> {
        check_index(self.view.kernel, j)?;
        if self.contains(j) {
            return Err(Error::logic(format!("index {j} is already selected")));
        }
        let w = match self.slot[j] {
            Some(k) => self.proj[k].clone(),
            None => self.solve_cross(j),
        };
        let d = self.view.entry(j, j) + self.ridge - dot(&w, &w);
        if d < SCHUR_FLOOR {
            return Err(Error::numeric(format!(
                "Schur complement {d:e} for index {j} is not positive; try a larger ridge"
            )));
        }
        let diag = d.sqrt();
        for (k, &c) in self.tracked.iter().enumerate() {
            if self.in_set[c] || c == j {
                continue;
            }
            let e = (self.view.entry(j, c) - dot(&w, &self.proj[k])) / diag;
            self.proj[k].push(e);
            self.resid[k] -= e * e;
        }
        let mut row = w;
        row.push(diag);
        self.factor.push(row);
        self.selected.push(j);
        self.in_set[j] = true;
        let g = d.ln();
        self.log_det += g;
        Ok(g)
    }
}

/// Log-determinant over a candidate pool, as a greedy objective.
#[derive(Debug, Clone)]
pub struct LogDet<'k> {
    kernel: &'k SimilarityKernel,
    state: LogDetState<'k>,
}

impl<'k> LogDet<'k> {
    pub fn new(kernel: &'k SimilarityKernel, ridge: f64, candidates: &[usize]) -> Result<Self> {
        Ok(Self {
            kernel,
            state: LogDetState::with_candidates(kernel, ridge, candidates)?,
        })
    }

    pub fn state(&self) -> &LogDetState<'k> {
        &self.state
    }

    pub fn evaluate(&self, a: &[usize]) -> Result<f64> {
        logdet_eval(self.kernel, a, self.state.ridge)
    }
}

impl SetObjective for LogDet<'_> {
    fn gain(&self, j: usize) -> f64 {
        self.state.gain_unchecked(j)
    }

    fn commit(&mut self, j: usize) -> Result<f64> {
        self.state.commit(j)
    }

    fn value(&self) -> f64 {
        self.state.log_det()
    }

    fn selected(&self) -> &[usize] {
        self.state.selected()
    }

    fn is_monotone(&self) -> bool {
        false
    }
}
