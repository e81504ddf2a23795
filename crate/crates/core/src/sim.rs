//! Submodular information measures over facility location and
//! log-determinant.
//!
//! For a base function `f`, query set `Q` and private set `P`:
//!
//! - mutual information (MI): `I_f(A; Q) = f(A) + f(Q) − f(A ∪ Q)`
//! - conditional gain (CG): `f(A | P) = f(A ∪ P) − f(P)`
//! - conditional mutual information (CMI):
//!   `I_f(A; Q | P) = f(A ∪ P) + f(Q ∪ P) − f(A ∪ Q ∪ P) − f(P)`
//!
//! [`AcquisitionObjective::evaluate`] computes the closed forms of these for
//! both base functions; `gain`/`commit` run on memoized state. The
//! `generic_*` functions evaluate the definitions literally and are what the
//! closed forms are checked against.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Region, SimilarityKernel};
use crate::optimizer::SetObjective;
use crate::submod::{fl_eval, logdet_eval, FacilityLocationState, KernelView, LogDetState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimVariant {
    Flmi,
    Logdetmi,
    Flcg,
    Logdetcg,
    Flcmi,
    Logdetcmi,
}

impl SimVariant {
    pub const ALL: [SimVariant; 6] = [
        SimVariant::Flmi,
        SimVariant::Logdetmi,
        SimVariant::Flcg,
        SimVariant::Logdetcg,
        SimVariant::Flcmi,
        SimVariant::Logdetcmi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimVariant::Flmi => "flmi",
            SimVariant::Logdetmi => "logdetmi",
            SimVariant::Flcg => "flcg",
            SimVariant::Logdetcg => "logdetcg",
            SimVariant::Flcmi => "flcmi",
            SimVariant::Logdetcmi => "logdetcmi",
        }
    }

    /// Facility-location family (needs a nonnegative kernel).
    pub fn is_facility_location(self) -> bool {
        matches!(
            self,
            SimVariant::Flmi | SimVariant::Flcg | SimVariant::Flcmi
        )
    }

    pub fn uses_query(self) -> bool {
        !matches!(self, SimVariant::Flcg | SimVariant::Logdetcg)
    }

    pub fn uses_private(self) -> bool {
        !matches!(self, SimVariant::Flmi | SimVariant::Logdetmi)
    }

    /// The MI variant a CMI variant reduces to when `P = ∅`.
    pub fn without_private(self) -> SimVariant {
        match self {
            SimVariant::Flcmi => SimVariant::Flmi,
            SimVariant::Logdetcmi => SimVariant::Logdetmi,
            other => other,
        }
    }
}

impl fmt::Display for SimVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        SimVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown information measure '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Weight on query cross-similarities. 1 leaves the kernel untouched.
    pub eta: f64,
    /// Extra diagonal added by log-determinant variants on top of whatever
    /// ridge the kernel already carries.
    pub ridge: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            eta: 1.0,
            ridge: 0.0,
        }
    }
}

// per ground element: max(min(a, q) − p, 0) with absent terms dropped
#[derive(Debug, Clone)]
struct FlTerms {
    query_max: Option<Vec<f64>>,
    private_max: Option<Vec<f64>>,
}

impl FlTerms {
    #[inline]
    fn term(&self, k: usize, a: f64) -> f64 {
        let m = match &self.query_max {
            Some(q) => a.min(q[k]),
            None => a,
        };
        match &self.private_max {
            Some(p) => (m - p[k]).max(0.0),
            None => m,
        }
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum State<'k> {
    Fl {
        base: FacilityLocationState,
        terms: FlTerms,
        value: f64,
    },
    LogDet {
        pos: LogDetState<'k>,
        pos_offset: f64,
        neg: Option<(LogDetState<'k>, f64)>,
        selected: Vec<usize>,
    },
}

/// An information measure bound to a kernel, a query set and a private set.
/// Subsets are always drawn from the kernel's unlabeled region.
#[derive(Debug, Clone)]
pub struct AcquisitionObjective<'k> {
    variant: SimVariant,
    kernel: &'k SimilarityKernel,
    query: Vec<usize>,
    private: Vec<usize>,
    ground: Vec<usize>,
    params: SimParams,
    state: State<'k>,
}

fn max_over(kernel: &SimilarityKernel, i: usize, set: &[usize]) -> f64 {
    set.iter().map(|&j| kernel.get(i, j)).fold(0.0, f64::max)
}

impl<'k> AcquisitionObjective<'k> {
    pub fn new(
        variant: SimVariant,
        kernel: &'k SimilarityKernel,
        query: Vec<usize>,
        private: Vec<usize>,
        params: SimParams,
    ) -> Result<Self> {
        if kernel.size() == 0 {
            return Err(Error::config("kernel is empty"));
        }
        for (set, region, what) in [
            (&query, Region::Query, "query"),
            (&private, Region::Private, "private"),
        ] {
            for &i in set {
                if i >= kernel.size() || kernel.region(i) != region {
                    return Err(Error::config(format!(
                        "index {i} is not in the kernel's {what} region"
                    )));
                }
            }
        }
        if !(params.eta >= 0.0) || !(params.ridge >= 0.0) {
            return Err(Error::config("eta and ridge must be non-negative"));
        }
        let ground = kernel.indices(Region::Unlabeled);
        let view = KernelView {
            kernel,
            query_scale: params.eta,
        };

        let state = if variant.is_facility_location() {
            if !kernel.is_nonnegative() {
                return Err(Error::config(format!(
                    "{variant} needs a nonnegative (rescaled) kernel"
                )));
            }
            let terms = FlTerms {
                query_max: variant.uses_query().then(|| {
                    ground
                        .iter()
                        .map(|&i| params.eta * max_over(kernel, i, &query))
                        .collect()
                }),
                private_max: variant.uses_private().then(|| {
                    ground
                        .iter()
                        .map(|&i| max_over(kernel, i, &private))
                        .collect()
                }),
            };
            State::Fl {
                base: FacilityLocationState::new(kernel, ground.clone())?,
                terms,
                value: 0.0,
            }
        } else {
            let with_prefix = |prefix: &[usize]| -> Result<(LogDetState<'k>, f64)> {
                let mut st = LogDetState::with_view(view, params.ridge, &ground)?;
                for &i in prefix {
                    st.commit(i).map_err(|e| {
                        Error::numeric(format!(
                            "conditioning block is singular ({e}); try a larger ridge"
                        ))
                    })?;
                }
                let offset = st.log_det();
                Ok((st, offset))
            };
            let pos_prefix: &[usize] = if variant.uses_private() {
                &private
            } else {
                &[]
            };
            let (pos, pos_offset) = with_prefix(pos_prefix)?;
            let neg = if variant.uses_query() {
                let mut prefix = query.clone();
                prefix.extend_from_slice(pos_prefix);
                Some(with_prefix(&prefix)?)
            } else {
                None
            };
            State::LogDet {
                pos,
                pos_offset,
                neg,
                selected: Vec::new(),
            }
        };

        Ok(Self {
            variant,
            kernel,
            query,
            private,
            ground,
            params,
            state,
        })
    }

    pub fn variant(&self) -> SimVariant {
        self.variant
    }

    pub fn query(&self) -> &[usize] {
        &self.query
    }

    pub fn private(&self) -> &[usize] {
        &self.private
    }

    /// The unlabeled region: both the facility-location ground set and the
    /// pool subsets are drawn from.
    pub fn candidates(&self) -> &[usize] {
        &self.ground
    }

    pub fn params(&self) -> SimParams {
        self.params
    }

    fn check_subset(&self, a: &[usize]) -> Result<()> {
        for &j in a {
            if j >= self.kernel.size() || self.kernel.region(j) != Region::Unlabeled {
                return Err(Error::data(format!("index {j} is not an unlabeled item")));
            }
        }
        Ok(())
    }

    /// Closed-form value of the measure at `a`.
    pub fn evaluate(&self, a: &[usize]) -> Result<f64> {
        self.check_subset(a)?;
        if self.variant.is_facility_location() {
            Ok(self.evaluate_fl(a))
        } else {
            let view = KernelView {
                kernel: self.kernel,
                query_scale: self.params.eta,
            };
            let ridge = self.params.ridge;
            match self.variant {
                SimVariant::Logdetmi => logdetmi_closed(view, a, &self.query, ridge),
                SimVariant::Logdetcg => logdetcg_closed(view, a, &self.private, ridge),
                SimVariant::Logdetcmi => {
                    logdetcmi_closed(view, a, &self.query, &self.private, ridge)
                }
                _ => unreachable!(),
            }
        }
    }

    fn evaluate_fl(&self, a: &[usize]) -> f64 {
        let k = self.kernel;
        self.ground
            .iter()
            .map(|&i| {
                let am = max_over(k, i, a);
                let qm = self.params.eta * max_over(k, i, &self.query);
                let pm = max_over(k, i, &self.private);
                match self.variant {
                    SimVariant::Flmi => am.min(qm),
                    SimVariant::Flcg => (am - pm).max(0.0),
                    SimVariant::Flcmi => (am.min(qm) - pm).max(0.0),
                    _ => unreachable!(),
                }
            })
            .sum()
    }

    /// Checked marginal gain of an unlabeled, not yet selected index.
    pub fn marginal_gain(&self, j: usize) -> Result<f64> {
        self.check_subset(&[j])?;
        if self.selected().contains(&j) {
            return Err(Error::logic(format!("index {j} is already selected")));
        }
        Ok(self.gain(j))
    }
}

impl SetObjective for AcquisitionObjective<'_> {
    fn gain(&self, j: usize) -> f64 {
        match &self.state {
            State::Fl { base, terms, .. } => base.fold_column(self.kernel, j, |k, m, s| {
                if s > m {
                    terms.term(k, s) - terms.term(k, m)
                } else {
                    0.0
                }
            }),
            State::LogDet { pos, neg, .. } => {
                let g = pos.gain_unchecked(j);
                match neg {
                    Some((n, _)) => {
                        let h = n.gain_unchecked(j);
                        if g == f64::NEG_INFINITY || h == f64::NEG_INFINITY {
                            f64::NEG_INFINITY
                        } else {
                            g - h
                        }
                    }
                    None => g,
                }
            }
        }
    }

    fn commit(&mut self, j: usize) -> Result<f64> {
        self.check_subset(&[j])?;
        let g = self.gain(j);
        match &mut self.state {
            State::Fl { base, value, .. } => {
                base.commit(self.kernel, j)?;
                *value += g;
                Ok(g)
            }
            State::LogDet {
                pos, neg, selected, ..
            } => {
                let gp = pos.commit(j)?;
                let gn = match neg {
                    Some((n, _)) => n.commit(j)?,
                    None => 0.0,
                };
                selected.push(j);
                Ok(gp - gn)
            }
        }
    }

    fn value(&self) -> f64 {
        match &self.state {
            State::Fl { value, .. } => *value,
            State::LogDet {
                pos,
                pos_offset,
                neg,
                ..
            } => {
                let v = pos.log_det() - pos_offset;
                match neg {
                    Some((n, off)) => v - (n.log_det() - off),
                    None => v,
                }
            }
        }
    }

    fn selected(&self) -> &[usize] {
        match &self.state {
            State::Fl { base, .. } => base.selected(),
            State::LogDet { selected, .. } => selected,
        }
    }

    fn is_monotone(&self) -> bool {
        self.variant.is_facility_location()
    }
}

fn block(view: KernelView<'_>, rows: &[usize], cols: &[usize], ridge: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let s = view.entry(rows[r], cols[c]);
        if rows[r] == cols[c] {
            s + ridge
        } else {
            s
        }
    })
}

fn chol_logdet(m: DMatrix<f64>, what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = m.cholesky().ok_or_else(|| {
        Error::numeric(format!(
            "{what} is not positive definite; try a larger ridge"
        ))
    })?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>())
}

// S_A − S_{A,C} S_C^{-1} S_{A,C}^T
fn schur(
    view: KernelView<'_>,
    a: &[usize],
    c: &[usize],
    ridge: f64,
    what: &str,
) -> Result<DMatrix<f64>> {
    let s_a = block(view, a, a, ridge);
    if c.is_empty() {
        return Ok(s_a);
    }
    let s_c = block(view, c, c, ridge);
    let cross = block(view, a, c, ridge);
    let chol = s_c
        .cholesky()
        .ok_or_else(|| Error::numeric(format!("{what} is singular; try a larger ridge")))?;
    let x = chol.solve(&cross.transpose());
    let m = s_a - &cross * x;
    Ok((&m + m.transpose()) * 0.5)
}

fn logdetmi_closed(view: KernelView<'_>, a: &[usize], q: &[usize], ridge: f64) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let s_a = chol_logdet(block(view, a, a, ridge), "S_A")?;
    let cond = chol_logdet(schur(view, a, q, ridge, "S_Q")?, "Schur complement of S_Q")?;
    Ok(s_a - cond)
}

fn logdetcg_closed(view: KernelView<'_>, a: &[usize], p: &[usize], ridge: f64) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    chol_logdet(schur(view, a, p, ridge, "S_P")?, "Schur complement of S_P")
}

// log det(I − S_X^{-1} S_{X,Q} S_Q^{-1} S_{X,Q}^T)
fn log_det_identity_minus(
    view: KernelView<'_>,
    x: &[usize],
    q: &[usize],
    ridge: f64,
) -> Result<f64> {
    if x.is_empty() || q.is_empty() {
        return Ok(0.0);
    }
    let s_x = block(view, x, x, ridge);
    let s_q = block(view, q, q, ridge);
    let cross = block(view, x, q, ridge);
    let qx = s_q
        .cholesky()
        .ok_or_else(|| Error::numeric("S_Q is singular; try a larger ridge"))?
        .solve(&cross.transpose());
    let inner = &cross * qx;
    let lhs = s_x
        .cholesky()
        .ok_or_else(|| Error::numeric("conditioning block is singular; try a larger ridge"))?
        .solve(&inner);
    let m = DMatrix::<f64>::identity(x.len(), x.len()) - lhs;
    let det = m.lu().determinant();
    if !(det > 0.0) {
        return Err(Error::numeric(format!(
            "identity-minus-product determinant {det:e} is not positive"
        )));
    }
    Ok(det.ln())
}

fn logdetcmi_closed(
    view: KernelView<'_>,
    a: &[usize],
    q: &[usize],
    p: &[usize],
    ridge: f64,
) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut ap = a.to_vec();
    ap.extend_from_slice(p);
    let num = log_det_identity_minus(view, p, q, ridge)?;
    let den = log_det_identity_minus(view, &ap, q, ridge)?;
    Ok(num - den)
}

fn union(sets: &[&[usize]]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for s in sets {
        for &i in *s {
            if !out.contains(&i) {
                out.push(i);
            }
        }
    }
    out
}

/// `f(A) + f(Q) − f(A ∪ Q)`.
pub fn generic_smi<F>(f: F, a: &[usize], q: &[usize]) -> Result<f64>
where
    F: Fn(&[usize]) -> Result<f64>,
{
    Ok(f(a)? + f(q)? - f(&union(&[a, q]))?)
}

/// `f(A ∪ P) − f(P)`.
pub fn generic_scg<F>(f: F, a: &[usize], p: &[usize]) -> Result<f64>
where
    F: Fn(&[usize]) -> Result<f64>,
{
    Ok(f(&union(&[a, p]))? - f(p)?)
}

/// `f(A ∪ P) + f(Q ∪ P) − f(A ∪ Q ∪ P) − f(P)`.
pub fn generic_scmi<F>(f: F, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64>
where
    F: Fn(&[usize]) -> Result<f64>,
{
    Ok(f(&union(&[a, p]))? + f(&union(&[q, p]))? - f(&union(&[a, q, p]))? - f(p)?)
}

/// Facility location summed over the kernel's unlabeled region, as a plain
/// set function for the generic definitions.
pub fn fl_base(kernel: &SimilarityKernel) -> impl Fn(&[usize]) -> Result<f64> + '_ {
    let ground = kernel.indices(Region::Unlabeled);
    move |x| fl_eval(kernel, &ground, x)
}

/// `log det(S_X + ridge·I)` as a plain set function.
pub fn logdet_base(kernel: &SimilarityKernel, ridge: f64) -> impl Fn(&[usize]) -> Result<f64> + '_ {
    move |x| logdet_eval(kernel, x, ridge)
}

/// The generic definition matching `variant`, evaluated at `a`.
pub fn generic_value(
    variant: SimVariant,
    kernel: &SimilarityKernel,
    a: &[usize],
    q: &[usize],
    p: &[usize],
    ridge: f64,
) -> Result<f64> {
    let fl = fl_base(kernel);
    let ld = logdet_base(kernel, ridge);
    match variant {
        SimVariant::Flmi => generic_smi(&fl, a, q),
        SimVariant::Flcg => generic_scg(&fl, a, p),
        SimVariant::Flcmi => generic_scmi(&fl, a, q, p),
        SimVariant::Logdetmi => generic_smi(&ld, a, q),
        SimVariant::Logdetcg => generic_scg(&ld, a, p),
        SimVariant::Logdetcmi => generic_scmi(&ld, a, q, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{assemble_joint_kernel, EmbeddingMatrix};
    use crate::optimizer::{naive_greedy, GreedyOptions};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    struct Instance {
        kernel: SimilarityKernel,
        u: Vec<usize>,
        q: Vec<usize>,
        p: Vec<usize>,
    }

    fn instance(rng: &mut ChaCha8Rng, rescale: bool, ridge: f64) -> Instance {
        let nu = rng.random_range(2..=10);
        let nq = rng.random_range(0..=5);
        let np = rng.random_range(0..=5);
        let dim = rng.random_range(2..=8);
        let mut e = |n: usize| {
            let d = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
            EmbeddingMatrix::new(n, dim, d).unwrap()
        };
        let (gu, gq, gp) = (e(nu), e(nq), e(np));
        let kernel = assemble_joint_kernel(&gu, &gq, &gp, rescale, ridge).unwrap();
        Instance {
            u: kernel.indices(Region::Unlabeled),
            q: kernel.indices(Region::Query),
            p: kernel.indices(Region::Private),
            kernel,
        }
    }

    fn subset(rng: &mut ChaCha8Rng, from: &[usize]) -> Vec<usize> {
        let mut v = from.to_vec();
        v.shuffle(rng);
        let k = rng.random_range(0..=v.len());
        v.truncate(k);
        v
    }

    fn tiny_kernel(cross: f64) -> SimilarityKernel {
        // one unlabeled item (0) and one query/private item (1)
        SimilarityKernel::new(
            2,
            vec![1.0, cross, cross, 1.0],
            vec![Region::Unlabeled, Region::Query],
        )
        .unwrap()
    }

    #[test]
    fn closed_forms_match_generic_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            for variant in SimVariant::ALL {
                let fl = variant.is_facility_location();
                let inst = instance(&mut rng, fl, if fl { 0.0 } else { 0.1 });
                let obj = AcquisitionObjective::new(
                    variant,
                    &inst.kernel,
                    inst.q.clone(),
                    inst.p.clone(),
                    SimParams::default(),
                )
                .unwrap();
                let a = subset(&mut rng, &inst.u);
                let closed = obj.evaluate(&a).unwrap();
                let generic =
                    generic_value(variant, &inst.kernel, &a, &inst.q, &inst.p, 0.0).unwrap();
                let tol = if fl { 1e-9 } else { 1e-6 };
                assert!(
                    (closed - generic).abs() <= tol,
                    "{variant}: closed {closed} vs generic {generic}"
                );
            }
        }
    }

    #[test]
    fn gains_match_evaluation_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            for variant in SimVariant::ALL {
                let fl = variant.is_facility_location();
                let inst = instance(&mut rng, fl, if fl { 0.0 } else { 0.05 });
                let mut obj = AcquisitionObjective::new(
                    variant,
                    &inst.kernel,
                    inst.q.clone(),
                    inst.p.clone(),
                    SimParams::default(),
                )
                .unwrap();
                let mut order = inst.u.clone();
                order.shuffle(&mut rng);
                for (t, &j) in order.iter().enumerate() {
                    let before = obj.evaluate(&order[..t]).unwrap();
                    let after = obj.evaluate(&order[..=t]).unwrap();
                    let g = obj.marginal_gain(j).unwrap();
                    assert!((g - (after - before)).abs() < 1e-8, "{variant}");
                    obj.commit(j).unwrap();
                    assert!((obj.value() - after).abs() < 1e-8, "{variant}");
                }
            }
        }
    }

    #[test]
    fn empty_set_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for variant in SimVariant::ALL {
            let fl = variant.is_facility_location();
            let inst = instance(&mut rng, fl, if fl { 0.0 } else { 0.1 });
            let obj = AcquisitionObjective::new(
                variant,
                &inst.kernel,
                inst.q,
                inst.p,
                SimParams::default(),
            )
            .unwrap();
            assert_eq!(obj.evaluate(&[]).unwrap(), 0.0);
            assert_eq!(obj.value(), 0.0);
        }
    }

    #[test]
    fn flmi_with_empty_query_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = instance(&mut rng, true, 0.0);
        let obj = AcquisitionObjective::new(
            SimVariant::Flmi,
            &inst.kernel,
            vec![],
            vec![],
            SimParams::default(),
        )
        .unwrap();
        assert_eq!(obj.evaluate(&inst.u).unwrap(), 0.0);
    }

    #[test]
    fn flmi_on_identity_counts_overlap() {
        // identity kernel: 4 unlabeled items, 2 query items; query item k is a
        // copy of unlabeled item k so max over Q is 1 exactly there
        let n = 6;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0;
        }
        d[4] = 1.0; // (0, 4)
        d[4 * n] = 1.0;
        d[n + 5] = 1.0; // (1, 5)
        d[5 * n + 1] = 1.0;
        let regions = vec![
            Region::Unlabeled,
            Region::Unlabeled,
            Region::Unlabeled,
            Region::Unlabeled,
            Region::Query,
            Region::Query,
        ];
        let k = SimilarityKernel::new(n, d, regions).unwrap();
        let obj = AcquisitionObjective::new(
            SimVariant::Flmi,
            &k,
            vec![4, 5],
            vec![],
            SimParams::default(),
        )
        .unwrap();
        // items with query coverage are {0, 1}
        assert_eq!(obj.evaluate(&[0, 2]).unwrap(), 1.0);
        assert_eq!(obj.evaluate(&[0, 1, 3]).unwrap(), 2.0);
        assert_eq!(obj.evaluate(&[2, 3]).unwrap(), 0.0);
    }

    #[test]
    fn flcg_without_private_is_facility_location() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = instance(&mut rng, true, 0.0);
        let obj = AcquisitionObjective::new(
            SimVariant::Flcg,
            &inst.kernel,
            vec![],
            vec![],
            SimParams::default(),
        )
        .unwrap();
        let a = &inst.u[..inst.u.len().min(3)];
        let direct = fl_eval(&inst.kernel, &inst.u, a).unwrap();
        assert!((obj.evaluate(a).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn cmi_reduces_to_mi_without_private() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (cmi, mi, rescale, ridge) in [
            (SimVariant::Flcmi, SimVariant::Flmi, true, 0.0),
            (SimVariant::Logdetcmi, SimVariant::Logdetmi, false, 0.1),
        ] {
            for _ in 0..20 {
                let inst = instance(&mut rng, rescale, ridge);
                let a = subset(&mut rng, &inst.u);
                let c = AcquisitionObjective::new(
                    cmi,
                    &inst.kernel,
                    inst.q.clone(),
                    vec![],
                    SimParams::default(),
                )
                .unwrap();
                let m = AcquisitionObjective::new(
                    mi,
                    &inst.kernel,
                    inst.q.clone(),
                    vec![],
                    SimParams::default(),
                )
                .unwrap();
                assert!((c.evaluate(&a).unwrap() - m.evaluate(&a).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cmi_without_query_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (v, rescale, ridge) in [
            (SimVariant::Flcmi, true, 0.0),
            (SimVariant::Logdetcmi, false, 0.1),
        ] {
            let inst = instance(&mut rng, rescale, ridge);
            let obj = AcquisitionObjective::new(
                v,
                &inst.kernel,
                vec![],
                inst.p.clone(),
                SimParams::default(),
            )
            .unwrap();
            assert!(obj.evaluate(&inst.u).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn logdetmi_scalar_example() {
        let k = tiny_kernel(0.6);
        let obj = AcquisitionObjective::new(
            SimVariant::Logdetmi,
            &k,
            vec![1],
            vec![],
            SimParams::default(),
        )
        .unwrap();
        assert!((obj.evaluate(&[0]).unwrap() - 0.4462871).abs() < 1e-7);
        // uncorrelated query: zero information
        let k = tiny_kernel(0.0);
        let obj = AcquisitionObjective::new(
            SimVariant::Logdetmi,
            &k,
            vec![1],
            vec![],
            SimParams::default(),
        )
        .unwrap();
        assert_eq!(obj.evaluate(&[0]).unwrap(), 0.0);
    }

    #[test]
    fn logdetcg_scalar_example() {
        let k = SimilarityKernel::new(
            2,
            vec![1.0, 0.6, 0.6, 1.0],
            vec![Region::Unlabeled, Region::Private],
        )
        .unwrap();
        let obj = AcquisitionObjective::new(
            SimVariant::Logdetcg,
            &k,
            vec![],
            vec![1],
            SimParams::default(),
        )
        .unwrap();
        assert!((obj.evaluate(&[0]).unwrap() - (-0.4462871)).abs() < 1e-7);
        let k = SimilarityKernel::new(
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![Region::Unlabeled, Region::Private],
        )
        .unwrap();
        let obj = AcquisitionObjective::new(
            SimVariant::Logdetcg,
            &k,
            vec![],
            vec![1],
            SimParams::default(),
        )
        .unwrap();
        assert_eq!(
            obj.evaluate(&[0]).unwrap(),
            logdet_eval(&k, &[0], 0.0).unwrap()
        );
    }

    #[test]
    fn logdetmi_gains_can_increase() {
        // u1 = q + z, u2 = z: knowing u2 makes u1 more informative about q
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let k = SimilarityKernel::new(
            3,
            vec![1.0, h, h, h, 1.0, 0.0, h, 0.0, 1.0],
            vec![Region::Unlabeled, Region::Unlabeled, Region::Query],
        )
        .unwrap();
        let params = SimParams {
            eta: 1.0,
            ridge: 1e-2,
        };
        let obj =
            AcquisitionObjective::new(SimVariant::Logdetmi, &k, vec![2], vec![], params).unwrap();
        let alone = obj.evaluate(&[0]).unwrap() - obj.evaluate(&[]).unwrap();
        let after = obj.evaluate(&[1, 0]).unwrap() - obj.evaluate(&[1]).unwrap();
        assert!(obj.evaluate(&[1]).unwrap().abs() < 1e-12);
        assert!(after > alone + 1.0, "gain {alone} grew to {after}");
    }

    #[test]
    fn eta_scales_query_relevance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = instance(&mut rng, true, 0.0);
        let params = SimParams {
            eta: 2.0,
            ridge: 0.0,
        };
        let mut obj = AcquisitionObjective::new(
            SimVariant::Flcmi,
            &inst.kernel,
            inst.q.clone(),
            inst.p.clone(),
            params,
        )
        .unwrap();
        let mut prev = 0.0;
        for &j in &inst.u {
            let g = obj.gain(j);
            obj.commit(j).unwrap();
            prev += g;
        }
        assert!((obj.evaluate(&inst.u).unwrap() - prev).abs() < 1e-9);
    }

    #[test]
    fn region_and_kernel_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = instance(&mut rng, false, 0.1);
        // unrescaled cosine kernels may be negative
        if !inst.kernel.is_nonnegative() {
            assert!(AcquisitionObjective::new(
                SimVariant::Flmi,
                &inst.kernel,
                inst.q.clone(),
                vec![],
                SimParams::default()
            )
            .is_err());
        }
        assert!(AcquisitionObjective::new(
            SimVariant::Logdetmi,
            &inst.kernel,
            vec![inst.u[0]],
            vec![],
            SimParams::default()
        )
        .is_err());
        let obj = AcquisitionObjective::new(
            SimVariant::Logdetcg,
            &inst.kernel,
            vec![],
            inst.p.clone(),
            SimParams::default(),
        )
        .unwrap();
        if let Some(&q) = inst.q.first() {
            assert!(obj.evaluate(&[q]).is_err());
        }
    }

    #[test]
    fn singular_query_block_is_reported() {
        let regions = vec![Region::Unlabeled, Region::Query, Region::Query];
        let k = SimilarityKernel::new(
            3,
            vec![1.0, 0.5, 0.5, 0.5, 1.0, 1.0, 0.5, 1.0, 1.0],
            regions,
        )
        .unwrap();
        let err = AcquisitionObjective::new(
            SimVariant::Logdetmi,
            &k,
            vec![1, 2],
            vec![],
            SimParams::default(),
        );
        assert!(matches!(err, Err(Error::Numeric(_))));
    }

    #[test]
    fn greedy_runs_on_every_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for variant in SimVariant::ALL {
            let fl = variant.is_facility_location();
            let inst = instance(&mut rng, fl, if fl { 0.0 } else { 0.1 });
            let mut obj = AcquisitionObjective::new(
                variant,
                &inst.kernel,
                inst.q.clone(),
                inst.p.clone(),
                SimParams::default(),
            )
            .unwrap();
            let cand = obj.candidates().to_vec();
            let r = naive_greedy(&mut obj, &cand, 2, &GreedyOptions::default()).unwrap();
            let closed = obj.evaluate(&r.chosen).unwrap();
            assert!((closed - r.objective_value).abs() < 1e-7);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in SimVariant::ALL {
            assert_eq!(v.name().parse::<SimVariant>().unwrap(), v);
        }
        assert!("gccg".parse::<SimVariant>().is_err());
    }
}
