//! Pairwise significance counts between methods.
//!
//! For every round and ordered pair `(i, j)` the per-seed accuracy
//! differences `acc_i − acc_j` are tested with a two-tailed t statistic
//! `mean / (sd / √k)`. A significant win for `i` adds `1/N` to cell `(i, j)`,
//! a significant win for `j` adds `1/N` to `(j, i)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::experiment::ExperimentRecord;
use crate::error::{Error, Result};

/// Accuracy traces of one method, indexed `[seed][round]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodTraces {
    pub method: String,
    pub traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyMatrix {
    pub methods: Vec<String>,
    /// `values[i][j]`: fraction of rounds in which method `i` beat `j`.
    pub values: Vec<Vec<f64>>,
    pub alpha: f64,
    pub rounds: usize,
}

/// Two-tailed critical value with `2k − 2` degrees of freedom for `k` seeds.
pub fn critical_t(seeds: usize, alpha: f64) -> Result<f64> {
    if seeds < 2 {
        return Err(Error::data("significance testing needs at least two seeds"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha must be in (0, 1)"));
    }
    let dof = (2 * seeds - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::numeric(e.to_string()))?;
    Ok(t.inverse_cdf(1.0 - alpha / 2.0))
}

/// `mean / (sd / √k)` of the differences, `None` when both the mean and
/// the spread are zero.
pub fn t_statistic(diffs: &[f64]) -> Option<f64> {
    let k = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / k;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt();
    if se == 0.0 {
        if mean == 0.0 {
            None
        } else {
            Some(mean.signum() * f64::INFINITY)
        }
    } else {
        Some(mean / se)
    }
}

pub fn penalty_matrix(methods: &[MethodTraces], alpha: f64) -> Result<PenaltyMatrix> {
    let first = methods
        .first()
        .ok_or_else(|| Error::data("no methods to compare"))?;
    let seeds = first.traces.len();
    let rounds = first.traces.first().map_or(0, Vec::len);
    if rounds == 0 {
        return Err(Error::data("accuracy traces are empty"));
    }
    for m in methods {
        if m.traces.len() != seeds {
            return Err(Error::data(format!(
                "{} has {} seeds, expected {seeds}",
                m.method,
                m.traces.len()
            )));
        }
        if m.traces.iter().any(|t| t.len() != rounds) {
            return Err(Error::data(format!(
                "{} does not have {rounds} rounds for every seed",
                m.method
            )));
        }
    }
    let t_alpha = critical_t(seeds, alpha)?;
    let n = methods.len();
    let mut wins = vec![vec![0usize; n]; n];
    let mut diffs = vec![0.0; seeds];
    for i in 0..n {
        for j in (i + 1)..n {
            for r in 0..rounds {
                for (s, d) in diffs.iter_mut().enumerate() {
                    *d = methods[i].traces[s][r] - methods[j].traces[s][r];
                }
                match t_statistic(&diffs) {
                    Some(t) if t > t_alpha => wins[i][j] += 1,
                    Some(t) if t < -t_alpha => wins[j][i] += 1,
                    _ => {}
                }
            }
        }
    }
    let values = wins
        .iter()
        .map(|row| row.iter().map(|&w| w as f64 / rounds as f64).collect())
        .collect();
    Ok(PenaltyMatrix {
        methods: methods.iter().map(|m| m.method.clone()).collect(),
        values,
        alpha,
        rounds,
    })
}

/// Groups records by method (sorted by name) with seeds in ascending order.
pub fn traces_from_records(records: &[ExperimentRecord]) -> Vec<MethodTraces> {
    let mut by: BTreeMap<&str, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by.entry(&r.method).or_default().push(r);
    }
    by.into_iter()
        .map(|(m, mut rs)| {
            rs.sort_by_key(|r| r.seed);
            MethodTraces {
                method: m.to_string(),
                traces: rs.iter().map(|r| r.accuracy_trace()).collect(),
            }
        })
        .collect()
}

impl PenaltyMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == row)?;
        let j = self.methods.iter().position(|m| m == col)?;
        Some(self.values[i][j])
    }

    pub fn write_csv_to(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["method".to_string()];
        header.extend(self.methods.iter().cloned());
        wtr.write_record(&header)?;
        for (m, row) in self.methods.iter().zip(&self.values) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traces(method: &str, f: impl Fn(usize, usize) -> f64) -> MethodTraces {
        MethodTraces {
            method: method.into(),
            traces: (0..5).map(|s| (0..10).map(|r| f(s, r)).collect()).collect(),
        }
    }

    #[test]
    fn critical_value_for_five_seeds() {
        // t_{0.975, 8}
        assert!((critical_t(5, 0.05).unwrap() - 2.306004).abs() < 1e-5);
        assert!(critical_t(1, 0.05).is_err());
    }

    #[test]
    fn dominant_method_fills_its_cell() {
        let a = traces("a", |s, r| 0.6 + 0.01 * r as f64 + 0.001 * s as f64);
        let b = traces("b", |s, r| 0.5 + 0.01 * r as f64 + 0.0005 * (s % 2) as f64);
        let m = penalty_matrix(&[a, b], 0.05).unwrap();
        assert_eq!(m.get("a", "b"), Some(1.0));
        assert_eq!(m.get("b", "a"), Some(0.0));
    }

    #[test]
    fn identical_traces_give_zero() {
        let a = traces("a", |s, r| 0.5 + 0.01 * (s * r) as f64);
        let b = MethodTraces {
            method: "b".into(),
            ..a.clone()
        };
        let m = penalty_matrix(&[a.clone(), b, a], 0.05).unwrap();
        assert!(m.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_nonzero_gap_counts_as_significant() {
        assert_eq!(t_statistic(&[0.5, 0.5, 0.5]), Some(f64::INFINITY));
        assert_eq!(t_statistic(&[-0.25, -0.25]), Some(f64::NEG_INFINITY));
        assert_eq!(t_statistic(&[0.0, 0.0]), None);
    }

    #[test]
    fn mismatched_traces_are_rejected() {
        let a = traces("a", |_, _| 0.5);
        let mut b = traces("b", |_, _| 0.5);
        b.traces[2].pop();
        assert!(matches!(
            penalty_matrix(&[a.clone(), b], 0.05),
            Err(Error::Data(_))
        ));
        let mut c = traces("c", |_, _| 0.5);
        c.traces.pop();
        assert!(penalty_matrix(&[a, c], 0.05).is_err());
    }

    #[test]
    fn csv_layout() {
        let a = traces("a", |_, _| 0.9);
        let b = traces("b", |s, _| 0.1 + 0.001 * s as f64);
        let m = penalty_matrix(&[a, b], 0.05).unwrap();
        let mut buf = Vec::new();
        m.write_csv_to(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,a,b\na,0,1\nb,0,0\n"
        );
    }
}
