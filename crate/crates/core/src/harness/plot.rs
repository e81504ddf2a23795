//! Per-round mean and standard deviation over seeds, one column pair per
//! method.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::ExperimentRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub methods: Vec<String>,
    /// `mean[round][method]`.
    pub mean: Vec<Vec<f64>>,
    /// Sample standard deviation; 0 for a single seed.
    pub std: Vec<Vec<f64>>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn table(
    records: &[ExperimentRecord],
    metric: impl Fn(&ExperimentRecord, usize) -> Option<f64>,
) -> Result<SeriesTable> {
    if records.is_empty() {
        return Err(Error::data("no records to summarize"));
    }
    let mut by: BTreeMap<&str, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by.entry(&r.method).or_default().push(r);
    }
    let rounds = records.iter().map(|r| r.rounds.len()).max().unwrap_or(0);
    let methods: Vec<String> = by.keys().map(|m| m.to_string()).collect();
    let mut mean = vec![vec![f64::NAN; methods.len()]; rounds];
    let mut std = mean.clone();
    for (j, rs) in by.values().enumerate() {
        for r in 0..rounds {
            let vals: Vec<f64> = rs.iter().filter_map(|rec| metric(rec, r)).collect();
            if !vals.is_empty() {
                let (m, s) = mean_std(&vals);
                mean[r][j] = m;
                std[r][j] = s;
            }
        }
    }
    Ok(SeriesTable { methods, mean, std })
}

pub fn accuracy_table(records: &[ExperimentRecord]) -> Result<SeriesTable> {
    table(records, |rec, r| rec.rounds.get(r).map(|m| m.test_accuracy))
}

pub fn cumulative_id_table(records: &[ExperimentRecord]) -> Result<SeriesTable> {
    table(records, |rec, r| {
        rec.rounds.get(r).map(|m| m.cumulative_id as f64)
    })
}

impl SeriesTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["round".to_string()];
        for m in &self.methods {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        wtr.write_record(&header)?;
        for (r, (mean, std)) in self.mean.iter().zip(&self.std).enumerate() {
            let mut rec = vec![(r + 1).to_string()];
            for (m, s) in mean.iter().zip(std) {
                rec.push(if m.is_nan() {
                    String::new()
                } else {
                    m.to_string()
                });
                rec.push(if s.is_nan() {
                    String::new()
                } else {
                    s.to_string()
                });
            }
            wtr.write_record(&rec)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Writes `accuracy.csv` and `cumulative_id.csv` into `dir`.
pub fn emit_plot_data(records: &[ExperimentRecord], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, t) in [
        ("accuracy.csv", accuracy_table(records)?),
        ("cumulative_id.csv", cumulative_id_table(records)?),
    ] {
        let p = dir.join(name);
        fs::write(&p, t.to_csv()?)?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::{DataSource, RoundMetrics};
    use crate::model::TrainConfig;
    use crate::strategies::{StrategyKind, StrategySpec};

    fn record(method: &str, seed: u64, acc: &[f64], ids: &[usize]) -> ExperimentRecord {
        ExperimentRecord {
            method: method.into(),
            seed,
            strategy: StrategySpec::new(method.parse::<StrategyKind>().unwrap()),
            budget: 10,
            rounds_requested: acc.len(),
            train: TrainConfig::default(),
            data: DataSource::File("x.csv".into()),
            coreset_representation: "gradient".into(),
            initial_labeled: 1,
            unlabeled_id: 1,
            unlabeled_ood: 1,
            rounds: acc
                .iter()
                .zip(ids)
                .enumerate()
                .map(|(r, (&a, &c))| RoundMetrics {
                    round: r + 1,
                    test_accuracy: a,
                    train_epochs: 1,
                    selected: vec![],
                    selected_id: 0,
                    cumulative_id: c,
                    wall_time_s: 0.0,
                })
                .collect(),
            final_test_accuracy: 0.0,
        }
    }

    #[test]
    fn means_match_hand_averages() {
        let recs = vec![
            record("random", 0, &[0.5, 0.6], &[3, 5]),
            record("random", 1, &[0.7, 0.8], &[4, 9]),
            record("flcmi", 0, &[0.9, 1.0], &[10, 20]),
        ];
        let acc = accuracy_table(&recs).unwrap();
        assert_eq!(acc.methods, vec!["flcmi", "random"]);
        assert!((acc.mean[0][1] - 0.6).abs() < 1e-12);
        assert!((acc.mean[1][1] - 0.7).abs() < 1e-12);
        assert!((acc.std[0][1] - (0.02f64).sqrt()).abs() < 1e-12);
        assert_eq!(acc.std[0][0], 0.0);
        let ids = cumulative_id_table(&recs).unwrap();
        assert_eq!(ids.mean[1][1], 7.0);
    }

    #[test]
    fn csv_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record("margin", 0, &[0.25], &[1])];
        let paths = emit_plot_data(&recs, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let acc = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(acc, "round,margin_mean,margin_std\n1,0.25,0\n");
        assert!(emit_plot_data(&[], dir.path()).is_err());
    }
}
