//! Feature datasets with split and ID/OOD columns.
//!
//! CSV layout: `id,f0,...,f{d-1},label,split,dist`. Splits are `labeled`,
//! `unlabeled` and `test`; `dist` is `id` or `ood`. OOD rows always carry
//! the label `n_id`, one past the largest in-distribution label.
//!
//! A binary companion stores the features as little-endian `f32`,
//! row-major, next to a JSON manifest naming the metadata CSV.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Labeled,
    Unlabeled,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    Id,
    Ood,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Labeled => "labeled",
            Split::Unlabeled => "unlabeled",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeled" => Ok(Split::Labeled),
            "unlabeled" => Ok(Split::Unlabeled),
            "test" => Ok(Split::Test),
            other => Err(Error::data(format!("unknown split '{other}'"))),
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dist::Id => "id",
            Dist::Ood => "ood",
        })
    }
}

impl FromStr for Dist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" => Ok(Dist::Id),
            "ood" => Ok(Dist::Ood),
            other => Err(Error::data(format!("unknown dist '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: EmbeddingMatrix,
    labels: Vec<usize>,
    split: Vec<Split>,
    dist: Vec<Dist>,
    n_id_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub rows: usize,
    pub dim: usize,
    /// Metadata CSV, relative to the manifest's directory.
    pub csv: PathBuf,
    /// Little-endian `f32` features, relative to the manifest's directory.
    pub features: PathBuf,
}

impl Dataset {
    /// OOD rows get label `n_id_classes` whatever `labels` holds for them.
    pub fn new(
        features: EmbeddingMatrix,
        mut labels: Vec<usize>,
        split: Vec<Split>,
        dist: Vec<Dist>,
        n_id_classes: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n || split.len() != n || dist.len() != n {
            return Err(Error::data(format!(
                "{n} feature rows but {} labels, {} splits, {} dist flags",
                labels.len(),
                split.len(),
                dist.len()
            )));
        }
        if n_id_classes == 0 {
            return Err(Error::data(
                "dataset needs at least one in-distribution class",
            ));
        }
        for i in 0..n {
            match dist[i] {
                Dist::Id if labels[i] >= n_id_classes => {
                    return Err(Error::data(format!(
                        "row {i}: ID label {} is not below {n_id_classes}",
                        labels[i]
                    )))
                }
                Dist::Id => {}
                Dist::Ood => labels[i] = n_id_classes,
            }
            if split[i] != Split::Unlabeled && dist[i] == Dist::Ood {
                return Err(Error::data(format!(
                    "row {i}: OOD rows may only appear in the unlabeled split"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            split,
            dist,
            n_id_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn features(&self) -> &EmbeddingMatrix {
        &self.features
    }

    pub fn n_id_classes(&self) -> usize {
        self.n_id_classes
    }

    /// `n_id_classes + 1`: the model's extra output is the OOD class.
    pub fn n_classes(&self) -> usize {
        self.n_id_classes + 1
    }

    pub fn split(&self, i: usize) -> Split {
        self.split[i]
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.split[i] == split)
            .collect()
    }

    pub fn count(&self, split: Split, dist: Dist) -> usize {
        (0..self.len())
            .filter(|&i| self.split[i] == split && self.dist[i] == dist)
            .count()
    }

    /// Ground truth for row `i`: the oracle's answer when it is labeled.
    pub fn reveal(&self, i: usize) -> (usize, Dist) {
        (self.labels[i], self.dist[i])
    }

    /// Labels of the given rows.
    pub fn labels_of(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn rows_of(&self, rows: &[usize]) -> Result<EmbeddingMatrix> {
        let mut data = Vec::with_capacity(rows.len() * self.dim());
        for &i in rows {
            data.extend_from_slice(self.features.row(i));
        }
        EmbeddingMatrix::new(rows.len(), self.dim(), data)
    }

    /// Same dataset with the given rows' ID/OOD flags replaced. Labels are
    /// left untouched.
    pub fn with_dist(&self, dist: Vec<Dist>) -> Result<Self> {
        if dist.len() != self.len() {
            return Err(Error::data("dist column has the wrong length"));
        }
        let mut out = self.clone();
        out.dist = dist;
        Ok(out)
    }

    pub fn dist_column(&self) -> &[Dist] {
        &self.dist
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        self.write_csv_to(BufWriter::new(file))
    }

    pub fn write_csv_to(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim()).map(|k| format!("f{k}")));
        header.extend(["label".into(), "split".into(), "dist".into()]);
        wtr.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            rec.clear();
            rec.push(i.to_string());
            rec.extend(self.features.row(i).iter().map(|v| v.to_string()));
            rec.push(self.labels[i].to_string());
            rec.push(self.split[i].to_string());
            rec.push(self.dist[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        Self::read_csv_from(BufReader::new(file))
    }

    pub fn read_csv_from(r: impl Read) -> Result<Self> {
        let meta = read_rows(r, true)?;
        let features = EmbeddingMatrix::new(meta.rows, meta.dim, meta.features)?;
        Self::from_meta(features, meta.labels, meta.split, meta.dist)
    }

    fn from_meta(
        features: EmbeddingMatrix,
        labels: Vec<usize>,
        split: Vec<Split>,
        dist: Vec<Dist>,
    ) -> Result<Self> {
        let n_id = labels
            .iter()
            .zip(&dist)
            .filter(|(_, &d)| d == Dist::Id)
            .map(|(&l, _)| l + 1)
            .max()
            .ok_or_else(|| Error::data("dataset has no in-distribution rows"))?;
        Self::new(features, labels, split, dist, n_id)
    }

    /// Writes `<stem>.csv`, `<stem>.f32` and `<stem>.json` into `dir`.
    pub fn write_binary(&self, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let csv_name = PathBuf::from(format!("{stem}.csv"));
        let bin_name = PathBuf::from(format!("{stem}.f32"));
        self.write_csv(dir.join(&csv_name))?;
        let mut w = BufWriter::new(File::create(dir.join(&bin_name))?);
        for v in self.features.as_slice() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.flush()?;
        let manifest = Manifest {
            rows: self.len(),
            dim: self.dim(),
            csv: csv_name,
            features: bin_name,
        };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }

    /// Loads a dataset through its manifest; features come from the binary
    /// file, everything else from the CSV.
    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest: Manifest = serde_json::from_slice(&fs::read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let raw = fs::read(base.join(&manifest.features))?;
        let expect = manifest.rows * manifest.dim * 4;
        if raw.len() != expect {
            return Err(Error::data(format!(
                "feature file has {} bytes, manifest implies {expect}",
                raw.len()
            )));
        }
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let features = EmbeddingMatrix::new(manifest.rows, manifest.dim, data)?;
        let meta = read_rows(BufReader::new(File::open(base.join(&manifest.csv))?), false)?;
        if meta.rows != manifest.rows {
            return Err(Error::data(format!(
                "metadata CSV has {} rows, manifest says {}",
                meta.rows, manifest.rows
            )));
        }
        Self::from_meta(features, meta.labels, meta.split, meta.dist)
    }

    /// Reads a manifest (`.json`) or a CSV, by extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::read_manifest(path),
            _ => Self::read_csv(path),
        }
    }
}

struct Rows {
    rows: usize,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    split: Vec<Split>,
    dist: Vec<Dist>,
}

fn read_rows(r: impl Read, with_features: bool) -> Result<Rows> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    if n < 5
        || cols[0] != "id"
        || cols[n - 3] != "label"
        || cols[n - 2] != "split"
        || cols[n - 1] != "dist"
    {
        return Err(Error::data(
            "dataset header must be id,f0..f{d-1},label,split,dist",
        ));
    }
    let dim = n - 4;
    for (k, c) in cols[1..=dim].iter().enumerate() {
        if *c != format!("f{k}") {
            return Err(Error::data(format!("expected column f{k}, found '{c}'")));
        }
    }
    let mut out = Rows {
        rows: 0,
        dim,
        features: Vec::new(),
        labels: Vec::new(),
        split: Vec::new(),
        dist: Vec::new(),
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id: usize = rec[0]
            .parse()
            .map_err(|_| Error::data(format!("row {line}: bad id '{}'", &rec[0])))?;
        if id != line {
            return Err(Error::data(format!("row {line}: id {id} out of sequence")));
        }
        if with_features {
            for k in 0..dim {
                let v: f64 = rec[1 + k]
                    .parse()
                    .map_err(|_| Error::data(format!("row {line}: bad feature f{k}")))?;
                out.features.push(v);
            }
        }
        out.labels.push(
            rec[n - 3]
                .parse()
                .map_err(|_| Error::data(format!("row {line}: bad label '{}'", &rec[n - 3])))?,
        );
        out.split.push(rec[n - 2].parse()?);
        out.dist.push(rec[n - 1].parse()?);
        out.rows += 1;
    }
    Ok(out)
}
