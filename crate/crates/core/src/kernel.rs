//! Similarity kernels over the joint ground set.
//!
//! A [`SimilarityKernel`] is a dense, symmetric `n × n` matrix whose rows and
//! columns are each tagged with a [`Region`]: the unlabeled pool the selector
//! draws from, the query exemplars it should resemble, and the private
//! exemplars it should avoid. Kernels are immutable once built and can be
//! shared read-only across threads.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;
const CACHE_MAGIC: &[u8; 4] = b"SIMK";
const CACHE_VERSION: u32 = 1;
const FLAG_RESCALED: u32 = 1;
const FLAG_RIDGED: u32 = 1 << 1;

/// Row-major matrix of embeddings, one item per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        if data.len() != rows * dim {
            return Err(Error::data(format!(
                "expected {} values for a {rows}x{dim} embedding matrix, got {}",
                rows * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite embedding entry in row {}",
                pos / dim
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::config(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(0, dim, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Reads one embedding per line of comma-separated numbers. A first line
    /// that does not parse as numbers is taken as a header and skipped.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv_from(BufReader::new(File::open(path)?))
    }

    pub fn read_csv_from(r: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(r);
        let mut data = Vec::new();
        let mut dim = None;
        let mut rows = 0;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(|f| f.trim().parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(Error::data(format!("line {}: {e}", line + 1)));
                }
            };
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::data(format!(
                        "line {} has {} values, expected {d}",
                        line + 1,
                        values.len()
                    )));
                }
                _ => {}
            }
            data.extend(values);
            rows += 1;
        }
        let dim = dim.ok_or_else(|| Error::data("embedding file has no rows"))?;
        Self::new(rows, dim, data)
    }

    fn row_norms(&self) -> Result<Vec<f64>> {
        (0..self.rows)
            .map(|i| {
                let n = self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    Ok(n)
                } else {
                    Err(Error::Degenerate(format!("row {i} has zero norm")))
                }
            })
            .collect()
    }
}

/// Plain row-major matrix returned by [`cosine_similarity_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Which part of the joint ground set an index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Unlabeled,
    Query,
    Private,
}

#[derive(Debug, Clone)]
pub struct SimilarityKernel {
    size: usize,
    data: Vec<f64>,
    regions: Vec<Region>,
    nonneg_rescaled: bool,
    psd_ridge: f64,
    min_entry: f64,
}

impl SimilarityKernel {
    /// Wraps a dense symmetric matrix. Entries must be finite and the matrix
    /// symmetric within `1e-9`.
    pub fn new(size: usize, data: Vec<f64>, regions: Vec<Region>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::data(format!(
                "kernel of size {size} needs {} entries, got {}",
                size * size,
                data.len()
            )));
        }
        if regions.len() != size {
            return Err(Error::data(format!(
                "region map has {} entries for a kernel of size {size}",
                regions.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite kernel entry at ({}, {})",
                pos / size,
                pos % size
            )));
        }
        for i in 0..size {
            for j in (i + 1)..size {
                let (a, b) = (data[i * size + j], data[j * size + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::data(format!(
                        "kernel is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let min_entry = data.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            size,
            data,
            regions,
            nonneg_rescaled: false,
            psd_ridge: 0.0,
            min_entry,
        })
    }

    /// Kernel whose every index lies in the unlabeled region.
    pub fn unlabeled(size: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(size, data, vec![Region::Unlabeled; size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    /// Row `i`; by symmetry also column `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn region(&self, i: usize) -> Region {
        self.regions[i]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn indices(&self, region: Region) -> Vec<usize> {
        (0..self.size)
            .filter(|&i| self.regions[i] == region)
            .collect()
    }

    pub fn is_rescaled(&self) -> bool {
        self.nonneg_rescaled
    }

    pub fn psd_ridge(&self) -> f64 {
        self.psd_ridge
    }

    /// True when no entry is negative, which is what facility location needs
    /// for its max-over-empty-set convention.
    pub fn is_nonnegative(&self) -> bool {
        self.size == 0 || self.min_entry >= 0.0
    }

    /// Replaces the region map, keeping the matrix.
    pub fn with_regions(mut self, regions: Vec<Region>) -> Result<Self> {
        if regions.len() != self.size {
            return Err(Error::data(format!(
                "region map has {} entries for a kernel of size {}",
                regions.len(),
                self.size
            )));
        }
        self.regions = regions;
        Ok(self)
    }

    /// Maps every entry `s` to `(1 + s) / 2`, moving cosine similarities into
    /// `[0, 1]` while preserving their order.
    pub fn rescale_nonnegative(mut self) -> Result<Self> {
        if self.psd_ridge > 0.0 {
            return Err(Error::config(
                "rescale the kernel before applying a diagonal ridge",
            ));
        }
        if let Some(pos) = self.data.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(Error::data(format!(
                "entry ({}, {}) = {} lies outside [-1, 1]",
                pos / self.size,
                pos % self.size,
                self.data[pos]
            )));
        }
        for s in &mut self.data {
            *s = (1.0 + *s) / 2.0;
        }
        self.min_entry = (1.0 + self.min_entry) / 2.0;
        self.nonneg_rescaled = true;
        Ok(self)
    }

    /// Adds `eps` to the diagonal.
    pub fn regularize_psd(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::config(format!("ridge must be positive, got {eps}")));
        }
        for i in 0..self.size {
            self.data[i * self.size + i] += eps;
        }
        self.psd_ridge += eps;
        Ok(self)
    }

    /// Writes the kernel cache: a 16-byte header (`SIMK`, version, size,
    /// flags; little-endian `u32`s) followed by row-major little-endian `f32`
    /// entries. Regions and the ridge amount are not persisted.
    pub fn write_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_cache_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_cache_to(&self, w: &mut impl Write) -> Result<()> {
        let size = u32::try_from(self.size)
            .map_err(|_| Error::config("kernel too large for the cache format"))?;
        let mut flags = 0;
        if self.nonneg_rescaled {
            flags |= FLAG_RESCALED;
        }
        if self.psd_ridge > 0.0 {
            flags |= FLAG_RIDGED;
        }
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&size.to_le_bytes())?;
        w.write_all(&flags.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a kernel cache. Every index is tagged unlabeled; callers assign
    /// query/private regions with [`SimilarityKernel::with_regions`].
    pub fn read_cache(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_cache_from(&mut r)
    }

    pub fn read_cache_from(r: &mut impl Read) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[0..4] != CACHE_MAGIC {
            return Err(Error::data("kernel cache has a bad magic number"));
        }
        let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap());
        let version = word(4);
        if version != CACHE_VERSION {
            return Err(Error::data(format!(
                "unsupported kernel cache version {version}"
            )));
        }
        let size = word(8) as usize;
        let flags = word(12);
        let mut bytes = vec![0u8; size * size * 4];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let mut k = Self::unlabeled(size, data)?;
        k.nonneg_rescaled = flags & FLAG_RESCALED != 0;
        // the amount is not stored, only that a ridge was applied
        k.psd_ridge = if flags & FLAG_RIDGED != 0 {
            f64::MIN_POSITIVE
        } else {
            0.0
        };
        Ok(k)
    }
}

/// `(i, j) = <a_i, b_j> / (|a_i| |b_j|)`, clamped into `[-1, 1]`.
pub fn cosine_similarity_matrix(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<DenseMatrix> {
    if a.dim != b.dim {
        return Err(Error::config(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim, b.dim
        )));
    }
    let na = a.row_norms()?;
    let nb = b.row_norms()?;
    let cols = b.rows;
    let mut data = vec![0.0; a.rows * cols];
    data.par_chunks_mut(cols.max(1))
        .take(a.rows)
        .enumerate()
        .for_each(|(i, out)| {
            let ai = a.row(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = (dot(ai, b.row(j)) / (na[i] * nb[j])).clamp(-1.0, 1.0);
            }
        });
    Ok(DenseMatrix {
        rows: a.rows,
        cols,
        data,
    })
}

/// Builds the full cosine kernel over `U ∪ I ∪ O` (in that index order),
/// tagging the three blocks as unlabeled, query and private. When `rescale`
/// is set the kernel is mapped into `[0, 1]`; a positive `ridge` is then added
/// to the diagonal.
pub fn assemble_joint_kernel(
    unlabeled: &EmbeddingMatrix,
    query: &EmbeddingMatrix,
    private: &EmbeddingMatrix,
    rescale: bool,
    ridge: f64,
) -> Result<SimilarityKernel> {
    let dim = unlabeled.dim;
    if query.dim != dim || private.dim != dim {
        return Err(Error::config(format!(
            "embedding dimensions differ: {}, {}, {}",
            dim, query.dim, private.dim
        )));
    }
    let n = unlabeled.rows + query.rows + private.rows;
    let mut rows: Vec<&[f64]> = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    for (m, region) in [
        (unlabeled, Region::Unlabeled),
        (query, Region::Query),
        (private, Region::Private),
    ] {
        for i in 0..m.rows {
            rows.push(m.row(i));
            regions.push(region);
        }
    }
    let norms: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let n = dot(r, r).sqrt();
            if n > 0.0 {
                Ok(n)
            } else {
                Err(Error::Degenerate(format!(
                    "row {i} of the joint embedding has zero norm"
                )))
            }
        })
        .collect::<Result<_>>()?;

    // upper triangle computed once and mirrored so the result is exactly symmetric
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n.max(1))
        .take(n)
        .enumerate()
        .for_each(|(i, out)| {
            for j in i..n {
                out[j] = (dot(rows[i], rows[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            }
        });
    for i in 0..n {
        for j in 0..i {
            data[i * n + j] = data[j * n + i];
        }
    }

    let mut kernel = SimilarityKernel::new(n, data, regions)?;
    if rescale {
        kernel = kernel.rescale_nonnegative()?;
    }
    if ridge > 0.0 {
        kernel = kernel.regularize_psd(ridge)?;
    } else if ridge < 0.0 {
        return Err(Error::config(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }
    Ok(kernel)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn emb(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows[0].len(), rows).unwrap()
    }

    fn random_emb(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
        let data = (0..rows * dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        EmbeddingMatrix::new(rows, dim, data).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let one = |a: Vec<f64>, b: Vec<f64>| {
            cosine_similarity_matrix(&emb(&[a]), &emb(&[b]))
                .unwrap()
                .get(0, 0)
        };
        assert_eq!(one(vec![1.0, 0.0], vec![1.0, 0.0]), 1.0);
        assert_eq!(one(vec![1.0, 0.0], vec![0.0, 1.0]), 0.0);
        assert!(
            (one(vec![1.0, 1.0], vec![1.0, 0.0]) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12
        );
    }

    #[test]
    fn cosine_errors() {
        let a = emb(&[vec![1.0, 0.0]]);
        let b = emb(&[vec![1.0, 0.0, 0.0]]);
        assert!(matches!(
            cosine_similarity_matrix(&a, &b),
            Err(Error::Config(_))
        ));
        let z = emb(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        match cosine_similarity_matrix(&a, &z) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("row 1")),
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn embedding_rejects_non_finite() {
        assert!(EmbeddingMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(EmbeddingMatrix::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn rescale_examples() {
        let k = SimilarityKernel::unlabeled(3, vec![1.0, -1.0, 0.0, -1.0, 1.0, 0.5, 0.0, 0.5, 1.0])
            .unwrap()
            .rescale_nonnegative()
            .unwrap();
        assert_eq!(k.get(0, 0), 1.0);
        assert_eq!(k.get(0, 1), 0.0);
        assert_eq!(k.get(0, 2), 0.5);
        assert!(k.is_rescaled());
        assert!(k.is_nonnegative());

        let bad = SimilarityKernel::unlabeled(1, vec![1.5]).unwrap();
        assert!(matches!(bad.rescale_nonnegative(), Err(Error::Data(_))));
    }

    #[test]
    fn ridge_examples() {
        let k = SimilarityKernel::unlabeled(2, vec![1.0, 0.0, 0.0, 1.0])
            .unwrap()
            .regularize_psd(0.01)
            .unwrap();
        assert_eq!(k.get(0, 0), 1.01);
        assert_eq!(k.get(1, 1), 1.01);
        assert_eq!(k.psd_ridge(), 0.01);

        // [[1,1],[1,1]] has eigenvalues {2, 0}; the ridge shifts both
        let k = SimilarityKernel::unlabeled(2, vec![1.0; 4])
            .unwrap()
            .regularize_psd(0.1)
            .unwrap();
        let m = DMatrix::from_row_slice(2, 2, k.as_slice());
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 0.1).abs() < 1e-12 && (ev[1] - 2.1).abs() < 1e-12);

        let raw = vec![1.0, 0.3, -0.2, 0.3, 1.0, 0.7, -0.2, 0.7, 1.0];
        let k = SimilarityKernel::unlabeled(3, raw.clone())
            .unwrap()
            .regularize_psd(0.05)
            .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(k.get(i, j), raw[i * 3 + j]);
                }
            }
        }
        let k = SimilarityKernel::unlabeled(1, vec![1.0]).unwrap();
        assert!(matches!(
            k.clone().regularize_psd(0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(k.regularize_psd(-1.0), Err(Error::Config(_))));
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        assert!(SimilarityKernel::unlabeled(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn joint_kernel_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_emb(&mut rng, 3, 4);
        let i = random_emb(&mut rng, 2, 4);
        let o = random_emb(&mut rng, 1, 4);
        let k = assemble_joint_kernel(&u, &i, &o, false, 0.0).unwrap();
        assert_eq!(k.size(), 6);
        assert_eq!(k.indices(Region::Unlabeled), vec![0, 1, 2]);
        assert_eq!(k.indices(Region::Query), vec![3, 4]);
        assert_eq!(k.indices(Region::Private), vec![5]);
    }

    #[test]
    fn identical_unlabeled_rows_give_all_ones_block() {
        let u = emb(&vec![vec![0.3, -2.0, 1.0]; 4]);
        let q = emb(&[vec![1.0, 0.0, 0.0]]);
        let p = EmbeddingMatrix::empty(3).unwrap();
        let k = assemble_joint_kernel(&u, &q, &p, false, 0.0).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!((k.get(a, b) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_joint_kernel_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = random_emb(&mut rng, 9, 5);
            let i = random_emb(&mut rng, 3, 5);
            let o = random_emb(&mut rng, 2, 5);
            let k = assemble_joint_kernel(&u, &i, &o, false, 0.0).unwrap();
            let n = k.size();
            for a in 0..n {
                for b in 0..n {
                    assert!((k.get(a, b) - k.get(b, a)).abs() <= 1e-9);
                    assert!((-1.0..=1.0).contains(&k.get(a, b)));
                }
            }
            let m = DMatrix::from_row_slice(n, n, k.as_slice());
            let min = m.symmetric_eigen().eigenvalues.min();
            assert!(min >= -1e-8, "min eigenvalue {min}");
        }
    }

    #[test]
    fn ridged_gram_has_eigenvalues_above_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_emb(&mut rng, 12, 3);
        let e = EmbeddingMatrix::empty(3).unwrap();
        let k = assemble_joint_kernel(&u, &e, &e, false, 0.01).unwrap();
        let m = DMatrix::from_row_slice(12, 12, k.as_slice());
        assert!(m.symmetric_eigen().eigenvalues.min() >= 0.01 - 1e-10);
    }

    #[test]
    fn cache_round_trip_in_memory() {
        let k = SimilarityKernel::unlabeled(2, vec![1.0, 0.25, 0.25, 1.0])
            .unwrap()
            .rescale_nonnegative()
            .unwrap();
        let mut buf = Vec::new();
        k.write_cache_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 4 * 4);
        assert_eq!(&buf[0..4], b"SIMK");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        let back = SimilarityKernel::read_cache_from(&mut buf.as_slice()).unwrap();
        assert!(back.is_rescaled());
        assert_eq!(back.get(0, 1), 0.625);
    }

    #[test]
    fn embedding_csv_with_and_without_header() {
        let m = EmbeddingMatrix::read_csv_from("a,b\n1,2\n3.5, -4\n".as_bytes()).unwrap();
        assert_eq!((m.rows(), m.dim()), (2, 2));
        assert_eq!(m.row(1), &[3.5, -4.0]);
        let m = EmbeddingMatrix::read_csv_from("1,2,3\n".as_bytes()).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0]);
        assert!(EmbeddingMatrix::read_csv_from("1,2\n3\n".as_bytes()).is_err());
        assert!(EmbeddingMatrix::read_csv_from("1,2\nx,y\n".as_bytes()).is_err());
        assert!(EmbeddingMatrix::read_csv_from("".as_bytes()).is_err());
    }

    #[test]
    fn cache_rejects_bad_magic() {
        let mut buf = b"NOPE".to_vec();
        buf.extend_from_slice(&[0u8; 12]);
        assert!(SimilarityKernel::read_cache_from(&mut buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn rescale_is_strictly_monotone(s in -1.0f64..=1.0, t in -1.0f64..=1.0) {
            prop_assume!(s < t);
            let k = SimilarityKernel::unlabeled(2, vec![s, t, t, s]).unwrap()
                .rescale_nonnegative().unwrap();
            prop_assert!(k.get(0, 0) < k.get(0, 1));
        }

        #[test]
        fn cache_round_trip_matches_f32(vals in proptest::collection::vec(-1.0f64..=1.0, 6)) {
            // symmetric 3x3 from the upper triangle
            let idx = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
            let data: Vec<f64> = (0..9).map(|p| vals[idx[p / 3][p % 3]]).collect();
            let k = SimilarityKernel::unlabeled(3, data.clone()).unwrap();
            let mut buf = Vec::new();
            k.write_cache_to(&mut buf).unwrap();
            let back = SimilarityKernel::read_cache_from(&mut buf.as_slice()).unwrap();
            for (a, b) in data.iter().zip(back.as_slice()) {
                prop_assert_eq!(*a as f32 as f64, *b);
            }
        }
    }
}
