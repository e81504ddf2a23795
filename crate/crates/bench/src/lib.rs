//! Fixtures shared by the selection benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simsel::kernel::assemble_joint_kernel;
use simsel::{EmbeddingMatrix, SimilarityKernel};

/// Uniform embeddings in `[-1, 1]^dim`.
pub fn embeddings(rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    EmbeddingMatrix::new(rows, dim, data).expect("valid shape")
}

/// Joint kernel over `n` unlabeled, `q` query and `p` private items.
/// Rescaled into `[0, 1]` when `rescale` is set, otherwise ridged by `ridge`.
pub fn joint_kernel(
    n: usize,
    q: usize,
    p: usize,
    dim: usize,
    rescale: bool,
    ridge: f64,
) -> SimilarityKernel {
    let u = embeddings(n, dim, 1);
    let qm = embeddings(q, dim, 2);
    let pm = embeddings(p, dim, 3);
    assemble_joint_kernel(&u, &qm, &pm, rescale, ridge).expect("nonzero rows")
}
