//! Helpers shared by the integration tests. The rearrangement here is written
//! block by block so that it can serve as an oracle for the library version.

#![allow(dead_code)]

use kronshrink::{Dims, StCovariance};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = uniform(rng, n, n);
    (&a + a.transpose()) * 0.5
}

/// Wishart-like positive definite covariance.
pub fn random_covariance(rng: &mut ChaCha8Rng, dims: Dims) -> StCovariance {
    let d = dims.total();
    let x = uniform(rng, d, d + 4);
    StCovariance::symmetrize(dims, &(&x * x.transpose() / d as f64)).unwrap()
}

/// Row `j·p_t + i` holds the column-major entries of block `(i, j)`.
pub fn oracle_rearrange(m: &DMatrix<f64>, dims: Dims) -> DMatrix<f64> {
    let Dims { p_t, p_s } = dims;
    let mut out = DMatrix::zeros(p_t * p_t, p_s * p_s);
    for j in 0..p_t {
        for i in 0..p_t {
            let block = m.view((i * p_s, j * p_s), (p_s, p_s));
            for (k, v) in block.iter().enumerate() {
                out[(j * p_t + i, k)] = *v;
            }
        }
    }
    out
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Explicit matrix of a linear map on `rows × cols` matrices, in
/// column-major `vec` coordinates.
pub fn operator_matrix(rows: usize, cols: usize, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> DMatrix<f64> {
    let n = rows * cols;
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = DMatrix::zeros(rows, cols);
        e.as_mut_slice()[k] = 1.0;
        let image = f(&e);
        out.set_column(k, &nalgebra::DVector::from_column_slice(image.as_slice()));
    }
    out
}
