//! Block-Toeplitz (temporally stationary) structure.
//!
//! A `p_t × p_t` Toeplitz factor is determined by its `2p_t − 1` diagonal
//! values. Diagonal offsets are `j = row − col` in `−p_t+1..=p_t−1`; row
//! `j + p_t − 1` (zero-based) of the projector `P` averages the entries of
//! `vec(A)` lying on diagonal `j`, scaled so that every row has unit norm.

use nalgebra::DMatrix;

use crate::error::{arg_err, dim_err, Result};

/// Zero-based column-major linear indices `c·p_t + r` of the entries with
/// `r − c = j` in a `p_t × p_t` matrix. Cardinality `p_t − |j|`.
pub fn diag_indices(p_t: usize, j: isize) -> Result<Vec<usize>> {
    let n = p_t as isize;
    if p_t == 0 || j.abs() >= n {
        return Err(arg_err!("diagonal offset {j} out of range for p_t={p_t}"));
    }
    let cols = if j >= 0 { 0..(n - j) } else { (-j)..n };
    Ok(cols.map(|c| (c * n + c + j) as usize).collect())
}

/// The `(2p_t − 1) × p_t²` row-orthonormal projector onto Toeplitz diagonals,
/// with its index sets and 1-norm weights.
#[derive(Debug, Clone)]
pub struct ToeplitzProjector {
    p_t: usize,
    weights: Vec<f64>,
    index_sets: Vec<Vec<usize>>,
    matrix: DMatrix<f64>,
}

impl ToeplitzProjector {
    pub fn new(p_t: usize) -> Result<Self> {
        if p_t == 0 {
            return Err(arg_err!("p_t must be positive"));
        }
        let n = p_t as isize;
        let rows = 2 * p_t - 1;
        let mut matrix = DMatrix::zeros(rows, p_t * p_t);
        let mut weights = Vec::with_capacity(rows);
        let mut index_sets = Vec::with_capacity(rows);
        for j in (-n + 1)..n {
            let row = (j + n - 1) as usize;
            let w = 1.0 / ((p_t - j.unsigned_abs()) as f64).sqrt();
            let idx = diag_indices(p_t, j)?;
            for &k in &idx {
                matrix[(row, k)] = w;
            }
            weights.push(w);
            index_sets.push(idx);
        }
        Ok(Self { p_t, weights, index_sets, matrix })
    }

    pub fn p_t(&self) -> usize {
        self.p_t
    }

    /// `c_j = 1/√(p_t − |j|)` ordered by `j = −p_t+1..=p_t−1`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `K(j)` ordered like [`weights`](Self::weights).
    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.index_sets
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `P·r` for `r` with `p_t²` rows.
    pub fn apply(&self, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if r.nrows() != self.p_t * self.p_t {
            return Err(dim_err!("apply_p expects {} rows, got {}", self.p_t * self.p_t, r.nrows()));
        }
        // Rows of P have disjoint supports, so P·r is a weighted sum of rows of r.
        let mut out = DMatrix::zeros(self.weights.len(), r.ncols());
        for (row, (idx, &w)) in self.index_sets.iter().zip(&self.weights).enumerate() {
            let mut acc = out.row_mut(row);
            for &k in idx {
                acc += r.row(k);
            }
            acc *= w;
        }
        Ok(out)
    }

    /// `Pᵀ·s` for `s` with `2p_t − 1` rows.
    pub fn apply_transpose(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if s.nrows() != self.weights.len() {
            return Err(dim_err!("apply_p_transpose expects {} rows, got {}", self.weights.len(), s.nrows()));
        }
        let mut out = DMatrix::zeros(self.p_t * self.p_t, s.ncols());
        for (row, (idx, &w)) in self.index_sets.iter().zip(&self.weights).enumerate() {
            let src = s.row(row) * w;
            for &k in idx {
                out.row_mut(k).copy_from(&src);
            }
        }
        Ok(out)
    }
}

pub fn build_projector(p_t: usize) -> Result<ToeplitzProjector> {
    ToeplitzProjector::new(p_t)
}

/// Checks `block(i, j) == block(i+1, j+1)` for all frames, within `tol`
/// (absolute, entrywise).
pub fn is_block_toeplitz(m: &DMatrix<f64>, p_t: usize, p_s: usize, tol: f64) -> bool {
    if m.shape() != (p_t * p_s, p_t * p_s) {
        return false;
    }
    for i in 0..p_t.saturating_sub(1) {
        for j in 0..p_t - 1 {
            let a = m.view((i * p_s, j * p_s), (p_s, p_s));
            let b = m.view(((i + 1) * p_s, (j + 1) * p_s), (p_s, p_s));
            if (a - b).amax() > tol {
                return false;
            }
        }
    }
    true
}

/// Averages the blocks along each temporal diagonal (the orthogonal projection
/// onto block-Toeplitz matrices).
pub fn block_toeplitz_average(m: &DMatrix<f64>, p_t: usize, p_s: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    let n = p_t as isize;
    for lag in (-n + 1)..n {
        let pairs: Vec<(usize, usize)> = (0..p_t)
            .filter_map(|j| {
                let i = j as isize + lag;
                (0..n).contains(&i).then_some((i as usize, j))
            })
            .collect();
        let mut avg = DMatrix::zeros(p_s, p_s);
        for &(i, j) in &pairs {
            avg += m.view((i * p_s, j * p_s), (p_s, p_s));
        }
        avg /= pairs.len() as f64;
        for &(i, j) in &pairs {
            out.view_mut((i * p_s, j * p_s), (p_s, p_s)).copy_from(&avg);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rearrange::{inverse_rearrange_matrix, kron, rearrange_matrix, vec, Dims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_index_sets() {
        // one-based {1,5,9}, {2,6}, {7}
        assert_eq!(diag_indices(3, 0).unwrap(), vec![0, 4, 8]);
        assert_eq!(diag_indices(3, 1).unwrap(), vec![1, 5]);
        assert_eq!(diag_indices(3, -2).unwrap(), vec![6]);
        assert!(diag_indices(3, 3).is_err());
        assert!(diag_indices(3, -3).is_err());
    }

    #[test]
    fn index_sets_partition_the_vectorized_matrix() {
        for p_t in 1..8 {
            let proj = build_projector(p_t).unwrap();
            let mut all: Vec<usize> = proj.index_sets().iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..p_t * p_t).collect::<Vec<_>>());
        }
    }

    #[test]
    fn scalar_projector() {
        let p = build_projector(1).unwrap();
        assert_eq!(p.matrix(), &DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn main_diagonal_row() {
        let p = build_projector(3).unwrap();
        let row = p.matrix().row(2);
        let w = 1.0 / 3f64.sqrt();
        for (k, v) in row.iter().enumerate() {
            let expected = if [0, 4, 8].contains(&k) { w } else { 0.0 };
            assert_eq!(*v, expected);
        }
        let ppt = p.matrix() * p.matrix().transpose();
        assert!((ppt - DMatrix::identity(5, 5)).amax() < 1e-12);
    }

    #[test]
    fn apply_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = build_projector(4).unwrap();
        let r = DMatrix::from_fn(16, 5, |_, _| rng.random_range(-1.0..1.0));
        assert!((p.apply(&r).unwrap() - p.matrix() * &r).amax() < 1e-14);
        let s = DMatrix::from_fn(7, 5, |_, _| rng.random_range(-1.0..1.0));
        assert!((p.apply_transpose(&s).unwrap() - p.matrix().transpose() * &s).amax() < 1e-14);
        assert!((p.apply(&p.apply_transpose(&s).unwrap()).unwrap() - &s).amax() < 1e-12);
        assert!(p.apply(&DMatrix::zeros(15, 2)).is_err());
        assert!(p.apply_transpose(&DMatrix::zeros(8, 2)).is_err());
        assert_eq!(p.apply(&DMatrix::zeros(16, 3)).unwrap(), DMatrix::zeros(7, 3));
        assert_eq!(p.apply_transpose(&DMatrix::zeros(7, 3)).unwrap(), DMatrix::zeros(16, 3));
    }

    #[test]
    fn toeplitz_kron_rows() {
        let p_t = 4;
        let diag = [0.3, -0.2, 0.7, 1.5, 0.4, 0.1, -0.6]; // v for j = -3..3
        let a = DMatrix::from_fn(p_t, p_t, |r, c| diag[(r as isize - c as isize + 3) as usize]);
        let b = DMatrix::from_fn(2, 2, |r, c| (r + 2 * c) as f64 + 0.5);
        let dims = Dims::new(p_t, 2).unwrap();
        let r = rearrange_matrix(&kron(&a, &b), dims).unwrap();
        let proj = build_projector(p_t).unwrap();
        let pr = proj.apply(r.matrix()).unwrap();
        for (row, j) in (-3isize..=3).enumerate() {
            let scale = ((p_t - j.unsigned_abs()) as f64).sqrt() * diag[row];
            let expected = vec(&b).transpose() * scale;
            assert!((pr.row(row) - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn transpose_output_is_block_toeplitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = Dims::new(5, 3).unwrap();
        let proj = build_projector(5).unwrap();
        let s = DMatrix::from_fn(9, 9, |_, _| rng.random_range(-1.0..1.0));
        let m = inverse_rearrange_matrix(&proj.apply_transpose(&s).unwrap(), dims).unwrap();
        assert!(is_block_toeplitz(&m, 5, 3, 1e-14));
    }

    #[test]
    fn projection_fixes_block_toeplitz_and_matches_averaging() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dims = Dims::new(4, 2).unwrap();
        let proj = build_projector(4).unwrap();
        let m = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        let r = rearrange_matrix(&m, dims).unwrap();
        let projected = proj.apply_transpose(&proj.apply(r.matrix()).unwrap()).unwrap();
        let back = inverse_rearrange_matrix(&projected, dims).unwrap();
        assert!((&back - block_toeplitz_average(&m, 4, 2)).amax() < 1e-12);
        assert!(projected.norm() <= r.matrix().norm() + 1e-12);

        let r2 = rearrange_matrix(&back, dims).unwrap();
        let again = proj.apply_transpose(&proj.apply(r2.matrix()).unwrap()).unwrap();
        assert!((again - r2.matrix()).amax() < 1e-12);
    }

    #[test]
    fn unit_vectors_map_to_unit_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let proj = build_projector(6).unwrap();
        for _ in 0..20 {
            let mut x = nalgebra::DVector::from_fn(11, |_, _| rng.random_range(-1.0..1.0));
            x.normalize_mut();
            let y = x.transpose() * proj.matrix();
            assert!((y.norm() - 1.0).abs() < 1e-12);
        }
    }
}
