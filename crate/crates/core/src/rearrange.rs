//! Spatio-temporal covariance containers and the Pitsianis–Van Loan
//! rearrangement.
//!
//! A covariance over `p_t` frames of `p_s` variables is stored time-major:
//! block `(i, j)` (each `p_s × p_s`) is the cross-covariance of frame `i` with
//! frame `j`. The rearrangement maps it to a `p_t² × p_s²` matrix whose row for
//! block `(i, j)` is `vec(block(i, j))ᵀ`. Rows are ordered column-major over
//! the block grid and `vec` is column-major, so that
//! `rearrange(A ⊗ B) = vec(A)·vec(B)ᵀ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};

/// Relative Frobenius tolerance on `‖M − Mᵀ‖_F / ‖M‖_F` accepted by
/// [`StCovariance::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub p_t: usize,
    pub p_s: usize,
}

impl Dims {
    pub fn new(p_t: usize, p_s: usize) -> Result<Self> {
        if p_t == 0 || p_s == 0 {
            return Err(arg_err!("dimensions must be positive, got p_t={p_t}, p_s={p_s}"));
        }
        Ok(Self { p_t, p_s })
    }

    /// Total number of variables `p_t·p_s`.
    pub fn total(&self) -> usize {
        self.p_t * self.p_s
    }

    /// Shape of the rearranged matrix, `(p_t², p_s²)`.
    pub fn rearranged_shape(&self) -> (usize, usize) {
        (self.p_t * self.p_t, self.p_s * self.p_s)
    }
}

/// A symmetric `p_t·p_s × p_t·p_s` spatio-temporal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StCovariance {
    dims: Dims,
    entries: DMatrix<f64>,
}

impl StCovariance {
    /// Wraps `entries`, rejecting non-square, mis-sized, non-finite or
    /// asymmetric input.
    pub fn new(dims: Dims, entries: DMatrix<f64>) -> Result<Self> {
        check_square(&dims, &entries)?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("covariance has non-finite entries".into()));
        }
        let asym = relative_asymmetry(&entries);
        if asym > SYMMETRY_TOL {
            return Err(arg_err!("matrix is not symmetric (relative asymmetry {asym:.3e} > {SYMMETRY_TOL:e})"));
        }
        Ok(Self { dims, entries })
    }

    /// Builds `(m + mᵀ)/2`. The result is exactly symmetric.
    pub fn symmetrize(dims: Dims, m: &DMatrix<f64>) -> Result<Self> {
        check_square(&dims, m)?;
        let mut out = m.clone();
        let d = m.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("covariance has non-finite entries".into()));
        }
        Ok(Self { dims, entries: out })
    }

    pub fn zeros(dims: Dims) -> Self {
        let d = dims.total();
        Self { dims, entries: DMatrix::zeros(d, d) }
    }

    pub fn identity(dims: Dims) -> Self {
        let d = dims.total();
        Self { dims, entries: DMatrix::identity(d, d) }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// The `p_s × p_s` block for frames `(i, j)`, zero-based.
    pub fn block(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        block(&self.entries, self.dims, i, j)
    }

    /// Largest diagonal entry.
    pub fn max_diagonal(&self) -> f64 {
        self.entries.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        self.entries.clone().symmetric_eigenvalues().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// The `p_t² × p_s²` rearrangement of a spatio-temporal matrix, or any matrix
/// living in that space (low-rank and sparse parts, solver iterates).
#[derive(Debug, Clone, PartialEq)]
pub struct RearrangedMatrix {
    dims: Dims,
    entries: DMatrix<f64>,
}

impl RearrangedMatrix {
    pub fn new(dims: Dims, entries: DMatrix<f64>) -> Result<Self> {
        let shape = dims.rearranged_shape();
        if entries.shape() != shape {
            return Err(dim_err!(
                "rearranged matrix must be {}x{}, got {}x{}",
                shape.0,
                shape.1,
                entries.nrows(),
                entries.ncols()
            ));
        }
        Ok(Self { dims, entries })
    }

    pub fn zeros(dims: Dims) -> Self {
        let (r, c) = dims.rearranged_shape();
        Self { dims, entries: DMatrix::zeros(r, c) }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

fn check_square(dims: &Dims, m: &DMatrix<f64>) -> Result<()> {
    let d = dims.total();
    if m.shape() != (d, d) {
        return Err(dim_err!(
            "expected {d}x{d} matrix for p_t={}, p_s={}, got {}x{}",
            dims.p_t,
            dims.p_s,
            m.nrows(),
            m.ncols()
        ));
    }
    Ok(())
}

/// `‖M − Mᵀ‖_F / ‖M‖_F`, zero for the zero matrix.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

/// Block `(i, j)` (zero-based frame indices) of a `p_t·p_s` square matrix.
pub fn block(m: &DMatrix<f64>, dims: Dims, i: usize, j: usize) -> Result<DMatrix<f64>> {
    check_square(&dims, m)?;
    if i >= dims.p_t || j >= dims.p_t {
        return Err(dim_err!("block index ({i}, {j}) out of range for p_t={}", dims.p_t));
    }
    let p_s = dims.p_s;
    Ok(m.view((i * p_s, j * p_s), (p_s, p_s)).into_owned())
}

/// Rearranges an arbitrary (not necessarily symmetric) `p_t·p_s` square matrix.
pub fn rearrange_matrix(m: &DMatrix<f64>, dims: Dims) -> Result<RearrangedMatrix> {
    check_square(&dims, m)?;
    let Dims { p_t, p_s } = dims;
    let mut out = DMatrix::zeros(p_t * p_t, p_s * p_s);
    for bj in 0..p_t {
        for bi in 0..p_t {
            let row = bj * p_t + bi;
            for l in 0..p_s {
                for k in 0..p_s {
                    out[(row, l * p_s + k)] = m[(bi * p_s + k, bj * p_s + l)];
                }
            }
        }
    }
    Ok(RearrangedMatrix { dims, entries: out })
}

pub fn rearrange(m: &StCovariance) -> RearrangedMatrix {
    rearrange_matrix(&m.entries, m.dims).expect("StCovariance shape is validated at construction")
}

/// Exact inverse of [`rearrange_matrix`]; the output is not symmetrized.
pub fn inverse_rearrange(r: &RearrangedMatrix) -> DMatrix<f64> {
    inverse_rearrange_matrix(&r.entries, r.dims).expect("RearrangedMatrix shape is validated")
}

pub fn inverse_rearrange_matrix(r: &DMatrix<f64>, dims: Dims) -> Result<DMatrix<f64>> {
    let Dims { p_t, p_s } = dims;
    if r.shape() != dims.rearranged_shape() {
        return Err(dim_err!("rearranged matrix must be {}x{}, got {}x{}", p_t * p_t, p_s * p_s, r.nrows(), r.ncols()));
    }
    let d = dims.total();
    let mut out = DMatrix::zeros(d, d);
    for bj in 0..p_t {
        for bi in 0..p_t {
            let row = bj * p_t + bi;
            for l in 0..p_s {
                for k in 0..p_s {
                    out[(bi * p_s + k, bj * p_s + l)] = r[(row, l * p_s + k)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for an `n × n` matrix.
pub fn unvec_square(v: &[f64], n: usize) -> Result<DMatrix<f64>> {
    if v.len() != n * n {
        return Err(dim_err!("cannot reshape length {} into {n}x{n}", v.len()));
    }
    Ok(DMatrix::from_column_slice(n, n, v))
}
