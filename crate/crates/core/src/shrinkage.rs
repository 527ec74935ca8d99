//! Proximal operators for the nuclear norm and (weighted) 1-norm.

use nalgebra::{DMatrix, DVector};

use crate::error::{arg_err, dim_err, Error, Result};

/// Singular values below this fraction of `σ₁` count as zero for rank.
pub const RANK_REL_TOL: f64 = 1e-14;

// Below this the eigenvectors no longer split cleanly into (u, v) halves.
const VECTOR_REL_TOL: f64 = 1e-10;

/// Thin SVD with singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.sigma) * self.v.transpose()
    }

    /// Number of singular values above `rel_tol·σ₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.sigma.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > rel_tol * top).count()
    }
}

/// Thin SVD through the symmetric eigendecomposition of `[0 M; Mᵀ 0]`,
/// whose eigenpairs are `±σ` with vectors `(u, ±v)/√2`. Golub–Kahan in
/// nalgebra loses ~1e-5 relative accuracy on clustered singular values,
/// which the KKT certificates cannot tolerate.
pub fn svd(m: &DMatrix<f64>) -> Result<SvdResult> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVD input has non-finite entries".into()));
    }
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdResult { u: DMatrix::zeros(rows, 0), sigma: DVector::zeros(0), v: DMatrix::zeros(cols, 0) });
    }
    let n = rows + cols;
    let mut h = DMatrix::zeros(n, n);
    h.view_mut((0, rows), (rows, cols)).copy_from(m);
    h.view_mut((rows, 0), (cols, rows)).copy_from(&m.transpose());
    let eig = h.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("SVD of {rows}x{cols} matrix failed")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let order = &order[..k];

    let sigma = DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    let top = sigma[0];
    let mut u = DMatrix::zeros(rows, k);
    let mut v = DMatrix::zeros(cols, k);
    let mut trusted = 0;
    for (c, &i) in order.iter().enumerate() {
        if !(sigma[c] > VECTOR_REL_TOL * top.max(f64::MIN_POSITIVE)) {
            break;
        }
        let x = eig.eigenvectors.column(i);
        u.set_column(c, &(x.rows(0, rows) * std::f64::consts::SQRT_2));
        v.set_column(c, &(x.rows(rows, cols) * std::f64::consts::SQRT_2));
        trusted = c + 1;
    }
    // Null directions mix the two blocks; rebuild them as orthonormal completions.
    complete_orthonormal(&mut u, trusted);
    complete_orthonormal(&mut v, trusted);
    Ok(SvdResult { u, sigma, v })
}

/// Fills columns `from..` of `q` with an orthonormal completion of the
/// columns before them (which are assumed orthonormal).
fn complete_orthonormal(q: &mut DMatrix<f64>, from: usize) {
    let dim = q.nrows();
    let mut next_basis = 0;
    for c in from..q.ncols() {
        loop {
            let mut x = DVector::zeros(dim);
            x[next_basis] = 1.0;
            next_basis += 1;
            for _ in 0..2 {
                for p in 0..c {
                    let proj = q.column(p).dot(&x);
                    x.axpy(-proj, &q.column(p), 1.0);
                }
            }
            let norm = x.norm();
            if norm > 1e-8 {
                q.set_column(c, &(x / norm));
                break;
            }
        }
    }
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(svd(m)?.sigma.sum())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(svd(m)?.sigma.iter().copied().fold(0.0, f64::max))
}

pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Soft singular value thresholding `U (Σ − λI)₊ Vᵀ`.
pub fn svt(m: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(m.clone());
    }
    let s = svd(m)?;
    let shrunk = s.sigma.map(|x| (x - lambda).max(0.0));
    let kept = shrunk.iter().take_while(|&&x| x > 0.0).count();
    if kept == 0 {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    let u = s.u.columns(0, kept);
    let v = s.v.columns(0, kept);
    let d = DMatrix::from_diagonal(&shrunk.rows(0, kept).into_owned());
    Ok(u * d * v.transpose())
}

#[inline]
pub fn soft_scalar(x: f64, lambda: f64) -> f64 {
    x.signum() * (x.abs() - lambda).max(0.0)
}

/// Entrywise soft thresholding `sign(m)·(|m| − λ)₊`.
pub fn soft(m: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    Ok(m.map(|x| if x == 0.0 { 0.0 } else { soft_scalar(x, lambda) }))
}

/// Row `r` soft-thresholded at `λ·weights[r]`.
pub fn weighted_row_soft(m: &DMatrix<f64>, lambda: f64, weights: &[f64]) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    if weights.len() != m.nrows() {
        return Err(dim_err!("{} row weights supplied for {} rows", weights.len(), m.nrows()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(arg_err!("row weights must be positive and finite, got {w}"));
    }
    let mut out = m.clone();
    for (r, &w) in weights.iter().enumerate() {
        let t = lambda * w;
        for x in out.row_mut(r).iter_mut() {
            *x = if *x == 0.0 { 0.0 } else { soft_scalar(*x, t) };
        }
    }
    Ok(out)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(arg_err!("threshold must be finite and nonnegative, got {lambda}"));
    }
    Ok(())
}
