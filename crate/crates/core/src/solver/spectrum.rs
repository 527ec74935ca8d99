use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::rearrange::{rearrange_matrix, unvec_square, Dims, StCovariance};
use crate::shrinkage::svd;

/// `Θ = Σᵢ σᵢ·Aᵢ ⊗ Bᵢ` with unit-Frobenius factors, read off the SVD of the
/// rearrangement.
#[derive(Debug, Clone)]
pub struct KronSpectrum {
    pub dims: Dims,
    pub sigmas: Vec<f64>,
    pub temporal_factors: Vec<DMatrix<f64>>,
    pub spatial_factors: Vec<DMatrix<f64>>,
}

impl KronSpectrum {
    /// Number of terms with `σᵢ > rel_tol·σ₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.sigmas.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.sigmas.iter().filter(|&&s| s > rel_tol * top).count()
    }

    /// `Σᵢ σᵢ Aᵢ ⊗ Bᵢ` over the leading `terms` components.
    pub fn reconstruct(&self, terms: usize) -> DMatrix<f64> {
        let d = self.dims.total();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..terms.min(self.sigmas.len()) {
            out += self.temporal_factors[i].kronecker(&self.spatial_factors[i]) * self.sigmas[i];
        }
        out
    }

    /// `vec` of the first `r` temporal factors as columns (`U_A`).
    pub fn temporal_basis(&self, r: usize) -> DMatrix<f64> {
        basis(&self.temporal_factors[..r.min(self.temporal_factors.len())], self.dims.p_t)
    }

    /// `vec` of the first `r` spatial factors as columns (`U_B`).
    pub fn spatial_basis(&self, r: usize) -> DMatrix<f64> {
        basis(&self.spatial_factors[..r.min(self.spatial_factors.len())], self.dims.p_s)
    }
}

fn basis(factors: &[DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = factors.iter().map(|f| DVector::from_column_slice(f.as_slice())).collect();
    if cols.is_empty() {
        DMatrix::zeros(n * n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn kron_spectrum(theta: &StCovariance) -> Result<KronSpectrum> {
    kron_spectrum_matrix(theta.matrix(), theta.dims())
}

/// As [`kron_spectrum`] for an arbitrary square matrix of the right size.
pub fn kron_spectrum_matrix(theta: &DMatrix<f64>, dims: Dims) -> Result<KronSpectrum> {
    let r = rearrange_matrix(theta, dims)?;
    let dec = svd(r.matrix())?;
    let k = dec.sigma.len();
    let mut temporal_factors = Vec::with_capacity(k);
    let mut spatial_factors = Vec::with_capacity(k);
    for i in 0..k {
        temporal_factors.push(unvec_square(dec.u.column(i).as_slice(), dims.p_t)?);
        spatial_factors.push(unvec_square(dec.v.column(i).as_slice(), dims.p_s)?);
    }
    Ok(KronSpectrum { dims, sigmas: dec.sigma.iter().copied().collect(), temporal_factors, spatial_factors })
}
