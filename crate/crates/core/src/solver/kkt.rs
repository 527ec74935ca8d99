//! First-order optimality certificate for the penalized fit.
//!
//! With `G = 2(R − L − S)`, a minimizer satisfies `G ∈ λ_Θ ∂‖L‖_*` and
//! `G ∈ λ_Γ ∂‖S‖₁` (row-weighted in the Toeplitz domain). The residuals
//! measure how far `G` is from each subdifferential.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::RegParams;
use crate::error::{dim_err, Result};
use crate::shrinkage::svd;

/// Relative threshold used to decide the rank of `L` when forming `U Vᵀ`.
const KKT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub nuclear: f64,
    pub sparse: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.nuclear.max(self.sparse)
    }
}

pub fn kkt_residual(l: &DMatrix<f64>, s: &DMatrix<f64>, r: &DMatrix<f64>, params: &RegParams) -> Result<KktResidual> {
    kkt_residual_weighted(l, s, r, params, None)
}

/// As [`kkt_residual`], with row `i` of the 1-norm weighted by `weights[i]`.
pub fn kkt_residual_weighted(
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    r: &DMatrix<f64>,
    params: &RegParams,
    weights: Option<&[f64]>,
) -> Result<KktResidual> {
    if l.shape() != r.shape() || s.shape() != r.shape() {
        return Err(dim_err!("kkt shapes differ: l {:?}, s {:?}, r {:?}", l.shape(), s.shape(), r.shape()));
    }
    if let Some(w) = weights {
        if w.len() != r.nrows() {
            return Err(dim_err!("{} row weights for {} rows", w.len(), r.nrows()));
        }
    }
    let g = (r - l - s) * 2.0;
    let nuclear = if params.lambda_theta.is_infinite() { 0.0 } else { nuclear_residual(l, &g, params.lambda_theta)? };
    let sparse =
        if params.lambda_gamma.is_infinite() { 0.0 } else { sparse_residual(s, &g, params.lambda_gamma, weights) };
    Ok(KktResidual { nuclear, sparse })
}

fn nuclear_residual(l: &DMatrix<f64>, g: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let g_dec = svd(g)?;
    let excess = (g_dec.sigma.iter().copied().fold(0.0, f64::max) - lambda).max(0.0);
    let dec = svd(l)?;
    let k = dec.rank(KKT_RANK_TOL);
    if k == 0 {
        return Ok(excess);
    }
    // On the span of L, G must equal λ·U Vᵀ: G − λUVᵀ − (I − UUᵀ) G (I − VVᵀ) = 0.
    let u = dec.u.columns(0, k);
    let v = dec.v.columns(0, k);
    let pu = u * u.transpose();
    let pv = v * v.transpose();
    let (m, n) = g.shape();
    let off = (DMatrix::identity(m, m) - &pu) * g * (DMatrix::identity(n, n) - &pv);
    let deviation = g - u * v.transpose() * lambda - off;
    Ok(excess + deviation.norm())
}

fn sparse_residual(s: &DMatrix<f64>, g: &DMatrix<f64>, lambda: f64, weights: Option<&[f64]>) -> f64 {
    let mut excess: f64 = 0.0;
    let mut support: f64 = 0.0;
    for i in 0..g.nrows() {
        let t = lambda * weights.map_or(1.0, |w| w[i]);
        for j in 0..g.ncols() {
            let gij = g[(i, j)];
            excess = excess.max(gij.abs() - t);
            let sij = s[(i, j)];
            if sij != 0.0 {
                support = support.max((gij - t * sij.signum()).abs());
            }
        }
    }
    excess.max(0.0) + support
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkage::{spectral_norm, svt};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_kron_fit_certifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = DMatrix::from_fn(9, 16, |_, _| rng.random_range(-1.0..1.0));
        let lambda = 0.8;
        let l = svt(&r, lambda / 2.0).unwrap();
        let res = kkt_residual(&l, &DMatrix::zeros(9, 16), &r, &RegParams::kron_only(lambda)).unwrap();
        assert!(res.nuclear <= 1e-6, "{res:?}");
        assert_eq!(res.sparse, 0.0);
    }

    #[test]
    fn zero_is_optimal_under_huge_penalties() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let r = DMatrix::from_fn(4, 9, |_, _| rng.random_range(-1.0..1.0));
        let z = DMatrix::zeros(4, 9);
        let big = 2.0 * spectral_norm(&r).unwrap().max(r.amax()) + 1.0;
        let res = kkt_residual(&z, &z, &r, &RegParams::new(2.0 * big, 2.0 * big).unwrap()).unwrap();
        assert_eq!(res, KktResidual { nuclear: 0.0, sparse: 0.0 });
    }

    #[test]
    fn suboptimal_point_has_positive_residual() {
        let r = DMatrix::from_element(2, 2, 1.0);
        let z = DMatrix::zeros(2, 2);
        let res = kkt_residual(&z, &z, &r, &RegParams::new(0.1, 0.1).unwrap()).unwrap();
        assert!(res.nuclear > 1.0 && res.sparse > 1.0);
    }
}
