//! Regularization weights from the high-dimensional error bounds.
//!
//! `λ_Θ = k‖Σ₀‖·max(α², α)` with `k = 4/(1 − 2ε)`, and
//! `λ_Γ = 32·ρ(Σ₀)·√(ln(p_t p_s)/n)` where `ρ` is the largest variance.
//! `α = √(t₀(p_t² + p_s² + ln M)/n)` in general and
//! `α = √(t₀(2p_t + p_s² + ln M)/n)` under block-Toeplitz structure, with
//! `M = max(p_t, p_s, n)`.

use serde::{Deserialize, Serialize};

use super::RegParams;
use crate::error::{arg_err, Result};
use crate::rearrange::{Dims, StCovariance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaChoice {
    pub params: RegParams,
    pub alpha: f64,
    pub k: f64,
    /// True when `‖Σ₀‖` and `ρ` were replaced by sample-covariance values.
    pub plug_in: bool,
}

pub fn theory_alpha(dims: Dims, n: usize, t0: f64, toeplitz: bool) -> Result<f64> {
    if n == 0 {
        return Err(arg_err!("sample count must be at least 1"));
    }
    if !(t0 > 1.0) || !t0.is_finite() {
        return Err(arg_err!("t0 must exceed 1, got {t0}"));
    }
    let (p_t, p_s) = (dims.p_t as f64, dims.p_s as f64);
    let m = dims.p_t.max(dims.p_s).max(n) as f64;
    let temporal = if toeplitz { 2.0 * p_t } else { p_t * p_t };
    Ok((t0 * (temporal + p_s * p_s + m.ln()) / n as f64).sqrt())
}

#[allow(clippy::too_many_arguments)]
pub fn theoretic_lambdas(
    sigma_norm: f64,
    rho: f64,
    dims: Dims,
    n: usize,
    t0: f64,
    eps: f64,
    toeplitz: bool,
) -> Result<RegParams> {
    Ok(choose(sigma_norm, rho, dims, n, t0, eps, toeplitz, false)?.params)
}

/// [`theoretic_lambdas`] with `‖Σ₀‖` and `ρ(Σ₀)` estimated from `scm`.
pub fn plug_in_lambdas(scm: &StCovariance, n: usize, t0: f64, eps: f64, toeplitz: bool) -> Result<LambdaChoice> {
    choose(scm.spectral_norm(), scm.max_diagonal(), scm.dims(), n, t0, eps, toeplitz, true)
}

#[allow(clippy::too_many_arguments)]
fn choose(
    sigma_norm: f64,
    rho: f64,
    dims: Dims,
    n: usize,
    t0: f64,
    eps: f64,
    toeplitz: bool,
    plug_in: bool,
) -> Result<LambdaChoice> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(arg_err!("eps must lie in (0, 0.5), got {eps}"));
    }
    if !(sigma_norm >= 0.0) || !sigma_norm.is_finite() || !(rho >= 0.0) || !rho.is_finite() {
        return Err(arg_err!("sigma_norm and rho must be finite and nonnegative"));
    }
    let alpha = theory_alpha(dims, n, t0, toeplitz)?;
    let k = 4.0 / (1.0 - 2.0 * eps);
    let lambda_theta = k * sigma_norm * alpha.max(alpha * alpha);
    let lambda_gamma = 32.0 * rho * ((dims.total() as f64).ln() / n as f64).sqrt();
    Ok(LambdaChoice { params: RegParams::new(lambda_theta, lambda_gamma)?, alpha, k, plug_in })
}
