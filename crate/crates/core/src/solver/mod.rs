//! Proximal-gradient estimators for the low separation-rank plus sparse model.
//!
//! Both estimators minimize, over the rearranged sample covariance `R`,
//!
//! ```text
//! ‖R − L − S‖_F² + λ_Θ‖L‖_* + λ_Γ‖S‖₁
//! ```
//!
//! (the Toeplitz variant works in the `P`-projected domain with row-weighted
//! 1-norm). The iteration is joint proximal gradient on
//! `½‖R − L − S‖² + (λ_Θ/2)‖L‖_* + (λ_Γ/2)‖S‖₁`, which has the same minimizer:
//!
//! ```text
//! M = L + S − τ(L + S − R)
//! L ← SVT_{τλ_Θ/2}(M − S)
//! S ← soft_{τλ_Γ/2}(M − L)
//! ```

mod cv;
mod kkt;
mod lambdas;
mod spectrum;

pub use cv::cross_validate;
pub use kkt::{kkt_residual, kkt_residual_weighted, KktResidual};
pub use lambdas::{plug_in_lambdas, theoretic_lambdas, theory_alpha, LambdaChoice};
pub use spectrum::{kron_spectrum, kron_spectrum_matrix, KronSpectrum};

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::rearrange::{inverse_rearrange_matrix, rearrange, relative_asymmetry, Dims, StCovariance};
use crate::shrinkage::{l1_norm, svd, RANK_REL_TOL};
use crate::toeplitz::ToeplitzProjector;

/// Regularization weights. Either may be `f64::INFINITY`, which pins the
/// corresponding component to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegParams {
    #[serde(with = "lambda_serde")]
    pub lambda_theta: f64,
    #[serde(with = "lambda_serde")]
    pub lambda_gamma: f64,
}

impl RegParams {
    pub fn new(lambda_theta: f64, lambda_gamma: f64) -> Result<Self> {
        let p = Self { lambda_theta, lambda_gamma };
        p.validate()?;
        Ok(p)
    }

    /// Nuclear-norm-only fit (no sparse part).
    pub fn kron_only(lambda_theta: f64) -> Self {
        Self { lambda_theta, lambda_gamma: f64::INFINITY }
    }

    /// 1-norm-only fit (no low-rank part).
    pub fn sparse_only(lambda_gamma: f64) -> Self {
        Self { lambda_theta: f64::INFINITY, lambda_gamma }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_theta", self.lambda_theta), ("lambda_gamma", self.lambda_gamma)] {
            if v.is_nan() || v < 0.0 {
                return Err(arg_err!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.lambda_theta.is_infinite() && self.lambda_gamma.is_infinite() {
            return Err(arg_err!("lambda_theta and lambda_gamma cannot both be infinite"));
        }
        Ok(())
    }
}

/// Infinite penalties are written as the string `"inf"`.
pub mod lambda_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => other.parse().map_err(de::Error::custom),
            },
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial step size, in (0, 1).
    pub tau0: f64,
    pub max_iter: usize,
    /// Stop when `‖ΔL‖ + ‖ΔS‖` relative to `‖L + S‖` drops below this.
    pub tol: f64,
    /// Step shrink factor applied when an iteration would raise the objective.
    pub backtrack: f64,
    pub symmetrize: bool,
    /// Random initialization of `(L, S)`; `None` starts from zero.
    pub init_seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tau0: 0.5, max_iter: 500, tol: 1e-8, backtrack: 0.5, symmetrize: true, init_seed: None }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0 < 1.0) {
            return Err(arg_err!("tau0 must lie in (0, 1), got {}", self.tau0));
        }
        if !(self.tol > 0.0) {
            return Err(arg_err!("tol must be positive, got {}", self.tol));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(arg_err!("backtrack must lie in (0, 1), got {}", self.backtrack));
        }
        if self.max_iter == 0 {
            return Err(arg_err!("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the initial point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub kkt: KktResidual,
    pub separation_rank: usize,
    pub sparse_support: usize,
    pub final_tau: f64,
    /// Relative asymmetry of the reconstruction before symmetrization.
    pub asymmetry: f64,
    pub wall_time_s: f64,
}

/// Which space `l_hat` and `s_hat` live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateDomain {
    /// `p_t² × p_s²` rearranged domain.
    Rearranged,
    /// `(2p_t − 1) × p_s²` Toeplitz diagonal domain (`L̃ = P·L`).
    ToeplitzDiagonals,
}

#[derive(Debug, Clone)]
pub struct RobustKronEstimate {
    pub dims: Dims,
    pub params: RegParams,
    pub domain: EstimateDomain,
    pub l_hat: DMatrix<f64>,
    pub s_hat: DMatrix<f64>,
    pub sigma_hat: StCovariance,
    pub diagnostics: Diagnostics,
}

impl RobustKronEstimate {
    /// Low separation-rank part mapped back to the rearranged domain.
    pub fn l_rearranged(&self) -> DMatrix<f64> {
        self.lift(&self.l_hat)
    }

    pub fn s_rearranged(&self) -> DMatrix<f64> {
        self.lift(&self.s_hat)
    }

    /// `Θ̂ = R⁻¹(L̂)`, symmetrized.
    pub fn theta_hat(&self) -> StCovariance {
        let m = inverse_rearrange_matrix(&self.l_rearranged(), self.dims).expect("shape fixed by solver");
        StCovariance::symmetrize(self.dims, &m).expect("finite estimate")
    }

    /// `Γ̂ = R⁻¹(Ŝ)`, symmetrized.
    pub fn gamma_hat(&self) -> StCovariance {
        let m = inverse_rearrange_matrix(&self.s_rearranged(), self.dims).expect("shape fixed by solver");
        StCovariance::symmetrize(self.dims, &m).expect("finite estimate")
    }

    fn lift(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self.domain {
            EstimateDomain::Rearranged => m.clone(),
            EstimateDomain::ToeplitzDiagonals => {
                ToeplitzProjector::new(self.dims.p_t).and_then(|p| p.apply_transpose(m)).expect("shape fixed by solver")
            }
        }
    }
}

/// Value of `‖r − l − s‖_F² + λ_Θ‖l‖_* + λ_Γ‖s‖₁`.
pub fn objective(l: &DMatrix<f64>, s: &DMatrix<f64>, r: &DMatrix<f64>, params: &RegParams) -> Result<f64> {
    objective_weighted(l, s, r, params, None)
}

/// As [`objective`] with the 1-norm of row `i` weighted by `weights[i]`.
pub fn objective_weighted(
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    r: &DMatrix<f64>,
    params: &RegParams,
    weights: Option<&[f64]>,
) -> Result<f64> {
    if l.shape() != r.shape() || s.shape() != r.shape() {
        return Err(dim_err!("objective shapes differ: l {:?}, s {:?}, r {:?}", l.shape(), s.shape(), r.shape()));
    }
    let nuclear = if l.iter().all(|v| *v == 0.0) { 0.0 } else { svd(l)?.sigma.sum() };
    let sparse = weighted_l1(s, weights)?;
    Ok(evaluate(r, l, s, nuclear, sparse, params))
}

fn weighted_l1(s: &DMatrix<f64>, weights: Option<&[f64]>) -> Result<f64> {
    match weights {
        None => Ok(l1_norm(s)),
        Some(w) => {
            if w.len() != s.nrows() {
                return Err(dim_err!("{} row weights for {} rows", w.len(), s.nrows()));
            }
            Ok(s.row_iter().zip(w).map(|(row, c)| c * row.iter().map(|v| v.abs()).sum::<f64>()).sum())
        }
    }
}

fn penalty(lambda: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        0.0
    } else {
        lambda * norm
    }
}

fn evaluate(r: &DMatrix<f64>, l: &DMatrix<f64>, s: &DMatrix<f64>, nuclear: f64, sparse: f64, p: &RegParams) -> f64 {
    let fit = (r - l - s).norm_squared();
    fit + penalty(p.lambda_theta, nuclear) + penalty(p.lambda_gamma, sparse)
}

/// Algorithm state for one fit in a fixed working domain.
struct Fit {
    l: DMatrix<f64>,
    s: DMatrix<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    rank: usize,
    tau: f64,
}

/// SVT that also reports `‖output‖_*` and the output rank.
fn svt_tracked(m: &DMatrix<f64>, lambda: f64) -> Result<(DMatrix<f64>, f64, usize)> {
    let dec = svd(m)?;
    let top = dec.sigma.iter().copied().fold(0.0, f64::max);
    let shrunk = dec.sigma.map(|x| (x - lambda).max(0.0));
    let kept = shrunk.iter().take_while(|&&x| x > RANK_REL_TOL * top && x > 0.0).count();
    if kept == 0 {
        return Ok((DMatrix::zeros(m.nrows(), m.ncols()), 0.0, 0));
    }
    let mut u = dec.u.columns(0, kept).into_owned();
    for (k, mut col) in u.column_iter_mut().enumerate() {
        col *= shrunk[k];
    }
    let out = u * dec.v.columns(0, kept).transpose();
    Ok((out, shrunk.rows(0, kept).sum(), kept))
}

fn row_soft(m: &DMatrix<f64>, lambda: f64, weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
    match weights {
        None => crate::shrinkage::soft(m, lambda),
        Some(w) => crate::shrinkage::weighted_row_soft(m, lambda, w),
    }
}

const MAX_BACKTRACKS: usize = 60;

fn proximal_gradient(
    target: &DMatrix<f64>,
    weights: Option<&[f64]>,
    params: &RegParams,
    config: &SolverConfig,
) -> Result<Fit> {
    let (rows, cols) = target.shape();
    let pin_l = params.lambda_theta.is_infinite();
    let pin_s = params.lambda_gamma.is_infinite();

    let (mut l, mut s) = match config.init_seed {
        None => (DMatrix::zeros(rows, cols), DMatrix::zeros(rows, cols)),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = target.norm() / ((rows * cols) as f64).sqrt().max(1.0);
            let mut draw = |pinned: bool| {
                if pinned {
                    DMatrix::zeros(rows, cols)
                } else {
                    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..1.0))
                }
            };
            let l0 = draw(pin_l);
            let s0 = draw(pin_s);
            (l0, s0)
        }
    };

    let nuclear = if pin_l || l.iter().all(|v| *v == 0.0) { 0.0 } else { svd(&l)?.sigma.sum() };
    let mut obj = evaluate(target, &l, &s, nuclear, weighted_l1(&s, weights)?, params);
    let mut trace = vec![obj];
    let mut tau = config.tau0;
    let mut rank = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let sum_prev = &l + &s;
        let mut backtracks = 0;
        let (l_new, s_new, rank_new, obj_new) = loop {
            let grad = &sum_prev - target;
            let (l_new, nuc_new, rank_new) = if pin_l {
                (DMatrix::zeros(rows, cols), 0.0, 0)
            } else if params.lambda_theta == 0.0 {
                (&l - &grad * tau, 0.0, usize::MAX)
            } else {
                svt_tracked(&(&l - &grad * tau), 0.5 * tau * params.lambda_theta)?
            };
            let s_new = if pin_s {
                DMatrix::zeros(rows, cols)
            } else {
                row_soft(&(&s - &grad * tau), 0.5 * tau * params.lambda_gamma, weights)?
            };
            let obj_new = evaluate(target, &l_new, &s_new, nuc_new, weighted_l1(&s_new, weights)?, params);
            if !obj_new.is_finite() {
                return Err(Error::Numerical(format!("objective became {obj_new} at iteration {iterations}")));
            }
            if obj_new <= obj + 1e-12 * obj.abs().max(f64::MIN_POSITIVE) {
                break (l_new, s_new, rank_new, obj_new);
            }
            backtracks += 1;
            if backtracks > MAX_BACKTRACKS {
                return Err(Error::Numerical(format!(
                    "step size backtracking failed at iteration {iterations} (tau={tau:e})"
                )));
            }
            tau *= config.backtrack;
        };

        // Both blocks must settle: L + S alone can stall while mass still moves between them.
        let change = (&l_new - &l).norm() + (&s_new - &s).norm();
        let scale = (&l_new + &s_new).norm().max(sum_prev.norm());
        l = l_new;
        s = s_new;
        rank = rank_new;
        obj = obj_new;
        trace.push(obj);
        if change <= config.tol * scale || scale == 0.0 {
            converged = true;
            break;
        }
    }
    if rank == usize::MAX || (iterations == 0 && !pin_l) {
        rank = svd(&l)?.rank(RANK_REL_TOL);
    }
    Ok(Fit { l, s, iterations, converged, trace, rank, tau })
}

/// Robust Kronecker PCA: low separation-rank plus sparse fit of `scm`.
pub fn solve_robust_kronpca(
    scm: &StCovariance,
    params: &RegParams,
    config: &SolverConfig,
) -> Result<RobustKronEstimate> {
    params.validate()?;
    config.validate()?;
    let start = Instant::now();
    let dims = scm.dims();
    let r = rearrange(scm).into_matrix();
    let fit = proximal_gradient(&r, None, params, config)?;
    let kkt = kkt_residual(&fit.l, &fit.s, &r, params)?;
    finish(dims, *params, config, EstimateDomain::Rearranged, fit, kkt, |m| Ok(m.clone()), start)
}

/// Block-Toeplitz robust Kronecker PCA, solved in the `P`-projected domain
/// with 1-norm row weights `c_j`.
pub fn solve_toeplitz(scm: &StCovariance, params: &RegParams, config: &SolverConfig) -> Result<RobustKronEstimate> {
    params.validate()?;
    config.validate()?;
    let start = Instant::now();
    let dims = scm.dims();
    let proj = ToeplitzProjector::new(dims.p_t)?;
    let r = proj.apply(rearrange(scm).matrix())?;
    let fit = proximal_gradient(&r, Some(proj.weights()), params, config)?;
    let kkt = kkt_residual_weighted(&fit.l, &fit.s, &r, params, Some(proj.weights()))?;
    finish(dims, *params, config, EstimateDomain::ToeplitzDiagonals, fit, kkt, |m| proj.apply_transpose(m), start)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    dims: Dims,
    params: RegParams,
    config: &SolverConfig,
    domain: EstimateDomain,
    fit: Fit,
    kkt: KktResidual,
    lift: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    start: Instant,
) -> Result<RobustKronEstimate> {
    let x = inverse_rearrange_matrix(&lift(&(&fit.l + &fit.s))?, dims)?;
    let asymmetry = relative_asymmetry(&x);
    let sigma_hat = if config.symmetrize { StCovariance::symmetrize(dims, &x)? } else { StCovariance::new(dims, x)? };
    let diagnostics = Diagnostics {
        iterations: fit.iterations,
        converged: fit.converged,
        objective_trace: fit.trace,
        kkt,
        separation_rank: fit.rank,
        sparse_support: fit.s.iter().filter(|v| **v != 0.0).count(),
        final_tau: fit.tau,
        asymmetry,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RobustKronEstimate { dims, params, domain, l_hat: fit.l, s_hat: fit.s, sigma_hat, diagnostics })
}

/// Fits with either solver.
pub fn solve(
    scm: &StCovariance,
    params: &RegParams,
    config: &SolverConfig,
    toeplitz: bool,
) -> Result<RobustKronEstimate> {
    if toeplitz {
        solve_toeplitz(scm, params, config)
    } else {
        solve_robust_kronpca(scm, params, config)
    }
}
