//! Synthetic ground truths and Gaussian training data.
//!
//! Truth covariances are sums of Kronecker products of AR(1) covariances
//! `ψ_ij = c·a^|i−j|`. Corruption zeroes random variables, loads the diagonal
//! and plants sparse off-diagonal correlations whose magnitude decays
//! geometrically with distance from the diagonal.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{arg_err, Error, Result};
use crate::rearrange::{kron, Dims, StCovariance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ARSpec {
    /// AR coefficient, `|a| < 1`.
    pub a: f64,
    /// Marginal variance scale, `c > 0`.
    pub c: f64,
    pub dim: usize,
}

pub fn ar_covariance(spec: &ARSpec) -> Result<DMatrix<f64>> {
    if !(spec.a.abs() < 1.0) {
        return Err(arg_err!("AR parameter must satisfy |a| < 1, got {}", spec.a));
    }
    if !(spec.c > 0.0) || !spec.c.is_finite() {
        return Err(arg_err!("AR scale must be positive, got {}", spec.c));
    }
    if spec.dim == 0 {
        return Err(arg_err!("AR covariance dimension must be positive"));
    }
    Ok(DMatrix::from_fn(spec.dim, spec.dim, |i, j| spec.c * spec.a.powi(i.abs_diff(j) as i32)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KronTerm {
    pub scale: f64,
    pub temporal: ARSpec,
    pub spatial: ARSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KronSumSpec {
    pub dims: Dims,
    pub terms: Vec<KronTerm>,
}

impl KronSumSpec {
    /// Unit-variance AR terms `(scale, a_temporal, a_spatial)`.
    pub fn from_ar_params(dims: Dims, terms: &[(f64, f64, f64)]) -> Self {
        let terms = terms
            .iter()
            .map(|&(scale, a_t, a_s)| KronTerm {
                scale,
                temporal: ARSpec { a: a_t, c: 1.0, dim: dims.p_t },
                spatial: ARSpec { a: a_s, c: 1.0, dim: dims.p_s },
            })
            .collect();
        Self { dims, terms }
    }

    /// Three-term configuration at `p_t = 10`, `p_s = 50`.
    pub fn three_term() -> Self {
        Self::from_ar_params(Dims { p_t: 10, p_s: 50 }, &[(1.0, 0.5, 0.95), (0.5, 0.8, 0.35), (0.3, 0.05, 0.999)])
    }

    /// Two-term configuration used by the scaled-down benchmark (`p_t = 6`, `p_s = 12`).
    pub fn desk() -> Self {
        Self::from_ar_params(Dims { p_t: 6, p_s: 12 }, &[(1.0, 0.5, 0.95), (0.5, 0.8, 0.35)])
    }
}

pub fn kron_sum_covariance(spec: &KronSumSpec) -> Result<StCovariance> {
    if spec.terms.is_empty() {
        return Err(arg_err!("Kronecker sum needs at least one term"));
    }
    let dims = spec.dims;
    let d = dims.total();
    let mut sigma = DMatrix::zeros(d, d);
    for (k, term) in spec.terms.iter().enumerate() {
        if !(term.scale > 0.0) || !term.scale.is_finite() {
            return Err(arg_err!("term {k}: scale must be positive, got {}", term.scale));
        }
        if term.temporal.dim != dims.p_t || term.spatial.dim != dims.p_s {
            return Err(arg_err!(
                "term {k}: factor sizes ({}, {}) do not match p_t={}, p_s={}",
                term.temporal.dim,
                term.spatial.dim,
                dims.p_t,
                dims.p_s
            ));
        }
        sigma += kron(&ar_covariance(&term.temporal)?, &ar_covariance(&term.spatial)?) * term.scale;
    }
    StCovariance::symmetrize(dims, &sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSpec {
    /// Variables whose rows and columns are zeroed (spatial indices in
    /// block-Toeplitz mode, zeroed in every frame).
    pub n_deleted_pairs: usize,
    pub diag_load: f64,
    /// Off-diagonal sites (mirrored); in block-Toeplitz mode each site is
    /// replicated along its temporal diagonal.
    pub n_sparse: usize,
    pub base_magnitude: f64,
    /// Magnitude at variable distance `d` is `base_magnitude·decay^d`.
    pub decay: f64,
    pub block_toeplitz: bool,
    /// Minimum eigenvalue enforced on the output.
    pub psd_floor: f64,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            n_deleted_pairs: 0,
            diag_load: 0.0,
            n_sparse: 0,
            base_magnitude: 0.0,
            decay: 0.97,
            block_toeplitz: false,
            psd_floor: 0.0,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    /// Diagonal loading of 0.5 plus 20 sparse sites.
    pub fn desk(seed: u64, block_toeplitz: bool) -> Self {
        Self {
            diag_load: 0.5,
            n_sparse: 20,
            base_magnitude: 0.8,
            decay: 0.97,
            block_toeplitz,
            psd_floor: 1e-3,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self, dims: Dims) -> Result<()> {
        let limit = if self.block_toeplitz { dims.p_s } else { dims.total() };
        if self.n_deleted_pairs >= limit {
            return Err(arg_err!("cannot delete {} of {limit} variables", self.n_deleted_pairs));
        }
        if !(self.diag_load >= 0.0) || !(self.psd_floor >= 0.0) || !(self.base_magnitude >= 0.0) {
            return Err(arg_err!("diag_load, psd_floor and base_magnitude must be nonnegative"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(arg_err!("decay must lie in (0, 1], got {}", self.decay));
        }
        Ok(())
    }
}

const MAX_REPAIR_PASSES: usize = 3;

/// Returns `(corrupted, gamma0)` with `gamma0 = corrupted − sigma_deleted`,
/// where `sigma_deleted` is `sigma` with the deleted rows and columns zeroed.
pub fn corrupt(sigma: &StCovariance, spec: &CorruptionSpec) -> Result<(StCovariance, StCovariance)> {
    let dims = sigma.dims();
    spec.validate(dims)?;
    let Dims { p_t, p_s } = dims;
    let d = dims.total();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let deleted: Vec<usize> = if spec.block_toeplitz {
        let spatial = sample(&mut rng, p_s, spec.n_deleted_pairs).into_vec();
        (0..p_t).flat_map(|t| spatial.iter().map(move |&k| t * p_s + k)).collect()
    } else {
        sample(&mut rng, d, spec.n_deleted_pairs).into_vec()
    };
    let mut is_deleted = vec![false; d];
    for &i in &deleted {
        is_deleted[i] = true;
    }

    let mut base = sigma.matrix().clone();
    for &i in &deleted {
        base.row_mut(i).fill(0.0);
        base.column_mut(i).fill(0.0);
    }

    let mut out = base.clone();
    for i in 0..d {
        out[(i, i)] += spec.diag_load;
    }

    if spec.n_sparse > 0 && spec.base_magnitude > 0.0 {
        if spec.block_toeplitz {
            plant_toeplitz_sites(&mut out, dims, spec, &mut rng)?;
        } else {
            plant_sites(&mut out, &is_deleted, spec, &mut rng)?;
        }
    }

    let scale = out.amax().max(1.0);
    let mut passes = 0;
    loop {
        let min_eig = SymmetricEigen::new(out.clone()).eigenvalues.min();
        if min_eig >= spec.psd_floor - 1e-12 * scale {
            break;
        }
        if passes == MAX_REPAIR_PASSES {
            return Err(Error::Numerical(format!(
                "corrupted covariance still indefinite after {MAX_REPAIR_PASSES} repair passes (min eigenvalue {min_eig:e})"
            )));
        }
        passes += 1;
        if spec.block_toeplitz {
            // a diagonal shift keeps the block-Toeplitz pattern
            let shift = spec.psd_floor - min_eig;
            for i in 0..d {
                out[(i, i)] += shift;
            }
        } else {
            out = clip_eigenvalues(&out, spec.psd_floor);
            for &i in &deleted {
                let keep = out[(i, i)];
                out.row_mut(i).fill(0.0);
                out.column_mut(i).fill(0.0);
                out[(i, i)] = keep.max(spec.psd_floor);
            }
        }
    }

    let corrupted = StCovariance::symmetrize(dims, &out)?;
    let gamma0 = StCovariance::symmetrize(dims, &(corrupted.matrix() - &base))?;
    Ok((corrupted, gamma0))
}

fn site_value(spec: &CorruptionSpec, distance: usize, rng: &mut ChaCha20Rng) -> f64 {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    sign * spec.base_magnitude * spec.decay.powi(distance as i32)
}

fn plant_sites(
    out: &mut DMatrix<f64>,
    is_deleted: &[bool],
    spec: &CorruptionSpec,
    rng: &mut ChaCha20Rng,
) -> Result<()> {
    let alive: Vec<usize> = (0..is_deleted.len()).filter(|&i| !is_deleted[i]).collect();
    let available = alive.len() * alive.len().saturating_sub(1) / 2;
    if spec.n_sparse > available {
        return Err(arg_err!("{} sparse sites requested but only {available} pairs exist", spec.n_sparse));
    }
    let mut chosen = BTreeSet::new();
    while chosen.len() < spec.n_sparse {
        let a = alive[rng.random_range(0..alive.len())];
        let b = alive[rng.random_range(0..alive.len())];
        if a == b || !chosen.insert((a.min(b), a.max(b))) {
            continue;
        }
        let (i, j) = (a.min(b), a.max(b));
        let v = site_value(spec, j - i, rng);
        out[(i, j)] += v;
        out[(j, i)] += v;
    }
    Ok(())
}

fn plant_toeplitz_sites(
    out: &mut DMatrix<f64>,
    dims: Dims,
    spec: &CorruptionSpec,
    rng: &mut ChaCha20Rng,
) -> Result<()> {
    let Dims { p_t, p_s } = dims;
    // lag 0 sites are unordered spatial pairs; other lags take ordered pairs
    let available = p_s * (p_s - 1) / 2 + (p_t - 1) * p_s * p_s;
    if spec.n_sparse > available {
        return Err(arg_err!("{} sparse sites requested but only {available} exist", spec.n_sparse));
    }
    let mut chosen = BTreeSet::new();
    while chosen.len() < spec.n_sparse {
        let lag = rng.random_range(0..p_t);
        let mut a = rng.random_range(0..p_s);
        let mut b = rng.random_range(0..p_s);
        if lag == 0 {
            if a == b {
                continue;
            }
            (a, b) = (a.max(b), a.min(b));
        }
        if !chosen.insert((lag, a, b)) {
            continue;
        }
        let distance = (lag * p_s + a).abs_diff(b);
        let v = site_value(spec, distance, rng);
        for t in 0..(p_t - lag) {
            let i = (t + lag) * p_s + a;
            let j = t * p_s + b;
            out[(i, j)] += v;
            out[(j, i)] += v;
        }
    }
    Ok(())
}

fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    (&out + out.transpose()) * 0.5
}

/// `n` samples of a `p_t·p_s`-variate process, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dims: Dims,
    data: DMatrix<f64>,
    seed: u64,
}

impl SampleSet {
    pub fn new(dims: Dims, data: DMatrix<f64>, seed: u64) -> Result<Self> {
        if data.ncols() != dims.total() {
            return Err(crate::error::dim_err!("samples have {} columns, expected {}", data.ncols(), dims.total()));
        }
        if data.nrows() == 0 {
            return Err(arg_err!("sample set must contain at least one sample"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("samples contain non-finite values".into()));
        }
        Ok(Self { dims, data, seed })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Result<SampleSet> {
        let data = self.data.select_rows(rows);
        SampleSet::new(self.dims, data, self.seed)
    }

    /// Keeps the given spatial variables in every frame.
    pub fn subset_spatial(&self, spatial: &[usize]) -> Result<SampleSet> {
        if spatial.iter().any(|&k| k >= self.dims.p_s) {
            return Err(arg_err!("spatial index out of range for p_s={}", self.dims.p_s));
        }
        let cols: Vec<usize> =
            (0..self.dims.p_t).flat_map(|t| spatial.iter().map(move |&k| t * self.dims.p_s + k)).collect();
        let dims = Dims::new(self.dims.p_t, spatial.len())?;
        SampleSet::new(dims, self.data.select_columns(&cols), self.seed)
    }
}

/// Eigenvalues of `sigma` below this (relative to `max(1, ‖Σ‖)`) are rejected.
const PSD_TOL: f64 = 1e-10;

/// Symmetric PSD square root `Q·Λ^{1/2}·Qᵀ`.
pub fn psd_sqrt(sigma: &StCovariance) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(sigma.matrix().clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL * scale {
        return Err(Error::Numerical(format!("covariance is indefinite (min eigenvalue {min:e})")));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// Standard normal draws by inverse CDF of uniforms on the open unit interval.
pub fn standard_normals(rng: &mut impl RngCore, rows: usize, cols: usize) -> DMatrix<f64> {
    let normal = Normal::standard();
    let scale = 1.0 / (1u64 << 53) as f64;
    DMatrix::from_fn(rows, cols, |_, _| {
        let u = ((rng.next_u64() >> 11) as f64 + 0.5) * scale;
        normal.inverse_cdf(u)
    })
}

pub fn sample_gaussian(sigma: &StCovariance, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(arg_err!("sample count must be at least 1"));
    }
    let root = psd_sqrt(sigma)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = standard_normals(&mut rng, n, sigma.dims().total());
    SampleSet::new(sigma.dims(), z * root, seed)
}

/// Mean-removed sample covariance with divisor `n`.
pub fn sample_covariance(samples: &SampleSet) -> StCovariance {
    let n = samples.n() as f64;
    let data = samples.data();
    let mean = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let scm = centered.transpose() * &centered / n;
    StCovariance::symmetrize(samples.dims(), &scm).expect("finite samples give a finite covariance")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::kron_spectrum;
    use crate::toeplitz::is_block_toeplitz;
    use nalgebra::dmatrix;

    #[test]
    fn ar_examples() {
        let m = ar_covariance(&ARSpec { a: 0.5, c: 1.0, dim: 3 }).unwrap();
        assert_eq!(m, dmatrix![1.0, 0.5, 0.25; 0.5, 1.0, 0.5; 0.25, 0.5, 1.0]);
        let m = ar_covariance(&ARSpec { a: 0.0, c: 2.5, dim: 4 }).unwrap();
        assert_eq!(m, DMatrix::identity(4, 4) * 2.5);
        assert!(ar_covariance(&ARSpec { a: 1.0, c: 1.0, dim: 3 }).is_err());
        assert!(ar_covariance(&ARSpec { a: -1.2, c: 1.0, dim: 3 }).is_err());
    }

    #[test]
    fn ar_is_toeplitz_and_positive_definite() {
        for &a in &[-0.95, -0.5, 0.0, 0.3, 0.8, 0.99] {
            for dim in [1, 2, 5, 12] {
                let m = ar_covariance(&ARSpec { a, c: 1.3, dim }).unwrap();
                for i in 1..dim {
                    for j in 1..dim {
                        assert_eq!(m[(i, j)], m[(i - 1, j - 1)]);
                    }
                }
                assert!(SymmetricEigen::new(m).eigenvalues.min() > 0.0);
            }
        }
    }

    #[test]
    fn kron_sum_spectra() {
        let dims = Dims::new(4, 5).unwrap();
        let one = kron_sum_covariance(&KronSumSpec::from_ar_params(dims, &[(1.0, 0.4, 0.7)])).unwrap();
        assert_eq!(kron_spectrum(&one).unwrap().rank(1e-10), 1);
        let three = KronSumSpec::from_ar_params(dims, &[(1.0, 0.5, 0.95), (0.5, 0.8, 0.35), (0.3, 0.05, 0.9)]);
        let three = kron_sum_covariance(&three).unwrap();
        assert_eq!(kron_spectrum(&three).unwrap().rank(1e-10), 3);
    }

    #[test]
    fn kron_sum_rejects_mismatch() {
        let dims = Dims::new(4, 5).unwrap();
        let mut spec = KronSumSpec::from_ar_params(dims, &[(1.0, 0.4, 0.7)]);
        spec.terms[0].spatial.dim = 4;
        assert!(kron_sum_covariance(&spec).is_err());
        assert!(kron_sum_covariance(&KronSumSpec { dims, terms: vec![] }).is_err());
    }

    #[test]
    fn three_term_preset_shape() {
        let spec = KronSumSpec::three_term();
        assert_eq!(spec.dims, Dims { p_t: 10, p_s: 50 });
        assert_eq!(spec.terms.len(), 3);
        assert_eq!(spec.terms[2].spatial.a, 0.999);
    }

    fn small_truth() -> StCovariance {
        kron_sum_covariance(&KronSumSpec::from_ar_params(Dims::new(4, 5).unwrap(), &[(1.0, 0.5, 0.6)])).unwrap()
    }

    #[test]
    fn empty_corruption_is_noop() {
        let sigma = small_truth();
        let (c, g) = corrupt(&sigma, &CorruptionSpec::default()).unwrap();
        assert_eq!(c, sigma);
        assert_eq!(g.matrix(), &DMatrix::zeros(20, 20));
    }

    #[test]
    fn diagonal_load_only() {
        let sigma = small_truth();
        let spec = CorruptionSpec { diag_load: 0.7, ..Default::default() };
        let (_, g) = corrupt(&sigma, &spec).unwrap();
        assert!((g.matrix() - DMatrix::identity(20, 20) * 0.7).amax() < 1e-15);
    }

    #[test]
    fn sparse_sites_are_mirrored() {
        let sigma = small_truth();
        let spec = CorruptionSpec { n_sparse: 5, base_magnitude: 0.3, decay: 0.9, seed: 17, ..Default::default() };
        let (c, g) = corrupt(&sigma, &spec).unwrap();
        let support = g.matrix().iter().filter(|v| **v != 0.0).count();
        assert_eq!(support, 10);
        assert!(c.min_eigenvalue() >= -1e-10);
        let again = corrupt(&sigma, &spec).unwrap();
        assert_eq!(again.0, c);
    }

    #[test]
    fn deletions_and_psd_floor() {
        let sigma = small_truth();
        let spec = CorruptionSpec {
            n_deleted_pairs: 3,
            diag_load: 0.1,
            n_sparse: 8,
            base_magnitude: 2.0,
            decay: 1.0,
            psd_floor: 0.05,
            seed: 5,
            ..Default::default()
        };
        let (c, _) = corrupt(&sigma, &spec).unwrap();
        assert!(c.min_eigenvalue() >= 0.05 - 1e-10);
        let zero_rows = (0..20).filter(|&i| (0..20).all(|j| j == i || c.matrix()[(i, j)] == 0.0)).count();
        assert!(zero_rows >= 3);
        let too_many = CorruptionSpec { n_deleted_pairs: 20, ..Default::default() };
        assert!(corrupt(&sigma, &too_many).is_err());
    }

    #[test]
    fn block_toeplitz_corruption_keeps_structure() {
        let sigma = small_truth();
        let spec = CorruptionSpec {
            n_deleted_pairs: 1,
            diag_load: 0.2,
            n_sparse: 6,
            base_magnitude: 1.5,
            decay: 0.95,
            block_toeplitz: true,
            psd_floor: 0.01,
            seed: 3,
        };
        let (c, g) = corrupt(&sigma, &spec).unwrap();
        assert!(is_block_toeplitz(c.matrix(), 4, 5, 1e-12));
        assert!(is_block_toeplitz(g.matrix(), 4, 5, 1e-12));
        assert!(c.min_eigenvalue() >= 0.01 - 1e-10);
    }

    #[test]
    fn sampling_is_deterministic() {
        let sigma = small_truth();
        let a = sample_gaussian(&sigma, 7, 99).unwrap();
        let b = sample_gaussian(&sigma, 7, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_gaussian(&sigma, 7, 100).unwrap());
        assert_eq!(sample_gaussian(&sigma, 1, 1).unwrap().n(), 1);
    }

    #[test]
    fn identity_sample_covariance_converges() {
        let dims = Dims::new(1, 2).unwrap();
        let s = sample_gaussian(&StCovariance::identity(dims), 100_000, 4).unwrap();
        let scm = sample_covariance(&s);
        let err = (scm.matrix() - DMatrix::<f64>::identity(2, 2)).norm() / 2f64.sqrt();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn indefinite_sigma_rejected() {
        let dims = Dims::new(1, 2).unwrap();
        let bad = StCovariance::new(dims, dmatrix![1.0, 2.0; 2.0, 1.0]).unwrap();
        assert!(matches!(sample_gaussian(&bad, 3, 0), Err(Error::Numerical(_))));
    }

    #[test]
    fn two_point_scm() {
        let dims = Dims::new(1, 2).unwrap();
        let s = SampleSet::new(dims, dmatrix![1.0, 0.0; -1.0, 0.0], 0).unwrap();
        assert_eq!(sample_covariance(&s).matrix(), &dmatrix![1.0, 0.0; 0.0, 0.0]);
        let one = SampleSet::new(dims, dmatrix![3.0, -2.0], 0).unwrap();
        assert_eq!(sample_covariance(&one).matrix(), &DMatrix::zeros(2, 2));
    }

    #[test]
    fn scm_matches_double_loop_and_ignores_shifts() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let dims = Dims::new(2, 3).unwrap();
        let data = DMatrix::from_fn(11, 6, |_, _| rng.random_range(-2.0..2.0));
        let scm = sample_covariance(&SampleSet::new(dims, data.clone(), 0).unwrap());
        let n = 11.0;
        for a in 0..6 {
            for b in 0..6 {
                let ma: f64 = data.column(a).sum() / n;
                let mb: f64 = data.column(b).sum() / n;
                let v: f64 = (0..11).map(|k| (data[(k, a)] - ma) * (data[(k, b)] - mb)).sum::<f64>() / n;
                assert!((scm.matrix()[(a, b)] - v).abs() < 1e-12);
            }
        }
        let mut shifted = data.clone();
        for mut row in shifted.row_iter_mut() {
            for (k, x) in row.iter_mut().enumerate() {
                *x += 10.0 * k as f64 - 3.0;
            }
        }
        let scm2 = sample_covariance(&SampleSet::new(dims, shifted, 0).unwrap());
        assert!((scm2.matrix() - scm.matrix()).amax() < 1e-10);
    }
}
