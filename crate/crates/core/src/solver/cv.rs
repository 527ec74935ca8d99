use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{solve, RegParams, SolverConfig};
use crate::error::{arg_err, Result};
use crate::synth::{sample_covariance, SampleSet};

/// K-fold selection of `(λ_Θ, λ_Γ)` by held-out Frobenius fit to the
/// held-out sample covariance. Folds come from a `seed`-shuffled permutation
/// of the samples; exact ties go to the lexicographically larger pair.
pub fn cross_validate(
    samples: &SampleSet,
    grid: &[RegParams],
    folds: usize,
    toeplitz: bool,
    config: &SolverConfig,
    seed: u64,
) -> Result<RegParams> {
    if grid.is_empty() {
        return Err(arg_err!("cross-validation grid is empty"));
    }
    if folds < 2 {
        return Err(arg_err!("need at least 2 folds, got {folds}"));
    }
    let n = samples.n();
    if n < folds {
        return Err(arg_err!("{n} samples cannot be split into {folds} folds"));
    }
    for p in grid {
        p.validate()?;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));

    let mut splits = Vec::with_capacity(folds);
    for f in 0..folds {
        let (held, train): (Vec<_>, Vec<_>) = order.iter().enumerate().partition(|(pos, _)| pos % folds == f);
        let held: Vec<usize> = held.into_iter().map(|(_, &i)| i).collect();
        let train: Vec<usize> = train.into_iter().map(|(_, &i)| i).collect();
        let train_scm = sample_covariance(&samples.subset_rows(&train)?);
        let held_scm = sample_covariance(&samples.subset_rows(&held)?);
        splits.push((train_scm, held_scm));
    }

    let mut best: Option<(f64, RegParams)> = None;
    for p in grid {
        let mut total = 0.0;
        for (train, held) in &splits {
            let est = solve(train, p, config, toeplitz)?;
            total += (est.sigma_hat.matrix() - held.matrix()).norm_squared();
        }
        let score = total / folds as f64;
        let better = match &best {
            None => true,
            Some((b, bp)) => {
                score < *b
                    || (score == *b
                        && (p.lambda_theta, p.lambda_gamma).partial_cmp(&(bp.lambda_theta, bp.lambda_gamma))
                            == Some(std::cmp::Ordering::Greater))
            }
        };
        if better {
            best = Some((score, *p));
        }
    }
    Ok(best.expect("grid is nonempty").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rearrange::Dims;
    use crate::synth::{kron_sum_covariance, sample_gaussian, KronSumSpec};

    fn samples(n: usize) -> SampleSet {
        let spec = KronSumSpec::from_ar_params(Dims::new(3, 3).unwrap(), &[(1.0, 0.5, 0.6), (0.3, 0.1, 0.2)]);
        sample_gaussian(&kron_sum_covariance(&spec).unwrap(), n, 17).unwrap()
    }

    #[test]
    fn single_point_grid() {
        let p = RegParams::new(0.3, 0.2).unwrap();
        let got = cross_validate(&samples(40), &[p], 4, false, &SolverConfig::default(), 1).unwrap();
        assert_eq!(got, p);
    }

    #[test]
    fn low_penalty_beats_zero_estimate() {
        let low = RegParams::sparse_only(0.0);
        let huge = RegParams::new(1e6, 1e6).unwrap();
        for toeplitz in [false, true] {
            let got = cross_validate(&samples(2000), &[huge, low], 5, toeplitz, &SolverConfig::default(), 3).unwrap();
            assert_eq!(got, low);
        }
    }

    #[test]
    fn ties_go_to_larger_pair() {
        // Both penalties zero out the estimate, so the scores are equal.
        let a = RegParams::new(1e6, 1e6).unwrap();
        let b = RegParams::new(1e7, 1e6).unwrap();
        let c = RegParams::sparse_only(1e6);
        let s = samples(30);
        let config = SolverConfig::default();
        assert_eq!(cross_validate(&s, &[a, b], 3, false, &config, 0).unwrap(), b);
        assert_eq!(cross_validate(&s, &[b, a], 3, false, &config, 0).unwrap(), b);
        assert_eq!(cross_validate(&s, &[a, c, b], 3, false, &config, 0).unwrap(), c);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = samples(60);
        let grid: Vec<RegParams> =
            [0.01, 0.1, 1.0].iter().flat_map(|&t| [0.01, 0.1].map(|g| RegParams::new(t, g).unwrap())).collect();
        let config = SolverConfig::default();
        let a = cross_validate(&s, &grid, 3, false, &config, 9).unwrap();
        let b = cross_validate(&s, &grid, 3, false, &config, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argument_errors() {
        let s = samples(5);
        let p = RegParams::new(1.0, 1.0).unwrap();
        let config = SolverConfig::default();
        assert!(cross_validate(&s, &[], 2, false, &config, 0).is_err());
        assert!(cross_validate(&s, &[p], 1, false, &config, 0).is_err());
        assert!(cross_validate(&s, &[p], 6, false, &config, 0).is_err());
        let bad = RegParams { lambda_theta: -1.0, lambda_gamma: 1.0 };
        assert!(cross_validate(&s, &[bad], 2, false, &config, 0).is_err());
    }
}
