mod common;

use kronshrink::eval::{incoherence_diagnostic, mse, prediction_mse_loss, qq_data};
use kronshrink::rearrange::{inverse_rearrange_matrix, rearrange_matrix};
use kronshrink::synth::{corrupt, sample_covariance, CorruptionSpec, SampleSet};
use kronshrink::toeplitz::{build_projector, is_block_toeplitz};
use kronshrink::{solve_robust_kronpca, solve_toeplitz, Dims, RegParams, SolverConfig, StCovariance};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = Dims> {
    (1usize..=4, 1usize..=4).prop_map(|(p_t, p_s)| Dims::new(p_t, p_s).unwrap())
}

/// `P ⊗ I` applied by permuting the spatial index inside every frame.
fn permute_spatial(m: &DMatrix<f64>, dims: Dims, perm: &[usize]) -> DMatrix<f64> {
    let map = |k: usize| (k / dims.p_s) * dims.p_s + perm[k % dims.p_s];
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(map(i), map(j))])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rearrangement_is_an_isometric_bijection(d in dims(), seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let n = d.total();
        let a = common::uniform(&mut rng, n, n);
        let b = common::uniform(&mut rng, n, n);
        let ra = rearrange_matrix(&a, d).unwrap().into_matrix();
        let rb = rearrange_matrix(&b, d).unwrap().into_matrix();
        prop_assert_eq!(&inverse_rearrange_matrix(&ra, d).unwrap(), &a);
        prop_assert!((ra.norm() - a.norm()).abs() <= 1e-12 * a.norm().max(1.0));
        let combo = rearrange_matrix(&(&a * c + &b), d).unwrap().into_matrix();
        prop_assert!((combo - (&ra * c + &rb)).amax() <= 1e-12);
        prop_assert_eq!(ra, common::oracle_rearrange(&a, d));
    }

    #[test]
    fn projector_rows_are_orthonormal(p_t in 1usize..=20) {
        let p = build_projector(p_t).unwrap();
        let gram = p.matrix() * p.matrix().transpose();
        prop_assert!((gram - DMatrix::identity(2 * p_t - 1, 2 * p_t - 1)).amax() <= 1e-12);
    }

    #[test]
    fn corruption_is_psd_and_structured(seed in any::<u64>(), toeplitz in any::<bool>(), sites in 0usize..12) {
        let d = Dims::new(3, 4).unwrap();
        let base = StCovariance::identity(d);
        let spec = CorruptionSpec {
            n_sparse: sites,
            base_magnitude: 0.9,
            diag_load: 0.1,
            block_toeplitz: toeplitz,
            psd_floor: 1e-3,
            seed,
            ..CorruptionSpec::default()
        };
        let (c, _) = corrupt(&base, &spec).unwrap();
        prop_assert!(c.min_eigenvalue() >= 1e-3 - 1e-10);
        prop_assert_eq!(c.matrix(), &c.matrix().transpose());
        if toeplitz {
            prop_assert!(is_block_toeplitz(c.matrix(), 3, 4, 1e-12));
        }
    }

    #[test]
    fn scm_ignores_constant_shifts(seed in any::<u64>(), n in 2usize..30) {
        let d = Dims::new(2, 3).unwrap();
        let mut rng = common::rng(seed);
        let x = common::uniform(&mut rng, n, 6);
        let shift = common::uniform(&mut rng, 1, 6);
        let shifted = DMatrix::from_fn(n, 6, |i, j| x[(i, j)] + 100.0 * shift[(0, j)]);
        let a = sample_covariance(&SampleSet::new(d, x, 0).unwrap());
        let b = sample_covariance(&SampleSet::new(d, shifted, 0).unwrap());
        prop_assert!((a.matrix() - b.matrix()).amax() <= 1e-10);
        prop_assert!(a.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn qq_outputs_are_sorted(d in dims(), seed in any::<u64>()) {
        prop_assume!(d.total() >= 2);
        let mut rng = common::rng(seed);
        let q = qq_data(&common::random_covariance(&mut rng, d)).unwrap();
        prop_assert_eq!(q.normal.len(), q.empirical.len());
        prop_assert!(q.normal.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(q.empirical.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn losses_are_permutation_invariant(seed in any::<u64>(), h in 1usize..3) {
        let d = Dims::new(3, 3).unwrap();
        let mut rng = common::rng(seed);
        let est = common::random_covariance(&mut rng, d);
        let truth = common::random_covariance(&mut rng, d);
        let perm = [2, 0, 1];
        let pe = StCovariance::new(d, permute_spatial(est.matrix(), d, &perm)).unwrap();
        let pt = StCovariance::new(d, permute_spatial(truth.matrix(), d, &perm)).unwrap();
        let m = mse(&est, &truth).unwrap();
        prop_assert!((mse(&pe, &pt).unwrap() - m).abs() <= 1e-14 * m.max(1e-300));
        let l = prediction_mse_loss(&est, &truth, h).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert!((prediction_mse_loss(&pe, &pt, h).unwrap() - l).abs() <= 1e-9 * l.max(1.0));
    }

    #[test]
    fn incoherence_values_are_contractions(seed in any::<u64>()) {
        let d = Dims::new(2, 3).unwrap();
        let mut rng = common::rng(seed);
        let theta = common::random_covariance(&mut rng, d);
        let g = common::symmetric(&mut rng, 6).map(|v| if v.abs() > 0.6 { v } else { 0.0 })
            + DMatrix::identity(6, 6);
        let gamma = StCovariance::symmetrize(d, &g).unwrap();
        let r = incoherence_diagnostic(&theta, &gamma, &RegParams::new(1.0, 0.5).unwrap(), 2, 4).unwrap();
        prop_assert!(r.singular_values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_output_is_symmetric_with_monotone_trace(
        d in dims(),
        seed in any::<u64>(),
        lt in 0.01f64..1.0,
        lg in 0.01f64..1.0,
    ) {
        let mut rng = common::rng(seed);
        let scm = common::random_covariance(&mut rng, d);
        let params = RegParams::new(lt, lg).unwrap();
        let config = SolverConfig::default();
        for est in [solve_robust_kronpca(&scm, &params, &config).unwrap(), solve_toeplitz(&scm, &params, &config).unwrap()] {
            let s = est.sigma_hat.matrix();
            prop_assert_eq!(s, &s.transpose());
            let t = &est.diagnostics.objective_trace;
            // Step acceptance tolerates evaluation roundoff of 1e-12 relative.
            prop_assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
            prop_assert_eq!(t.len(), est.diagnostics.iterations + 1);
        }
        let toep = solve_toeplitz(&scm, &params, &config).unwrap();
        prop_assert!(is_block_toeplitz(toep.sigma_hat.matrix(), d.p_t, d.p_s, 1e-10));
    }

    #[test]
    fn sample_covariance_is_psd(seed in any::<u64>(), n in 1usize..20) {
        let d = Dims::new(2, 2).unwrap();
        let mut rng = common::rng(seed);
        let x = common::uniform(&mut rng, n, 4);
        let s = sample_covariance(&SampleSet::new(d, x, 0).unwrap());
        let min = SymmetricEigen::new(s.matrix().clone()).eigenvalues.min();
        prop_assert!(min >= -1e-12);
    }
}
