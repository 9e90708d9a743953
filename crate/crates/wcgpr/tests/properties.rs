//! Randomized structural properties. Sizes and seeds are generated by
//! proptest; the numerical content of each case is derived from a ChaCha
//! stream so shrinking stays meaningful over sizes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wcgpr::{
    solve_augmented, to_augmented, to_composite, wcgpr_predict, wlmmse, AugmentedMatrix,
    AugmentedVector, ComplexInputSet, CompositeVector, JitterPolicy, KernelPair, NoiseModel,
    SecondOrderStats, WcgprFit,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rand_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
}

fn rand_inputs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ComplexInputSet {
    ComplexInputSet::new(
        (0..n)
            .map(|_| DVector::from_fn(d, |_, _| rand_complex(rng)))
            .collect(),
    )
    .unwrap()
}

fn rand_se_pair(rng: &mut ChaCha8Rng) -> KernelPair {
    let variance = 0.5 + 1.5 * rng.gen::<f64>();
    let ls = 0.5 + 1.5 * rng.gen::<f64>();
    let mut pc = rand_complex(rng);
    if pc.norm() > 0.9 {
        pc *= 0.9 / pc.norm();
    }
    KernelPair::squared_exponential(variance, ls, pc).unwrap()
}

fn rand_stats(rng: &mut ChaCha8Rng, p: usize, n: usize) -> SecondOrderStats {
    let d = p + n;
    let m1 = DMatrix::from_fn(d, d, |_, _| rand_complex(rng));
    let m2 = DMatrix::from_fn(d, d, |_, _| rand_complex(rng)).scale(0.5);
    let r = &m1 * m1.adjoint() + &m2 * m2.adjoint();
    let rt = &m1 * m2.transpose() + &m2 * m1.transpose();
    let sigma2 = 0.1 + rng.gen::<f64>();
    SecondOrderStats::new(
        r.view((0, p), (p, n)).into_owned(),
        rt.view((0, p), (p, n)).into_owned(),
        r.view((p, p), (n, n)).into_owned()
            + DMatrix::from_diagonal_element(n, n, c(sigma2, 0.0)),
        rt.view((p, p), (n, n)).into_owned(),
        r.view((0, 0), (p, p)).into_owned(),
    )
    .unwrap()
}

/// Columns of the two WLMMSE weight matrices, recovered by probing the
/// estimator with e_i and i*e_i: the widely linear map is determined by its
/// action on those inputs.
fn reconstruct_weights(
    stats: &SecondOrderStats,
    policy: &JitterPolicy,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let p = stats.signal_dim();
    let n = stats.measurement_dim();
    let mut w1 = DMatrix::zeros(p, n);
    let mut w2 = DMatrix::zeros(p, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = c(1.0, 0.0);
        let (a, _) = wlmmse(stats, &e, policy).unwrap();
        e[i] = c(0.0, 1.0);
        let (b, _) = wlmmse(stats, &e, policy).unwrap();
        for r in 0..p {
            w1[(r, i)] = (a[r] - c(0.0, 1.0) * b[r]) * 0.5;
            w2[(r, i)] = (a[r] + c(0.0, 1.0) * b[r]) * 0.5;
        }
    }
    (w1, w2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composite_augmented_round_trip(seed: u64, n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_fn(n, |_, _| rand_complex(&mut rng));
        let comp = CompositeVector::from_complex(&z);
        let back = to_composite(&to_augmented(&comp));
        prop_assert_eq!(back.data(), comp.data());
        let aug = AugmentedVector::from_upper(z.clone());
        let z2 = to_composite(&aug).to_complex();
        for i in 0..n {
            prop_assert_eq!(z2[i], z[i]);
        }
    }

    #[test]
    fn augmented_solve_residual_is_small(seed: u64, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Well-conditioned augmented covariance: widely linear mixing moments
        // plus a unit diagonal.
        let m1 = DMatrix::from_fn(n, n, |_, _| rand_complex(&mut rng));
        let m2 = DMatrix::from_fn(n, n, |_, _| rand_complex(&mut rng)).scale(0.5);
        let a = &m1 * m1.adjoint() + &m2 * m2.adjoint() + DMatrix::identity(n, n);
        let b = &m1 * m2.transpose() + &m2 * m1.transpose();
        let m = AugmentedMatrix::from_blocks(a, b).unwrap();
        let rhs_top = DVector::from_fn(n, |_, _| rand_complex(&mut rng));
        let rhs = AugmentedVector::from_upper(rhs_top);
        let x = solve_augmented(&m, &rhs, &JitterPolicy::none()).unwrap();
        let residual = &m.materialize() * x.materialize() - rhs.materialize();
        prop_assert!(residual.norm() < 1e-10 * rhs.materialize().norm().max(1.0));
    }

    #[test]
    fn gram_blocks_have_kernel_structure(seed: u64, n in 1usize..8, d in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kp = rand_se_pair(&mut rng);
        let x = rand_inputs(&mut rng, n, d);
        let (k, kt) = wcgpr::gram(&kp, &x, &x).unwrap();
        prop_assert!((&k - k.adjoint()).norm() < 1e-12 * k.norm().max(1.0));
        prop_assert!((&kt - kt.transpose()).norm() < 1e-12 * kt.norm().max(1.0));
    }

    #[test]
    fn wlmmse_satisfies_orthogonality_principle(
        seed: u64,
        p in 1usize..4,
        n in 1usize..5,
    ) {
        // The optimal augmented weights satisfy W_aug R_aug_yy = R_aug_fy;
        // equivalently W1 R_yy + W2 Rt_yy* = R_fy and W1 Rt_yy + W2 R_yy* = Rt_fy.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = rand_stats(&mut rng, p, n);
        let policy = JitterPolicy::default();
        let (w1, w2) = reconstruct_weights(&stats, &policy);
        let scale = stats.r_fy.norm().max(1.0);
        let res1 = &w1 * &stats.r_yy + &w2 * stats.rt_yy.conjugate() - &stats.r_fy;
        let res2 = &w1 * &stats.rt_yy + &w2 * stats.r_yy.conjugate() - &stats.rt_fy;
        prop_assert!(res1.norm() < 1e-9 * scale, "residual {}", res1.norm());
        prop_assert!(res2.norm() < 1e-9 * scale, "residual {}", res2.norm());
    }

    #[test]
    fn gp_prediction_is_wlmmse_with_kernel_statistics(
        seed: u64,
        n in 1usize..10,
        m in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kp = rand_se_pair(&mut rng);
        let x = rand_inputs(&mut rng, n, 1);
        let xs = rand_inputs(&mut rng, m, 1);
        let y = DVector::from_fn(n, |_, _| rand_complex(&mut rng));
        let sigma2 = 0.05 + 0.45 * rng.gen::<f64>();
        let mut rho = rand_complex(&mut rng);
        if rho.norm() > 0.8 {
            rho *= 0.8 / rho.norm();
        }
        let noise = NoiseModel::new(sigma2, rho).unwrap();
        let policy = JitterPolicy::default();

        let gp = wcgpr_predict(&kp, &noise, &x, &y, &xs, &policy).unwrap();

        let (k_xx, kt_xx) = wcgpr::gram(&kp, &x, &x).unwrap();
        let (k_sx, kt_sx) = wcgpr::gram(&kp, &xs, &x).unwrap();
        let (k_ss, _) = wcgpr::gram(&kp, &xs, &xs).unwrap();
        let stats = SecondOrderStats::new(
            k_sx,
            kt_sx,
            k_xx + DMatrix::from_diagonal_element(n, n, c(sigma2, 0.0)),
            kt_xx + DMatrix::from_diagonal_element(n, n, rho * sigma2),
            k_ss,
        ).unwrap();
        let (est, q) = wlmmse(&stats, &y, &policy).unwrap();
        let scale = est.norm().max(1.0);
        prop_assert!((&gp.mean - est).norm() < 1e-9 * scale);
        // The WLMMSE error covariance is the GP predictive covariance.
        prop_assert!((&gp.cov - &q).norm() < 1e-8 * q.norm().max(1.0));
    }

    #[test]
    fn posterior_variance_never_exceeds_prior(seed: u64, n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kp = rand_se_pair(&mut rng);
        let x = rand_inputs(&mut rng, n, 1);
        let xs = rand_inputs(&mut rng, 3, 1);
        let y = DVector::from_fn(n, |_, _| rand_complex(&mut rng));
        let noise = NoiseModel::new(0.1, c(0.3, 0.2)).unwrap();
        let out = wcgpr_predict(&kp, &noise, &x, &y, &xs, &JitterPolicy::default()).unwrap();
        for i in 0..3 {
            let prior = kp.k(xs.point(i), xs.point(i)).re;
            prop_assert!(out.cov[(i, i)].re <= prior + 1e-9);
            prop_assert!(out.cov[(i, i)].re >= -1e-9);
        }
    }

    #[test]
    fn fit_is_deterministic_and_matches_one_shot(seed: u64, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kp = rand_se_pair(&mut rng);
        let x = rand_inputs(&mut rng, n, 1);
        let xs = rand_inputs(&mut rng, 2, 1);
        let y = DVector::from_fn(n, |_, _| rand_complex(&mut rng));
        let noise = NoiseModel::new(0.2, c(0.1, -0.4)).unwrap();
        let policy = JitterPolicy::default();
        let fit = WcgprFit::new(&kp, &noise, &x, &y, &policy).unwrap();
        let a = fit.predict(&xs).unwrap();
        let b = wcgpr_predict(&kp, &noise, &x, &y, &xs, &policy).unwrap();
        prop_assert_eq!(&a.mean, &b.mean);
        prop_assert_eq!(&a.cov, &b.cov);
        let mean_only = fit.predict_mean(&xs).unwrap();
        prop_assert!((&a.mean - mean_only).norm() < 1e-12);
    }
}
