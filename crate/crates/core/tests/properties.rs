use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use invstab::attacks::{fgsm, pgd, AttackConfig, AttackObjective};
use invstab::bench::grid::log_grid;
use invstab::io;
use invstab::linops::{diff, diff_adjoint, total_variation, LinearOperator, SpectralFilter};
use invstab::rng::derive_seed;
use invstab::signals::{generate_operator, generate_signal, measure, SignalSpec};
use invstab::solvers::{Reconstructor, Tikhonov};
use invstab::stability::{
    bregman_distance, identity_residual, identity_scale, verify_stability_bound, MetricsRow, PairProvenance,
    RegularizerId, SubgradientSource, TolerancePolicy,
};

fn spec(n: usize, max_jumps: usize) -> SignalSpec {
    SignalSpec { n, jump_count: (0, max_jumps.min(n - 1)), ..SignalSpec::default() }
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-5.0..5.0f64, n).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signals_are_piecewise_constant(n in 2usize..200, max_jumps in 0usize..20, seed in any::<u64>()) {
        let s = spec(n, max_jumps);
        let u = generate_signal(&s, seed).unwrap();
        prop_assert_eq!(u.len(), n);
        prop_assert!(u.jumps.len() <= s.jump_count.1);
        prop_assert!(u.jumps.windows(2).all(|w| w[0].index < w[1].index));
        let changes = (1..n).filter(|&i| u.values[i] != u.values[i - 1]).count();
        prop_assert_eq!(changes, u.jumps.len());
        for j in &u.jumps {
            prop_assert!(j.index >= 1 && j.index < n);
            prop_assert!(j.height != 0.0);
        }
        let tv = total_variation(u.values.as_slice());
        prop_assert!((tv - u.jump_variation()).abs() <= 1e-12 * (1.0 + tv));
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>()) {
        let s = spec(64, 8);
        prop_assert_eq!(generate_signal(&s, seed).unwrap(), generate_signal(&s, seed).unwrap());
        let a1 = generate_operator(8, 16, 0.0, 0.05, seed).unwrap();
        let a2 = generate_operator(8, 16, 0.0, 0.05, seed).unwrap();
        prop_assert_eq!(a1.entries(), a2.entries());
    }

    #[test]
    fn measurements_split_into_clean_and_noise(seed in any::<u64>(), std in 0.0..0.5f64) {
        let a = generate_operator(10, 20, 0.0, 0.05, seed).unwrap();
        let u = generate_signal(&spec(20, 5), seed ^ 1).unwrap();
        let f = measure(&a, &u, std, seed ^ 2).unwrap();
        prop_assert_eq!(&f.values - &f.clean, f.noise.clone());
        prop_assert!((&f.clean - a.entries() * &u.values).amax() <= 1e-14);
        if std == 0.0 {
            prop_assert_eq!(f.noise.norm(), 0.0);
        }
    }

    #[test]
    fn singular_values_are_sorted_and_nonnegative(m in 1usize..12, n in 1usize..12, seed in any::<u64>()) {
        let a = generate_operator(m, n, 0.0, 1.0, seed).unwrap();
        let svd = a.svd().unwrap();
        let s = svd.singular_values.as_slice();
        prop_assert_eq!(s.len(), m.min(n));
        prop_assert!(s.iter().all(|&x| x >= 0.0));
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let err = (svd.recompose() - a.entries()).norm();
        prop_assert!(err <= 1e-10 * (1.0 + a.entries().norm()));
    }

    #[test]
    fn filter_gains_are_finite(sigma in 0.0..1e6f64, alpha in 1e-12..1e6f64, threshold in 0.0..10.0f64) {
        for filter in [SpectralFilter::tikhonov(alpha).unwrap(), SpectralFilter::TruncatedSvd { threshold }] {
            let g = filter.gain(0, sigma).unwrap();
            prop_assert!(g.is_finite() && g >= 0.0);
        }
    }

    #[test]
    fn difference_adjoint_is_a_transpose(x in vector(17), z in vector(16)) {
        let lhs = diff(&x).dot(&z);
        let rhs = x.dot(&diff_adjoint(&z));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn slack_is_lhs_minus_rhs(seed in any::<u64>(), f1 in vector(6), f2 in vector(6)) {
        let a = Arc::new(generate_operator(6, 10, 0.0, 0.05, seed).unwrap());
        let tik = Tikhonov::with_finite_differences(a.clone(), 0.5).unwrap();
        let (r1, r2) = (tik.reconstruct(&f1).unwrap(), tik.reconstruct(&f2).unwrap());
        let rep = verify_stability_bound(
            &a, &f1, &f2, &r1, &r2, SubgradientSource::Stored, &TolerancePolicy::default(), PairProvenance::default(),
        ).unwrap();
        prop_assert_eq!(rep.slack, rep.lhs - rep.data_term - rep.bregman);
        prop_assert_eq!(rep.lhs, 0.5 * (&f1 - &f2).norm_squared());
        prop_assert!(!rep.violated);
        prop_assert!(rep.bregman >= 0.0);
    }

    #[test]
    fn tikhonov_bregman_matches_closed_form(u1 in vector(12), u2 in vector(12), alpha in 1e-3..1e3f64) {
        let p = |u: &DVector<f64>| diff_adjoint(&diff(u)) * alpha;
        let b = bregman_distance(RegularizerId::Tikhonov, alpha, &u1, &u2, &p(&u1), &p(&u2)).unwrap();
        let closed = alpha * diff(&(&u1 - &u2)).norm_squared();
        prop_assert!((b - closed).abs() <= 1e-9 * (1.0 + closed));
    }

    #[test]
    fn tikhonov_minimizers_satisfy_the_identity(seed in any::<u64>(), alpha in 1e-4..1e2f64, f1 in vector(8), f2 in vector(8)) {
        let a = Arc::new(generate_operator(8, 14, 0.0, 0.05, seed).unwrap());
        let tik = Tikhonov::with_finite_differences(a.clone(), alpha).unwrap();
        let (r1, r2) = (tik.reconstruct(&f1).unwrap(), tik.reconstruct(&f2).unwrap());
        let (p1, p2) = (r1.subgradient.as_ref().unwrap(), r2.subgradient.as_ref().unwrap());
        let res = identity_residual(&a, &f1, &f2, &r1.values, &r2.values, p1, p2).unwrap();
        let scale = identity_scale(&a, &f1, &f2, &r1.values, &r2.values);
        prop_assert!(res.abs() <= 1e-8 * (1.0 + scale), "{} vs scale {}", res, scale);
    }

    #[test]
    fn log_grid_is_increasing_with_exact_ends(lo in -9.0..0.0f64, span in 0.5..12.0f64, points in 2usize..40) {
        let (min, max) = (10f64.powf(lo), 10f64.powf(lo + span));
        let g = log_grid(min, max, points);
        prop_assert_eq!(g.len(), points);
        prop_assert_eq!(g[0], min);
        prop_assert_eq!(g[points - 1], max);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn arrays_round_trip_bit_for_bit(rows in 1usize..6, cols in 1usize..6, data in prop::collection::vec(any::<f64>(), 36)) {
        let m = DMatrix::from_row_slice(rows, cols, &data[..rows * cols]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        io::write_matrix(&path, &m).unwrap();
        let back = io::read_matrix(&path).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        for (x, y) in back.iter().zip(m.iter()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn derived_seeds_are_stable(base in any::<u64>(), stream in 0u64..8, index in 0u64..1000) {
        prop_assert_eq!(derive_seed(base, stream, index), derive_seed(base, stream, index));
        prop_assert_ne!(derive_seed(base, stream, index), derive_seed(base, stream, index + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metrics_are_nonnegative_and_attacks_stay_in_budget(
        seed in any::<u64>(),
        alpha in 1e-6..1e2f64,
        epsilon in 0.0..0.5f64,
        use_pgd in any::<bool>(),
        output_gap in any::<bool>(),
    ) {
        let a = Arc::new(generate_operator(12, 24, 0.0, 0.05, seed).unwrap());
        let u = generate_signal(&spec(24, 4), seed ^ 3).unwrap();
        let f = measure(&a, &u, 0.03, seed ^ 4).unwrap().values;
        let tik = Tikhonov::with_finite_differences(a.clone(), alpha).unwrap();
        let cfg = AttackConfig {
            epsilon,
            step_size: 0.5 * epsilon,
            steps: 5,
            restarts: 1,
            seed,
            objective: if output_gap { AttackObjective::DeviationFromClean } else { AttackObjective::DeviationFromGroundTruth },
            ..AttackConfig::default()
        };
        let res = if use_pgd { pgd(&tik, &f, Some(&u.values), &cfg) } else { fgsm(&tik, &f, Some(&u.values), &cfg) }.unwrap();
        prop_assert!(res.delta.amax() <= epsilon * (1.0 + 1e-12));
        prop_assert_eq!(res.f_adv.clone(), &f + &res.delta);
        let clean = tik.reconstruct(&f).unwrap();
        let row = MetricsRow::compute(&a, &u.values, &f, &clean, &res.f_adv, &res.reconstruction_adv, "tik", None).unwrap();
        for v in row.values() {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }
}

#[test]
fn operator_with_identity_regularizer_inverts_the_normal_equations() {
    let a = Arc::new(generate_operator(5, 9, 0.0, 0.05, 1).unwrap());
    let f = DVector::from_fn(5, |i, _| i as f64 - 2.0);
    let alpha = 0.3;
    let r = Tikhonov::new(a.clone(), &LinearOperator::identity(9), alpha).unwrap().reconstruct(&f).unwrap();
    let at = a.entries().transpose();
    let lhs = &at * a.entries() * &r.values + &r.values * alpha;
    assert!((lhs - at * f).amax() <= 1e-10);
}
