//! Numerical examples checked against independent oracles computed here.

use std::sync::Arc;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};

use invstab::attacks::{fgsm, AttackConfig};
use invstab::bench::config::BenchConfig;
use invstab::bench::dataset::Dataset;
use invstab::bench::grid::{grid_search_alpha, log_grid, AlphaFamily};
use invstab::linops::{diff, fit_spectral_filter, spectral_reconstruct, total_variation, LinearOperator, SpectralFilter};
use invstab::signals::{generate_operator, generate_signal, measure, Jump, Measurement, Provenance, Signal, SignalSpec};
use invstab::solvers::{
    tv_objective, PenaltyCache, PnpInit, PnpPgd, Reconstructor, SolverId, SolverParams, SpectralSolver, Tikhonov,
    TvAdmm, TvProx,
};
use invstab::stability::{
    bregman_distance, gaussian_with_norm, lipschitz_ratio_scan, median, verify_stability_bound, MetricsRow,
    PairProvenance, PerturbationSource, RegularizerId, SubgradientSource, TolerancePolicy,
};

fn benchmark_operator(seed: u64) -> Arc<LinearOperator> {
    Arc::new(generate_operator(512, 1024, 0.0, 0.05, seed).unwrap())
}

#[test]
fn operator_frobenius_norm_is_near_its_expectation() {
    let a = generate_operator(512, 1024, 0.0, 0.05, 1).unwrap();
    let sum: f64 = a.entries().iter().map(|x| x * x).sum();
    let expected = 512.0 * 1024.0 * 0.05;
    assert!((sum - expected).abs() <= 0.05 * expected, "{sum} vs {expected}");
}

/// `E‖n‖ = σ√2 Γ((k+1)/2) / Γ(k/2)` for k i.i.d. N(0, σ²) entries, with the
/// gamma ratio built from `Γ(3/2)/Γ(1) = √π/2` by `Γ(x+1) = xΓ(x)` (k even).
fn chi_mean(k: usize, sigma: f64) -> f64 {
    assert!(k % 2 == 0);
    let mut log_ratio = (0.5 * std::f64::consts::PI.sqrt()).ln();
    for j in 1..k / 2 {
        // Γ(j+3/2)/Γ(j+1) = (j+½)/j · Γ(j+½)/Γ(j)
        log_ratio += (j as f64 + 0.5).ln() - (j as f64).ln();
    }
    sigma * 2f64.sqrt() * log_ratio.exp()
}

#[test]
fn mean_noise_norm_matches_chi_distribution() {
    let a = benchmark_operator(2);
    let u = generate_signal(&SignalSpec::default(), 3).unwrap();
    let mean: f64 = (0..1000).map(|s| measure(&a, &u, 0.03, 10_000 + s).unwrap().noise_norm()).sum::<f64>() / 1000.0;
    let oracle = chi_mean(512, 0.03);
    assert!((oracle - 0.03 * 512f64.sqrt()).abs() < 1e-3);
    assert!((mean - oracle).abs() <= 0.02 * oracle, "{mean} vs {oracle}");
}

#[test]
fn svd_reconstructs_benchmark_operator() {
    let a = benchmark_operator(3);
    let svd = a.svd().unwrap();
    let rel = (svd.recompose() - a.entries()).norm() / a.entries().norm();
    assert!(rel <= 1e-10, "{rel}");
    assert!(svd.singular_values.as_slice().windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn tikhonov_with_identity_matches_spectral_filter() {
    let a = benchmark_operator(4);
    let u = generate_signal(&SignalSpec::default(), 5).unwrap();
    let f = measure(&a, &u, 0.03, 6).unwrap().values;
    for alpha in [1e-4, 0.1, 10.0, 1e3] {
        let direct = Tikhonov::new(a.clone(), &LinearOperator::identity(1024), alpha).unwrap().reconstruct(&f).unwrap();
        let filtered = spectral_reconstruct(&a, &f, &SpectralFilter::tikhonov(alpha).unwrap()).unwrap();
        assert!((&direct.values - &filtered).norm() <= 1e-8 * filtered.norm(), "alpha {alpha}");
    }
}

#[test]
fn fitted_filter_matches_scalar_minimization() {
    let a = generate_operator(12, 20, 0.0, 0.05, 7).unwrap();
    let spec = SignalSpec { n: 20, ..SignalSpec::default() };
    let data: Vec<(Signal, Measurement)> = (0..30)
        .map(|k| {
            let u = generate_signal(&spec, 100 + k).unwrap();
            let f = measure(&a, &u, 0.03, 200 + k).unwrap();
            (u, f)
        })
        .collect();
    let SpectralFilter::PerIndex { gains } = fit_spectral_filter(&data, &a).unwrap() else {
        panic!("expected per-index gains");
    };
    let svd = a.svd().unwrap();
    for i in 0..gains.len() {
        let pairs: Vec<(f64, f64)> = data
            .iter()
            .map(|(u, f)| (svd.u.column(i).dot(&f.values), svd.v.column(i).dot(&u.values)))
            .collect();
        let loss = |g: f64| pairs.iter().map(|(c, d)| (g * c - d).powi(2)).sum::<f64>();
        // Coarse grid, then golden-section refinement around the best cell.
        let grid: Vec<f64> = (0..=4000).map(|k| -20.0 + 0.01 * k as f64).collect();
        let best = grid.iter().copied().min_by(|x, y| loss(*x).total_cmp(&loss(*y))).unwrap();
        let (mut lo, mut hi) = (best - 0.01, best + 0.01);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if loss(x1) < loss(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let g = 0.5 * (lo + hi);
        assert!((g - gains[i]).abs() <= 1e-8 * (1.0 + g.abs()), "index {i}: {g} vs {}", gains[i]);
    }
}

#[test]
fn l1_norm_of_differences_is_jump_variation() {
    let spec = SignalSpec::default();
    for seed in 0..20 {
        let u = generate_signal(&spec, seed).unwrap();
        let by_jumps: f64 = u.jumps.iter().map(|j| j.height.abs()).sum();
        let by_diff = diff(&u.values).lp_norm(1);
        assert_relative_eq!(by_diff, by_jumps, max_relative = 1e-12);
        assert_relative_eq!(total_variation(u.values.as_slice()), by_jumps, max_relative = 1e-12);
    }
}

#[test]
fn weak_tikhonov_fits_the_data() {
    let a = benchmark_operator(8);
    let tik = Tikhonov::with_finite_differences(a.clone(), 1e-7).unwrap();
    for seed in 0..5 {
        let u = generate_signal(&SignalSpec::default(), 20 + seed).unwrap();
        let f = measure(&a, &u, 0.03, 30 + seed).unwrap().values;
        let r = tik.reconstruct(&f).unwrap();
        assert!((a.entries() * &r.values - &f).norm_squared() <= 1e-6);
    }
}

#[test]
fn tv_recovers_constant_signals() {
    let a = Arc::new(generate_operator(64, 128, 0.0, 0.05, 9).unwrap());
    let c = DVector::from_element(128, 0.7);
    let f = a.entries() * &c;
    let cache = Arc::new(PenaltyCache::new(a.clone()));
    for alpha in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let r = TvAdmm::new(cache.clone(), alpha, SolverParams::default()).unwrap().reconstruct(&f).unwrap();
        let worst = (&r.values - &c).amax();
        assert!(worst <= 1e-6, "alpha {alpha}: {worst}");
        // the constant attains the lower bound 0 of the objective
        assert!(tv_objective(&a, &f, &r.values, alpha) <= tv_objective(&a, &f, &c, alpha) + 1e-10);
    }
}

#[test]
fn pnp_with_tv_prox_reaches_the_admm_objective() {
    let a = Arc::new(generate_operator(128, 256, 0.0, 0.05, 10).unwrap());
    let spec = SignalSpec { n: 256, ..SignalSpec::default() };
    let u = generate_signal(&spec, 11).unwrap();
    let f = measure(&a, &u, 0.03, 12).unwrap().values;
    let alpha = 0.2;
    let admm = TvAdmm::new(Arc::new(PenaltyCache::new(a.clone())), alpha, SolverParams::default()).unwrap();
    let ua = admm.reconstruct(&f).unwrap().values;
    let step = 0.02;
    let init = PnpInit::Tikhonov(Arc::new(Tikhonov::with_finite_differences(a.clone(), 1e-7).unwrap()));
    let pnp = PnpPgd::new(a.clone(), Arc::new(TvProx { strength: alpha * step }), step, 3000, init).unwrap();
    let up = pnp.reconstruct(&f).unwrap().values;
    let (oa, op) = (tv_objective(&a, &f, &ua, alpha), tv_objective(&a, &f, &up, alpha));
    assert!((oa - op).abs() <= 0.01 * oa, "{oa} vs {op}");
}

#[test]
fn weak_tikhonov_moves_more_under_attack() {
    let a = benchmark_operator(13);
    let lo = Tikhonov::with_finite_differences(a.clone(), 1e-7).unwrap();
    let hi = Tikhonov::with_finite_differences(a.clone(), 1e2).unwrap();
    let cfg = AttackConfig::default();
    for seed in 0..5 {
        let u = generate_signal(&SignalSpec::default(), 40 + seed).unwrap();
        let f = measure(&a, &u, 0.03, 50 + seed).unwrap().values;
        let gap = |s: &Tikhonov| {
            let clean = s.reconstruct(&f).unwrap().values;
            let adv = fgsm(s, &f, Some(&u.values), &cfg).unwrap();
            (clean - adv.reconstruction_adv.values).norm_squared()
        };
        assert!(gap(&lo) > gap(&hi));
    }
}

/// Largest singular value of `m` by power iteration on `mᵀm`.
fn power_sigma_max(m: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_fn(m.ncols(), |i, _| 1.0 + (i % 7) as f64);
    let mut sigma = 0.0;
    for _ in 0..5000 {
        let w = m.tr_mul(&(m * &v));
        let next = w.norm().sqrt();
        v = w.normalize();
        if (next - sigma).abs() <= 1e-13 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

#[test]
fn lipschitz_scans_respect_operator_norms() {
    let a = Arc::new(generate_operator(64, 128, 0.0, 0.05, 14).unwrap());
    let spec = SignalSpec { n: 128, ..SignalSpec::default() };
    let u = generate_signal(&spec, 15).unwrap();
    let f = measure(&a, &u, 0.03, 16).unwrap().values;
    let mut scans = Vec::new();
    for alpha in [1e-7, 1e2] {
        let tik = Tikhonov::with_finite_differences(a.clone(), alpha).unwrap();
        // the reconstruction map is G(f) = M f with M the response to unit data
        let m = DMatrix::from_fn(128, 64, |_, _| 0.0);
        let mut m = m;
        for j in 0..64 {
            let mut e = DVector::zeros(64);
            e[j] = 1.0;
            m.set_column(j, &tik.reconstruct(&e).unwrap().values);
        }
        let sigma = power_sigma_max(&m);
        let map = |x: &DVector<f64>| tik.reconstruct(x).map(|r| r.values);
        let scan = lipschitz_ratio_scan(&map, &f, PerturbationSource::Gaussian { std: 0.01, seed: 17 }, 20).unwrap();
        assert!(scan.lower_bound <= sigma * (1.0 + 1e-9));
        scans.push((scan.lower_bound, sigma));
    }
    assert!(scans[1].0 < scans[0].0);
    assert!(scans[1].1 < scans[0].1);
}

#[test]
fn pseudo_inverse_on_invertible_noiseless_data() {
    let a = Arc::new(generate_operator(32, 32, 0.0, 0.05, 18).unwrap());
    let solver = SpectralSolver::new(a.clone(), SpectralFilter::TruncatedSvd { threshold: 0.0 }).unwrap();
    let spec = SignalSpec { n: 32, ..SignalSpec::default() };
    let u = generate_signal(&spec, 19).unwrap();
    let f = measure(&a, &u, 0.0, 20).unwrap().values;
    let clean = solver.reconstruct(&f).unwrap();
    assert!((&clean.values - &u.values).norm_squared() <= 1e-16);
    let cfg = AttackConfig { objective: invstab::attacks::AttackObjective::DeviationFromGroundTruth, ..AttackConfig::default() };
    let adv = fgsm(&solver, &f, Some(&u.values), &cfg).unwrap();
    let row = MetricsRow::compute(&a, &u.values, &f, &clean, &adv.f_adv, &adv.reconstruction_adv, "pinv", None).unwrap();
    let sigma_min = a.svd().unwrap().singular_values.min();
    assert!(row.clean_error <= 1e-16);
    assert!(row.lipschitz_ratio <= 1.0 / (sigma_min * sigma_min) * (1.0 + 1e-9));
    let lhs = (a.pinv_apply(&adv.delta).unwrap()).norm_squared() / adv.delta.norm_squared();
    assert_relative_eq!(row.lipschitz_ratio, lhs, max_relative = 1e-8);
}

#[test]
fn zero_budget_leaves_reconstructions_unchanged() {
    let a = Arc::new(generate_operator(32, 64, 0.0, 0.05, 21).unwrap());
    let spec = SignalSpec { n: 64, ..SignalSpec::default() };
    let u = generate_signal(&spec, 22).unwrap();
    let f = measure(&a, &u, 0.03, 23).unwrap().values;
    let cfg = AttackConfig { epsilon: 0.0, step_size: 0.0, ..AttackConfig::default() };
    let solvers: Vec<Box<dyn Reconstructor>> = vec![
        Box::new(Tikhonov::with_finite_differences(a.clone(), 1.0).unwrap()),
        Box::new(TvAdmm::new(Arc::new(PenaltyCache::new(a.clone())), 0.1, SolverParams::default()).unwrap()),
    ];
    for s in &solvers {
        let clean = s.reconstruct(&f).unwrap();
        let adv = fgsm(s.as_ref(), &f, Some(&u.values), &cfg).unwrap();
        let row = MetricsRow::compute(&a, &u.values, &f, &clean, &adv.f_adv, &adv.reconstruction_adv, "s", None).unwrap();
        assert_eq!(row.output_gap, 0.0);
        assert_eq!(row.input_gap, 0.0);
    }
}

#[test]
fn tv_certificates_are_monotone() {
    let a = Arc::new(generate_operator(24, 48, 0.0, 0.05, 24).unwrap());
    let spec = SignalSpec { n: 48, jump_count: (1, 5), ..SignalSpec::default() };
    let tv = TvAdmm::new(Arc::new(PenaltyCache::new(a.clone())), 0.05, SolverParams::default()).unwrap();
    let recs: Vec<_> = (0..100)
        .map(|k| {
            let u = generate_signal(&spec, 300 + k).unwrap();
            let f = measure(&a, &u, 0.03, 400 + k).unwrap().values;
            tv.reconstruct(&f).unwrap()
        })
        .filter(|r| r.diagnostics.converged)
        .collect();
    assert!(recs.len() >= 90);
    let mut pairs = 0;
    for i in 0..recs.len() {
        for j in i + 1..recs.len() {
            if pairs == 1000 {
                break;
            }
            let (r1, r2) = (&recs[i], &recs[j]);
            let b = bregman_distance(
                RegularizerId::TotalVariation,
                0.05,
                &r1.values,
                &r2.values,
                r1.subgradient.as_ref().unwrap(),
                r2.subgradient.as_ref().unwrap(),
            )
            .unwrap();
            assert!(b >= -1e-8, "pair ({i}, {j}): {b}");
            pairs += 1;
        }
    }
    assert_eq!(pairs, 1000);
}

#[test]
fn adversarial_slack_is_below_gaussian_slack_in_median() {
    let a = benchmark_operator(25);
    let tik = Tikhonov::with_finite_differences(a.clone(), 1e2).unwrap();
    let cfg = AttackConfig::default();
    let policy = TolerancePolicy::default();
    let mut adv_slack = Vec::new();
    let mut gauss_slack = Vec::new();
    for k in 0..100 {
        let u = generate_signal(&SignalSpec::default(), 500 + k).unwrap();
        let f = measure(&a, &u, 0.03, 600 + k).unwrap().values;
        let clean = tik.reconstruct(&f).unwrap();
        let adv = fgsm(&tik, &f, Some(&u.values), &cfg).unwrap();
        let fg = &f + gaussian_with_norm(512, adv.delta.norm(), 700 + k);
        let rg = tik.reconstruct(&fg).unwrap();
        let p = PairProvenance::default();
        let ra = verify_stability_bound(&a, &f, &adv.f_adv, &clean, &adv.reconstruction_adv, SubgradientSource::Stored, &policy, p.clone()).unwrap();
        let rgs = verify_stability_bound(&a, &f, &fg, &clean, &rg, SubgradientSource::Stored, &policy, p).unwrap();
        assert!(!ra.violated && !rgs.violated);
        adv_slack.push(ra.slack);
        gauss_slack.push(rgs.slack);
    }
    assert!(median(&mut adv_slack) <= median(&mut gauss_slack));
}

#[test]
fn tikhonov_grid_minimum_is_interior_on_noisy_benchmark() {
    let mut config = BenchConfig::default();
    config.seeds.master = 26;
    config.dataset.validation = 4;
    config.dataset.test = 1;
    config.seeds.populate();
    let data = Dataset::generate(&config, false).unwrap();
    let family = AlphaFamily::new(SolverId::Tikhonov, data.operator.clone(), SolverParams::default()).unwrap();
    let grid = log_grid(1e-9, 1e3, 13);
    let search = grid_search_alpha(&family, &grid, &data.validation).unwrap();
    assert!(search.chosen > grid[0] && search.chosen < grid[12], "{}", search.chosen);
}

#[test]
fn loaded_signal_jumps_agree_with_generated_ones() {
    let spec = SignalSpec::default();
    let u = generate_signal(&spec, 27).unwrap();
    let recomputed: Vec<Jump> = (1..u.values.len())
        .filter(|&k| u.values[k] != u.values[k - 1])
        .map(|k| Jump { index: k, height: u.values[k] - u.values[k - 1] })
        .collect();
    assert_eq!(recomputed.len(), u.jumps.len());
    for (r, j) in recomputed.iter().zip(&u.jumps) {
        assert_eq!(r.index, j.index);
        assert_relative_eq!(r.height, j.height, max_relative = 1e-12, epsilon = 1e-15);
    }
    let p = Provenance { signal_seed: 27, operator_seed: None, noise_seed: 0 };
    assert_eq!(p.signal_seed, u.seed);
}
