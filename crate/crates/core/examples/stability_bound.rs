//! Check the data-consistency plus Bregman stability bound on attacked pairs,
//! for each solver's own regularizer and for Tikhonov quantities evaluated on
//! TV reconstructions, and write gnuplot-ready scatter data.

use std::sync::Arc;

use invstab::attacks::{fgsm, AttackConfig, GradientBackend};
use invstab::signals::{generate_operator, generate_signal, measure, SignalSpec};
use invstab::solvers::{PenaltyCache, Reconstructor, SolverParams, Tikhonov, TvAdmm};
use invstab::stability::{
    gaussian_with_norm, scatter_data, verify_stability_bound, worst_case_bound, PairProvenance, SubgradientSource,
    TolerancePolicy,
};

fn main() -> invstab::Result<()> {
    let a = Arc::new(generate_operator(512, 1024, 0.0, 0.05, 31)?);
    let tik = Tikhonov::with_finite_differences(a.clone(), 1e2)?;
    let tv = TvAdmm::new(Arc::new(PenaltyCache::new(a.clone())), 0.5, SolverParams::default())?;
    let policy = TolerancePolicy::default();
    let mut reports = Vec::new();

    for k in 0..5u64 {
        let u = generate_signal(&SignalSpec::default(), 100 + k)?;
        let f = measure(&a, &u, 0.03, 200 + k)?.values;
        for (solver, backend) in [(&tik as &dyn Reconstructor, GradientBackend::ClosedForm), (&tv, GradientBackend::UnrolledAdjoint)] {
            let cfg = AttackConfig { gradient_backend: backend, ..AttackConfig::default() };
            let clean = solver.reconstruct(&f)?;
            let adv = fgsm(solver, &f, Some(&u.values), &cfg)?;
            let f_g = &f + gaussian_with_norm(f.len(), adv.delta.norm(), 300 + k);
            let gauss = solver.reconstruct(&f_g)?;
            let prov = PairProvenance { instance: Some(k as usize), ..PairProvenance::default() };
            let own = verify_stability_bound(&a, &f, &adv.f_adv, &clean, &adv.reconstruction_adv, SubgradientSource::Stored, &policy, prov.clone())?;
            let own_g = verify_stability_bound(&a, &f, &f_g, &clean, &gauss, SubgradientSource::Stored, &policy, prov.clone())?;
            print!(
                "instance {k} {:<22} adversarial slack {:9.4} gaussian slack {:9.4} identity {:+.1e}",
                solver.label(),
                own.slack,
                own_g.slack,
                own.identity_residual
            );
            if solver.solver_id() != invstab::solvers::SolverId::Tikhonov {
                let cross = verify_stability_bound(
                    &a,
                    &f,
                    &adv.f_adv,
                    &clean,
                    &adv.reconstruction_adv,
                    SubgradientSource::Tikhonov { alpha: 100.0 },
                    &policy,
                    prov,
                )?;
                print!("  tikhonov(100) on tv: slack {:9.4} violated {}", cross.slack, cross.violated);
            }
            println!();
            if solver.solver_id() == invstab::solvers::SolverId::Tikhonov {
                reports.push(own);
            }
        }
    }
    print!("{}", scatter_data(&reports, Some(worst_case_bound(512, 0.2))));
    Ok(())
}
