//! FGSM and PGD attacks on Tikhonov and TV reconstructions, with a
//! finite-difference check of the attack gradient.

use std::sync::Arc;

use invstab::attacks::{fgsm, pgd, AttackConfig, AttackObjective, GradientBackend};
use invstab::signals::{generate_operator, generate_signal, measure, SignalSpec};
use invstab::solvers::{PenaltyCache, Reconstructor, SolverParams, Tikhonov, TvAdmm};

fn main() -> invstab::Result<()> {
    let a = Arc::new(generate_operator(512, 1024, 0.0, 0.05, 21)?);
    let u = generate_signal(&SignalSpec::default(), 22)?;
    let f = measure(&a, &u, 0.03, 23)?.values;

    let tik = Tikhonov::with_finite_differences(a.clone(), 1e2)?;
    let tv = TvAdmm::new(Arc::new(PenaltyCache::new(a.clone())), 0.5, SolverParams::default())?;

    let closed = AttackConfig { grad_check_probes: 16, ..AttackConfig::default() };
    let unrolled = AttackConfig { gradient_backend: GradientBackend::UnrolledAdjoint, ..closed.clone() };

    for (solver, cfg) in [(&tik as &dyn Reconstructor, &closed), (&tv, &unrolled)] {
        let clean = solver.reconstruct(&f)?;
        let one = fgsm(solver, &f, Some(&u.values), cfg)?;
        let check = one.grad_check.as_ref().expect("probes requested");
        println!(
            "{}: clean |u-u_gt| = {:.4}, fgsm |u_adv-u_gt| = {:.4}, |f-f_adv|^2 = {:.2}, gradient check max rel err {:.1e}",
            solver.label(),
            (&clean.values - &u.values).norm(),
            one.objective_value,
            one.delta.norm_squared(),
            check.max_relative_error
        );
    }

    // PGD keeps its best iterate, and the FGSM point is one of its starts.
    let cfg = AttackConfig { steps: 20, restarts: 2, ..AttackConfig::default() };
    let one = fgsm(&tik, &f, Some(&u.values), &cfg)?;
    let many = pgd(&tik, &f, Some(&u.values), &cfg)?;
    println!("{}: fgsm {:.4} <= pgd {:.4}", tik.label(), one.objective_value, many.objective_value);

    // Deviation from the clean reconstruction instead of the ground truth.
    let cfg = AttackConfig { objective: AttackObjective::DeviationFromClean, ..AttackConfig::default() };
    let dev = fgsm(&tik, &f, None, &cfg)?;
    println!("{}: deviation-from-clean fgsm |u_adv-u| = {:.4}", tik.label(), dev.objective_value);
    Ok(())
}
