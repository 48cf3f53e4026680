//! Data-driven reconstruction: a learned linear map fitted by ridge
//! regression, and plug-and-play proximal gradient with a TV-prox denoiser.

use std::sync::Arc;

use invstab::attacks::{fgsm, AttackConfig, GradientBackend};
use invstab::signals::{generate_operator, generate_signal, measure, SignalSpec};
use invstab::solvers::{learned_linear_fit, LearnedLinear, PnpInit, PnpPgd, Reconstructor, Tikhonov, TvProx};

fn main() -> invstab::Result<()> {
    let n = 256;
    let a = Arc::new(generate_operator(128, n, 0.0, 0.05, 41)?);
    let spec = SignalSpec { n, ..SignalSpec::default() };
    let train = (0..1500)
        .map(|k| {
            let u = generate_signal(&spec, 10_000 + k)?;
            let f = measure(&a, &u, 0.03, 20_000 + k)?;
            Ok((u, f))
        })
        .collect::<invstab::Result<Vec<_>>>()?;
    let learned = LearnedLinear::new(a.clone(), Arc::new(learned_linear_fit(&train, 1e-3)?))?;

    let step = 1.0 / invstab::solvers::power_iteration_sigma_max(&a, 1000, 1e-10).powi(2);
    let init = PnpInit::Tikhonov(Arc::new(Tikhonov::with_finite_differences(a.clone(), 1e-7)?));
    let pnp = PnpPgd::new(a.clone(), Arc::new(TvProx { strength: 0.3 * step }), step, 300, init)?;

    let u = generate_signal(&spec, 42)?;
    let f = measure(&a, &u, 0.03, 43)?.values;
    for (solver, backend) in [
        (&learned as &dyn Reconstructor, GradientBackend::ClosedForm),
        (&pnp, GradientBackend::UnrolledAdjoint),
    ] {
        let clean = solver.reconstruct(&f)?;
        let cfg = AttackConfig { gradient_backend: backend, ..AttackConfig::default() };
        let adv = fgsm(solver, &f, Some(&u.values), &cfg)?;
        println!(
            "{:<40} clean |u-u_gt|^2 = {:7.4}  attacked = {:7.4}",
            solver.label(),
            (&clean.values - &u.values).norm_squared(),
            (&adv.reconstruction_adv.values - &u.values).norm_squared()
        );
    }
    Ok(())
}
