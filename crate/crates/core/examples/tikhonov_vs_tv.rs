//! Reconstruct one measurement with weak and strong Tikhonov regularization
//! and with total variation, and inspect the subgradient certificates.

use std::sync::Arc;

use invstab::signals::{generate_operator, generate_signal, measure, SignalSpec};
use invstab::solvers::{PenaltyCache, Reconstructor, SolverParams, Tikhonov, TvAdmm};

fn main() -> invstab::Result<()> {
    let a = Arc::new(generate_operator(512, 1024, 0.0, 0.05, 7)?);
    let u = generate_signal(&SignalSpec::default(), 8)?;
    let f = measure(&a, &u, 0.03, 9)?.values;

    let tv_cache = Arc::new(PenaltyCache::new(a.clone()));
    let solvers: Vec<Box<dyn Reconstructor>> = vec![
        Box::new(Tikhonov::with_finite_differences(a.clone(), 1e-7)?),
        Box::new(Tikhonov::with_finite_differences(a.clone(), 1e2)?),
        Box::new(TvAdmm::new(tv_cache.clone(), 0.3, SolverParams::default())?),
        Box::new(TvAdmm::new(tv_cache, 1.0, SolverParams::default())?),
    ];

    println!("{:<24} {:>12} {:>12} {:>12} {:>6} {:>8}", "solver", "|u-u_gt|^2", "|Au-f|^2", "stationarity", "iters", "polished");
    for s in &solvers {
        let r = s.reconstruct(&f)?;
        let d = &r.diagnostics;
        println!(
            "{:<24} {:>12.5} {:>12.5} {:>12.2e} {:>6} {:>8}",
            s.label(),
            (&r.values - &u.values).norm_squared(),
            (a.entries() * &r.values - &f).norm_squared(),
            d.stationarity_residual.unwrap_or(f64::NAN),
            d.iterations,
            d.polished
        );
        if let Some(c) = &d.certificate {
            println!("    certificate: residual {:.2e} (tolerance {:.2e}), {} jumps", c.residual, c.tolerance, c.jump_count);
        }
    }
    Ok(())
}
