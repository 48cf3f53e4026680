//! Spectral regularization: truncated SVD, the Tikhonov filter, and a
//! per-index filter fitted to training pairs.

use std::sync::Arc;

use invstab::linops::{fit_spectral_filter, spectral_reconstruct, SpectralFilter};
use invstab::signals::{generate_operator, generate_signal, measure, SignalSpec};
use invstab::solvers::{Reconstructor, SpectralSolver};

fn main() -> invstab::Result<()> {
    let a = Arc::new(generate_operator(128, 256, 0.0, 0.05, 11)?);
    let spec = SignalSpec { n: 256, ..SignalSpec::default() };
    let pairs = (0..400)
        .map(|k| {
            let u = generate_signal(&spec, 1000 + k)?;
            let f = measure(&a, &u, 0.03, 2000 + k)?;
            Ok((u, f))
        })
        .collect::<invstab::Result<Vec<_>>>()?;
    let fitted = fit_spectral_filter(&pairs, &a)?;

    let u = generate_signal(&spec, 12)?;
    let f = measure(&a, &u, 0.03, 13)?.values;
    let filters = [
        SpectralFilter::TruncatedSvd { threshold: 0.0 },
        SpectralFilter::TruncatedSvd { threshold: 2.0 },
        SpectralFilter::tikhonov(1.0)?,
        SpectralFilter::tikhonov(10.0)?,
        fitted,
    ];
    for filter in filters {
        let x = spectral_reconstruct(&a, &f, &filter)?;
        let solver = SpectralSolver::new(a.clone(), filter.clone())?;
        assert!((solver.reconstruct(&f)?.values - &x).norm() <= 1e-12 * x.norm());
        println!("{:<16} |u-u_gt|^2 = {:8.4}", filter.kind(), (&x - &u.values).norm_squared());
    }
    Ok(())
}
