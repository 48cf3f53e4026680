//! Tune the TV regularization strength on a validation split.

use invstab::bench::config::BenchConfig;
use invstab::bench::dataset::Dataset;
use invstab::bench::grid::{grid_search_alpha, log_grid, AlphaFamily};
use invstab::solvers::{SolverId, SolverParams};

fn main() -> invstab::Result<()> {
    let mut config = BenchConfig { n: 256, m: 128, ..BenchConfig::default() };
    config.dataset.validation = 4;
    config.dataset.test = 1;
    config.seeds.master = 3;
    config.seeds.populate();
    let data = Dataset::generate(&config, false)?;

    for id in [SolverId::Tikhonov, SolverId::TvAdmm] {
        let family = AlphaFamily::new(id, data.operator.clone(), SolverParams::default())?;
        let search = grid_search_alpha(&family, &log_grid(1e-3, 1e2, 11), &data.validation)?;
        println!("{id}: chosen alpha {:.4}", search.chosen);
        for p in &search.points {
            let e = p.mean_error.map(|e| format!("{e:.4}")).unwrap_or_else(|| "failed".into());
            println!("  alpha {:>10.4}  mean |u-u_gt|^2 {e}", p.alpha);
        }
    }
    Ok(())
}
