//! A reduced end-to-end benchmark: dataset, grid search, attacks on every
//! solver, stability checks and report files.
//!
//! Pass a TOML config path to override the built-in small settings.

use invstab::bench::config::BenchConfig;
use invstab::bench::report::summary_markdown;
use invstab::bench::run::run_benchmark;

fn main() -> invstab::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(path) => BenchConfig::load(path.as_ref())?,
        None => {
            let mut c = BenchConfig { n: 256, m: 128, ..BenchConfig::default() };
            c.dataset.train = 1000;
            c.dataset.validation = 3;
            c.dataset.test = 10;
            c.grid.points = 8;
            c.output_dir = "example-out/bench".into();
            c
        }
    };
    let out = run_benchmark(&config)?;
    println!("{}", summary_markdown(&out.results));
    for (stage, secs) in &out.timings {
        println!("{stage:>14}: {secs:.2}s");
    }
    println!("artifacts: {}", out.manifest.artifacts.join(", "));
    Ok(())
}
