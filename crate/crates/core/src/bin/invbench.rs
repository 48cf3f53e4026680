use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use invstab::attacks::{attack, AttackMethod, AttackObjective, GradientBackend};
use invstab::bench::config::{BenchConfig, ReportFormat, SolverEntry};
use invstab::bench::dataset::Dataset;
use invstab::bench::report::{emit_report, load_results, stability_csv};
use invstab::bench::run::{self, evaluate, prepare_dataset, tune, RunResults};
use invstab::error::{Error, Result};
use invstab::io;
use invstab::solvers::SolverId;
use invstab::stability::aggregate;

#[derive(Parser)]
#[command(name = "invbench", version, about = "Reconstruction robustness benchmark")]
struct Cli {
    /// TOML config; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; unset stream seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Report format; repeat for both.
    #[arg(long, global = true, value_parser = clap::value_parser!(ReportFormat))]
    format: Vec<ReportFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Existing dataset directory; generated from the config when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "tikhonov", value_parser = clap::value_parser!(SolverId))]
    solver: SolverId,
    #[arg(long)]
    alpha: Option<f64>,
    /// Use only the first K test instances.
    #[arg(long)]
    instances: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and save a dataset.
    Generate {
        /// Include the training split.
        #[arg(long)]
        train: bool,
    },
    /// Reconstruct test instances with one solver.
    Reconstruct(SolverArgs),
    /// Attack one test instance.
    Attack {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 0)]
        instance: usize,
        #[arg(long, value_parser = clap::value_parser!(AttackMethod))]
        method: Option<AttackMethod>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_parser = clap::value_parser!(AttackObjective))]
        objective: Option<AttackObjective>,
        #[arg(long, value_parser = clap::value_parser!(GradientBackend))]
        backend: Option<GradientBackend>,
        /// Finite-difference probes of the attack gradient.
        #[arg(long)]
        grad_check: Option<usize>,
    },
    /// Evaluate the stability bound on attacked and Gaussian pairs.
    VerifyBound {
        #[command(flatten)]
        solver: SolverArgs,
        /// Tikhonov alpha for the cross-regularizer check.
        #[arg(long)]
        cross_alpha: Option<f64>,
    },
    /// Tune alpha on the validation split.
    GridSearch {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(SolverId))]
        solver: Option<SolverId>,
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Full benchmark.
    Run,
    /// Re-emit tables and summary from the JSON artifacts of a run.
    Report {
        #[arg(long)]
        from: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<BenchConfig> {
    let mut c = match &cli.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seeds.master = s;
    }
    if let Some(o) = &cli.out {
        c.output_dir = o.clone();
    }
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    if !cli.format.is_empty() {
        c.formats = cli.format.clone();
    }
    c.seeds.populate();
    Ok(c)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn dataset_for(config: &mut BenchConfig, args: &SolverArgs) -> Result<Dataset> {
    if let Some(d) = &args.dataset {
        config.dataset.path = Some(d.clone());
        config.dataset.save = false;
        if !d.join("dataset.json").exists() {
            return Err(Error::io(d.join("dataset.json"), std::io::ErrorKind::NotFound.into()));
        }
    }
    config.solvers = vec![solver_entry(args)];
    config.validate()?;
    let mut d = prepare_dataset(config)?;
    if let Some(k) = args.instances {
        d.test.truncate(k);
    }
    Ok(d)
}

fn solver_entry(args: &SolverArgs) -> SolverEntry {
    let mut e = SolverEntry::new(args.solver);
    e.alpha = args.alpha;
    e
}

fn solvers_for(config: &BenchConfig, dataset: &Dataset) -> Result<Vec<run::BenchSolver>> {
    let tuned = tune(config, dataset)?.map(|g| g.chosen);
    run::build_solvers(config, dataset, tuned)
}

fn write_table(config: &BenchConfig, name: &str, csv: &str, json: &impl serde::Serialize) -> Result<()> {
    for f in &config.formats {
        match f {
            ReportFormat::Csv => io::write_bytes(&config.output_dir.join(format!("{name}.csv")), csv.as_bytes())?,
            ReportFormat::Json => io::write_json(&config.output_dir.join(format!("{name}.json")), json)?,
        }
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ReconstructionRow {
    instance: usize,
    clean_error: f64,
    consistency: f64,
    converged: bool,
    iterations: usize,
}

fn execute(cli: &Cli) -> Result<()> {
    let mut config = load_config(cli)?;
    match &cli.command {
        Command::Generate { train } => {
            config.validate()?;
            let dir = config.output_dir.clone();
            ensure_dir(&dir)?;
            let d = Dataset::generate(&config, *train)?;
            d.save(&dir)?;
            println!("wrote dataset ({} test instances) to {}", d.test.len(), dir.display());
        }
        Command::Reconstruct(args) => {
            let d = dataset_for(&mut config, args)?;
            let solvers = solvers_for(&config, &d)?;
            let s = &solvers[0];
            ensure_dir(&config.output_dir)?;
            let a = d.operator.as_ref();
            let mut rows = Vec::new();
            let mut values = Vec::new();
            for inst in &d.test {
                let r = s.solver.reconstruct(inst.data())?;
                rows.push(ReconstructionRow {
                    instance: inst.index,
                    clean_error: (&r.values - inst.ground_truth()).norm_squared(),
                    consistency: (a.entries() * &r.values - inst.data()).norm_squared(),
                    converged: r.diagnostics.converged,
                    iterations: r.diagnostics.iterations,
                });
                values.push(r.values);
            }
            let refs: Vec<&DVector<f64>> = values.iter().collect();
            io::write_rows(&config.output_dir.join("reconstructions.bin"), &refs)?;
            let mut csv = String::from("instance,clean_error,consistency,converged,iterations\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{:?},{:?},{},{}\n",
                    r.instance, r.clean_error, r.consistency, r.converged, r.iterations
                ));
            }
            write_table(&config, "reconstruct", &csv, &rows)?;
            println!("{}: {} reconstructions in {}", s.record.label, rows.len(), config.output_dir.display());
        }
        Command::Attack { solver, instance, method, epsilon, objective, backend, grad_check } => {
            let d = dataset_for(&mut config, solver)?;
            let inst = d
                .test
                .get(*instance)
                .ok_or_else(|| Error::Parameter(format!("instance {instance} out of range ({})", d.test.len())))?;
            let solvers = solvers_for(&config, &d)?;
            let s = &solvers[0];
            let mut cfg = config.attack.clone();
            cfg.gradient_backend = backend.unwrap_or(s.record.backend);
            cfg.method = method.unwrap_or(cfg.method);
            cfg.epsilon = epsilon.unwrap_or(cfg.epsilon);
            cfg.step_size = cfg.step_size.min(2.0 * cfg.epsilon);
            cfg.objective = objective.unwrap_or(cfg.objective);
            cfg.grad_check_probes = grad_check.unwrap_or(cfg.grad_check_probes);
            cfg.seed = config.seeds.attack();
            let result = attack(s.solver.as_ref(), inst.data(), Some(inst.ground_truth()), &cfg)?;
            ensure_dir(&config.output_dir)?;
            result.write(&config.output_dir)?;
            println!(
                "{} {}: objective {:.6}, |f-f_adv|^2 = {:.6}",
                result.method,
                s.record.label,
                result.objective_value,
                result.delta.norm_squared()
            );
        }
        Command::VerifyBound { solver, cross_alpha } => {
            if let Some(c) = cross_alpha {
                config.stability.cross_alpha = *c;
            }
            let d = dataset_for(&mut config, solver)?;
            let solvers = solvers_for(&config, &d)?;
            let (_, stability, _) = evaluate(&config, &d, &solvers)?;
            ensure_dir(&config.output_dir)?;
            write_table(&config, "stability", &stability_csv(&stability), &stability)?;
            let violated = stability.iter().filter(|r| r.report.violated).count();
            println!("{} pairs, {violated} violations", stability.len());
        }
        Command::GridSearch { dataset, solver, min, max, points } => {
            config.grid.solver = solver.unwrap_or(config.grid.solver);
            config.grid.min = min.unwrap_or(config.grid.min);
            config.grid.max = max.unwrap_or(config.grid.max);
            config.grid.points = points.unwrap_or(config.grid.points);
            let args = SolverArgs { dataset: dataset.clone(), solver: config.grid.solver, alpha: None, instances: None };
            let d = dataset_for(&mut config, &args)?;
            let grid = tune(&config, &d)?.ok_or_else(|| Error::Config("nothing to tune".into()))?;
            ensure_dir(&config.output_dir)?;
            write_table(&config, "grid", &invstab::bench::report::grid_csv(&grid), &grid)?;
            println!("chosen {} alpha = {}", grid.solver, grid.chosen);
        }
        Command::Run => {
            let out = run::run_benchmark(&config)?;
            println!("{}", invstab::bench::report::summary_markdown(&out.results));
            println!("artifacts in {}", config.output_dir.display());
        }
        Command::Report { from } => {
            let mut results: RunResults = load_results(from)?;
            results.aggregates = aggregate(&results.rows);
            let dir = cli.out.clone().unwrap_or_else(|| from.clone());
            emit_report(&results, &config.formats, &dir)?;
            println!("{}", invstab::bench::report::summary_markdown(&results));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
