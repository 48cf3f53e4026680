use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, SolverEntry};
use super::dataset::{Dataset, DatasetManifest, Instance};
use super::grid::{grid_search_alpha, log_grid, AlphaFamily, GridSearch};
use super::report::{emit_report, write_manifest};
use crate::attacks::{attack, AttackConfig, GradCheck, GradientBackend};
use crate::error::{Error, Result};
use crate::linops::{LinearOperator, SpectralFilter};
use crate::rng::derive_seed;
use crate::solvers::{
    learned_linear_fit, DenoiserKind, LearnedLinear, PenaltyCache, PnpInit, PnpPgd, Reconstruction, Reconstructor,
    SolverId, SolverParams, SpectralSolver, Tikhonov, TvAdmm,
};
use crate::stability::{
    aggregate, gaussian_with_norm, identity_scale, verify_stability_bound, MetricsAggregate, MetricsRow,
    PairProvenance, StabilityReport, SubgradientSource,
};

pub const STAGES: [&str; 6] = ["validate", "dataset", "grid-search", "build-solvers", "evaluate", "report"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    Adversarial,
    Gaussian,
}

impl Perturbation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Perturbation::Adversarial => "adversarial",
            Perturbation::Gaussian => "gaussian",
        }
    }
}

/// One evaluated pair `(f, f + δ)` of one solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub solver: String,
    pub instance: usize,
    pub perturbation: Perturbation,
    /// Bound quantities of a Tikhonov regularizer on another solver's output.
    pub cross: bool,
    /// Both solves reported convergence.
    pub converged: bool,
    /// Allowed `|identity_residual|`: ten times what the two stationarity
    /// residuals can explain, plus a rounding floor.
    pub identity_tolerance: f64,
    pub report: StabilityReport,
}

impl StabilityRecord {
    pub fn identity_holds(&self) -> bool {
        self.report.identity_residual.abs() <= self.identity_tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub solver: String,
    pub instance: usize,
    pub method: String,
    pub backend: GradientBackend,
    pub objective_value: f64,
    pub delta_linf: f64,
    pub input_gap: f64,
    /// Entries of `δ` left at zero by a vanishing gradient component.
    pub zero_gradient_coordinates: usize,
    pub hit_nondifferentiable_point: bool,
    pub grad_check: Option<GradCheck>,
}

/// Per-solver record of how the solver was instantiated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub label: String,
    pub id: SolverId,
    pub alpha: Option<f64>,
    pub backend: GradientBackend,
    pub denoiser: Option<DenoiserKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub stages: Vec<StageRecord>,
    /// The validated config with every seed filled in.
    pub config: BenchConfig,
    pub dataset: Option<DatasetManifest>,
    pub tuned_alpha: Option<f64>,
    pub solvers: Vec<SolverRecord>,
    /// Artifacts written; empty when the run stopped before the report stage.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub rows: Vec<MetricsRow>,
    pub aggregates: Vec<MetricsAggregate>,
    pub stability: Vec<StabilityRecord>,
    pub attacks: Vec<AttackRecord>,
    pub grid: Option<GridSearch>,
    pub epsilon: f64,
    pub m: usize,
}

impl RunResults {
    pub fn empty(epsilon: f64, m: usize) -> Self {
        Self {
            rows: Vec::new(),
            aggregates: Vec::new(),
            stability: Vec::new(),
            attacks: Vec::new(),
            grid: None,
            epsilon,
            m,
        }
    }
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub results: RunResults,
    /// Wall-clock seconds per stage, kept out of the deterministic artifacts.
    pub timings: Vec<(String, f64)>,
}

struct Progress {
    stages: Vec<StageRecord>,
    timings: Vec<(String, f64)>,
}

impl Progress {
    fn run<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
        let status = if out.is_ok() { "complete" } else { "failed" };
        self.stages.push(StageRecord { name: stage.to_string(), status: status.to_string() });
        out.map_err(|e| e.in_stage(stage))
    }
}

/// Thread pool with `workers` threads, or rayon's default when 0.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start {workers} workers: {e}")))
}

/// Validates, fills in seeds and runs the whole pipeline, writing artifacts
/// into `config.output_dir`. On failure the manifest is still written, with
/// status `incomplete` and the failing stage.
pub fn run_benchmark(config: &BenchConfig) -> Result<RunOutcome> {
    let mut config = config.clone();
    config.seeds.populate();
    let pool = worker_pool(config.workers)?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: BenchConfig) -> Result<RunOutcome> {
    let mut progress = Progress { stages: Vec::new(), timings: Vec::new() };
    let mut manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        status: "incomplete".into(),
        failed_stage: None,
        error: None,
        stages: Vec::new(),
        config: config.clone(),
        dataset: None,
        tuned_alpha: None,
        solvers: Vec::new(),
        artifacts: Vec::new(),
    };
    let out_dir = config.output_dir.clone();
    let mut results = RunResults::empty(config.attack.epsilon, config.m);

    let outcome = (|| -> Result<()> {
        progress.run("validate", || config.validate())?;
        let dataset = progress.run("dataset", || prepare_dataset(&config))?;
        manifest.dataset = Some(dataset.manifest.clone());
        let grid = progress.run("grid-search", || tune(&config, &dataset))?;
        manifest.tuned_alpha = grid.as_ref().map(|g| g.chosen);
        results.grid = grid;
        let tuned = manifest.tuned_alpha;
        let solvers = progress.run("build-solvers", || build_solvers(&config, &dataset, tuned))?;
        manifest.solvers = solvers.iter().map(|s| s.record.clone()).collect();
        let evaluated = progress.run("evaluate", || evaluate(&config, &dataset, &solvers))?;
        results.rows = evaluated.0;
        results.stability = evaluated.1;
        results.attacks = evaluated.2;
        results.aggregates = aggregate(&results.rows);
        let artifacts = progress.run("report", || emit_report(&results, &config.formats, &out_dir))?;
        manifest.artifacts = artifacts;
        Ok(())
    })();

    manifest.stages = progress.stages.clone();
    match &outcome {
        Ok(()) => manifest.status = "complete".into(),
        Err(e) => {
            manifest.failed_stage = progress.stages.last().map(|s| s.name.clone());
            manifest.error = Some(e.to_string());
        }
    }
    let written = write_run_files(&out_dir, &manifest, &progress.timings);
    outcome?;
    written?;
    Ok(RunOutcome { manifest, results, timings: progress.timings })
}

fn write_run_files(dir: &Path, manifest: &RunManifest, timings: &[(String, f64)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_manifest(dir, manifest)?;
    let text: String = timings.iter().map(|(s, t)| format!("{s}\t{t:.3}\n")).collect();
    crate::io::write_bytes(&dir.join("timings.txt"), text.as_bytes())
}

pub fn prepare_dataset(config: &BenchConfig) -> Result<Dataset> {
    let with_train = config.needs_training_set();
    if let Some(path) = &config.dataset.path {
        if path.join("dataset.json").exists() && !config.dataset.save {
            let d = Dataset::load(path)?;
            if d.manifest.n != config.n || d.manifest.m != config.m {
                return Err(Error::Config(format!(
                    "dataset at {} is {}x{}, config asks for {}x{}",
                    path.display(),
                    d.manifest.m,
                    d.manifest.n,
                    config.m,
                    config.n
                )));
            }
            if with_train && d.train.is_empty() {
                return Err(Error::Config(format!("dataset at {} has no training split", path.display())));
            }
            return Ok(d);
        }
    }
    let d = Dataset::generate(config, with_train)?;
    if let (Some(path), true) = (&config.dataset.path, config.dataset.save) {
        std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        d.save(path)?;
    }
    Ok(d)
}

fn entry_params(entry: &SolverEntry) -> SolverParams {
    entry.params.clone().unwrap_or_default()
}

/// Grid search for the configured solver when some entry leaves its `α` open.
pub fn tune(config: &BenchConfig, dataset: &Dataset) -> Result<Option<GridSearch>> {
    let Some(entry) = config.solvers.iter().find(|s| s.id == config.grid.solver && s.alpha.is_none()) else {
        return Ok(None);
    };
    let family = AlphaFamily::new(config.grid.solver, dataset.operator.clone(), entry_params(entry))?;
    let grid = log_grid(config.grid.min, config.grid.max, config.grid.points);
    grid_search_alpha(&family, &grid, &dataset.validation).map(Some)
}

/// A ready-to-run solver with how it was configured.
pub struct BenchSolver {
    pub record: SolverRecord,
    pub solver: Box<dyn Reconstructor>,
}

pub fn build_solvers(config: &BenchConfig, dataset: &Dataset, tuned: Option<f64>) -> Result<Vec<BenchSolver>> {
    let a = &dataset.operator;
    let tv_cache = Arc::new(PenaltyCache::new(a.clone()));
    let alpha_of = |entry: &SolverEntry| -> Result<f64> {
        entry
            .alpha
            .or(if entry.id == config.grid.solver { tuned } else { None })
            .ok_or_else(|| Error::Config(format!("{} has no alpha and none was tuned", entry.display_label())))
    };
    let tuned_tv = if config.grid.solver == SolverId::TvAdmm { tuned } else { None };
    let mut out = Vec::with_capacity(config.solvers.len());
    for entry in &config.solvers {
        let params = entry_params(entry);
        let mut record = SolverRecord {
            label: entry.display_label(),
            id: entry.id,
            alpha: None,
            backend: entry.backend(),
            denoiser: None,
        };
        let solver: Box<dyn Reconstructor> = match entry.id {
            SolverId::Tikhonov => {
                let alpha = alpha_of(entry)?;
                record.alpha = Some(alpha);
                Box::new(Tikhonov::with_finite_differences(a.clone(), alpha)?)
            }
            SolverId::TvAdmm => {
                let alpha = alpha_of(entry)?;
                record.alpha = Some(alpha);
                Box::new(TvAdmm::new(tv_cache.clone(), alpha, params)?)
            }
            SolverId::PnpPgd => {
                let denoiser = match &entry.denoiser {
                    Some(d) => d.clone(),
                    None => {
                        let alpha = entry.alpha.or(tuned_tv).ok_or_else(|| {
                            Error::Config(format!("{} needs a denoiser or a tuned tv alpha", entry.display_label()))
                        })?;
                        DenoiserKind::TvProx { strength: alpha * params.step_size }
                    }
                };
                let init_alpha = entry.init_alpha.unwrap_or(1e-7);
                let init = PnpInit::Tikhonov(Arc::new(Tikhonov::with_finite_differences(a.clone(), init_alpha)?));
                record.denoiser = Some(denoiser.clone());
                Box::new(PnpPgd::new(
                    a.clone(),
                    Arc::from(denoiser.build()),
                    params.step_size,
                    params.pnp_iterations,
                    init,
                )?)
            }
            SolverId::LearnedLinear => {
                let map = learned_linear_fit(&dataset.training_pairs(), entry.ridge.unwrap_or(1e-3))?;
                Box::new(LearnedLinear::new(a.clone(), Arc::new(map))?)
            }
            SolverId::Spectral => {
                let record_f = entry
                    .filter
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("{} needs a filter", entry.display_label())))?;
                Box::new(SpectralSolver::new(a.clone(), SpectralFilter::from_record(record_f)?)?)
            }
        };
        out.push(BenchSolver { record, solver });
    }
    Ok(out)
}

fn stationarity_of(r: &Reconstruction) -> f64 {
    r.diagnostics.stationarity_residual.unwrap_or(0.0)
}

/// Records one pair. `source` selects own certificates or cross Tikhonov ones.
fn pair_record(
    a: &LinearOperator,
    label: &str,
    instance: usize,
    perturbation: Perturbation,
    (f1, r1): (&DVector<f64>, &Reconstruction),
    (f2, r2): (&DVector<f64>, &Reconstruction),
    source: SubgradientSource,
    config: &BenchConfig,
) -> Result<StabilityRecord> {
    let provenance = PairProvenance {
        instance: Some(instance),
        perturbation: Some(perturbation.as_str().to_string()),
        solver_1: Some(label.to_string()),
        solver_2: Some(label.to_string()),
    };
    let report = verify_stability_bound(a, f1, f2, r1, r2, source, &config.stability.tolerance, provenance)?;
    let du = (&r1.values - &r2.values).norm();
    let identity_tolerance =
        10.0 * (stationarity_of(r1) + stationarity_of(r2)) * du + 1e-10 * identity_scale(a, f1, f2, &r1.values, &r2.values);
    Ok(StabilityRecord {
        solver: label.to_string(),
        instance,
        perturbation,
        cross: !matches!(source, SubgradientSource::Stored),
        converged: r1.diagnostics.converged && r2.diagnostics.converged,
        identity_tolerance,
        report,
    })
}

type InstanceOutput = (MetricsRow, Vec<StabilityRecord>, AttackRecord);

/// Clean, adversarial and Gaussian evaluation of one solver on one instance.
pub fn evaluate_instance(
    config: &BenchConfig,
    a: &LinearOperator,
    solver: &BenchSolver,
    solver_index: usize,
    inst: &Instance,
) -> Result<InstanceOutput> {
    let label = &solver.record.label;
    let s = solver.solver.as_ref();
    let f = inst.data();
    let u_gt = inst.ground_truth();
    let at = |e: Error| Error::Numerical(format!("{label}, instance {}: {e}", inst.index));
    let wrap = |e: Error| match e.class() {
        crate::error::ErrorClass::Compute => at(e),
        _ => e,
    };

    let clean = s.reconstruct(f).map_err(wrap)?;
    let attack_cfg = AttackConfig {
        gradient_backend: solver.record.backend,
        seed: derive_seed(config.seeds.attack(), solver_index as u64, inst.index as u64),
        ..config.attack.clone()
    };
    let adv = attack(s, f, Some(u_gt), &attack_cfg).map_err(wrap)?;
    let row = MetricsRow::compute(a, u_gt, f, &clean, &adv.f_adv, &adv.reconstruction_adv, label, Some(inst.index))?;
    let record = AttackRecord {
        solver: label.clone(),
        instance: inst.index,
        method: adv.method.to_string(),
        backend: adv.backend_used,
        objective_value: adv.objective_value,
        delta_linf: adv.delta.amax(),
        input_gap: adv.delta.norm_squared(),
        zero_gradient_coordinates: adv.delta.iter().filter(|&&d| d == 0.0).count(),
        hit_nondifferentiable_point: adv.hit_nondifferentiable_point,
        grad_check: adv.grad_check.clone(),
    };

    let mut pairs: Vec<(Perturbation, DVector<f64>, Reconstruction)> =
        vec![(Perturbation::Adversarial, adv.f_adv.clone(), adv.reconstruction_adv.clone())];
    if config.stability.gaussian {
        let seed = derive_seed(config.seeds.perturbation(), solver_index as u64, inst.index as u64);
        let f_g = f + gaussian_with_norm(f.len(), adv.delta.norm(), seed);
        let rec_g = s.reconstruct(&f_g).map_err(wrap)?;
        pairs.push((Perturbation::Gaussian, f_g, rec_g));
    }

    let mut stability = Vec::new();
    for (kind, f2, r2) in &pairs {
        if solver.record.id.is_variational() {
            stability.push(pair_record(a, label, inst.index, *kind, (f, &clean), (f2, r2), SubgradientSource::Stored, config)?);
        }
        if solver.record.id != SolverId::Tikhonov {
            let source = SubgradientSource::Tikhonov { alpha: config.stability.cross_alpha };
            stability.push(pair_record(a, label, inst.index, *kind, (f, &clean), (f2, r2), source, config)?);
        }
    }
    Ok((row, stability, record))
}

/// Every solver on every test instance; outputs are ordered by solver, then
/// instance, whatever the scheduling.
pub fn evaluate(
    config: &BenchConfig,
    dataset: &Dataset,
    solvers: &[BenchSolver],
) -> Result<(Vec<MetricsRow>, Vec<StabilityRecord>, Vec<AttackRecord>)> {
    let a = dataset.operator.as_ref();
    let mut rows = Vec::new();
    let mut stability = Vec::new();
    let mut attacks = Vec::new();
    for (k, solver) in solvers.iter().enumerate() {
        let outputs: Result<Vec<InstanceOutput>> = dataset
            .test
            .par_iter()
            .map(|inst| evaluate_instance(config, a, solver, k, inst))
            .collect();
        for (row, st, atk) in outputs? {
            rows.push(row);
            stability.extend(st);
            attacks.push(atk);
        }
    }
    Ok((rows, stability, attacks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::BenchConfig;

    pub(crate) fn tiny_config(dir: &Path) -> BenchConfig {
        let mut c = BenchConfig { n: 24, m: 16, ..BenchConfig::default() };
        c.signals.jump_count = (1, 3);
        c.dataset.train = 40;
        c.dataset.validation = 2;
        c.dataset.test = 3;
        c.grid.points = 3;
        c.grid.min = 1e-2;
        c.grid.max = 1.0;
        c.workers = 1;
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn tiny_run_writes_complete_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny_config(dir.path());
        let out = run_benchmark(&c).unwrap();
        assert_eq!(out.manifest.status, "complete");
        assert_eq!(out.results.rows.len(), 5 * 3);
        assert!(out.manifest.tuned_alpha.is_some());
        assert!(out.manifest.config.seeds.is_populated());
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("metrics.csv").exists());
        // tv, pnp and learned-linear get cross records; the variational ones own records
        let own = out.results.stability.iter().filter(|r| !r.cross).count();
        assert_eq!(own, 3 * 3 * 2);
    }

    #[test]
    fn zero_test_instances_fail_in_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny_config(dir.path());
        c.dataset.test = 0;
        let err = run_benchmark(&c).err().unwrap();
        assert_eq!(err.exit_code(), 1);
        let manifest: RunManifest = crate::io::read_json(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(manifest.status, "incomplete");
        assert_eq!(manifest.failed_stage.as_deref(), Some("validate"));
        assert_eq!(manifest.stages.len(), 1);
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny_config(dir.path());
        c.dataset.path = Some(dir.path().join("missing"));
        c.dataset.save = false;
        // a missing dataset directory just means "generate"
        assert!(run_benchmark(&c).is_ok());
        c.solvers[0].alpha = Some(-1.0);
        let err = run_benchmark(&c).err().unwrap();
        assert!(err.to_string().starts_with("stage `build-solvers` failed"), "{err}");
    }
}
