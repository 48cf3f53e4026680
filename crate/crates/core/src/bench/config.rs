use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, GradientBackend};
use crate::error::{Error, Result};
use crate::linops::FilterRecord;
use crate::rng::derive_seed;
use crate::signals::SignalSpec;
use crate::solvers::{DenoiserKind, SolverId, SolverParams};
use crate::stability::TolerancePolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub mean: f64,
    pub variance: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { mean: 0.0, variance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalsConfig {
    pub jump_count: (usize, usize),
    pub height_range: (f64, f64),
    pub base_level: f64,
}

impl Default for SignalsConfig {
    fn default() -> Self {
        let s = SignalSpec::default();
        Self { jump_count: s.jump_count, height_range: s.height_range, base_level: s.base_level }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Training pairs; only generated when a learned solver needs them.
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Load from (or, with `save`, write to) this directory.
    pub path: Option<PathBuf>,
    pub save: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { train: 8192, validation: 10, test: 100, path: None, save: false }
    }
}

/// Seeds of every random stream. Unset entries are derived from `master`
/// by [`SeedRecord::populate`] before anything runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedRecord {
    pub master: u64,
    pub operator: Option<u64>,
    pub train: Option<u64>,
    pub validation: Option<u64>,
    pub test: Option<u64>,
    pub attack: Option<u64>,
    pub perturbation: Option<u64>,
}

const STREAM_OPERATOR: u64 = 11;
const STREAM_TRAIN: u64 = 12;
const STREAM_VALIDATION: u64 = 13;
const STREAM_TEST: u64 = 14;
const STREAM_ATTACK: u64 = 15;
const STREAM_PERTURBATION: u64 = 16;

impl SeedRecord {
    pub fn populate(&mut self) {
        let m = self.master;
        let fill = |slot: &mut Option<u64>, stream| {
            slot.get_or_insert(derive_seed(m, stream, 0));
        };
        fill(&mut self.operator, STREAM_OPERATOR);
        fill(&mut self.train, STREAM_TRAIN);
        fill(&mut self.validation, STREAM_VALIDATION);
        fill(&mut self.test, STREAM_TEST);
        fill(&mut self.attack, STREAM_ATTACK);
        fill(&mut self.perturbation, STREAM_PERTURBATION);
    }

    pub fn is_populated(&self) -> bool {
        [self.operator, self.train, self.validation, self.test, self.attack, self.perturbation]
            .iter()
            .all(Option::is_some)
    }

    fn get(slot: Option<u64>, name: &str) -> u64 {
        slot.unwrap_or_else(|| panic!("seed `{name}` read before SeedRecord::populate"))
    }

    pub fn operator(&self) -> u64 {
        Self::get(self.operator, "operator")
    }
    pub fn train(&self) -> u64 {
        Self::get(self.train, "train")
    }
    pub fn validation(&self) -> u64 {
        Self::get(self.validation, "validation")
    }
    pub fn test(&self) -> u64 {
        Self::get(self.test, "test")
    }
    pub fn attack(&self) -> u64 {
        Self::get(self.attack, "attack")
    }
    pub fn perturbation(&self) -> u64 {
        Self::get(self.perturbation, "perturbation")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub solver: SolverId,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { solver: SolverId::TvAdmm, min: 1e-4, max: 1e2, points: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub tolerance: TolerancePolicy,
    /// Tikhonov `α` whose bound is evaluated on reconstructions of other solvers.
    pub cross_alpha: f64,
    /// Also evaluate pairs with Gaussian perturbations of the adversarial norm.
    pub gaussian: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { tolerance: TolerancePolicy::default(), cross_alpha: 100.0, gaussian: true }
    }
}

/// One benchmarked solver. `alpha = None` on the grid-searched solver means
/// "use the tuned value".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    pub id: SolverId,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub params: Option<SolverParams>,
    /// PnP denoiser; defaults to a TV prox of strength `tuned α · step size`.
    #[serde(default)]
    pub denoiser: Option<DenoiserKind>,
    /// Tikhonov `α` of the PnP initializer.
    #[serde(default)]
    pub init_alpha: Option<f64>,
    /// Learned-linear ridge.
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default)]
    pub filter: Option<FilterRecord>,
    #[serde(default)]
    pub backend: Option<GradientBackend>,
}

impl SolverEntry {
    pub fn new(id: SolverId) -> Self {
        Self {
            id,
            label: None,
            alpha: None,
            params: None,
            denoiser: None,
            init_alpha: None,
            ridge: None,
            filter: None,
            backend: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn display_label(&self) -> String {
        match (&self.label, self.alpha) {
            (Some(l), _) => l.clone(),
            (None, Some(a)) => format!("{}(alpha={a:e})", self.id),
            (None, None) => self.id.to_string(),
        }
    }

    pub fn backend(&self) -> GradientBackend {
        self.backend.unwrap_or(match self.id {
            SolverId::TvAdmm | SolverId::PnpPgd => GradientBackend::UnrolledAdjoint,
            _ => GradientBackend::ClosedForm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Parameter(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n: usize,
    pub m: usize,
    pub noise_std: f64,
    pub operator: OperatorConfig,
    pub signals: SignalsConfig,
    pub dataset: DatasetConfig,
    pub seeds: SeedRecord,
    pub grid: GridConfig,
    pub attack: AttackConfig,
    pub stability: StabilityConfig,
    pub solvers: Vec<SolverEntry>,
    pub output_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    /// Worker threads; 0 means available parallelism.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut pnp = SolverEntry::new(SolverId::PnpPgd);
        pnp.init_alpha = Some(1e-7);
        let mut learned = SolverEntry::new(SolverId::LearnedLinear);
        learned.ridge = Some(1e-3);
        Self {
            n: 1024,
            m: 512,
            noise_std: 0.03,
            operator: OperatorConfig::default(),
            signals: SignalsConfig::default(),
            dataset: DatasetConfig::default(),
            seeds: SeedRecord::default(),
            grid: GridConfig::default(),
            attack: AttackConfig::default(),
            stability: StabilityConfig::default(),
            solvers: vec![
                SolverEntry::new(SolverId::Tikhonov).with_alpha(1e-7),
                SolverEntry::new(SolverId::Tikhonov).with_alpha(1e2),
                SolverEntry::new(SolverId::TvAdmm),
                pnp,
                learned,
            ],
            output_dir: PathBuf::from("bench-out"),
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
            workers: 0,
        }
    }
}

impl BenchConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn signal_spec(&self) -> SignalSpec {
        SignalSpec {
            n: self.n,
            jump_count: self.signals.jump_count,
            height_range: self.signals.height_range,
            base_level: self.signals.base_level,
        }
    }

    pub fn needs_training_set(&self) -> bool {
        self.solvers.iter().any(|s| s.id == SolverId::LearnedLinear)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m == 0 {
            return Err(Error::Config(format!("problem size {}x{} is degenerate", self.m, self.n)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(self.operator.variance > 0.0) {
            return Err(Error::Config("operator variance must be positive".into()));
        }
        self.signal_spec().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.dataset.test == 0 {
            return Err(Error::Config("dataset.test must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solvers configured".into()));
        }
        let tuned = self.solvers.iter().any(|s| s.alpha.is_none() && s.id == self.grid.solver);
        if tuned {
            if self.dataset.validation == 0 {
                return Err(Error::Config("grid search needs dataset.validation >= 1".into()));
            }
            if self.grid.points == 0 || !(self.grid.min > 0.0 && self.grid.min <= self.grid.max) {
                return Err(Error::Config("grid needs points >= 1 and 0 < min <= max".into()));
            }
        }
        if self.needs_training_set() && self.dataset.train == 0 {
            return Err(Error::Config("learned-linear needs dataset.train >= 1".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for s in &self.solvers {
            if !labels.insert(s.display_label()) {
                return Err(Error::Config(format!("duplicate solver label `{}`", s.display_label())));
            }
            match s.id {
                SolverId::Tikhonov if s.alpha.is_none() && self.grid.solver != SolverId::Tikhonov => {
                    return Err(Error::Config("tikhonov entries need alpha".into()));
                }
                SolverId::TvAdmm if s.alpha.is_none() && self.grid.solver != SolverId::TvAdmm => {
                    return Err(Error::Config("tv-admm entries need alpha".into()));
                }
                SolverId::Spectral if s.filter.is_none() => {
                    return Err(Error::Config("spectral entries need a filter".into()));
                }
                _ => {}
            }
            if let Some(p) = &s.params {
                p.validate().map_err(|e| Error::Config(format!("{}: {e}", s.display_label())))?;
            }
        }
        if !matches!(self.grid.solver, SolverId::Tikhonov | SolverId::TvAdmm) {
            return Err(Error::Config(format!("grid search supports tikhonov and tv-admm, not {}", self.grid.solver)));
        }
        self.attack.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = BenchConfig::default();
        let text = c.to_toml_string().unwrap();
        assert_eq!(BenchConfig::from_toml_str(&text).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = BenchConfig::from_toml_str("n = 64\nm = 32\n[dataset]\ntest = 5\n").unwrap();
        assert_eq!((c.n, c.m, c.dataset.test, c.dataset.validation), (64, 32, 5, 10));
        assert_eq!(c.attack.epsilon, 0.2);
    }

    #[test]
    fn zero_test_instances_is_invalid() {
        let c = BenchConfig::from_toml_str("[dataset]\ntest = 0\n").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(BenchConfig::from_toml_str("nn = 3\n").is_err());
        assert!(BenchConfig::from_toml_str("[[solvers]]\nid = \"unet\"\n").is_err());
    }

    #[test]
    fn populate_fills_every_seed_deterministically() {
        let mut s = SeedRecord { master: 7, test: Some(3), ..SeedRecord::default() };
        s.populate();
        assert!(s.is_populated());
        assert_eq!(s.test(), 3);
        let mut t = SeedRecord { master: 7, ..SeedRecord::default() };
        t.populate();
        assert_eq!(s.operator, t.operator);
        assert_ne!(t.validation, t.test);
    }
}
