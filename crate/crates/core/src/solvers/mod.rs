//! Reconstruction operators `G(f)`.
//!
//! Variational solvers attach a subgradient certificate `p ∈ ∂R(û)` to every
//! reconstruction so that stability quantities can be evaluated later without
//! touching the (set-valued) subdifferential. All solvers minimize with the
//! data term `½‖Au − f‖²`; Tikhonov uses `R(u) = (α/2)‖Du‖²` and TV uses
//! `R(u) = α‖Du‖₁`.

mod denoise;
mod learned;
mod pnp;
mod spectral;
mod tikhonov;
mod tv_admm;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{LinearOperator, SpectralFilter};

pub use denoise::{tv_prox, Denoiser, DenoiserKind, IdentityDenoiser, MovingAverage, TvProx};
pub use learned::{learned_linear_fit, LearnedLinear};
pub use pnp::{pnp_pgd, power_iteration_sigma_max, PnpInit, PnpPgd};
pub use spectral::SpectralSolver;
pub use tikhonov::{tikhonov, Tikhonov};
pub use tv_admm::{polish, tv_admm, tv_objective, ActiveSet, PenaltyCache, Schedule, TvAdmm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverId {
    Tikhonov,
    TvAdmm,
    PnpPgd,
    LearnedLinear,
    Spectral,
}

impl SolverId {
    pub const ALL: [SolverId; 5] = [
        SolverId::Tikhonov,
        SolverId::TvAdmm,
        SolverId::PnpPgd,
        SolverId::LearnedLinear,
        SolverId::Spectral,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverId::Tikhonov => "tikhonov",
            SolverId::TvAdmm => "tv-admm",
            SolverId::PnpPgd => "pnp-pgd",
            SolverId::LearnedLinear => "learned-linear",
            SolverId::Spectral => "spectral",
        }
    }

    /// Whether reconstructions minimize a data term plus a convex regularizer.
    pub fn is_variational(&self) -> bool {
        matches!(self, SolverId::Tikhonov | SolverId::TvAdmm)
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown solver id `{s}`")))
    }
}

/// Outcome of the TV subgradient membership test
/// `min_s ‖q − αDᵀs‖ ≤ tolerance` over `|s_i| ≤ 1`, `s_i = sign((Du)_i)` on jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub residual: f64,
    pub tolerance: f64,
    pub valid: bool,
    pub jump_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Solver-specific: normal-equation residual (Tikhonov), certificate
    /// membership residual (TV), fixed-point residual (PnP), zero for direct maps.
    pub optimality_residual: f64,
    /// `‖Aᵀ(Aû − f) + p‖` when a subgradient is attached.
    pub stationarity_residual: Option<f64>,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    pub objective_history: Vec<f64>,
    /// ADMM merit `ρ‖Δz‖² + ρ‖Δw‖²`, non-increasing while ρ is held fixed.
    pub merit_history: Vec<f64>,
    pub penalty_history: Vec<f64>,
    pub certificate: Option<CertificateCheck>,
    pub fixed_point_residual: Option<f64>,
    /// TV only: the returned point came from the active-set polish.
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub values: DVector<f64>,
    pub solver_id: SolverId,
    pub regularization_strength: f64,
    pub subgradient: Option<DVector<f64>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub alpha: f64,
    /// ADMM penalty ρ (initial value when adaptive).
    pub admm_penalty: f64,
    pub adaptive_penalty: bool,
    pub max_iterations: usize,
    /// Absolute part of the ADMM stopping rule, per √dimension.
    pub absolute_tolerance: f64,
    /// Relative part of the ADMM stopping rule.
    pub relative_tolerance: f64,
    /// ADMM over-relaxation γ in (0, 2); 1 is plain ADMM.
    pub relaxation: f64,
    /// TV: try exact active-set polishing every few iterations.
    pub polish: bool,
    /// PnP gradient step τ.
    pub step_size: f64,
    /// PnP iteration count I.
    pub pnp_iterations: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            admm_penalty: 1.0,
            adaptive_penalty: true,
            max_iterations: 5000,
            absolute_tolerance: 1e-9,
            relative_tolerance: 1e-6,
            relaxation: 1.0,
            polish: true,
            step_size: 5e-3,
            pnp_iterations: 200,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("admm_penalty", self.admm_penalty),
            ("absolute_tolerance", self.absolute_tolerance),
            ("relative_tolerance", self.relative_tolerance),
            ("step_size", self.step_size),
        ];
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::Parameter(format!("relaxation must lie in (0, 2), got {}", self.relaxation)));
        }
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.absolute_tolerance >= 1.0 || self.relative_tolerance >= 1.0 {
            return Err(Error::Parameter("tolerances must be < 1".into()));
        }
        if self.max_iterations == 0 || self.pnp_iterations == 0 {
            return Err(Error::Parameter("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

/// A reconstruction map bound to a forward operator.
pub trait Reconstructor: Send + Sync {
    fn solver_id(&self) -> SolverId;

    fn regularization_strength(&self) -> f64;

    fn operator(&self) -> &LinearOperator;

    fn reconstruct(&self, f: &DVector<f64>) -> Result<Reconstruction>;

    /// Differentiable view of the map around `f`. Iterative solvers freeze
    /// their iteration schedule at the solve of `f`.
    fn differentiable_at(&self, f: &DVector<f64>) -> Result<Box<dyn DifferentiableMap + '_>>;

    /// Human-readable label, e.g. `tikhonov(alpha=100)`.
    fn label(&self) -> String {
        format!("{}(alpha={})", self.solver_id(), self.regularization_strength())
    }
}

/// A map `f ↦ G(f)` with the derivative information the attack engine needs.
pub trait DifferentiableMap: Send + Sync {
    fn eval(&self, f: &DVector<f64>) -> Result<DVector<f64>>;

    /// `Mᵀ r` when the map is linear, `G(f) = M f`.
    fn transpose_apply(&self, _r: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        None
    }

    /// Reverse-mode product `J(f)ᵀ r` through a fixed iteration schedule.
    fn unrolled_vjp(&self, _f: &DVector<f64>, _r: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        None
    }
}

/// Borrowing adapter for maps that are their own differentiable view.
pub(crate) struct SelfMap<'a, T: ?Sized>(pub &'a T);

/// Solver choice plus whatever data the solver needs beyond [`SolverParams`].
#[derive(Clone)]
pub enum SolverSpec {
    Tikhonov,
    TvAdmm,
    PnpPgd { denoiser: Arc<dyn Denoiser>, init_alpha: f64 },
    LearnedLinear { map: Arc<nalgebra::DMatrix<f64>> },
    Spectral { filter: SpectralFilter },
}

impl SolverSpec {
    pub fn solver_id(&self) -> SolverId {
        match self {
            SolverSpec::Tikhonov => SolverId::Tikhonov,
            SolverSpec::TvAdmm => SolverId::TvAdmm,
            SolverSpec::PnpPgd { .. } => SolverId::PnpPgd,
            SolverSpec::LearnedLinear { .. } => SolverId::LearnedLinear,
            SolverSpec::Spectral { .. } => SolverId::Spectral,
        }
    }
}

/// Prepares a reusable reconstructor (factorizations are computed here).
pub fn build(spec: &SolverSpec, a: Arc<LinearOperator>, params: &SolverParams) -> Result<Box<dyn Reconstructor>> {
    Ok(match spec {
        SolverSpec::Tikhonov => Box::new(Tikhonov::with_finite_differences(a, params.alpha)?),
        SolverSpec::TvAdmm => {
            let cache = Arc::new(PenaltyCache::new(a));
            Box::new(TvAdmm::new(cache, params.alpha, params.clone())?)
        }
        SolverSpec::PnpPgd { denoiser, init_alpha } => {
            let init = PnpInit::Tikhonov(Arc::new(Tikhonov::with_finite_differences(a.clone(), *init_alpha)?));
            Box::new(PnpPgd::new(a, denoiser.clone(), params.step_size, params.pnp_iterations, init)?)
        }
        SolverSpec::LearnedLinear { map } => Box::new(LearnedLinear::new(a, map.clone())?),
        SolverSpec::Spectral { filter } => Box::new(SpectralSolver::new(a, filter.clone())?),
    })
}

/// One-shot dispatch: `build` followed by `reconstruct`.
pub fn reconstruct(
    spec: &SolverSpec,
    a: Arc<LinearOperator>,
    f: &DVector<f64>,
    params: &SolverParams,
) -> Result<Reconstruction> {
    let solver = build(spec, a, params)?;
    let rec = solver.reconstruct(f)?;
    if rec.solver_id.is_variational() && rec.subgradient.is_none() {
        return Err(Error::Contract(format!(
            "variational solver {} returned no subgradient",
            rec.solver_id
        )));
    }
    Ok(rec)
}

/// `‖Aᵀ(Aû − f) + p‖`.
pub(crate) fn stationarity(a: &LinearOperator, f: &DVector<f64>, u: &DVector<f64>, p: &DVector<f64>) -> f64 {
    let r = a.entries() * u - f;
    (a.entries().tr_mul(&r) + p).norm()
}

pub(crate) fn check_finite(what: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} contains non-finite values")))
    }
}
