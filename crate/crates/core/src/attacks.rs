//! ℓ∞-bounded adversarial perturbations of the measurement: FGSM and PGD.
//!
//! Both maximize `J(δ) = ‖G(f + δ) − target‖₂` over `‖δ‖∞ ≤ ε`, where the
//! target is either the clean reconstruction `G(f)` or the ground truth.
//! Gradients come from one of three backends: the transpose of a linear
//! reconstruction map, reverse accumulation through a frozen iteration
//! schedule, or central finite differences.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::solvers::{DifferentiableMap, Reconstruction, Reconstructor};

/// Probe magnitude, relative to ε, used to leave the nondifferentiable origin
/// of the deviation-from-clean objective.
pub const PROBE_SCALE: f64 = 1e-6;
/// Finite-difference step `h = FD_STEP · (1 + ‖f‖∞)`.
pub const FD_STEP: f64 = 1e-5;

const STREAM_PROBE: u64 = 1;
const STREAM_RESTART: u64 = 2;
const STREAM_GRADCHECK: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackObjective {
    DeviationFromClean,
    DeviationFromGroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientBackend {
    ClosedForm,
    UnrolledAdjoint,
    FiniteDifference,
}

macro_rules! kebab_enum {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::Parameter(format!("unknown {} `{other}`", stringify!($ty)))),
                }
            }
        }
    };
}

kebab_enum!(AttackObjective {
    DeviationFromClean => "deviation-from-clean",
    DeviationFromGroundTruth => "deviation-from-ground-truth",
});

kebab_enum!(GradientBackend {
    ClosedForm => "closed-form",
    UnrolledAdjoint => "unrolled-adjoint",
    FiniteDifference => "finite-difference",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMethod {
    Fgsm,
    Pgd,
}

kebab_enum!(AttackMethod {
    Fgsm => "fgsm",
    Pgd => "pgd",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub method: AttackMethod,
    pub epsilon: f64,
    pub step_size: f64,
    pub steps: usize,
    pub restarts: usize,
    pub objective: AttackObjective,
    pub gradient_backend: GradientBackend,
    pub seed: u64,
    /// PGD rejects steps that lower the objective and halves its step instead.
    pub monotone: bool,
    /// Coordinates compared against finite differences after the attack (0 = off).
    pub grad_check_probes: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            method: AttackMethod::Fgsm,
            epsilon: 0.2,
            step_size: 0.05,
            steps: 40,
            restarts: 4,
            objective: AttackObjective::DeviationFromGroundTruth,
            gradient_backend: GradientBackend::ClosedForm,
            seed: 0,
            monotone: false,
            grad_check_probes: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.step_size < 0.0 || self.step_size > 2.0 * self.epsilon {
            return Err(Error::Parameter(format!(
                "step size {} must lie in [0, 2·epsilon = {}]",
                self.step_size,
                2.0 * self.epsilon
            )));
        }
        if self.epsilon > 0.0 && self.step_size == 0.0 {
            return Err(Error::Parameter("step size must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Parameter("pgd needs at least one step".into()));
        }
        Ok(())
    }
}

/// Finite-difference comparison of the backend gradient on sampled coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub coordinates: Vec<usize>,
    /// Per probe `|g − g_fd| / max(|g|, |g_fd|, 1e-3·‖g_fd‖∞)`.
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
}

impl GradCheck {
    pub fn failures(&self, tolerance: f64) -> usize {
        self.relative_errors.iter().filter(|&&e| e > tolerance).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub method: &'static str,
    pub delta: DVector<f64>,
    pub f_adv: DVector<f64>,
    pub reconstruction_adv: Reconstruction,
    pub objective_value: f64,
    pub objective_trace: Vec<f64>,
    pub backend_used: GradientBackend,
    pub grad_check: Option<GradCheck>,
    /// `‖A û_adv − f_adv‖²`.
    pub adv_consistency: f64,
    /// Set when the gradient was requested at a point with `G(f+δ) = target`.
    pub hit_nondifferentiable_point: bool,
    pub config: AttackConfig,
}

/// JSON view of an [`AttackResult`]; arrays are written separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub method: String,
    pub solver: String,
    pub objective_value: f64,
    pub objective_trace: Vec<f64>,
    pub backend_used: GradientBackend,
    pub grad_check: Option<GradCheck>,
    pub adv_consistency: f64,
    pub delta_linf: f64,
    pub delta_l2_squared: f64,
    pub hit_nondifferentiable_point: bool,
    pub config: AttackConfig,
}

impl AttackResult {
    pub fn summary(&self) -> AttackSummary {
        AttackSummary {
            method: self.method.to_string(),
            solver: self.reconstruction_adv.solver_id.to_string(),
            objective_value: self.objective_value,
            objective_trace: self.objective_trace.clone(),
            backend_used: self.backend_used,
            grad_check: self.grad_check.clone(),
            adv_consistency: self.adv_consistency,
            delta_linf: self.delta.amax(),
            delta_l2_squared: self.delta.norm_squared(),
            hit_nondifferentiable_point: self.hit_nondifferentiable_point,
            config: self.config.clone(),
        }
    }

    /// Writes `attack.json`, `delta.bin`, `f_adv.bin` and `u_adv.bin` into `dir`.
    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        crate::io::write_json(&dir.join("attack.json"), &self.summary())?;
        crate::io::write_vector(&dir.join("delta.bin"), &self.delta)?;
        crate::io::write_vector(&dir.join("f_adv.bin"), &self.f_adv)?;
        crate::io::write_vector(&dir.join("u_adv.bin"), &self.reconstruction_adv.values)
    }
}

/// Gradient of `‖G(f+δ) − target‖` together with a flag for the `r = 0` case.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackGradient {
    pub gradient: DVector<f64>,
    pub nondifferentiable: bool,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn objective_of(map: &dyn DifferentiableMap, x: &DVector<f64>, target: &DVector<f64>) -> Result<f64> {
    Ok((map.eval(x)? - target).norm())
}

/// Central difference of the attack objective along coordinate `j` at `x`.
pub fn finite_difference_partial(
    map: &dyn DifferentiableMap,
    x: &DVector<f64>,
    target: &DVector<f64>,
    j: usize,
    h: f64,
) -> Result<f64> {
    let mut xp = x.clone();
    xp[j] += h;
    let mut xm = x.clone();
    xm[j] -= h;
    Ok((objective_of(map, &xp, target)? - objective_of(map, &xm, target)?) / (2.0 * h))
}

pub fn fd_step(f: &DVector<f64>) -> f64 {
    FD_STEP * (1.0 + f.amax())
}

/// `∇_δ ‖G(f+δ) − target‖₂` at `delta` through the requested backend.
pub fn attack_gradient(
    map: &dyn DifferentiableMap,
    solver_label: &str,
    f: &DVector<f64>,
    delta: &DVector<f64>,
    target: &DVector<f64>,
    backend: GradientBackend,
) -> Result<AttackGradient> {
    check_len("perturbation", f.len(), delta.len())?;
    let x = f + delta;
    let out = map.eval(&x)?;
    check_len("attack target", out.len(), target.len())?;
    let r = out - target;
    let norm = r.norm();
    if norm == 0.0 {
        return Ok(AttackGradient {
            gradient: DVector::zeros(f.len()),
            nondifferentiable: true,
        });
    }
    let unit = r / norm;
    let unavailable = || Error::Backend {
        backend: backend.to_string(),
        solver: solver_label.to_string(),
    };
    let gradient = match backend {
        GradientBackend::ClosedForm => map.transpose_apply(&unit).ok_or_else(unavailable)??,
        GradientBackend::UnrolledAdjoint => map.unrolled_vjp(&x, &unit).ok_or_else(unavailable)??,
        GradientBackend::FiniteDifference => {
            let h = fd_step(f);
            let partials: Result<Vec<f64>> = (0..x.len())
                .into_par_iter()
                .map(|j| finite_difference_partial(map, &x, target, j, h))
                .collect();
            DVector::from_vec(partials?)
        }
    };
    Ok(AttackGradient {
        gradient,
        nondifferentiable: false,
    })
}

struct Context<'a> {
    solver: &'a dyn Reconstructor,
    map: Box<dyn DifferentiableMap + 'a>,
    f: &'a DVector<f64>,
    target: DVector<f64>,
    config: &'a AttackConfig,
}

impl<'a> Context<'a> {
    fn new(solver: &'a dyn Reconstructor, f: &'a DVector<f64>, u_gt: Option<&DVector<f64>>, config: &'a AttackConfig) -> Result<Self> {
        config.validate()?;
        check_len("measurement", solver.operator().rows(), f.len())?;
        let target = match config.objective {
            AttackObjective::DeviationFromGroundTruth => {
                let u = u_gt.ok_or_else(|| {
                    Error::Parameter("deviation-from-ground-truth needs the ground truth".into())
                })?;
                check_len("ground truth", solver.operator().cols(), u.len())?;
                u.clone()
            }
            AttackObjective::DeviationFromClean => solver.reconstruct(f)?.values,
        };
        let map = solver.differentiable_at(f)?;
        Ok(Self { solver, map, f, target, config })
    }

    fn gradient(&self, delta: &DVector<f64>) -> Result<AttackGradient> {
        let reference = SolverEval(self.solver);
        let map: &dyn DifferentiableMap = match self.config.gradient_backend {
            GradientBackend::FiniteDifference => &reference,
            _ => self.map.as_ref(),
        };
        attack_gradient(
            map,
            &self.solver.label(),
            self.f,
            delta,
            &self.target,
            self.config.gradient_backend,
        )
    }

    /// Gradient at `delta`, stepping off the origin of the deviation-from-clean
    /// objective by a tiny seeded probe.
    fn gradient_with_probe(&self, delta: &DVector<f64>, probe_index: u64) -> Result<(AttackGradient, DVector<f64>)> {
        let at_origin = self.config.objective == AttackObjective::DeviationFromClean && delta.iter().all(|&d| d == 0.0);
        let point = if at_origin {
            let mut rng = rng_from_seed(derive_seed(self.config.seed, STREAM_PROBE, probe_index));
            let scale = PROBE_SCALE * self.config.epsilon;
            delta + DVector::from_fn(delta.len(), |_, _| scale * rng.random_range(-1.0..=1.0))
        } else {
            delta.clone()
        };
        Ok((self.gradient(&point)?, point))
    }

    fn map_objective(&self, delta: &DVector<f64>) -> Result<f64> {
        objective_of(self.map.as_ref(), &(self.f + delta), &self.target)
    }

    fn clip(&self, delta: DVector<f64>) -> DVector<f64> {
        let eps = self.config.epsilon;
        delta.map(|d| d.clamp(-eps, eps))
    }

    fn fgsm_delta(&self) -> Result<(DVector<f64>, DVector<f64>, bool)> {
        let zero = DVector::zeros(self.f.len());
        let (grad, point) = self.gradient_with_probe(&zero, 0)?;
        let eps = self.config.epsilon;
        let delta = grad.gradient.map(|g| eps * sign(g));
        Ok((delta, point, grad.nondifferentiable))
    }

    fn grad_check(&self, point: &DVector<f64>) -> Result<Option<GradCheck>> {
        let probes = self.config.grad_check_probes;
        if probes == 0 {
            return Ok(None);
        }
        let m = self.f.len();
        let mut rng = rng_from_seed(derive_seed(self.config.seed, STREAM_GRADCHECK, 0));
        let coordinates: Vec<usize> = rand::seq::index::sample(&mut rng, m, probes.min(m)).into_vec();
        Ok(Some(gradient_check(
            self.map.as_ref(),
            &SolverEval(self.solver),
            &self.solver.label(),
            self.f,
            point,
            &self.target,
            self.config.gradient_backend,
            &coordinates,
        )?))
    }

    fn finish(
        &self,
        method: &'static str,
        delta: DVector<f64>,
        trace: Vec<f64>,
        grad_check: Option<GradCheck>,
        nondifferentiable: bool,
    ) -> Result<AttackResult> {
        let f_adv = self.f + &delta;
        let rec = self.solver.reconstruct(&f_adv)?;
        let objective_value = (&rec.values - &self.target).norm();
        let a = self.solver.operator();
        let adv_consistency = (a.entries() * &rec.values - &f_adv).norm_squared();
        let mut objective_trace = trace;
        if objective_trace.is_empty() {
            objective_trace.push(objective_value);
        }
        Ok(AttackResult {
            method,
            delta,
            f_adv,
            reconstruction_adv: rec,
            objective_value,
            objective_trace,
            backend_used: self.config.gradient_backend,
            grad_check,
            adv_consistency,
            hit_nondifferentiable_point: nondifferentiable,
            config: self.config.clone(),
        })
    }
}

/// The solver itself as a map, without derivative information. Finite
/// differences through it check a frozen surrogate against the real solver.
pub struct SolverEval<'a>(pub &'a dyn Reconstructor);

impl DifferentiableMap for SolverEval<'_> {
    fn eval(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.0.reconstruct(f)?.values)
    }
}

/// Compares the backend gradient of `map` with central differences of
/// `reference` on `coordinates`.
pub fn gradient_check(
    map: &dyn DifferentiableMap,
    reference: &dyn DifferentiableMap,
    solver_label: &str,
    f: &DVector<f64>,
    delta: &DVector<f64>,
    target: &DVector<f64>,
    backend: GradientBackend,
    coordinates: &[usize],
) -> Result<GradCheck> {
    let g = attack_gradient(map, solver_label, f, delta, target, backend)?.gradient;
    let x = f + delta;
    let h = fd_step(f);
    let fd: Result<Vec<f64>> = coordinates
        .par_iter()
        .map(|&j| finite_difference_partial(reference, &x, target, j, h))
        .collect();
    let fd = fd?;
    let fd_scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let relative_errors: Vec<f64> = coordinates
        .iter()
        .zip(&fd)
        .map(|(&j, &d)| {
            let denom = g[j].abs().max(d.abs()).max(1e-3 * fd_scale);
            if denom == 0.0 {
                0.0
            } else {
                (g[j] - d).abs() / denom
            }
        })
        .collect();
    let max_relative_error = relative_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradCheck {
        coordinates: coordinates.to_vec(),
        relative_errors,
        max_relative_error,
    })
}

/// Single sign step `δ = ε·sign(∇J)` at the origin (or at a tiny probe for the
/// deviation-from-clean objective).
pub fn fgsm(
    solver: &dyn Reconstructor,
    f: &DVector<f64>,
    u_gt: Option<&DVector<f64>>,
    config: &AttackConfig,
) -> Result<AttackResult> {
    let ctx = Context::new(solver, f, u_gt, config)?;
    if config.epsilon == 0.0 {
        return ctx.finish("fgsm", DVector::zeros(f.len()), Vec::new(), None, false);
    }
    let (delta, point, nondiff) = ctx.fgsm_delta()?;
    let check = ctx.grad_check(&point)?;
    ctx.finish("fgsm", delta, Vec::new(), check, nondiff)
}

struct Trajectory {
    start: DVector<f64>,
    best: DVector<f64>,
    trace: Vec<f64>,
    nondifferentiable: bool,
}

fn run_trajectory(ctx: &Context<'_>, start: DVector<f64>, index: u64) -> Result<Trajectory> {
    let config = ctx.config;
    let mut delta = start.clone();
    let mut value = ctx.map_objective(&delta)?;
    let mut best = (value, delta.clone());
    let mut trace = vec![value];
    let mut step = config.step_size;
    let mut nondiff = false;
    for t in 0..config.steps {
        let (grad, _) = ctx.gradient_with_probe(&delta, (index << 32) | t as u64 + 1)?;
        nondiff |= grad.nondifferentiable;
        let candidate = ctx.clip(&delta + grad.gradient.map(|g| step * sign(g)));
        let cand_value = ctx.map_objective(&candidate)?;
        if config.monotone && cand_value < value {
            step *= 0.5;
        } else {
            delta = candidate;
            value = cand_value;
        }
        trace.push(value);
        if value > best.0 {
            best = (value, delta.clone());
        }
    }
    Ok(Trajectory {
        start,
        best: best.1,
        trace,
        nondifferentiable: nondiff,
    })
}

/// Projected sign-gradient ascent from the origin, the FGSM point and
/// `restarts` uniform points in the ε-ball; returns the strongest candidate.
pub fn pgd(
    solver: &dyn Reconstructor,
    f: &DVector<f64>,
    u_gt: Option<&DVector<f64>>,
    config: &AttackConfig,
) -> Result<AttackResult> {
    let ctx = Context::new(solver, f, u_gt, config)?;
    let m = f.len();
    if config.epsilon == 0.0 {
        return ctx.finish("pgd", DVector::zeros(m), Vec::new(), None, false);
    }
    let (fgsm_delta, _, _) = ctx.fgsm_delta()?;
    let mut starts = vec![DVector::zeros(m), fgsm_delta];
    for r in 0..config.restarts {
        let mut rng = rng_from_seed(derive_seed(config.seed, STREAM_RESTART, r as u64));
        let eps = config.epsilon;
        starts.push(DVector::from_fn(m, |_, _| rng.random_range(-eps..=eps)));
    }
    let trajectories: Result<Vec<Trajectory>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| run_trajectory(&ctx, s, i as u64))
        .collect();
    let trajectories = trajectories?;

    // Candidates are scored with the actual solver, not the frozen surrogate.
    let mut candidates: Vec<(usize, &DVector<f64>)> = Vec::new();
    for (i, t) in trajectories.iter().enumerate() {
        candidates.push((i, &t.start));
        if t.best != t.start {
            candidates.push((i, &t.best));
        }
    }
    let scores: Result<Vec<f64>> = candidates
        .par_iter()
        .map(|(_, d)| Ok((solver.reconstruct(&(f + *d))?.values - &ctx.target).norm()))
        .collect();
    let scores = scores?;
    let mut winner = 0;
    for (k, s) in scores.iter().enumerate() {
        if *s > scores[winner] {
            winner = k;
        }
    }
    let (traj_index, delta) = candidates[winner];
    let traj = &trajectories[traj_index];
    let nondiff = trajectories.iter().any(|t| t.nondifferentiable);
    let check = ctx.grad_check(delta)?;
    ctx.finish("pgd", delta.clone(), traj.trace.clone(), check, nondiff)
}

/// Runs the method selected in `config`.
pub fn attack(
    solver: &dyn Reconstructor,
    f: &DVector<f64>,
    u_gt: Option<&DVector<f64>>,
    config: &AttackConfig,
) -> Result<AttackResult> {
    match config.method {
        AttackMethod::Fgsm => fgsm(solver, f, u_gt, config),
        AttackMethod::Pgd => pgd(solver, f, u_gt, config),
    }
}

/// Applies a fixed perturbation to another solver; no state is carried over.
pub fn replay_delta(
    solver: &dyn Reconstructor,
    f: &DVector<f64>,
    delta: &DVector<f64>,
    target: &DVector<f64>,
) -> Result<(Reconstruction, f64)> {
    check_len("perturbation", f.len(), delta.len())?;
    let rec = solver.reconstruct(&(f + delta))?;
    let value = (&rec.values - target).norm();
    Ok((rec, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::LinearOperator;
    use crate::signals::generate_operator;
    use crate::solvers::{LearnedLinear, Tikhonov, TvAdmm, PenaltyCache, SolverParams};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn identity_solver(n: usize) -> LearnedLinear {
        LearnedLinear::new(Arc::new(LinearOperator::identity(n)), Arc::new(DMatrix::identity(n, n))).unwrap()
    }

    #[test]
    fn identity_gradient_is_normalized_delta() {
        let solver = identity_solver(3);
        let map = solver.differentiable_at(&DVector::zeros(3)).unwrap();
        let f = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let delta = DVector::from_vec(vec![0.03, -0.04, 0.0]);
        let g = attack_gradient(map.as_ref(), "id", &f, &delta, &f, GradientBackend::ClosedForm).unwrap();
        assert_relative_eq!(g.gradient, &delta / delta.norm(), epsilon = 1e-12);
        let zero = attack_gradient(map.as_ref(), "id", &f, &DVector::zeros(3), &f, GradientBackend::ClosedForm).unwrap();
        assert!(zero.nondifferentiable);
        assert!(zero.gradient.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_budget_is_a_no_op() {
        let solver = identity_solver(4);
        let f = DVector::from_vec(vec![1.0, -1.0, 2.0, 0.5]);
        let cfg = AttackConfig {
            epsilon: 0.0,
            step_size: 0.0,
            objective: AttackObjective::DeviationFromClean,
            ..AttackConfig::default()
        };
        let res = fgsm(&solver, &f, None, &cfg).unwrap();
        assert!(res.delta.iter().all(|&d| d == 0.0));
        assert_eq!(res.objective_value, 0.0);
    }

    #[test]
    fn fgsm_saturates_budget_for_linear_map() {
        let solver = identity_solver(5);
        let f = DVector::from_vec(vec![1.0, -1.0, 2.0, 0.5, 0.0]);
        let cfg = AttackConfig {
            objective: AttackObjective::DeviationFromClean,
            ..AttackConfig::default()
        };
        let res = fgsm(&solver, &f, None, &cfg).unwrap();
        for d in res.delta.iter() {
            assert_eq!(d.abs(), 0.2);
        }
        assert_eq!(res.f_adv, &f + &res.delta);
    }

    #[test]
    fn ground_truth_objective_needs_ground_truth() {
        let solver = identity_solver(2);
        let err = fgsm(&solver, &DVector::zeros(2), None, &AttackConfig::default());
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn closed_form_unavailable_for_tv() {
        let a = Arc::new(generate_operator(6, 12, 0.0, 0.05, 2).unwrap());
        let tv = TvAdmm::new(Arc::new(PenaltyCache::new(a)), 0.05, SolverParams::default()).unwrap();
        let f = DVector::from_fn(6, |i, _| i as f64 * 0.1);
        let cfg = AttackConfig { objective: AttackObjective::DeviationFromClean, ..AttackConfig::default() };
        assert!(matches!(fgsm(&tv, &f, None, &cfg), Err(Error::Backend { .. })));
    }

    #[test]
    fn pgd_single_full_step_equals_fgsm() {
        let a = Arc::new(generate_operator(8, 16, 0.0, 0.05, 5).unwrap());
        let tik = Tikhonov::with_finite_differences(a, 0.5).unwrap();
        let f = DVector::from_fn(8, |i, _| (i as f64).cos());
        let u_gt = DVector::from_element(16, 0.3);
        let cfg = AttackConfig { step_size: 0.2, steps: 1, restarts: 0, ..AttackConfig::default() };
        let a1 = fgsm(&tik, &f, Some(&u_gt), &cfg).unwrap();
        // From the origin one full-budget sign step lands on the FGSM point.
        let ctx = Context::new(&tik, &f, Some(&u_gt), &cfg).unwrap();
        let traj = run_trajectory(&ctx, DVector::zeros(8), 0).unwrap();
        assert_eq!(traj.best, a1.delta);
        let p = pgd(&tik, &f, Some(&u_gt), &cfg).unwrap();
        assert!(p.objective_value >= a1.objective_value);
    }

    #[test]
    fn monotone_trace_never_decreases() {
        let a = Arc::new(generate_operator(8, 16, 0.0, 0.05, 6).unwrap());
        let tik = Tikhonov::with_finite_differences(a, 0.01).unwrap();
        let f = DVector::from_fn(8, |i, _| (i as f64 * 0.3).sin());
        let u_gt = DVector::from_element(16, -0.2);
        let cfg = AttackConfig { restarts: 0, monotone: true, steps: 25, ..AttackConfig::default() };
        let res = pgd(&tik, &f, Some(&u_gt), &cfg).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(res.delta.amax() <= 0.2 + 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = AttackConfig { step_size: 0.5, ..AttackConfig::default() };
        assert!(bad.validate().is_err());
        let bad = AttackConfig { steps: 0, ..AttackConfig::default() };
        assert!(bad.validate().is_err());
        assert_eq!("finite-difference".parse::<GradientBackend>().unwrap(), GradientBackend::FiniteDifference);
        assert!("adjoint".parse::<GradientBackend>().is_err());
    }
}
