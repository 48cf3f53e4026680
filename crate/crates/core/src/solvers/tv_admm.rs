//! ADMM for `min_u ½‖Au − f‖² + α‖Du‖₁` with the splitting `z = Du`.
//!
//! Scaled form with dual `w` (the unscaled multiplier is `y = ρw`):
//!
//! ```text
//! u ← (AᵀA + ρDᵀD)⁻¹ (Aᵀf + ρDᵀ(z − w))
//! z ← shrink(Du + w, α/ρ)
//! w ← w + Du − z
//! ```
//!
//! `(AᵀA + ρDᵀD)⁻¹` depends on `A` and `ρ` only, so it is cached per operator
//! in a [`PenaltyCache`] and shared across instances and `α` values.
//!
//! Every few iterations the support and signs of `z` are frozen and the
//! reduced problem over piecewise-constant signals is solved exactly
//! ([`polish`]). The polished point is accepted only when it passes the
//! subgradient certificate, in which case it is an exact minimizer.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_finite, stationarity, CertificateCheck, DifferentiableMap, Diagnostics, Reconstruction, Reconstructor, SolverId, SolverParams};
use crate::error::{check_len, Error, Result};
use crate::linops::{diff, diff_adjoint, LinearOperator};

/// `|(Du)_i| > JUMP_TOLERANCE · max|Du|` counts as a jump.
pub const JUMP_TOLERANCE: f64 = 1e-6;
/// Residual-balancing trigger ratio and step.
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_FACTOR: f64 = 2.0;
const PENALTY_RANGE: (f64, f64) = (1e-6, 1e6);
/// Membership residual allowed, in multiples of the dual stopping threshold.
const CERTIFICATE_SLACK: f64 = 10.0;
const CERTIFICATE_SWEEPS: usize = 500;
/// Iterations between polish attempts.
const POLISH_INTERVAL: usize = 10;
const POLISH_REPAIRS: usize = 20;
const POLISH_DUAL_SLACK: f64 = 1e-9;

/// Cached `(AᵀA + ρDᵀD)⁻¹` per penalty value.
pub struct PenaltyCache {
    a: Arc<LinearOperator>,
    gram: DMatrix<f64>,
    inverses: Mutex<BTreeMap<u64, Arc<DMatrix<f64>>>>,
}

impl PenaltyCache {
    pub fn new(a: Arc<LinearOperator>) -> Self {
        let gram = a.entries().tr_mul(a.entries());
        Self {
            a,
            gram,
            inverses: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn operator(&self) -> &Arc<LinearOperator> {
        &self.a
    }

    /// Number of distinct penalties factored so far.
    pub fn len(&self) -> usize {
        self.inverses.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inverse(&self, rho: f64) -> Result<Arc<DMatrix<f64>>> {
        let mut map = self.inverses.lock().unwrap();
        if let Some(k) = map.get(&rho.to_bits()) {
            return Ok(k.clone());
        }
        let n = self.gram.nrows();
        let mut system = self.gram.clone();
        for i in 0..n {
            let deg = if n == 1 { 0.0 } else if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            system[(i, i)] += rho * deg;
            if i + 1 < n {
                system[(i, i + 1)] -= rho;
                system[(i + 1, i)] -= rho;
            }
        }
        let chol = system.cholesky().ok_or_else(|| {
            Error::DegenerateRegularization(format!(
                "AᵀA + {rho}·DᵀD is singular: A annihilates constant signals"
            ))
        })?;
        let mut inv = chol.inverse();
        // Exact symmetry keeps forward and adjoint passes consistent.
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = s;
                inv[(j, i)] = s;
            }
        }
        let inv = Arc::new(inv);
        map.insert(rho.to_bits(), inv.clone());
        Ok(inv)
    }
}

/// Penalty schedule of a finished solve: `penalties[k]` is the ρ of iteration
/// `k`, `rescale[k]` the factor applied to `w` after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub penalties: Vec<f64>,
    pub rescale: Vec<f64>,
    /// Set when the solve ended with an accepted polish.
    pub active_set: Option<ActiveSet>,
}

/// Frozen jump pattern: `(Du)_i ≠ 0` exactly for `i` in `jumps`, with sign
/// `signs[k]` at `jumps[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub jumps: Vec<usize>,
    pub signs: Vec<f64>,
}

impl ActiveSet {
    pub fn from_differences(z: &DVector<f64>) -> Self {
        let jumps: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0).collect();
        let signs = jumps.iter().map(|&i| z[i].signum()).collect();
        Self { jumps, signs }
    }

    /// `[start, end)` of every constant segment of a length-`n` signal.
    fn segments(&self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut start = 0;
        for &j in &self.jumps {
            out.push((start, j + 1));
            start = j + 1;
        }
        out.push((start, n));
        out
    }
}

/// Reduced least-squares system of a fixed active set.
struct Reduced {
    segments: Vec<(usize, usize)>,
    columns: DMatrix<f64>,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Reduced {
    fn new(a: &LinearOperator, active: &ActiveSet) -> Option<Self> {
        let segments = active.segments(a.cols());
        let entries = a.entries();
        let mut columns = DMatrix::zeros(a.rows(), segments.len());
        for (t, &(s, e)) in segments.iter().enumerate() {
            let mut col = columns.column_mut(t);
            for j in s..e {
                col += entries.column(j);
            }
        }
        let factor = columns.tr_mul(&columns).cholesky()?;
        Some(Self { segments, columns, factor })
    }

    fn expand(&self, c: &DVector<f64>, n: usize) -> DVector<f64> {
        let mut u = DVector::zeros(n);
        for (t, &(s, e)) in self.segments.iter().enumerate() {
            u.rows_mut(s, e - s).fill(c[t]);
        }
        u
    }

    fn coefficients(&self, f: &DVector<f64>, alpha: f64, active: &ActiveSet) -> DVector<f64> {
        let mut rhs = self.columns.tr_mul(f);
        for (k, &sign) in active.signs.iter().enumerate() {
            rhs[k] += alpha * sign;
            rhs[k + 1] -= alpha * sign;
        }
        self.factor.solve(&rhs)
    }
}

/// Minimizes the TV objective over signals with exactly the jump pattern of
/// `active`, ignoring whether the resulting jumps keep their signs.
pub fn polish(a: &LinearOperator, f: &DVector<f64>, alpha: f64, active: &ActiveSet) -> Option<DVector<f64>> {
    let reduced = Reduced::new(a, active)?;
    let c = reduced.coefficients(f, alpha, active);
    Some(reduced.expand(&c, a.cols()))
}

fn polish_vjp(a: &LinearOperator, active: &ActiveSet, r: &DVector<f64>) -> Result<DVector<f64>> {
    let reduced = Reduced::new(a, active)
        .ok_or_else(|| Error::Numerical("polish system became singular".into()))?;
    let pr = DVector::from_iterator(
        reduced.segments.len(),
        reduced.segments.iter().map(|&(s, e)| r.rows(s, e - s).sum()),
    );
    Ok(&reduced.columns * reduced.factor.solve(&pr))
}

/// Exact inverse of `Dᵀ` on the zero-sum subspace, divided by `α` and clipped.
fn dual_start(q: &DVector<f64>, alpha: f64) -> DVector<f64> {
    let mut acc = 0.0;
    DVector::from_iterator(
        q.len() - 1,
        q.iter().take(q.len() - 1).map(|&x| {
            acc -= x;
            (acc / alpha).clamp(-1.0, 1.0)
        }),
    )
}

impl Schedule {
    pub fn iterations(&self) -> usize {
        self.penalties.len()
    }
}

struct State {
    u: DVector<f64>,
    z: DVector<f64>,
    w: DVector<f64>,
}

/// Solves kept so that `differentiable_at(f)` after `reconstruct(f)` does
/// not repeat the work.
const RECENT_SOLVES: usize = 8;

pub struct TvAdmm {
    cache: Arc<PenaltyCache>,
    alpha: f64,
    params: SolverParams,
    recent: Mutex<VecDeque<(DVector<f64>, Reconstruction, Schedule)>>,
}

impl TvAdmm {
    pub fn new(cache: Arc<PenaltyCache>, alpha: f64, params: SolverParams) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("tv alpha must be >= 0, got {alpha}")));
        }
        if cache.operator().cols() < 2 {
            return Err(Error::Parameter("tv needs signals of length >= 2".into()));
        }
        SolverParams { alpha: 1.0, ..params.clone() }.validate()?;
        Ok(Self { cache, alpha, params, recent: Mutex::new(VecDeque::new()) })
    }

    pub fn cache(&self) -> &Arc<PenaltyCache> {
        &self.cache
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    fn a(&self) -> &LinearOperator {
        self.cache.operator()
    }

    fn initial_state(&self, f: &DVector<f64>) -> Result<State> {
        let n = self.a().cols();
        if self.alpha == 0.0 {
            // Minimum-norm anchor: A†f is a fixed point of the α = 0 iteration.
            let u = self.a().pinv_apply(f)?;
            let z = diff(&u);
            Ok(State { u, z, w: DVector::zeros(n - 1) })
        } else {
            Ok(State {
                u: DVector::zeros(n),
                z: DVector::zeros(n - 1),
                w: DVector::zeros(n - 1),
            })
        }
    }

    /// One ADMM sweep; returns `(Du, z_old, w_old, mask)` where `mask[i]` says
    /// the shrinkage was active (`z_i ≠ 0`).
    fn step(&self, s: &mut State, atf: &DVector<f64>, rho: f64, kinv: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>, Vec<bool>) {
        let rhs = atf + diff_adjoint(&(&s.z - &s.w)) * rho;
        s.u = kinv * rhs;
        let du = diff(&s.u);
        let gamma = self.params.relaxation;
        let v = if gamma == 1.0 { &du + &s.w } else { &du * gamma + &s.z * (1.0 - gamma) + &s.w };
        let threshold = self.alpha / rho;
        let mut mask = vec![false; v.len()];
        let z_new = DVector::from_iterator(
            v.len(),
            v.iter().enumerate().map(|(i, &x)| {
                if x > threshold {
                    mask[i] = true;
                    x - threshold
                } else if x < -threshold {
                    mask[i] = true;
                    x + threshold
                } else {
                    0.0
                }
            }),
        );
        let w_new = v - &z_new;
        let z_old = std::mem::replace(&mut s.z, z_new);
        let w_old = std::mem::replace(&mut s.w, w_new);
        (du, z_old, w_old, mask)
    }

    /// Full adaptive solve; also returns the penalty schedule it followed.
    /// Solves (or recalls a recent identical solve of) `f`; the solve is
    /// deterministic, so both paths return the same result.
    pub fn solve(&self, f: &DVector<f64>) -> Result<(Reconstruction, Schedule)> {
        if let Some((_, r, s)) = self.recent.lock().unwrap().iter().find(|(g, _, _)| g == f) {
            return Ok((r.clone(), s.clone()));
        }
        let out = self.solve_uncached(f)?;
        let mut recent = self.recent.lock().unwrap();
        if recent.len() == RECENT_SOLVES {
            recent.pop_front();
        }
        recent.push_back((f.clone(), out.0.clone(), out.1.clone()));
        Ok(out)
    }

    fn solve_uncached(&self, f: &DVector<f64>) -> Result<(Reconstruction, Schedule)> {
        let a = self.a();
        check_len("measurement", a.rows(), f.len())?;
        check_finite("measurement", f)?;
        let n = a.cols();
        let p = &self.params;
        let atf = a.entries().tr_mul(f);
        let mut state = self.initial_state(f)?;
        let mut rho = p.admm_penalty;
        let mut schedule = Schedule { penalties: Vec::new(), rescale: Vec::new(), active_set: None };
        let mut diag = Diagnostics::default();
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut eps_dual = 0.0;
        let mut polished: Option<DVector<f64>> = None;

        for it in 0..p.max_iterations {
            let kinv = self.cache.inverse(rho)?;
            let (du, z_old, w_old, _) = self.step(&mut state, &atf, rho, &kinv);
            check_finite("admm iterate", &state.u)?;

            let r_pri = (&du - &state.z).norm();
            let dz = &state.z - &z_old;
            let r_dual = rho * diff_adjoint(&dz).norm();
            let eps_pri = ((n - 1) as f64).sqrt() * p.absolute_tolerance
                + p.relative_tolerance * du.norm().max(state.z.norm());
            eps_dual = (n as f64).sqrt() * p.absolute_tolerance
                + p.relative_tolerance * rho * diff_adjoint(&state.w).norm();
            let merit = rho * (dz.norm_squared() + (&state.w - &w_old).norm_squared());
            let objective = tv_objective(a, f, &state.u, self.alpha);

            diag.primal_residuals.push(r_pri);
            diag.dual_residuals.push(r_dual);
            diag.merit_history.push(merit);
            diag.objective_history.push(objective);
            diag.penalty_history.push(rho);
            schedule.penalties.push(rho);
            diag.iterations += 1;
            if best.as_ref().map_or(true, |(o, _)| objective < *o) {
                best = Some((objective, state.u.clone()));
            }

            if r_pri <= eps_pri && r_dual <= eps_dual {
                diag.converged = true;
                schedule.rescale.push(1.0);
                break;
            }
            if p.polish && self.alpha > 0.0 && (it + 1) % POLISH_INTERVAL == 0 {
                let active = ActiveSet::from_differences(&state.z);
                let tol = CERTIFICATE_SLACK * eps_dual.max((n as f64).sqrt() * p.absolute_tolerance);
                if let Some((u, active)) = self.try_polish(f, active, tol) {
                    diag.converged = true;
                    diag.polished = true;
                    schedule.rescale.push(1.0);
                    schedule.active_set = Some(active);
                    polished = Some(u);
                    break;
                }
            }
            let mut scale = 1.0;
            if p.adaptive_penalty {
                if r_pri > BALANCE_RATIO * r_dual && rho * BALANCE_FACTOR <= PENALTY_RANGE.1 {
                    rho *= BALANCE_FACTOR;
                    scale = 1.0 / BALANCE_FACTOR;
                } else if r_dual > BALANCE_RATIO * r_pri && rho / BALANCE_FACTOR >= PENALTY_RANGE.0 {
                    rho /= BALANCE_FACTOR;
                    scale = BALANCE_FACTOR;
                }
            }
            if scale != 1.0 {
                state.w *= scale;
            }
            schedule.rescale.push(scale);
        }

        let values = if let Some(u) = polished {
            u
        } else if diag.converged {
            state.u.clone()
        } else {
            best.map(|(_, u)| u).unwrap_or_else(|| state.u.clone())
        };
        let subgradient = a.entries().tr_mul(&(f - a.entries() * &values));
        let s0 = if self.alpha > 0.0 {
            dual_start(&subgradient, self.alpha)
        } else {
            DVector::zeros(n - 1)
        };
        let certificate = certificate_check(
            &subgradient,
            &diff(&values),
            self.alpha,
            s0,
            CERTIFICATE_SLACK * eps_dual.max((n as f64).sqrt() * p.absolute_tolerance),
        );
        diag.optimality_residual = certificate.residual;
        diag.stationarity_residual = Some(stationarity(a, f, &values, &subgradient));
        diag.certificate = Some(certificate);
        let rec = Reconstruction {
            values,
            solver_id: SolverId::TvAdmm,
            regularization_strength: self.alpha,
            subgradient: Some(subgradient),
            diagnostics: diag,
        };
        Ok((rec, schedule))
    }

    /// Polishes on the support of `z`, then repairs the active set a few
    /// times: jumps whose sign flipped are dropped, off-support indices whose
    /// dual exceeds 1 are added. Returns a certified minimizer or nothing.
    fn try_polish(&self, f: &DVector<f64>, mut active: ActiveSet, tolerance: f64) -> Option<(DVector<f64>, ActiveSet)> {
        let a = self.a();
        let n = a.cols();
        let max_segments = (a.rows() / 2).max(1);
        for _ in 0..POLISH_REPAIRS {
            if active.jumps.len() + 1 > max_segments {
                return None;
            }
            let u = polish(a, f, self.alpha, &active)?;
            let q = a.entries().tr_mul(&(f - a.entries() * &u));
            let mut dual = 0.0;
            let mut jumps = Vec::new();
            let mut signs = Vec::new();
            let mut changed = false;
            let mut k = 0;
            for i in 0..n - 1 {
                dual -= q[i] / self.alpha;
                let on = k < active.jumps.len() && active.jumps[k] == i;
                if on {
                    let sign = active.signs[k];
                    k += 1;
                    if (u[i + 1] - u[i]) * sign > 0.0 {
                        jumps.push(i);
                        signs.push(sign);
                    } else {
                        changed = true;
                    }
                } else if dual.abs() > 1.0 + POLISH_DUAL_SLACK {
                    jumps.push(i);
                    signs.push(dual.signum());
                    changed = true;
                }
            }
            if !changed {
                let check = certificate_check(&q, &diff(&u), self.alpha, dual_start(&q, self.alpha), tolerance);
                return check.valid.then_some((u, active));
            }
            active = ActiveSet { jumps, signs };
        }
        None
    }

    /// Runs exactly the iterations of `schedule` from the standard start.
    /// With `tape`, also returns the shrinkage masks of every iteration.
    pub fn run_frozen(&self, f: &DVector<f64>, schedule: &Schedule, tape: bool) -> Result<(DVector<f64>, Vec<Vec<bool>>)> {
        let a = self.a();
        check_len("measurement", a.rows(), f.len())?;
        let atf = a.entries().tr_mul(f);
        let mut state = self.initial_state(f)?;
        let mut masks = Vec::new();
        if let Some(active) = &schedule.active_set {
            // The polish depends on f only through the frozen active set.
            let u = polish(a, f, self.alpha, active)
                .ok_or_else(|| Error::Numerical("polish system became singular".into()))?;
            return Ok((u, masks));
        }
        for (&rho, &scale) in schedule.penalties.iter().zip(&schedule.rescale) {
            let kinv = self.cache.inverse(rho)?;
            let (_, _, _, mask) = self.step(&mut state, &atf, rho, &kinv);
            if tape {
                masks.push(mask);
            }
            if scale != 1.0 {
                state.w *= scale;
            }
        }
        check_finite("admm iterate", &state.u)?;
        Ok((state.u, masks))
    }

    /// `J(f)ᵀ r` for the frozen-schedule map, by reverse accumulation.
    pub fn frozen_vjp(&self, f: &DVector<f64>, schedule: &Schedule, r: &DVector<f64>) -> Result<DVector<f64>> {
        let a = self.a();
        check_len("cotangent", a.cols(), r.len())?;
        if let Some(active) = &schedule.active_set {
            return polish_vjp(a, active, r);
        }
        let (_, masks) = self.run_frozen(f, schedule, true)?;
        let n = a.cols();
        let mut z_bar = DVector::zeros(n - 1);
        let mut w_bar = DVector::zeros(n - 1);
        let mut atf_bar = DVector::zeros(n);
        let last = masks.len();
        let gamma = self.params.relaxation;
        for k in (0..last).rev() {
            let rho = schedule.penalties[k];
            let w2_bar = &w_bar * schedule.rescale[k];
            let v_bar = DVector::from_iterator(
                n - 1,
                (0..n - 1).map(|i| {
                    if masks[k][i] {
                        z_bar[i]
                    } else {
                        w2_bar[i]
                    }
                }),
            );
            let mut u_bar = diff_adjoint(&v_bar) * gamma;
            if k + 1 == last {
                u_bar += r;
            }
            let kinv = self.cache.inverse(rho)?;
            let rhs_bar = kinv.as_ref() * u_bar;
            atf_bar += &rhs_bar;
            let d_rhs = diff(&rhs_bar) * rho;
            z_bar = &d_rhs + &v_bar * (1.0 - gamma);
            w_bar = v_bar - d_rhs;
        }
        let mut grad = a.entries() * atf_bar;
        if self.alpha == 0.0 {
            // z₀ = D A†f.
            let u0_bar = diff_adjoint(&z_bar);
            grad += pinv_transpose_apply(a, &u0_bar)?;
        }
        Ok(grad)
    }
}

fn pinv_transpose_apply(a: &LinearOperator, x: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd()?;
    let tol = svd.rank_tolerance(a.rows(), a.cols());
    let mut c = svd.v.tr_mul(x);
    for (ci, &s) in c.iter_mut().zip(svd.singular_values.iter()) {
        *ci = if s > tol { *ci / s } else { 0.0 };
    }
    Ok(&svd.u * c)
}

/// `½‖Au − f‖² + α‖Du‖₁`.
pub fn tv_objective(a: &LinearOperator, f: &DVector<f64>, u: &DVector<f64>, alpha: f64) -> f64 {
    let r = a.entries() * u - f;
    0.5 * r.norm_squared() + alpha * diff(u).lp_norm(1)
}

/// Tests `q ∈ α∂‖D·‖₁(u)` up to `tolerance`: minimizes `‖q − αDᵀs‖` over
/// `|s_i| ≤ 1` with `s_i` pinned to `sign((Du)_i)` on jumps, by projected
/// gradient from `s0`.
pub fn certificate_check(q: &DVector<f64>, du: &DVector<f64>, alpha: f64, s0: DVector<f64>, tolerance: f64) -> CertificateCheck {
    let scale = du.amax();
    let jumps: Vec<Option<f64>> = du
        .iter()
        .map(|&d| (scale > 0.0 && d.abs() > JUMP_TOLERANCE * scale).then(|| d.signum()))
        .collect();
    let jump_count = jumps.iter().filter(|j| j.is_some()).count();
    if alpha == 0.0 {
        let residual = q.norm();
        return CertificateCheck { residual, tolerance, valid: residual <= tolerance, jump_count };
    }
    let project = |s: &mut DVector<f64>| {
        for (si, j) in s.iter_mut().zip(&jumps) {
            *si = match j {
                Some(sign) => *sign,
                None => si.clamp(-1.0, 1.0),
            };
        }
    };
    let mut s = s0;
    project(&mut s);
    let residual_of = |s: &DVector<f64>| q - diff_adjoint(s) * alpha;
    let step = 1.0 / (4.0 * alpha * alpha);
    let mut res = residual_of(&s);
    let mut best = res.norm();
    for _ in 0..CERTIFICATE_SWEEPS {
        if best <= tolerance {
            break;
        }
        s += diff(&res) * (alpha * step);
        project(&mut s);
        res = residual_of(&s);
        best = best.min(res.norm());
    }
    CertificateCheck { residual: best, tolerance, valid: best <= tolerance, jump_count }
}

struct FrozenTv<'a> {
    solver: &'a TvAdmm,
    schedule: Schedule,
}

impl DifferentiableMap for FrozenTv<'_> {
    fn eval(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solver.run_frozen(f, &self.schedule, false)?.0)
    }

    fn unrolled_vjp(&self, f: &DVector<f64>, r: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(self.solver.frozen_vjp(f, &self.schedule, r))
    }
}

impl Reconstructor for TvAdmm {
    fn solver_id(&self) -> SolverId {
        SolverId::TvAdmm
    }

    fn regularization_strength(&self) -> f64 {
        self.alpha
    }

    fn operator(&self) -> &LinearOperator {
        self.a()
    }

    fn reconstruct(&self, f: &DVector<f64>) -> Result<Reconstruction> {
        Ok(self.solve(f)?.0)
    }

    fn differentiable_at(&self, f: &DVector<f64>) -> Result<Box<dyn DifferentiableMap + '_>> {
        let (_, schedule) = self.solve(f)?;
        Ok(Box::new(FrozenTv { solver: self, schedule }))
    }
}

/// One-shot TV-ADMM solve.
pub fn tv_admm(a: &LinearOperator, f: &DVector<f64>, alpha: f64, params: &SolverParams) -> Result<Reconstruction> {
    let cache = Arc::new(PenaltyCache::new(Arc::new(a.clone())));
    TvAdmm::new(cache, alpha, params.clone())?.reconstruct(f)
}
