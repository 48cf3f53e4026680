//! Bregman distances, the variational stability bound and the Table-style
//! robustness metrics.
//!
//! For a variational reconstruction `uᵢ` of `fᵢ` with subgradient `pᵢ`,
//!
//! ```text
//! ½‖f₁ − f₂‖² ≥ ½‖A(u₁ − u₂)‖² + ⟨p₁ − p₂, u₁ − u₂⟩
//! ```
//!
//! and the intermediate identity
//! `‖AΔu‖² − ⟨Δf, AΔu⟩ + ⟨Δp, Δu⟩ = 0` holds for exact minimizers.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linops::{diff, diff_adjoint, LinearOperator};
use crate::rng::rng_from_seed;
use crate::solvers::{Reconstruction, SolverId};

/// Relative agreement required between the certificate inner product and
/// the closed-form Tikhonov Bregman distance.
pub const BREGMAN_CROSS_CHECK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TolerancePolicy {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self { absolute: 1e-6, relative: 1e-8 }
    }
}

impl TolerancePolicy {
    pub fn threshold(&self, lhs: f64) -> f64 {
        self.absolute + self.relative * lhs.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerId {
    /// `R(u) = (α/2)‖Du‖²`.
    Tikhonov,
    /// `R(u) = α‖Du‖₁`.
    TotalVariation,
}

/// Where the subgradients of a pair come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubgradientSource {
    /// The certificates stored by the solver.
    Stored,
    /// `p = αDᵀDu` of a Tikhonov regularizer, whatever produced `u`.
    Tikhonov { alpha: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub instance: Option<usize>,
    pub perturbation: Option<String>,
    pub solver_1: Option<String>,
    pub solver_2: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `½‖f₁ − f₂‖²`.
    pub lhs: f64,
    /// `½‖Au₁ − Au₂‖²`.
    pub data_term: f64,
    /// `⟨p₁ − p₂, u₁ − u₂⟩`.
    pub bregman: f64,
    pub slack: f64,
    pub violated: bool,
    pub tolerance_used: f64,
    pub regularizer_id: RegularizerId,
    pub regularization_strength: f64,
    /// `‖AΔu‖² − ⟨Δf, AΔu⟩ + ⟨Δp, Δu⟩`.
    pub identity_residual: f64,
    pub mixed_solvers: bool,
    pub pair_provenance: PairProvenance,
}

impl StabilityReport {
    /// `data_term + bregman`, the right-hand side of the bound.
    pub fn rhs(&self) -> f64 {
        self.data_term + self.bregman
    }
}

fn regularizer_of(id: SolverId) -> Result<RegularizerId> {
    match id {
        SolverId::Tikhonov => Ok(RegularizerId::Tikhonov),
        SolverId::TvAdmm => Ok(RegularizerId::TotalVariation),
        other => Err(Error::NotApplicable(format!(
            "{other} has no convex regularizer, so no Bregman distance"
        ))),
    }
}

/// `⟨p₁ − p₂, u₁ − u₂⟩`; for Tikhonov also checks it against `α‖D(u₁ − u₂)‖²`.
pub fn bregman_distance(
    regularizer: RegularizerId,
    alpha: f64,
    u1: &DVector<f64>,
    u2: &DVector<f64>,
    p1: &DVector<f64>,
    p2: &DVector<f64>,
) -> Result<f64> {
    let n = u1.len();
    check_len("u2", n, u2.len())?;
    check_len("p1", n, p1.len())?;
    check_len("p2", n, p2.len())?;
    let du = u1 - u2;
    let value = (p1 - p2).dot(&du);
    if regularizer == RegularizerId::Tikhonov && n > 1 {
        let d_du = diff(&du);
        let closed = alpha * d_du.norm_squared();
        // Rounding in αDᵀDuᵢ scales with the individual terms, not their difference.
        let scale = alpha * (diff(u1).norm() + diff(u2).norm()) * d_du.norm();
        let allowed = BREGMAN_CROSS_CHECK * closed.abs().max(value.abs()).max(f64::EPSILON * scale * 64.0);
        if (value - closed).abs() > allowed {
            return Err(Error::Contract(format!(
                "tikhonov bregman distance {value} disagrees with closed form {closed}"
            )));
        }
    }
    Ok(value)
}

/// `‖AΔu‖² − ⟨Δf, AΔu⟩ + ⟨Δp, Δu⟩`, zero for exact minimizers.
pub fn identity_residual(
    a: &LinearOperator,
    f1: &DVector<f64>,
    f2: &DVector<f64>,
    u1: &DVector<f64>,
    u2: &DVector<f64>,
    p1: &DVector<f64>,
    p2: &DVector<f64>,
) -> Result<f64> {
    let du = u1 - u2;
    let adu = a.apply(&du)?;
    Ok(adu.norm_squared() - (f1 - f2).dot(&adu) + (p1 - p2).dot(&du))
}

/// Scale against which [`identity_residual`] should be judged.
pub fn identity_scale(
    a: &LinearOperator,
    f1: &DVector<f64>,
    f2: &DVector<f64>,
    u1: &DVector<f64>,
    u2: &DVector<f64>,
) -> f64 {
    let du = u1 - u2;
    let adu = a.entries() * &du;
    adu.norm_squared() + (f1 - f2).norm() * adu.norm()
}

fn tikhonov_subgradient(alpha: f64, u: &DVector<f64>) -> DVector<f64> {
    diff_adjoint(&diff(u)) * alpha
}

/// Evaluates the stability bound for one pair of reconstructions.
pub fn verify_stability_bound(
    a: &LinearOperator,
    f1: &DVector<f64>,
    f2: &DVector<f64>,
    r1: &Reconstruction,
    r2: &Reconstruction,
    source: SubgradientSource,
    policy: &TolerancePolicy,
    provenance: PairProvenance,
) -> Result<StabilityReport> {
    check_len("f1", a.rows(), f1.len())?;
    check_len("f2", a.rows(), f2.len())?;
    check_len("u1", a.cols(), r1.values.len())?;
    check_len("u2", a.cols(), r2.values.len())?;
    let mixed = r1.solver_id != r2.solver_id || r1.regularization_strength != r2.regularization_strength;
    let (u1, u2) = (&r1.values, &r2.values);
    let (regularizer, alpha, p1, p2) = match source {
        SubgradientSource::Stored => {
            let missing = |r: &Reconstruction| {
                Error::NotApplicable(format!("{} carries no subgradient certificate", r.solver_id))
            };
            let p1 = r1.subgradient.clone().ok_or_else(|| missing(r1))?;
            let p2 = r2.subgradient.clone().ok_or_else(|| missing(r2))?;
            (regularizer_of(r1.solver_id)?, r1.regularization_strength, p1, p2)
        }
        SubgradientSource::Tikhonov { alpha } => (
            RegularizerId::Tikhonov,
            alpha,
            tikhonov_subgradient(alpha, u1),
            tikhonov_subgradient(alpha, u2),
        ),
    };
    let bregman = bregman_distance(regularizer, alpha, u1, u2, &p1, &p2)?;
    let df = f1 - f2;
    let adu = a.entries() * (u1 - u2);
    let lhs = 0.5 * df.norm_squared();
    let data_term = 0.5 * adu.norm_squared();
    let slack = lhs - data_term - bregman;
    let tolerance_used = policy.threshold(lhs);
    let identity_residual = adu.norm_squared() - df.dot(&adu) + bregman;
    Ok(StabilityReport {
        lhs,
        data_term,
        bregman,
        slack,
        violated: slack < -tolerance_used,
        tolerance_used,
        regularizer_id: regularizer,
        regularization_strength: alpha,
        identity_residual,
        mixed_solvers: mixed,
        pair_provenance: provenance,
    })
}

/// Two whitespace-separated columns `lhs rhs` with gnuplot comment headers.
/// The per-instance bound is the diagonal `rhs = lhs`; the worst-case bound
/// `½·m·ε²` is given in the header when `worst_case` is set.
pub fn scatter_data(reports: &[StabilityReport], worst_case: Option<f64>) -> String {
    let mut out = String::from("# lhs=0.5*|f1-f2|^2 rhs=0.5*|Au1-Au2|^2+bregman\n");
    if let Some(w) = worst_case {
        out.push_str(&format!("# worst_case_bound {w:?}\n"));
    }
    for r in reports {
        out.push_str(&format!("{:?} {:?}\n", r.lhs, r.rhs()));
    }
    out
}

/// `½·m·ε²`, the largest `½‖f₁ − f₂‖²` an ℓ∞ budget `ε` allows.
pub fn worst_case_bound(m: usize, epsilon: f64) -> f64 {
    0.5 * m as f64 * epsilon * epsilon
}

/// The ten robustness quantities of one solver on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub solver: String,
    pub solver_id: SolverId,
    pub instance: Option<usize>,
    pub clean_error: f64,
    pub adv_error: f64,
    pub clean_consistency: f64,
    pub adv_consistency: f64,
    pub output_data_gap: f64,
    pub smoothness_gap: f64,
    pub output_gap: f64,
    pub input_gap: f64,
    pub lipschitz_ratio: f64,
}

/// Labels of the nine numeric columns, in [`MetricsRow::values`] order.
pub const METRIC_LABELS: [&str; 9] = [
    "|u-u_gt|^2",
    "|u_adv-u_gt|^2",
    "|Au-f|^2",
    "|Au_adv-f_adv|^2",
    "|Au-Au_adv|^2",
    "|Du-Du_adv|^2",
    "|u-u_adv|^2",
    "|f-f_adv|^2",
    "lipschitz_ratio",
];

impl MetricsRow {
    pub fn compute(
        a: &LinearOperator,
        ground_truth: &DVector<f64>,
        f: &DVector<f64>,
        clean: &Reconstruction,
        f_adv: &DVector<f64>,
        adv: &Reconstruction,
        label: &str,
        instance: Option<usize>,
    ) -> Result<Self> {
        check_len("ground truth", a.cols(), ground_truth.len())?;
        let (u, ua) = (&clean.values, &adv.values);
        let au = a.apply(u)?;
        let aua = a.apply(ua)?;
        let output_gap = (u - ua).norm_squared();
        let input_gap = (f - f_adv).norm_squared();
        let lipschitz_ratio = if input_gap > 0.0 { output_gap / input_gap } else { 0.0 };
        Ok(Self {
            solver: label.to_string(),
            solver_id: clean.solver_id,
            instance,
            clean_error: (u - ground_truth).norm_squared(),
            adv_error: (ua - ground_truth).norm_squared(),
            clean_consistency: (&au - f).norm_squared(),
            adv_consistency: (&aua - f_adv).norm_squared(),
            output_data_gap: (&au - &aua).norm_squared(),
            smoothness_gap: (diff(u) - diff(ua)).norm_squared(),
            output_gap,
            input_gap,
            lipschitz_ratio,
        })
    }

    /// The nine numeric columns in label order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.clean_error,
            self.adv_error,
            self.clean_consistency,
            self.adv_consistency,
            self.output_data_gap,
            self.smoothness_gap,
            self.output_gap,
            self.input_gap,
            self.lipschitz_ratio,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsAggregate {
    pub solver: String,
    pub count: usize,
    pub mean: [f64; 9],
    pub median: [f64; 9],
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    if values.len() % 2 == 1 {
        values[k]
    } else {
        0.5 * (values[k - 1] + values[k])
    }
}

/// Mean and median per solver label, in order of first appearance.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<MetricsAggregate> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.solver.as_str()) {
            labels.push(&r.solver);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<[f64; 9]> = rows.iter().filter(|r| r.solver == label).map(MetricsRow::values).collect();
            let mut mean = [0.0; 9];
            let mut med = [0.0; 9];
            for c in 0..9 {
                let mut col: Vec<f64> = group.iter().map(|v| v[c]).collect();
                mean[c] = col.iter().sum::<f64>() / col.len() as f64;
                med[c] = median(&mut col);
            }
            MetricsAggregate { solver: label.to_string(), count: group.len(), mean, median: med }
        })
        .collect()
}

/// Where the perturbations of a Lipschitz scan come from.
pub enum PerturbationSource<'a> {
    /// i.i.d. `N(0, std²)` entries.
    Gaussian { std: f64, seed: u64 },
    /// Precomputed perturbations, e.g. adversarial ones.
    Fixed(&'a [DVector<f64>]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Lower bound on the local Lipschitz constant.
    pub lower_bound: f64,
    pub trials_used: usize,
    pub skipped: usize,
}

/// `max ‖G(f+δ) − G(f)‖ / ‖δ‖` over the drawn perturbations.
pub fn lipschitz_ratio_scan(
    map: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    f: &DVector<f64>,
    source: PerturbationSource<'_>,
    trials: usize,
) -> Result<LipschitzEstimate> {
    if trials == 0 {
        return Err(Error::Parameter("lipschitz scan needs at least one trial".into()));
    }
    let base = map(f)?;
    let deltas: Vec<DVector<f64>> = match source {
        PerturbationSource::Gaussian { std, seed } => {
            let mut rng = rng_from_seed(seed);
            (0..trials)
                .map(|_| DVector::from_fn(f.len(), |_, _| { let z: f64 = StandardNormal.sample(&mut rng); std * z }))
                .collect()
        }
        PerturbationSource::Fixed(ds) => ds.iter().take(trials).cloned().collect(),
    };
    let mut best = 0.0f64;
    let mut used = 0;
    let mut skipped = 0;
    for d in &deltas {
        check_len("perturbation", f.len(), d.len())?;
        let norm = d.norm();
        if norm == 0.0 {
            skipped += 1;
            continue;
        }
        let out = map(&(f + d))?;
        best = best.max((out - &base).norm() / norm);
        used += 1;
    }
    Ok(LipschitzEstimate { lower_bound: best, trials_used: used, skipped })
}

/// Gaussian perturbation rescaled to an exact ℓ₂ norm.
pub fn gaussian_with_norm(m: usize, norm: f64, seed: u64) -> DVector<f64> {
    let mut rng = rng_from_seed(seed);
    let g = DVector::from_fn(m, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let gn = g.norm();
    if gn == 0.0 {
        g
    } else {
        g * (norm / gn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::generate_operator;
    use crate::solvers::{Reconstructor, Tikhonov, TvAdmm, PenaltyCache, SolverParams};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn identical_pair_is_zero_and_not_violated() {
        let a = Arc::new(generate_operator(10, 20, 0.0, 0.05, 1).unwrap());
        let tik = Tikhonov::with_finite_differences(a.clone(), 0.5).unwrap();
        let f = DVector::from_fn(10, |i, _| i as f64 * 0.1);
        let r = tik.reconstruct(&f).unwrap();
        let rep = verify_stability_bound(&a, &f, &f, &r, &r, SubgradientSource::Stored, &TolerancePolicy::default(), PairProvenance::default()).unwrap();
        assert_eq!((rep.lhs, rep.data_term, rep.bregman), (0.0, 0.0, 0.0));
        assert!(!rep.violated);
    }

    #[test]
    fn tikhonov_bregman_example() {
        // ‖D(u₁ − u₂)‖² = 0.03 with α = 100 gives 3.
        let n = 4;
        let u1 = DVector::zeros(n);
        let step = 0.03f64.sqrt();
        let u2 = DVector::from_vec(vec![0.0, 0.0, step, step]);
        let p1 = tikhonov_subgradient(100.0, &u1);
        let p2 = tikhonov_subgradient(100.0, &u2);
        let b = bregman_distance(RegularizerId::Tikhonov, 100.0, &u1, &u2, &p1, &p2).unwrap();
        assert!((b - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tikhonov_cross_check_rejects_foreign_subgradients() {
        let u1 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let u2 = DVector::zeros(3);
        let p1 = DVector::from_vec(vec![5.0, 0.0, 0.0]);
        let p2 = DVector::zeros(3);
        assert!(bregman_distance(RegularizerId::Tikhonov, 1.0, &u1, &u2, &p1, &p2).is_err());
    }

    #[test]
    fn non_variational_pair_is_not_applicable() {
        let a = LinearOperator::identity(3);
        let rec = Reconstruction {
            values: DVector::zeros(3),
            solver_id: SolverId::LearnedLinear,
            regularization_strength: 0.0,
            subgradient: None,
            diagnostics: Default::default(),
        };
        let f = DVector::zeros(3);
        let err = verify_stability_bound(&a, &f, &f, &rec, &rec, SubgradientSource::Stored, &TolerancePolicy::default(), PairProvenance::default());
        assert!(matches!(err, Err(Error::NotApplicable(_))));
    }

    #[test]
    fn tv_pairs_satisfy_the_identity() {
        let a = Arc::new(generate_operator(16, 32, 0.0, 0.05, 4).unwrap());
        let tv = TvAdmm::new(Arc::new(PenaltyCache::new(a.clone())), 0.02, SolverParams::default()).unwrap();
        let f1 = DVector::from_fn(16, |i, _| (i as f64 * 0.4).sin());
        let f2 = &f1 + gaussian_with_norm(16, 0.5, 9);
        let (r1, r2) = (tv.reconstruct(&f1).unwrap(), tv.reconstruct(&f2).unwrap());
        let rep = verify_stability_bound(&a, &f1, &f2, &r1, &r2, SubgradientSource::Stored, &TolerancePolicy::default(), PairProvenance::default()).unwrap();
        assert!(rep.identity_residual.abs() < 1e-12 * identity_scale(&a, &f1, &f2, &r1.values, &r2.values).max(1.0));
        assert!(!rep.violated);
        assert!(rep.bregman >= -1e-8);
    }

    #[test]
    fn lipschitz_scan_of_linear_map_is_below_sigma_max() {
        let m = DMatrix::from_fn(5, 5, |i, j| ((i * 3 + j * 7) % 5) as f64 - 2.0);
        let sigma_max = m.clone().svd(false, false).singular_values.max();
        let map = |x: &DVector<f64>| -> Result<DVector<f64>> { Ok(&m * x) };
        let f = DVector::from_element(5, 1.0);
        let est = lipschitz_ratio_scan(&map, &f, PerturbationSource::Gaussian { std: 0.1, seed: 3 }, 50).unwrap();
        assert!(est.lower_bound <= sigma_max * (1.0 + 1e-12));
        let top = m.clone().svd(false, true).v_t.unwrap().row(0).transpose();
        let aligned = [top * 0.01];
        let est = lipschitz_ratio_scan(&map, &f, PerturbationSource::Fixed(&aligned), 1).unwrap();
        assert!((est.lower_bound - sigma_max).abs() < 1e-9 * sigma_max);
    }

    #[test]
    fn lipschitz_scan_of_constant_map_is_zero_and_skips_zero_draws() {
        let map = |_: &DVector<f64>| -> Result<DVector<f64>> { Ok(DVector::from_element(2, 7.0)) };
        let ds = [DVector::zeros(2), DVector::from_element(2, 1.0)];
        let est = lipschitz_ratio_scan(&map, &DVector::zeros(2), PerturbationSource::Fixed(&ds), 2).unwrap();
        assert_eq!(est.lower_bound, 0.0);
        assert_eq!(est.skipped, 1);
    }

    #[test]
    fn aggregates_and_scatter() {
        let row = |label: &str, x: f64| MetricsRow {
            solver: label.into(),
            solver_id: SolverId::Tikhonov,
            instance: None,
            clean_error: x,
            adv_error: x,
            clean_consistency: x,
            adv_consistency: x,
            output_data_gap: x,
            smoothness_gap: x,
            output_gap: x,
            input_gap: x,
            lipschitz_ratio: x,
        };
        let agg = aggregate(&[row("a", 1.0), row("b", 5.0), row("a", 2.0), row("a", 9.0)]);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].solver, "a");
        assert_eq!(agg[0].mean[0], 4.0);
        assert_eq!(agg[0].median[0], 2.0);
        assert!((worst_case_bound(512, 0.2) - 10.24).abs() < 1e-12);
        let text = scatter_data(&[], Some(1.0));
        assert!(text.lines().all(|l| l.starts_with('#')));
    }

    proptest! {
        #[test]
        fn slack_is_recomputable(seed in 0u64..200, alpha in 1e-3f64..10.0) {
            let a = Arc::new(generate_operator(6, 8, 0.0, 0.05, seed).unwrap());
            let tik = Tikhonov::with_finite_differences(a.clone(), alpha).unwrap();
            let f1 = gaussian_with_norm(6, 1.0, seed + 1);
            let f2 = &f1 + gaussian_with_norm(6, 0.3, seed + 2);
            let (r1, r2) = (tik.reconstruct(&f1).unwrap(), tik.reconstruct(&f2).unwrap());
            let rep = verify_stability_bound(&a, &f1, &f2, &r1, &r2, SubgradientSource::Stored, &TolerancePolicy::default(), PairProvenance::default()).unwrap();
            prop_assert_eq!(rep.slack, rep.lhs - rep.data_term - rep.bregman);
            prop_assert!(rep.bregman >= -1e-12);
            prop_assert!(!rep.violated);
        }
    }
}
