//! Dense linear-operator algebra.
//!
//! Singular vectors follow one fixed convention throughout the crate: the
//! columns of [`SvdFactors::u`] live in measurement space (length `m`) and
//! the columns of [`SvdFactors::v`] live in data space (length `n`), so that
//! `A = U diag(σ) Vᵀ`. Spectral reconstructions take inner products of the
//! data `f` with the measurement-space vectors and expand the result in the
//! data-space vectors.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::signals::{Measurement, Signal};

/// Relative factor of the numerical-rank cutoff `max(m, n) · σ_max · 1e-12`.
pub const RANK_TOLERANCE_FACTOR: f64 = 1e-12;

/// How an operator's entries were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorGeneration {
    pub distribution: String,
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
    pub prng: String,
}

/// Economy SVD, singular values sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `m × r`, measurement-space singular vectors.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `n × r`, data-space singular vectors.
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Singular values at or below this are treated as zero.
    pub fn rank_tolerance(&self, m: usize, n: usize) -> f64 {
        let sigma_max = self.singular_values.iter().copied().fold(0.0, f64::max);
        m.max(n) as f64 * sigma_max * RANK_TOLERANCE_FACTOR
    }

    pub fn numerical_rank(&self, m: usize, n: usize) -> usize {
        let tol = self.rank_tolerance(m, n);
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }

    /// `U diag(σ) Vᵀ`.
    pub fn recompose(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Dense `m × n` forward operator with a lazily computed SVD.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    entries: DMatrix<f64>,
    generation: Option<OperatorGeneration>,
    svd: OnceLock<std::result::Result<SvdFactors, String>>,
}

impl LinearOperator {
    pub fn new(entries: DMatrix<f64>) -> Self {
        Self {
            entries,
            generation: None,
            svd: OnceLock::new(),
        }
    }

    pub fn with_generation(entries: DMatrix<f64>, generation: OperatorGeneration) -> Self {
        Self {
            entries,
            generation: Some(generation),
            svd: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn generation(&self) -> Option<&OperatorGeneration> {
        self.generation.as_ref()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(&self.entries * c)
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("operator input", self.cols(), x.len())?;
        Ok(&self.entries * x)
    }

    pub fn apply_transpose(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("operator adjoint input", self.rows(), y.len())?;
        Ok(self.entries.tr_mul(y))
    }

    fn describe(&self) -> String {
        match &self.generation {
            Some(g) => format!(
                "{}x{} {}(mean={}, variance={}, seed={})",
                self.rows(),
                self.cols(),
                g.distribution,
                g.mean,
                g.variance,
                g.seed
            ),
            None => format!("{}x{} (explicit entries)", self.rows(), self.cols()),
        }
    }

    /// Cached economy SVD. Concurrent first calls compute it once.
    pub fn svd(&self) -> Result<&SvdFactors> {
        let cached = self.svd.get_or_init(|| compute_svd(&self.entries).ok_or_else(|| self.describe()));
        cached.as_ref().map_err(|d| Error::Svd(d.clone()))
    }

    pub fn svd_is_cached(&self) -> bool {
        self.svd.get().is_some()
    }

    /// `σ_max / σ_min` over the numerically nonzero singular values.
    pub fn condition_number(&self) -> Result<f64> {
        let svd = self.svd()?;
        let tol = svd.rank_tolerance(self.rows(), self.cols());
        let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        if sigma_max == 0.0 {
            return Err(Error::DegenerateOperator(format!(
                "{} has no nonzero singular value",
                self.describe()
            )));
        }
        let sigma_min = svd
            .singular_values
            .iter()
            .copied()
            .filter(|&s| s > tol)
            .fold(f64::INFINITY, f64::min);
        Ok(sigma_max / sigma_min)
    }

    /// `A† y` through the cached SVD with the numerical-rank cutoff.
    pub fn pinv_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("pseudo-inverse input", self.rows(), y.len())?;
        let svd = self.svd()?;
        let tol = svd.rank_tolerance(self.rows(), self.cols());
        let mut coeffs = svd.u.tr_mul(y);
        for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
            *c = if s > tol { *c / s } else { 0.0 };
        }
        Ok(&svd.v * coeffs)
    }

    /// Explicit `n × m` pseudo-inverse.
    pub fn pinv(&self) -> Result<DMatrix<f64>> {
        let svd = self.svd()?;
        let tol = svd.rank_tolerance(self.rows(), self.cols());
        let mut vs = svd.v.clone();
        for (j, &s) in svd.singular_values.iter().enumerate() {
            let inv = if s > tol { 1.0 / s } else { 0.0 };
            vs.column_mut(j).scale_mut(inv);
        }
        Ok(vs * svd.u.transpose())
    }
}

fn compute_svd(a: &DMatrix<f64>) -> Option<SvdFactors> {
    if a.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 0)?;
    let u = svd.u?;
    let v_t = svd.v_t?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let singular_values = DVector::from_iterator(order.len(), order.iter().map(|&i| sv[i].max(0.0)));
    let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v = DMatrix::from_columns(&order.iter().map(|&i| v_t.row(i).transpose()).collect::<Vec<_>>());
    Some(SvdFactors {
        u,
        singular_values,
        v,
    })
}

/// Bounded replacement `g(σ)` for `1/σ` in the pseudo-inverse.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralFilter {
    /// `1/σ` above `threshold`, zero otherwise.
    TruncatedSvd { threshold: f64 },
    /// `σ / (σ² + α)`.
    Tikhonov { alpha: f64 },
    /// One gain per singular index, applied directly.
    PerIndex { gains: Vec<f64> },
    /// Piecewise-linear `g(σ)` through `(sigma, gain)` knots with increasing `sigma`.
    CustomTable { sigmas: Vec<f64>, gains: Vec<f64> },
}

impl SpectralFilter {
    pub fn tikhonov(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!(
                "tikhonov filter needs alpha > 0, got {alpha}"
            )));
        }
        Ok(SpectralFilter::Tikhonov { alpha })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SpectralFilter::TruncatedSvd { .. } => "truncated-svd",
            SpectralFilter::Tikhonov { .. } => "tikhonov-filter",
            SpectralFilter::PerIndex { .. } => "per-index",
            SpectralFilter::CustomTable { .. } => "custom-table",
        }
    }

    /// Gain for the `index`-th singular value `sigma`.
    pub fn gain(&self, index: usize, sigma: f64) -> Result<f64> {
        let g = match self {
            SpectralFilter::TruncatedSvd { threshold } => {
                if sigma > *threshold && sigma > 0.0 {
                    1.0 / sigma
                } else {
                    0.0
                }
            }
            SpectralFilter::Tikhonov { alpha } => {
                if *alpha <= 0.0 {
                    return Err(Error::FilterDomain(format!("tikhonov alpha {alpha} <= 0")));
                }
                sigma / (sigma * sigma + alpha)
            }
            SpectralFilter::PerIndex { gains } => *gains.get(index).ok_or_else(|| {
                Error::FilterDomain(format!(
                    "per-index filter has {} gains, index {index} requested",
                    gains.len()
                ))
            })?,
            SpectralFilter::CustomTable { sigmas, gains } => interpolate(sigmas, gains, sigma)?,
        };
        if g.is_finite() {
            Ok(g)
        } else {
            Err(Error::FilterDomain(format!(
                "{} gain at sigma={sigma} is not finite",
                self.kind()
            )))
        }
    }

    pub fn to_record(&self) -> FilterRecord {
        let parameters = match self {
            SpectralFilter::TruncatedSvd { threshold } => vec![*threshold],
            SpectralFilter::Tikhonov { alpha } => vec![*alpha],
            SpectralFilter::PerIndex { gains } => gains.clone(),
            SpectralFilter::CustomTable { sigmas, gains } => sigmas
                .iter()
                .zip(gains)
                .flat_map(|(s, g)| [*s, *g])
                .collect(),
        };
        FilterRecord {
            kind: self.kind().to_string(),
            parameters,
        }
    }

    pub fn from_record(record: &FilterRecord) -> Result<Self> {
        let p = &record.parameters;
        let scalar = || -> Result<f64> {
            match p.as_slice() {
                [x] => Ok(*x),
                _ => Err(Error::Parameter(format!(
                    "{} expects one parameter, got {}",
                    record.kind,
                    p.len()
                ))),
            }
        };
        match record.kind.as_str() {
            "truncated-svd" => Ok(SpectralFilter::TruncatedSvd { threshold: scalar()? }),
            "tikhonov-filter" => SpectralFilter::tikhonov(scalar()?),
            "per-index" => Ok(SpectralFilter::PerIndex { gains: p.clone() }),
            "custom-table" => {
                if p.len() % 2 != 0 || p.is_empty() {
                    return Err(Error::Parameter(
                        "custom-table expects interleaved (sigma, gain) pairs".into(),
                    ));
                }
                Ok(SpectralFilter::CustomTable {
                    sigmas: p.iter().step_by(2).copied().collect(),
                    gains: p.iter().skip(1).step_by(2).copied().collect(),
                })
            }
            other => Err(Error::Parameter(format!("unknown filter kind `{other}`"))),
        }
    }
}

/// JSON shape of a [`SpectralFilter`]: `{"kind": ..., "parameters": [...]}`.
/// Custom tables interleave `sigma, gain` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub kind: String,
    pub parameters: Vec<f64>,
}

impl Serialize for SpectralFilter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralFilter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let record = FilterRecord::deserialize(d)?;
        SpectralFilter::from_record(&record).map_err(serde::de::Error::custom)
    }
}

fn interpolate(sigmas: &[f64], gains: &[f64], sigma: f64) -> Result<f64> {
    if sigmas.len() != gains.len() || sigmas.is_empty() {
        return Err(Error::FilterDomain("custom table is empty or ragged".into()));
    }
    let first = sigmas[0];
    let last = sigmas[sigmas.len() - 1];
    if sigma < first || sigma > last {
        return Err(Error::FilterDomain(format!(
            "sigma {sigma} outside table range [{first}, {last}]"
        )));
    }
    let k = sigmas.partition_point(|&s| s < sigma);
    if k == 0 {
        return Ok(gains[0]);
    }
    let (s0, s1) = (sigmas[k - 1], sigmas[k]);
    let t = if s1 > s0 { (sigma - s0) / (s1 - s0) } else { 1.0 };
    Ok(gains[k - 1] + t * (gains[k] - gains[k - 1]))
}

/// `Σ_i g(σ_i) ⟨f, u_i⟩ v_i` with `u_i` in measurement space and `v_i` in data space.
pub fn spectral_reconstruct(
    a: &LinearOperator,
    f: &DVector<f64>,
    filter: &SpectralFilter,
) -> Result<DVector<f64>> {
    check_len("measurement", a.rows(), f.len())?;
    let svd = a.svd()?;
    let mut coeffs = svd.u.tr_mul(f);
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c *= filter.gain(i, svd.singular_values[i])?;
    }
    Ok(&svd.v * coeffs)
}

/// The linear reconstruction map `V diag(g) Uᵀ` of a spectral filter.
pub fn spectral_matrix(a: &LinearOperator, filter: &SpectralFilter) -> Result<DMatrix<f64>> {
    let svd = a.svd()?;
    let mut vg = svd.v.clone();
    for i in 0..svd.rank() {
        let g = filter.gain(i, svd.singular_values[i])?;
        vg.column_mut(i).scale_mut(g);
    }
    Ok(vg * svd.u.transpose())
}

/// Per-index filter minimizing `Σ_k (g_i ⟨f_k, u_i⟩ − ⟨x_k, v_i⟩)²` for every index.
///
/// Each index decouples into a scalar least-squares problem with solution
/// `g_i = Σ c d / Σ c²`; indices with no data energy get `g_i = 0`.
pub fn fit_spectral_filter(
    dataset: &[(Signal, Measurement)],
    a: &LinearOperator,
) -> Result<SpectralFilter> {
    if dataset.is_empty() {
        return Err(Error::Parameter("spectral filter fit needs at least one pair".into()));
    }
    let svd = a.svd()?;
    let r = svd.rank();
    let mut cross = vec![0.0; r];
    let mut energy = vec![0.0; r];
    for (signal, meas) in dataset {
        check_len("training signal", a.cols(), signal.values.len())?;
        check_len("training measurement", a.rows(), meas.values.len())?;
        let c = svd.u.tr_mul(&meas.values);
        let d = svd.v.tr_mul(&signal.values);
        for i in 0..r {
            cross[i] += c[i] * d[i];
            energy[i] += c[i] * c[i];
        }
    }
    let gains = cross
        .iter()
        .zip(&energy)
        .map(|(&cd, &cc)| if cc > 0.0 { cd / cc } else { 0.0 })
        .collect();
    Ok(SpectralFilter::PerIndex { gains })
}

/// `(n−1) × n` forward differences, rows `(…, −1, +1, …)`, no boundary row.
pub fn finite_difference_matrix(n: usize) -> Result<LinearOperator> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "finite differences need n >= 2, got {n}"
        )));
    }
    let mut d = DMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        d[(i, i)] = -1.0;
        d[(i, i + 1)] = 1.0;
    }
    Ok(LinearOperator::new(d))
}

/// `D u` without forming `D`.
pub fn diff(u: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    DVector::from_iterator(n.saturating_sub(1), (0..n.saturating_sub(1)).map(|i| u[i + 1] - u[i]))
}

/// `Dᵀ z` for `z` of length `n − 1`.
pub fn diff_adjoint(z: &DVector<f64>) -> DVector<f64> {
    let k = z.len();
    let mut out = DVector::zeros(k + 1);
    for i in 0..k {
        out[i] -= z[i];
        out[i + 1] += z[i];
    }
    out
}

/// Total variation `Σ |u_i − u_{i−1}|`.
pub fn total_variation(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `A† f + (I − A†A) u`: keeps the null-space part of `u`, replaces the rest
/// with the minimum-norm data-consistent solution.
pub fn data_consistency_project(
    a: &LinearOperator,
    f: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("measurement", a.rows(), f.len())?;
    check_len("signal", a.cols(), u.len())?;
    let residual = f - a.apply(u)?;
    Ok(u + a.pinv_apply(&residual)?)
}
