//! Linear reconstructor `L` fit to training pairs by ridge regression.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{DifferentiableMap, Diagnostics, Reconstruction, Reconstructor, SelfMap, SolverId};
use crate::error::{check_len, Error, Result};
use crate::linops::LinearOperator;
use crate::signals::{Measurement, Signal};

/// Eigenvalues of `FFᵀ` below `m · λ_max · 1e-14` are dropped when `ridge = 0`.
const GRAM_RANK_FACTOR: f64 = 1e-14;

/// Minimizes `Σ_k ‖L f_k − u_k‖² + ridge‖L‖²_F`, i.e.
/// `L = U Fᵀ (F Fᵀ + ridge I)⁻¹` with samples stacked as columns. With
/// `ridge = 0` the pseudo-inverse of `FFᵀ` gives the minimum-norm fit.
pub fn learned_linear_fit(train: &[(Signal, Measurement)], ridge: f64) -> Result<DMatrix<f64>> {
    let (first_u, first_f) = match train.first() {
        Some((s, m)) => (s.values.len(), m.values.len()),
        None => return Err(Error::Parameter("learned-linear fit needs at least one pair".into())),
    };
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Parameter(format!("ridge must be >= 0, got {ridge}")));
    }
    for (s, m) in train {
        check_len("training signal", first_u, s.values.len())?;
        check_len("training measurement", first_f, m.values.len())?;
    }
    let f_mat = DMatrix::from_columns(&train.iter().map(|(_, m)| m.values.clone()).collect::<Vec<_>>());
    let u_mat = DMatrix::from_columns(&train.iter().map(|(s, _)| s.values.clone()).collect::<Vec<_>>());
    let cross = &u_mat * f_mat.transpose();
    let mut gram = &f_mat * f_mat.transpose();
    let m = gram.nrows();

    if ridge > 0.0 {
        for i in 0..m {
            gram[(i, i)] += ridge;
        }
        let chol = gram.cholesky().ok_or_else(|| {
            Error::Numerical("FFᵀ + ridge·I lost positive definiteness".into())
        })?;
        // Lᵀ = (FFᵀ + ridge I)⁻¹ (U Fᵀ)ᵀ
        return Ok(chol.solve(&cross.transpose()).transpose());
    }

    let eig = gram.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = m as f64 * lambda_max * GRAM_RANK_FACTOR;
    if lambda_max <= 0.0 {
        return Err(Error::Numerical(
            "training measurements are all zero; FFᵀ is singular, use a positive ridge".into(),
        ));
    }
    let mut q_scaled = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let inv = if l > cutoff { 1.0 / l } else { 0.0 };
        q_scaled.column_mut(j).scale_mut(inv);
    }
    let gram_pinv = q_scaled * eig.eigenvectors.transpose();
    Ok(cross * gram_pinv)
}

/// Reconstruction `û = L f` with a pre-fit `n × m` matrix.
pub struct LearnedLinear {
    a: Arc<LinearOperator>,
    map: Arc<DMatrix<f64>>,
}

impl LearnedLinear {
    pub fn new(a: Arc<LinearOperator>, map: Arc<DMatrix<f64>>) -> Result<Self> {
        check_len("learned map rows", a.cols(), map.nrows())?;
        check_len("learned map columns", a.rows(), map.ncols())?;
        Ok(Self { a, map })
    }

    pub fn map(&self) -> &DMatrix<f64> {
        &self.map
    }
}

impl Reconstructor for LearnedLinear {
    fn solver_id(&self) -> SolverId {
        SolverId::LearnedLinear
    }

    fn regularization_strength(&self) -> f64 {
        0.0
    }

    fn operator(&self) -> &LinearOperator {
        &self.a
    }

    fn reconstruct(&self, f: &DVector<f64>) -> Result<Reconstruction> {
        check_len("measurement", self.a.rows(), f.len())?;
        Ok(Reconstruction {
            values: self.map.as_ref() * f,
            solver_id: SolverId::LearnedLinear,
            regularization_strength: 0.0,
            subgradient: None,
            diagnostics: Diagnostics {
                iterations: 1,
                converged: true,
                ..Diagnostics::default()
            },
        })
    }

    fn differentiable_at(&self, _f: &DVector<f64>) -> Result<Box<dyn DifferentiableMap + '_>> {
        Ok(Box::new(SelfMap(self)))
    }

    fn label(&self) -> String {
        "learned-linear".into()
    }
}

impl DifferentiableMap for SelfMap<'_, LearnedLinear> {
    fn eval(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("measurement", self.0.a.rows(), f.len())?;
        Ok(self.0.map.as_ref() * f)
    }

    fn transpose_apply(&self, r: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(check_len("cotangent", self.0.a.cols(), r.len()).map(|_| self.0.map.tr_mul(r)))
    }
}
