use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_finite, stationarity, DifferentiableMap, Diagnostics, Reconstruction, Reconstructor, SelfMap, SolverId};
use crate::error::{check_len, Error, Result};
use crate::linops::{finite_difference_matrix, LinearOperator};

/// `û = (AᵀA + αDᵀD)⁻¹ Aᵀ f`, stored as an explicit `n × m` matrix.
///
/// The matrix comes from a QR factorization of the stacked operator
/// `[A; √α·D]` rather than from the normal equations, whose condition number
/// is the square of the stacked one and reaches ~1e14 for small `α`.
pub struct Tikhonov {
    a: Arc<LinearOperator>,
    alpha: f64,
    /// `DᵀD`.
    dtd: DMatrix<f64>,
    system: DMatrix<f64>,
    map: DMatrix<f64>,
}

impl Tikhonov {
    pub fn new(a: Arc<LinearOperator>, d: &LinearOperator, alpha: f64) -> Result<Self> {
        check_len("regularization operator columns", a.cols(), d.cols())?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("tikhonov alpha must be >= 0, got {alpha}")));
        }
        let (m, n, p) = (a.rows(), a.cols(), d.rows());
        if m + p < n {
            return Err(singular(alpha));
        }
        let mut stacked = DMatrix::zeros(m + p, n);
        stacked.view_mut((0, 0), (m, n)).copy_from(a.entries());
        stacked.view_mut((m, 0), (p, n)).copy_from(&(d.entries() * alpha.sqrt()));
        let qr = stacked.qr();
        let r = qr.r();
        let diag = r.diagonal().abs();
        let floor = (m + p) as f64 * f64::EPSILON * diag.max();
        if diag.iter().any(|&x| x <= floor) {
            return Err(singular(alpha));
        }
        let q_top = qr.q().rows(0, m).transpose();
        let map = r.solve_upper_triangular(&q_top).ok_or_else(|| singular(alpha))?;
        let dtd = d.entries().tr_mul(d.entries());
        let system = a.entries().tr_mul(a.entries()) + &dtd * alpha;
        Ok(Self {
            a,
            alpha,
            dtd,
            system,
            map,
        })
    }

    /// Tikhonov with the forward-difference matrix as `D`.
    pub fn with_finite_differences(a: Arc<LinearOperator>, alpha: f64) -> Result<Self> {
        let d = finite_difference_matrix(a.cols())?;
        Self::new(a, &d, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `M f` with `M = (AᵀA + αDᵀD)⁻¹ Aᵀ`.
    pub fn apply_map(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("measurement", self.a.rows(), f.len())?;
        Ok(&self.map * f)
    }

    /// `Mᵀ r = A (AᵀA + αDᵀD)⁻¹ r`.
    pub fn apply_map_transpose(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("reconstruction-space vector", self.a.cols(), r.len())?;
        Ok(self.map.tr_mul(r))
    }

    /// Gradient of `(α/2)‖Du‖²`.
    pub fn subgradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.dtd * u * self.alpha
    }

    pub fn normal_residual(&self, u: &DVector<f64>, f: &DVector<f64>) -> f64 {
        (&self.system * u - self.a.entries().tr_mul(f)).norm()
    }
}

fn singular(alpha: f64) -> Error {
    Error::DegenerateRegularization(format!(
        "AᵀA + {alpha}·DᵀD is singular: null(A) and null(D) share a nonzero vector"
    ))
}

impl Reconstructor for Tikhonov {
    fn solver_id(&self) -> SolverId {
        SolverId::Tikhonov
    }

    fn regularization_strength(&self) -> f64 {
        self.alpha
    }

    fn operator(&self) -> &LinearOperator {
        &self.a
    }

    fn reconstruct(&self, f: &DVector<f64>) -> Result<Reconstruction> {
        let values = self.apply_map(f)?;
        check_finite("tikhonov reconstruction", &values)?;
        let p = self.subgradient(&values);
        let diagnostics = Diagnostics {
            iterations: 1,
            converged: true,
            optimality_residual: self.normal_residual(&values, f),
            stationarity_residual: Some(stationarity(&self.a, f, &values, &p)),
            ..Diagnostics::default()
        };
        Ok(Reconstruction {
            values,
            solver_id: SolverId::Tikhonov,
            regularization_strength: self.alpha,
            subgradient: Some(p),
            diagnostics,
        })
    }

    fn differentiable_at(&self, _f: &DVector<f64>) -> Result<Box<dyn DifferentiableMap + '_>> {
        Ok(Box::new(SelfMap(self)))
    }
}

impl DifferentiableMap for SelfMap<'_, Tikhonov> {
    fn eval(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        self.0.apply_map(f)
    }

    fn transpose_apply(&self, r: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(self.0.apply_map_transpose(r))
    }
}

/// One-shot Tikhonov solve with an explicit regularization operator.
pub fn tikhonov(a: &LinearOperator, d: &LinearOperator, f: &DVector<f64>, alpha: f64) -> Result<Reconstruction> {
    Tikhonov::new(Arc::new(a.clone()), d, alpha)?.reconstruct(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_case_is_diagonal_shrinkage() {
        let a = LinearOperator::identity(4);
        let d = LinearOperator::identity(4);
        let f = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let rec = tikhonov(&a, &d, &f, 0.25).unwrap();
        assert_relative_eq!(rec.values, &f / 1.25, epsilon = 1e-14);
        let p = rec.subgradient.unwrap();
        assert_relative_eq!(p, &rec.values * 0.25, epsilon = 1e-14);
    }

    #[test]
    fn shared_null_space_is_rejected() {
        // A annihilates constants and so does D.
        let a = LinearOperator::new(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
        let d = finite_difference_matrix(2).unwrap();
        let err = Tikhonov::new(Arc::new(a), &d, 1.0).err().unwrap();
        assert!(matches!(err, Error::DegenerateRegularization(_)));
    }

    #[test]
    fn negative_alpha_rejected() {
        let a = Arc::new(LinearOperator::identity(2));
        assert!(Tikhonov::with_finite_differences(a, -1.0).is_err());
    }

    #[test]
    fn transpose_is_adjoint() {
        let a = Arc::new(LinearOperator::new(DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 0.5, -0.3, 0.2, 1.5, 0.7],
        )));
        let t = Tikhonov::with_finite_differences(a, 0.3).unwrap();
        let f = DVector::from_vec(vec![0.4, -1.1]);
        let r = DVector::from_vec(vec![0.2, 0.9, -0.5]);
        let lhs = t.apply_map(&f).unwrap().dot(&r);
        let rhs = f.dot(&t.apply_map_transpose(&r).unwrap());
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }
}
