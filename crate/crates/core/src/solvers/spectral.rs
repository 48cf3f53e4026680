use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{stationarity, DifferentiableMap, Diagnostics, Reconstruction, Reconstructor, SelfMap, SolverId};
use crate::error::{check_len, Result};
use crate::linops::{spectral_matrix, LinearOperator, SpectralFilter};

/// Filtered pseudo-inverse `V diag(g) Uᵀ` as a reconstructor.
pub struct SpectralSolver {
    a: Arc<LinearOperator>,
    filter: SpectralFilter,
    map: DMatrix<f64>,
}

impl SpectralSolver {
    pub fn new(a: Arc<LinearOperator>, filter: SpectralFilter) -> Result<Self> {
        let map = spectral_matrix(&a, &filter)?;
        Ok(Self { a, filter, map })
    }

    pub fn filter(&self) -> &SpectralFilter {
        &self.filter
    }
}

impl Reconstructor for SpectralSolver {
    fn solver_id(&self) -> SolverId {
        SolverId::Spectral
    }

    fn regularization_strength(&self) -> f64 {
        match self.filter {
            SpectralFilter::Tikhonov { alpha } => alpha,
            SpectralFilter::TruncatedSvd { threshold } => threshold,
            _ => 0.0,
        }
    }

    fn operator(&self) -> &LinearOperator {
        &self.a
    }

    fn reconstruct(&self, f: &DVector<f64>) -> Result<Reconstruction> {
        check_len("measurement", self.a.rows(), f.len())?;
        let values = &self.map * f;
        // The tikhonov filter minimizes ½‖Au − f‖² + (α/2)‖u‖².
        let subgradient = match self.filter {
            SpectralFilter::Tikhonov { alpha } => Some(&values * alpha),
            _ => None,
        };
        let stationarity_residual = subgradient.as_ref().map(|p| stationarity(&self.a, f, &values, p));
        Ok(Reconstruction {
            values,
            solver_id: SolverId::Spectral,
            regularization_strength: self.regularization_strength(),
            subgradient,
            diagnostics: Diagnostics {
                iterations: 1,
                converged: true,
                stationarity_residual,
                ..Diagnostics::default()
            },
        })
    }

    fn differentiable_at(&self, _f: &DVector<f64>) -> Result<Box<dyn DifferentiableMap + '_>> {
        Ok(Box::new(SelfMap(self)))
    }

    fn label(&self) -> String {
        format!("spectral({})", self.filter.kind())
    }
}

impl DifferentiableMap for SelfMap<'_, SpectralSolver> {
    fn eval(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("measurement", self.0.a.rows(), f.len())?;
        Ok(&self.0.map * f)
    }

    fn transpose_apply(&self, r: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(check_len("cotangent", self.0.a.cols(), r.len()).map(|_| self.0.map.tr_mul(r)))
    }
}
