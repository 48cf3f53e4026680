//! Plug-and-play proximal gradient: `u ← denoise(u − τAᵀ(Au − f))`.

use std::sync::Arc;

use nalgebra::DVector;

use super::{check_finite, DifferentiableMap, Denoiser, Diagnostics, Reconstruction, Reconstructor, SolverId, Tikhonov};
use crate::error::{check_len, Error, Result};
use crate::linops::LinearOperator;

/// Starting point of the iteration.
#[derive(Clone)]
pub enum PnpInit {
    Zero,
    Fixed(DVector<f64>),
    /// Tikhonov reconstruction of the same data.
    Tikhonov(Arc<Tikhonov>),
}

pub struct PnpPgd {
    a: Arc<LinearOperator>,
    denoiser: Arc<dyn Denoiser>,
    step_size: f64,
    iterations: usize,
    init: PnpInit,
    sigma_max: f64,
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn power_iteration_sigma_max(a: &LinearOperator, max_iter: usize, tol: f64) -> f64 {
    let n = a.cols();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y = a.entries().tr_mul(&(a.entries() * &x));
        let next = y.norm();
        if next == 0.0 {
            return 0.0;
        }
        x = y / next;
        if (next - lambda).abs() <= tol * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

impl PnpPgd {
    pub fn new(
        a: Arc<LinearOperator>,
        denoiser: Arc<dyn Denoiser>,
        step_size: f64,
        iterations: usize,
        init: PnpInit,
    ) -> Result<Self> {
        let sigma_max = power_iteration_sigma_max(&a, 10_000, 1e-12);
        if !(step_size > 0.0) || step_size * sigma_max * sigma_max >= 2.0 {
            return Err(Error::Parameter(format!(
                "step size {step_size} must lie in (0, 2/σ_max²) = (0, {})",
                2.0 / (sigma_max * sigma_max)
            )));
        }
        if let PnpInit::Fixed(u0) = &init {
            check_len("pnp initial iterate", a.cols(), u0.len())?;
        }
        Ok(Self {
            a,
            denoiser,
            step_size,
            iterations,
            init,
            sigma_max,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    fn start(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(match &self.init {
            PnpInit::Zero => DVector::zeros(self.a.cols()),
            PnpInit::Fixed(u0) => u0.clone(),
            PnpInit::Tikhonov(t) => t.apply_map(f)?,
        })
    }

    fn gradient_step(&self, u: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
        let r = self.a.entries() * u - f;
        u - self.a.entries().tr_mul(&r) * self.step_size
    }

    fn denoise_checked(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let out = self.denoiser.denoise(y);
        if out.len() != y.len() {
            return Err(Error::Contract(format!(
                "denoiser {} returned length {} for input length {}",
                self.denoiser.name(),
                out.len(),
                y.len()
            )));
        }
        Ok(out)
    }

    /// Runs the iteration, returning the final iterate and the denoiser inputs.
    fn run(&self, f: &DVector<f64>, keep_inputs: bool) -> Result<(DVector<f64>, Vec<DVector<f64>>, f64)> {
        check_len("measurement", self.a.rows(), f.len())?;
        let mut u = self.start(f)?;
        let mut inputs = Vec::new();
        let mut last_change = 0.0;
        for _ in 0..self.iterations {
            let y = self.gradient_step(&u, f);
            let next = self.denoise_checked(&y)?;
            if keep_inputs {
                inputs.push(y);
            }
            last_change = (&next - &u).norm();
            u = next;
        }
        check_finite("pnp iterate", &u)?;
        Ok((u, inputs, last_change))
    }

    /// `J(f)ᵀ r` through all iterations and the initializer.
    pub fn vjp(&self, f: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("cotangent", self.a.cols(), r.len())?;
        let (_, inputs, _) = self.run(f, true)?;
        let mut u_bar = r.clone();
        let mut f_bar = DVector::zeros(self.a.rows());
        for y in inputs.iter().rev() {
            let y_bar = self.denoiser.vjp(y, &u_bar).ok_or_else(|| Error::Backend {
                backend: "unrolled-adjoint".into(),
                solver: format!("pnp-pgd with {}", self.denoiser.name()),
            })?;
            let ay = self.a.entries() * &y_bar;
            f_bar += &ay * self.step_size;
            u_bar = &y_bar - self.a.entries().tr_mul(&ay) * self.step_size;
        }
        match &self.init {
            PnpInit::Tikhonov(t) => f_bar += t.apply_map_transpose(&u_bar)?,
            PnpInit::Zero | PnpInit::Fixed(_) => {}
        }
        Ok(f_bar)
    }
}

impl Reconstructor for PnpPgd {
    fn solver_id(&self) -> SolverId {
        SolverId::PnpPgd
    }

    fn regularization_strength(&self) -> f64 {
        self.step_size
    }

    fn operator(&self) -> &LinearOperator {
        &self.a
    }

    fn reconstruct(&self, f: &DVector<f64>) -> Result<Reconstruction> {
        let (values, _, change) = self.run(f, false)?;
        let diagnostics = Diagnostics {
            iterations: self.iterations,
            converged: true,
            optimality_residual: change,
            fixed_point_residual: Some(change),
            ..Diagnostics::default()
        };
        Ok(Reconstruction {
            values,
            solver_id: SolverId::PnpPgd,
            regularization_strength: self.step_size,
            subgradient: None,
            diagnostics,
        })
    }

    fn differentiable_at(&self, _f: &DVector<f64>) -> Result<Box<dyn DifferentiableMap + '_>> {
        Ok(Box::new(super::SelfMap(self)))
    }

    fn label(&self) -> String {
        format!("pnp-pgd({}, tau={}, I={})", self.denoiser.name(), self.step_size, self.iterations)
    }
}

impl DifferentiableMap for super::SelfMap<'_, PnpPgd> {
    fn eval(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.0.run(f, false)?.0)
    }

    fn unrolled_vjp(&self, f: &DVector<f64>, r: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(self.0.vjp(f, r))
    }
}

/// One-shot plug-and-play solve from an explicit starting point.
pub fn pnp_pgd(
    a: &LinearOperator,
    f: &DVector<f64>,
    denoiser: Arc<dyn Denoiser>,
    step_size: f64,
    iterations: usize,
    u0: DVector<f64>,
) -> Result<Reconstruction> {
    PnpPgd::new(Arc::new(a.clone()), denoiser, step_size, iterations, PnpInit::Fixed(u0))?.reconstruct(f)
}
