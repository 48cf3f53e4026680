//! Denoisers for plug-and-play iterations.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// A denoising map used in place of a proximal step.
pub trait Denoiser: Send + Sync {
    fn name(&self) -> String;

    fn denoise(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `J(x)ᵀ v`, where defined.
    fn vjp(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

impl fmt::Debug for dyn Denoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Serializable choice among the built-in denoisers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DenoiserKind {
    Identity,
    /// `prox_{λ TV}`; `strength` is λ.
    TvProx { strength: f64 },
    MovingAverage { half_width: usize },
}

impl DenoiserKind {
    pub fn build(&self) -> Box<dyn Denoiser> {
        match *self {
            DenoiserKind::Identity => Box::new(IdentityDenoiser),
            DenoiserKind::TvProx { strength } => Box::new(TvProx { strength }),
            DenoiserKind::MovingAverage { half_width } => Box::new(MovingAverage { half_width }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn name(&self) -> String {
        "identity".into()
    }

    fn denoise(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }

    fn vjp(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(v.clone())
    }
}

/// Exact 1D TV proximal map `argmin_x ½‖x − y‖² + λ Σ|x_{i+1} − x_i|`.
#[derive(Debug, Clone, Copy)]
pub struct TvProx {
    pub strength: f64,
}

impl Denoiser for TvProx {
    fn name(&self) -> String {
        format!("tv-prox({})", self.strength)
    }

    fn denoise(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(tv_prox(x.as_slice(), self.strength))
    }

    /// Almost everywhere the prox is constant-segment averaging: each output
    /// run of equal values is the input mean over that run plus a shift that
    /// only depends on the jump signs.
    fn vjp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let out = tv_prox(x.as_slice(), self.strength);
        let mut grad = DVector::zeros(out.len());
        let mut start = 0;
        while start < out.len() {
            let mut end = start + 1;
            while end < out.len() && out[end] == out[start] {
                end += 1;
            }
            let mean = v.rows(start, end - start).sum() / (end - start) as f64;
            grad.rows_mut(start, end - start).fill(mean);
            start = end;
        }
        Some(grad)
    }
}

/// Centered window average, truncated at the boundaries.
#[derive(Debug, Clone, Copy)]
pub struct MovingAverage {
    pub half_width: usize,
}

impl MovingAverage {
    fn window(&self, i: usize, n: usize) -> (usize, usize) {
        (i.saturating_sub(self.half_width), (i + self.half_width + 1).min(n))
    }
}

impl Denoiser for MovingAverage {
    fn name(&self) -> String {
        format!("moving-average({})", self.half_width)
    }

    fn denoise(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let (lo, hi) = self.window(i, n);
                x.rows(lo, hi - lo).sum() / (hi - lo) as f64
            }),
        )
    }

    fn vjp(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let n = v.len();
        let mut grad = DVector::zeros(n);
        for i in 0..n {
            let (lo, hi) = self.window(i, n);
            let share = v[i] / (hi - lo) as f64;
            for g in grad.rows_mut(lo, hi - lo).iter_mut() {
                *g += share;
            }
        }
        Some(grad)
    }
}

/// Condat's direct (taut-string) algorithm for the 1D TV prox, O(n) typical.
pub fn tv_prox(input: &[f64], lambda: f64) -> Vec<f64> {
    let width = input.len();
    let mut output = vec![0.0; width];
    if width == 0 {
        return output;
    }
    if lambda <= 0.0 {
        output.copy_from_slice(input);
        return output;
    }
    let minlambda = -lambda;
    let twolambda = 2.0 * lambda;
    let (mut k, mut k0) = (0usize, 0usize);
    let (mut kplus, mut kminus) = (0usize, 0usize);
    let mut umin = lambda;
    let mut umax = minlambda;
    let mut vmin = input[0] - lambda;
    let mut vmax = input[0] + lambda;
    loop {
        while k == width - 1 {
            if umin < 0.0 {
                while k0 <= kminus {
                    output[k0] = vmin;
                    k0 += 1;
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                while k0 <= kplus {
                    output[k0] = vmax;
                    k0 += 1;
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    output[k0] = vmin;
                    k0 += 1;
                }
                return output;
            }
        }
        umin += input[k + 1] - vmin;
        if umin < minlambda {
            while k0 <= kminus {
                output[k0] = vmin;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = input[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if umax > lambda {
            while k0 <= kplus {
                output[k0] = vmax;
                k0 += 1;
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = input[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= minlambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = minlambda;
        }
    }
}
