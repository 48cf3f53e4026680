//! Ground-truth signals, Gaussian forward operators and noisy measurements.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linops::{LinearOperator, OperatorGeneration};
use crate::rng::{rng_from_seed, PRNG_ALGORITHM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub index: usize,
    /// Realized `values[index] − values[index − 1]`.
    pub height: f64,
}

/// Piecewise-constant ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub values: DVector<f64>,
    pub jumps: Vec<Jump>,
    pub seed: u64,
}

impl Signal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of absolute jump heights, in index order.
    pub fn jump_variation(&self) -> f64 {
        self.jumps.iter().map(|j| j.height.abs()).sum()
    }
}

/// Shape of the random piecewise-constant signal family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalSpec {
    pub n: usize,
    /// Inclusive range for the number of jumps.
    pub jump_count: (usize, usize),
    /// Inclusive range of jump heights.
    pub height_range: (f64, f64),
    /// Value of the signal before the first jump.
    pub base_level: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            n: 1024,
            jump_count: (1, 10),
            height_range: (-1.0, 1.0),
            base_level: 0.0,
        }
    }
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.jump_count;
        if self.n < 2 {
            return Err(Error::Parameter(format!("signal length must be >= 2, got {}", self.n)));
        }
        if lo > hi || hi > self.n - 1 {
            return Err(Error::Parameter(format!(
                "jump count range [{lo}, {hi}] must lie within [0, {}]",
                self.n - 1
            )));
        }
        let (a, b) = self.height_range;
        if !(a.is_finite() && b.is_finite()) || a > b {
            return Err(Error::Parameter(format!("invalid height range [{a}, {b}]")));
        }
        if hi > 0 && a == 0.0 && b == 0.0 {
            return Err(Error::Parameter("height range [0, 0] cannot produce jumps".into()));
        }
        Ok(())
    }
}

/// Draws a piecewise-constant signal: jump count uniform on `spec.jump_count`,
/// positions uniform without replacement from `1..n`, heights uniform on
/// `spec.height_range` (exact zeros redrawn).
pub fn generate_signal(spec: &SignalSpec, seed: u64) -> Result<Signal> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let n = spec.n;
    let (lo, hi) = spec.jump_count;
    let count = rng.random_range(lo..=hi);
    let mut positions: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, count)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    positions.sort_unstable();

    let (a, b) = spec.height_range;
    let mut increments = vec![0.0; n];
    for &p in &positions {
        let mut h = 0.0;
        while h == 0.0 {
            h = if a == b { a } else { rng.random_range(a..=b) };
        }
        increments[p] = h;
    }

    let mut values = DVector::zeros(n);
    values[0] = spec.base_level;
    let mut jumps = Vec::with_capacity(count);
    for i in 1..n {
        values[i] = values[i - 1] + increments[i];
        let realized = values[i] - values[i - 1];
        if increments[i] != 0.0 {
            if realized == 0.0 {
                return Err(Error::Numerical(format!(
                    "jump at {i} absorbed by rounding; shrink base_level or widen heights"
                )));
            }
            jumps.push(Jump { index: i, height: realized });
        }
    }
    Ok(Signal { values, jumps, seed })
}

/// `m × n` matrix of i.i.d. `N(mean, variance)` entries, filled row by row.
pub fn generate_operator(m: usize, n: usize, mean: f64, variance: f64, seed: u64) -> Result<LinearOperator> {
    if m == 0 || n == 0 {
        return Err(Error::Parameter(format!("operator shape {m}x{n} must be positive")));
    }
    if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
        return Err(Error::Parameter(format!(
            "operator needs finite mean and variance > 0, got mean={mean} variance={variance}"
        )));
    }
    let normal = Normal::new(mean, variance.sqrt()).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let entries = DMatrix::from_row_iterator(m, n, (0..m * n).map(|_| normal.sample(&mut rng)));
    Ok(LinearOperator::with_generation(
        entries,
        OperatorGeneration {
            distribution: "gaussian".into(),
            mean,
            variance,
            seed,
            prng: PRNG_ALGORITHM.into(),
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub signal_seed: u64,
    pub operator_seed: Option<u64>,
    pub noise_seed: u64,
}

/// `values = clean + noise`, with `noise` stored as realized so the identity
/// holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub values: DVector<f64>,
    pub noise: DVector<f64>,
    pub clean: DVector<f64>,
    pub provenance: Provenance,
}

impl Measurement {
    pub fn noise_norm(&self) -> f64 {
        self.noise.norm()
    }
}

pub fn measure(a: &LinearOperator, u: &Signal, noise_std: f64, seed: u64) -> Result<Measurement> {
    check_len("signal", a.cols(), u.len())?;
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Parameter(format!("noise std must be >= 0, got {noise_std}")));
    }
    let clean = a.apply(&u.values)?;
    let m = clean.len();
    let mut values = clean.clone();
    let mut noise = DVector::zeros(m);
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Parameter(e.to_string()))?;
        let mut rng = rng_from_seed(seed);
        for i in 0..m {
            values[i] = clean[i] + normal.sample(&mut rng);
            noise[i] = values[i] - clean[i];
        }
    }
    Ok(Measurement {
        values,
        noise,
        clean,
        provenance: Provenance {
            signal_seed: u.seed,
            operator_seed: a.generation().map(|g| g.seed),
            noise_seed: seed,
        },
    })
}
