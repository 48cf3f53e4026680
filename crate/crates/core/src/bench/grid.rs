use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Instance;
use crate::error::{Error, Result};
use crate::linops::LinearOperator;
use crate::solvers::{PenaltyCache, Reconstructor, SolverId, SolverParams, Tikhonov, TvAdmm};

/// `points` log-spaced values from `min` to `max`, both included.
pub fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (lo, hi) = (min.ln(), max.ln());
            (0..points)
                .map(|k| {
                    if k == 0 {
                        min
                    } else if k + 1 == points {
                        max
                    } else {
                        (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    /// Mean `‖û − u_gt‖²` over the solves that succeeded.
    pub mean_error: Option<f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub solver: SolverId,
    pub chosen: f64,
    pub points: Vec<GridPoint>,
}

/// Builds the `α`-parameterized solvers the grid search supports. TV solvers
/// built from one factory share their factorizations.
pub struct AlphaFamily {
    id: SolverId,
    a: Arc<LinearOperator>,
    params: SolverParams,
    cache: Option<Arc<PenaltyCache>>,
}

impl AlphaFamily {
    pub fn new(id: SolverId, a: Arc<LinearOperator>, params: SolverParams) -> Result<Self> {
        let cache = match id {
            SolverId::Tikhonov => None,
            SolverId::TvAdmm => Some(Arc::new(PenaltyCache::new(a.clone()))),
            other => return Err(Error::Parameter(format!("{other} has no regularization strength to tune"))),
        };
        Ok(Self { id, a, params, cache })
    }

    pub fn build(&self, alpha: f64) -> Result<Box<dyn Reconstructor>> {
        Ok(match &self.cache {
            Some(cache) => Box::new(TvAdmm::new(cache.clone(), alpha, self.params.clone())?),
            None => Box::new(Tikhonov::with_finite_differences(self.a.clone(), alpha)?),
        })
    }
}

/// Arg-min over `grid` of the mean validation error; ties go to the larger `α`.
pub fn grid_search_alpha(family: &AlphaFamily, grid: &[f64], validation: &[Instance]) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty alpha grid".into()));
    }
    if validation.is_empty() {
        return Err(Error::Parameter("empty validation set".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let solver = match family.build(alpha) {
            Ok(s) => s,
            Err(e) => {
                points.push(GridPoint { alpha, mean_error: None, failures: vec![e.to_string()] });
                continue;
            }
        };
        let outcomes: Vec<std::result::Result<f64, String>> = validation
            .par_iter()
            .map(|inst| {
                solver
                    .reconstruct(inst.data())
                    .map(|r| (r.values - inst.ground_truth()).norm_squared())
                    .map_err(|e| format!("instance {}: {e}", inst.index))
            })
            .collect();
        let (ok, failures): (Vec<_>, Vec<_>) = outcomes.into_iter().partition(|o| o.is_ok());
        let errors: Vec<f64> = ok.into_iter().map(|o| o.unwrap()).collect();
        let mean_error = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
        points.push(GridPoint {
            alpha,
            mean_error,
            failures: failures.into_iter().map(|f| f.unwrap_err()).collect(),
        });
    }
    let mut best: Option<(f64, f64)> = None;
    for p in &points {
        if let Some(e) = p.mean_error {
            let better = match best {
                None => true,
                Some((be, ba)) => e < be || (e == be && p.alpha > ba),
            };
            if better {
                best = Some((e, p.alpha));
            }
        }
    }
    match best {
        Some((_, chosen)) => Ok(GridSearch { solver: family.id, chosen, points }),
        None => {
            let listing: Vec<String> = points
                .iter()
                .flat_map(|p| p.failures.iter().map(move |f| format!("alpha={}: {f}", p.alpha)))
                .collect();
            Err(Error::Search(listing.join("; ")))
        }
    }
}
