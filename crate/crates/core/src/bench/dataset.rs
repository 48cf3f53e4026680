use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, SignalsConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::linops::{LinearOperator, OperatorGeneration};
use crate::rng::{derive_seed, PRNG_ALGORITHM};
use crate::signals::{generate_operator, generate_signal, measure, Jump, Measurement, Provenance, Signal, SignalSpec};

const STREAM_SIGNAL: u64 = 0;
const STREAM_NOISE: u64 = 1;

/// A ground-truth signal with its noisy measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub index: usize,
    pub signal: Signal,
    pub measurement: Measurement,
}

impl Instance {
    pub fn ground_truth(&self) -> &DVector<f64> {
        &self.signal.values
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.measurement.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSeeds {
    pub train: u64,
    pub validation: u64,
    pub test: u64,
}

/// Noise statistics of a split; both `E‖n‖` and `E‖n‖²` are reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub mean_norm: f64,
    pub mean_norm_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub m: usize,
    pub noise_std: f64,
    pub operator: OperatorGeneration,
    pub signals: SignalsConfig,
    pub counts: SplitCounts,
    pub seeds: SplitSeeds,
    pub prng: String,
    pub noise: Vec<(String, NoiseSummary)>,
    pub library_version: String,
}

pub struct Dataset {
    pub operator: Arc<LinearOperator>,
    pub train: Vec<Instance>,
    pub validation: Vec<Instance>,
    pub test: Vec<Instance>,
    pub manifest: DatasetManifest,
}

fn noise_summary(split: &[Instance]) -> NoiseSummary {
    if split.is_empty() {
        return NoiseSummary { mean_norm: 0.0, mean_norm_squared: 0.0 };
    }
    let k = split.len() as f64;
    NoiseSummary {
        mean_norm: split.iter().map(|i| i.measurement.noise_norm()).sum::<f64>() / k,
        mean_norm_squared: split.iter().map(|i| i.measurement.noise.norm_squared()).sum::<f64>() / k,
    }
}

/// `count` instances; instance `i` uses seeds derived from `(base, i)` only.
pub fn generate_split(
    a: &LinearOperator,
    spec: &SignalSpec,
    noise_std: f64,
    base_seed: u64,
    count: usize,
) -> Result<Vec<Instance>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let signal = generate_signal(spec, derive_seed(base_seed, STREAM_SIGNAL, i as u64))?;
            let mut measurement = measure(a, &signal, noise_std, derive_seed(base_seed, STREAM_NOISE, i as u64))?;
            measurement.provenance.operator_seed = a.generation().map(|g| g.seed);
            Ok(Instance { index: i, signal, measurement })
        })
        .collect()
}

impl Dataset {
    /// Generates operator and splits from a config whose seeds are populated.
    /// The training split is skipped unless `with_train`.
    pub fn generate(config: &BenchConfig, with_train: bool) -> Result<Self> {
        let seeds = &config.seeds;
        let a = Arc::new(generate_operator(
            config.m,
            config.n,
            config.operator.mean,
            config.operator.variance,
            seeds.operator(),
        )?);
        let spec = config.signal_spec();
        let counts = SplitCounts {
            train: if with_train { config.dataset.train } else { 0 },
            validation: config.dataset.validation,
            test: config.dataset.test,
        };
        let split_seeds = SplitSeeds { train: seeds.train(), validation: seeds.validation(), test: seeds.test() };
        let train = generate_split(&a, &spec, config.noise_std, split_seeds.train, counts.train)?;
        let validation = generate_split(&a, &spec, config.noise_std, split_seeds.validation, counts.validation)?;
        let test = generate_split(&a, &spec, config.noise_std, split_seeds.test, counts.test)?;
        let manifest = DatasetManifest {
            n: config.n,
            m: config.m,
            noise_std: config.noise_std,
            operator: a.generation().cloned().expect("generated operators record their generation"),
            signals: config.signals.clone(),
            counts,
            seeds: split_seeds,
            prng: PRNG_ALGORITHM.to_string(),
            noise: vec![
                ("train".into(), noise_summary(&train)),
                ("validation".into(), noise_summary(&validation)),
                ("test".into(), noise_summary(&test)),
            ],
            library_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        Ok(Self { operator: a, train, validation, test, manifest })
    }

    fn splits(&self) -> [(&'static str, &Vec<Instance>); 3] {
        [("train", &self.train), ("validation", &self.validation), ("test", &self.test)]
    }

    /// Writes `dataset.json`, `operator.bin` and per split
    /// `<split>_signals.bin` / `<split>_measurements.bin` (one row per instance).
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_json(&dir.join("dataset.json"), &self.manifest)?;
        io::write_matrix(&dir.join("operator.bin"), self.operator.entries())?;
        for (name, split) in self.splits() {
            if split.is_empty() {
                continue;
            }
            let u: Vec<&DVector<f64>> = split.iter().map(|i| &i.signal.values).collect();
            let f: Vec<&DVector<f64>> = split.iter().map(|i| &i.measurement.values).collect();
            io::write_rows(&dir.join(format!("{name}_signals.bin")), &u)?;
            io::write_rows(&dir.join(format!("{name}_measurements.bin")), &f)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest = io::read_json(&dir.join("dataset.json"))?;
        let entries = io::read_matrix(&dir.join("operator.bin"))?;
        if entries.shape() != (manifest.m, manifest.n) {
            return Err(Error::Format {
                path: dir.join("operator.bin"),
                reason: format!("operator is {:?}, manifest says {}x{}", entries.shape(), manifest.m, manifest.n),
            });
        }
        let a = Arc::new(LinearOperator::with_generation(entries, manifest.operator.clone()));
        let counts = manifest.counts;
        let load_split = |name: &str, count: usize, seed: u64| -> Result<Vec<Instance>> {
            if count == 0 {
                return Ok(Vec::new());
            }
            let up = dir.join(format!("{name}_signals.bin"));
            let fp = dir.join(format!("{name}_measurements.bin"));
            let us = io::read_rows(&up)?;
            let fs = io::read_rows(&fp)?;
            if us.len() != count || fs.len() != count {
                return Err(Error::Format {
                    path: up,
                    reason: format!("{name} split holds {}/{} rows, manifest says {count}", us.len(), fs.len()),
                });
            }
            us.into_iter()
                .zip(fs)
                .enumerate()
                .map(|(i, (u, f))| {
                    if u.len() != manifest.n || f.len() != manifest.m {
                        return Err(Error::Format { path: up.clone(), reason: format!("row {i} has the wrong length") });
                    }
                    let jumps = (1..u.len())
                        .filter(|&k| u[k] != u[k - 1])
                        .map(|k| Jump { index: k, height: u[k] - u[k - 1] })
                        .collect();
                    let signal_seed = derive_seed(seed, STREAM_SIGNAL, i as u64);
                    let clean = a.entries() * &u;
                    let noise = &f - &clean;
                    Ok(Instance {
                        index: i,
                        signal: Signal { values: u, jumps, seed: signal_seed },
                        measurement: Measurement {
                            values: f,
                            noise,
                            clean,
                            provenance: Provenance {
                                signal_seed,
                                operator_seed: Some(manifest.operator.seed),
                                noise_seed: derive_seed(seed, STREAM_NOISE, i as u64),
                            },
                        },
                    })
                })
                .collect()
        };
        let train = load_split("train", counts.train, manifest.seeds.train)?;
        let validation = load_split("validation", counts.validation, manifest.seeds.validation)?;
        let test = load_split("test", counts.test, manifest.seeds.test)?;
        Ok(Self { operator: a, train, validation, test, manifest })
    }

    /// Training pairs in the form the learned-linear fit expects.
    pub fn training_pairs(&self) -> Vec<(Signal, Measurement)> {
        self.train.iter().map(|i| (i.signal.clone(), i.measurement.clone())).collect()
    }
}
