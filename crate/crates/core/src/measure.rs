//! Simulated throughput measurements against a hidden ground-truth mapping.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{Experiment, MeasurementSet, PortMapping3};
use crate::sim::simulate;

pub use crate::io::import_measurements;

/// Stand-in for a real processor: reports model throughput under the
/// ground truth, perturbed by multiplicative Gaussian noise clamped to ±3σ.
#[derive(Clone, Debug)]
pub struct SimulatedProcessor {
    ground_truth: PortMapping3,
    noise_rel_stddev: f64,
    rng_seed: u64,
}

impl SimulatedProcessor {
    pub fn new(ground_truth: PortMapping3, noise_rel_stddev: f64, rng_seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&noise_rel_stddev) {
            return Err(Error::InvalidConfig(format!(
                "noise_rel_stddev must be in [0, 0.5), got {noise_rel_stddev}"
            )));
        }
        Ok(SimulatedProcessor {
            ground_truth,
            noise_rel_stddev,
            rng_seed,
        })
    }

    pub fn noiseless(ground_truth: PortMapping3) -> Self {
        SimulatedProcessor {
            ground_truth,
            noise_rel_stddev: 0.0,
            rng_seed: 0,
        }
    }

    pub fn ground_truth(&self) -> &PortMapping3 {
        &self.ground_truth
    }

    /// One draw per experiment, in input order.
    pub fn measure(&self, experiments: &[Experiment]) -> Result<MeasurementSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let sigma = self.noise_rel_stddev;
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma is finite"));
        let mut entries = Vec::with_capacity(experiments.len());
        for e in experiments {
            let exact = simulate(&self.ground_truth, e)?.throughput;
            let cycles = match &noise {
                Some(dist) => {
                    let delta: f64 = dist.sample(&mut rng);
                    exact * (1.0 + delta.clamp(-3.0 * sigma, 3.0 * sigma))
                }
                None => exact,
            };
            entries.push((e.clone(), cycles));
        }
        MeasurementSet::new(entries)
    }
}
