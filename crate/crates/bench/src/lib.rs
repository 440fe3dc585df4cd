//! Shared inputs for the criterion benches.

use portmap_core::expgen::{gen_all, gen_basic};
use portmap_core::measure::SimulatedProcessor;
use portmap_core::synth::{random_ground_truth, random_two_level, GroundTruthShape};
use portmap_core::{
    Experiment, InstructionId, MassExperiment, MeasurementSet, PortMapping2, PortMapping3, PortSet,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TwoLevel = (PortMapping2<PortSet>, MassExperiment<PortSet>);

/// `count` random two-level instances with `items` µops each on `ports` ports.
pub fn two_level_instances(ports: usize, items: usize, count: usize, seed: u64) -> Vec<TwoLevel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_two_level(ports, items, 10, &mut rng))
        .collect()
}

/// A ground truth with noiseless measurements over all generated experiments.
pub fn recovery_problem(
    shape: &GroundTruthShape,
    seed: u64,
) -> (PortMapping3, Vec<InstructionId>, MeasurementSet) {
    let gt = random_ground_truth(shape, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid shape");
    let isa: Vec<InstructionId> = gt.instructions().cloned().collect();
    let proc = SimulatedProcessor::noiseless(gt.clone());
    let basic = proc
        .measure(&gen_basic(&isa).expect("non-empty"))
        .expect("mapped");
    let all: Vec<Experiment> = gen_all(&isa, &basic.singleton_throughputs()).expect("measured");
    let meas = proc.measure(&all).expect("mapped");
    (gt, isa, meas)
}
