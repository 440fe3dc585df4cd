use portmap_core::congruence::{partition, project, DEFAULT_EPS};
use portmap_core::eval::{gen_benchmark, mape, predict};
use portmap_core::evolution::{evolve, EvoConfig, TrainingSet};
use portmap_core::expgen::{gen_all, gen_basic};
use portmap_core::io;
use portmap_core::measure::SimulatedProcessor;
use portmap_core::{insn, InstructionId, MeasurementSet, PortMapping3, PortSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn single_port_truth() -> PortMapping3 {
    PortMapping3::from_edges(
        3,
        [
            (insn("load"), PortSet::single(0), 1),
            (insn("mov"), PortSet::single(1), 1),
            (insn("movb"), PortSet::single(1), 1),
            (insn("st"), PortSet::single(2), 2),
        ],
    )
    .unwrap()
}

fn measure_everything(gt: &PortMapping3) -> MeasurementSet {
    let isa: Vec<InstructionId> = gt.instructions().cloned().collect();
    let proc = SimulatedProcessor::noiseless(gt.clone());
    let basic = proc.measure(&gen_basic(&isa).unwrap()).unwrap();
    proc.measure(&gen_all(&isa, &basic.singleton_throughputs()).unwrap())
        .unwrap()
}

#[test]
fn recovers_a_single_port_mapping_through_files() {
    let gt = single_port_truth();
    let dir = tempfile::tempdir().unwrap();
    let meas_path = dir.path().join("meas.json");
    io::write_measurements(&meas_path, &measure_everything(&gt)).unwrap();

    let meas = io::import_measurements(&meas_path).unwrap();
    let isa = meas.instructions();
    let classes = partition(&meas, &isa, DEFAULT_EPS);
    assert_eq!(classes.representative_of(&insn("movb")), Some(&insn("mov")));
    let train = project(&meas, &classes);
    let reps = classes.representatives();

    let cfg = EvoConfig {
        population_size: 200,
        max_iterations: 60,
        rng_seed: 11,
        ..EvoConfig::default()
    };
    let found = evolve(&train, &reps, 3, &cfg).unwrap();
    assert_eq!(
        TrainingSet::new(&train, &reps)
            .unwrap()
            .d_avg(&found)
            .unwrap(),
        0.0,
        "{}",
        io::mapping_to_string(&found)
    );

    let full = classes.expand_mapping(&found).unwrap();
    let mapping_path = dir.path().join("mapping.json");
    io::write_mapping(&mapping_path, &full).unwrap();
    let full = io::read_mapping(&mapping_path).unwrap();

    let bench = gen_benchmark(&isa, 5, 300, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let truth = SimulatedProcessor::noiseless(gt).measure(&bench).unwrap();
    let measured: Vec<f64> = truth.iter().map(|m| m.cycles).collect();
    let experiments: Vec<_> = truth.iter().map(|m| m.experiment.clone()).collect();
    let predicted: Vec<f64> = predict(&full, &experiments)
        .unwrap()
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    assert_eq!(mape(&predicted, &measured).unwrap(), 0.0);
}

#[test]
fn generated_sets_survive_a_file_round_trip() {
    let gt = single_port_truth();
    let isa: Vec<InstructionId> = gt.instructions().cloned().collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("experiments.json");
    let experiments = gen_basic(&isa).unwrap();
    io::write_experiments(&path, &experiments, None).unwrap();
    assert_eq!(io::read_experiments(&path).unwrap(), experiments);

    let isa_path = dir.path().join("isa.json");
    io::write_isa(&isa_path, &isa).unwrap();
    assert_eq!(io::read_isa(&isa_path).unwrap(), isa);
}
