//! Random synthetic instances: ground-truth mappings for recovery runs and
//! two-level problems for simulator/oracle cross-checks.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{InstructionId, MassExperiment, PortMapping2, PortMapping3, PortSet, MAX_PORTS};

/// `i00`, `i01`, …; zero-padded so name order equals index order.
pub fn synthetic_isa(n: usize) -> Vec<InstructionId> {
    let width = n.saturating_sub(1).to_string().len().max(2);
    (0..n)
        .map(|k| InstructionId::new(format!("i{k:0width$}")).expect("non-empty"))
        .collect()
}

#[derive(Clone, Debug)]
pub struct GroundTruthShape {
    pub num_insns: usize,
    pub num_ports: usize,
    pub max_uops_per_insn: usize,
    pub max_multiplicity: u32,
}

/// Each instruction gets 1..=max_uops distinct random µops, each with
/// multiplicity 1..=max_multiplicity.
pub fn random_ground_truth<R: Rng + ?Sized>(
    shape: &GroundTruthShape,
    rng: &mut R,
) -> Result<PortMapping3> {
    let GroundTruthShape {
        num_insns,
        num_ports,
        max_uops_per_insn,
        max_multiplicity,
    } = *shape;
    if num_insns == 0 {
        return Err(Error::EmptyIsa);
    }
    if num_ports == 0 || num_ports > MAX_PORTS.min(16) {
        return Err(Error::InvalidConfig(format!(
            "unsupported port count {num_ports}"
        )));
    }
    if max_uops_per_insn == 0 || max_multiplicity == 0 {
        return Err(Error::InvalidConfig(
            "µop and multiplicity limits must be positive".into(),
        ));
    }
    let subsets = (1usize << num_ports) - 1;
    let mut edges = Vec::new();
    for i in synthetic_isa(num_insns) {
        let k = rng.random_range(1..=max_uops_per_insn.min(subsets));
        for idx in index::sample(rng, subsets, k) {
            let u = PortSet::from_mask(idx as u32 + 1).expect("non-zero");
            edges.push((i.clone(), u, rng.random_range(1..=max_multiplicity)));
        }
    }
    PortMapping3::from_edges(num_ports, edges)
}

/// A two-level instance: up to `max_items` distinct µops on `ports` ports
/// with masses in `1..=max_mass`.
pub fn random_two_level<R: Rng + ?Sized>(
    ports: usize,
    max_items: usize,
    max_mass: u64,
    rng: &mut R,
) -> (PortMapping2<PortSet>, MassExperiment<PortSet>) {
    assert!((1..=16).contains(&ports) && max_items >= 1 && max_mass >= 1);
    let subsets = (1usize << ports) - 1;
    let k = rng.random_range(1..=max_items.min(subsets));
    let uops: Vec<PortSet> = index::sample(rng, subsets, k)
        .into_iter()
        .map(|idx| PortSet::from_mask(idx as u32 + 1).expect("non-zero"))
        .collect();
    let masses: Vec<(PortSet, u64)> = uops
        .iter()
        .map(|&u| (u, rng.random_range(1..=max_mass)))
        .collect();
    let m2 = PortMapping2::new(ports, uops.iter().map(|&u| (u, u))).expect("ports in range");
    (m2, MassExperiment::new(masses))
}
