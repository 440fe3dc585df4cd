//! Domain vocabulary: instructions, µops (identified by their port sets),
//! port mappings in the two- and three-level model, experiments and
//! measurements.
//!
//! Every type here is immutable once built and keeps itself in canonical
//! form, so structural equality is mapping equality.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Largest port count a [`PortSet`] can represent. The bottleneck simulator
/// applies the tighter [`crate::sim::MAX_SIM_PORTS`] limit.
pub const MAX_PORTS: usize = 32;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct InstructionId(String);

impl InstructionId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidExperiment("empty instruction name".into()));
        }
        Ok(InstructionId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for InstructionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand for tests and literals. Panics on an empty name.
pub fn insn(name: &str) -> InstructionId {
    InstructionId::new(name).expect("instruction names are non-empty")
}

/// A µop, identified by the non-empty set of ports that can execute it.
///
/// Ordering follows the raw bitmask, which is the canonical edge order used
/// throughout the crate.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PortSet(u32);

impl PortSet {
    pub fn from_mask(mask: u32) -> Option<Self> {
        (mask != 0).then_some(PortSet(mask))
    }

    pub fn from_ports(ports: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &p in ports {
            if p >= MAX_PORTS {
                return Err(Error::InvalidMapping(format!(
                    "port index {p} out of range"
                )));
            }
            mask |= 1 << p;
        }
        PortSet::from_mask(mask).ok_or_else(|| Error::InvalidMapping("empty port set".into()))
    }

    pub fn single(port: usize) -> Self {
        assert!(port < MAX_PORTS);
        PortSet(1 << port)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    /// Number of ports that can execute this µop.
    pub fn width(self) -> u32 {
        self.0.count_ones()
    }

    pub fn ports(self) -> impl Iterator<Item = usize> {
        (0..MAX_PORTS).filter(move |p| self.0 >> p & 1 == 1)
    }

    pub fn is_subset_of(self, other: PortSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// True if every port index is below `num_ports`.
    pub fn fits(self, num_ports: usize) -> bool {
        num_ports >= MAX_PORTS || self.0 >> num_ports == 0
    }
}

impl fmt::Display for PortSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, p) in self.ports().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "P{p}")?;
        }
        f.write_str("}")
    }
}

fn check_num_ports(num_ports: usize) -> Result<()> {
    if num_ports == 0 || num_ports > MAX_PORTS {
        return Err(Error::InvalidMapping(format!(
            "num_ports must be in 1..={MAX_PORTS}, got {num_ports}"
        )));
    }
    Ok(())
}

/// Three-level port mapping: each instruction decomposes into µops with
/// multiplicities, each µop runs on one port out of its port set.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PortMapping3 {
    num_ports: usize,
    assignment: BTreeMap<InstructionId, BTreeMap<PortSet, u32>>,
}

impl PortMapping3 {
    /// Builds a mapping from `(instruction, µop, multiplicity)` edges.
    /// Repeated `(instruction, µop)` pairs are merged by summing.
    pub fn from_edges<I>(num_ports: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (InstructionId, PortSet, u32)>,
    {
        check_num_ports(num_ports)?;
        let mut assignment: BTreeMap<InstructionId, BTreeMap<PortSet, u32>> = BTreeMap::new();
        for (i, u, n) in edges {
            if n == 0 {
                return Err(Error::InvalidMapping(format!(
                    "zero multiplicity for `{i}`"
                )));
            }
            if !u.fits(num_ports) {
                return Err(Error::InvalidMapping(format!(
                    "µop {u} of `{i}` uses a port >= {num_ports}"
                )));
            }
            *assignment.entry(i).or_default().entry(u).or_insert(0) += n;
        }
        Ok(PortMapping3 {
            num_ports,
            assignment,
        })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn instructions(&self) -> impl Iterator<Item = &InstructionId> {
        self.assignment.keys()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn contains(&self, i: &InstructionId) -> bool {
        self.assignment.contains_key(i)
    }

    /// µops of `i` with their multiplicities, in bitmask order.
    pub fn uops(&self, i: &InstructionId) -> Option<&BTreeMap<PortSet, u32>> {
        self.assignment.get(i)
    }

    /// All edges in canonical order (instruction name, then µop bitmask).
    pub fn edges(&self) -> impl Iterator<Item = (&InstructionId, PortSet, u32)> {
        self.assignment
            .iter()
            .flat_map(|(i, us)| us.iter().map(move |(&u, &n)| (i, u, n)))
    }

    /// µop volume: Σ n·|u| over all edges.
    pub fn volume(&self) -> u64 {
        self.edges()
            .map(|(_, u, n)| n as u64 * u.width() as u64)
            .sum()
    }

    /// Returns a copy with the multiplicity of `(i, u)` set to `n`; `n == 0`
    /// removes the edge. Fails if that would leave `i` without µops.
    pub fn with_multiplicity(&self, i: &InstructionId, u: PortSet, n: u32) -> Result<Self> {
        let mut out = self.clone();
        let uops = out
            .assignment
            .get_mut(i)
            .ok_or_else(|| Error::UnmappedInstruction(i.clone()))?;
        if n == 0 {
            uops.remove(&u);
            if uops.is_empty() {
                return Err(Error::InvalidMapping(format!("`{i}` would have no µops")));
            }
        } else {
            if !u.fits(self.num_ports) {
                return Err(Error::InvalidMapping(format!("µop {u} out of range")));
            }
            uops.insert(u, n);
        }
        Ok(out)
    }

    /// Copy of the mapping restricted to `keep`.
    pub fn restricted<'a>(&self, keep: impl IntoIterator<Item = &'a InstructionId>) -> Self {
        let assignment = keep
            .into_iter()
            .filter_map(|i| self.assignment.get_key_value(i))
            .map(|(i, us)| (i.clone(), us.clone()))
            .collect();
        PortMapping3 {
            num_ports: self.num_ports,
            assignment,
        }
    }

    /// Adds `alias` with the decomposition of `source`.
    pub fn with_alias(&self, alias: InstructionId, source: &InstructionId) -> Result<Self> {
        let uops = self
            .assignment
            .get(source)
            .ok_or_else(|| Error::UnmappedInstruction(source.clone()))?
            .clone();
        let mut out = self.clone();
        out.assignment.insert(alias, uops);
        Ok(out)
    }
}

/// Two-level port mapping over arbitrary item ids: each item runs on exactly
/// one port out of its port set.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PortMapping2<K: Ord> {
    num_ports: usize,
    allowed: BTreeMap<K, PortSet>,
}

impl<K: Ord + fmt::Display> PortMapping2<K> {
    pub fn new<I>(num_ports: usize, allowed: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, PortSet)>,
    {
        check_num_ports(num_ports)?;
        let allowed: BTreeMap<K, PortSet> = allowed.into_iter().collect();
        if let Some((k, u)) = allowed.iter().find(|(_, u)| !u.fits(num_ports)) {
            return Err(Error::InvalidMapping(format!(
                "item `{k}` uses {u}; only {num_ports} ports exist"
            )));
        }
        Ok(PortMapping2 { num_ports, allowed })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn ports_of(&self, item: &K) -> Option<PortSet> {
        self.allowed.get(item).copied()
    }

    pub fn items(&self) -> impl Iterator<Item = (&K, PortSet)> {
        self.allowed.iter().map(|(k, &u)| (k, u))
    }
}

/// An experiment in the two-level model: item → mass.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MassExperiment<K: Ord>(BTreeMap<K, u64>);

impl<K: Ord> MassExperiment<K> {
    /// Zero masses are dropped.
    pub fn new<I: IntoIterator<Item = (K, u64)>>(masses: I) -> Self {
        let mut out = BTreeMap::new();
        for (k, m) in masses {
            if m > 0 {
                *out.entry(k).or_insert(0) += m;
            }
        }
        MassExperiment(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, u64)> {
        self.0.iter().map(|(k, &m)| (k, m))
    }

    pub fn mass(&self, k: &K) -> u64 {
        self.0.get(k).copied().unwrap_or(0)
    }

    pub fn total_mass(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A multiset of instructions.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Experiment {
    counts: BTreeMap<InstructionId, u32>,
}

impl Experiment {
    /// Repeated instructions are summed. Fails if the result is empty or
    /// contains a zero count.
    pub fn new<I>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (InstructionId, u32)>,
    {
        let mut out: BTreeMap<InstructionId, u32> = BTreeMap::new();
        for (i, c) in counts {
            if c == 0 {
                return Err(Error::InvalidExperiment(format!("zero count for `{i}`")));
            }
            *out.entry(i).or_insert(0) += c;
        }
        if out.is_empty() {
            return Err(Error::InvalidExperiment("empty experiment".into()));
        }
        Ok(Experiment { counts: out })
    }

    pub fn singleton(i: InstructionId) -> Self {
        Experiment {
            counts: BTreeMap::from([(i, 1)]),
        }
    }

    pub fn pair(a: InstructionId, na: u32, b: InstructionId, nb: u32) -> Result<Self> {
        Experiment::new([(a, na), (b, nb)])
    }

    pub fn counts(&self) -> impl Iterator<Item = (&InstructionId, u32)> {
        self.counts.iter().map(|(i, &c)| (i, c))
    }

    pub fn count(&self, i: &InstructionId) -> u32 {
        self.counts.get(i).copied().unwrap_or(0)
    }

    pub fn instructions(&self) -> impl Iterator<Item = &InstructionId> {
        self.counts.keys()
    }

    /// Number of distinct instructions.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn total_mass(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    /// The single instruction of a `{i ↦ 1}` experiment.
    pub fn as_singleton(&self) -> Option<&InstructionId> {
        match self.counts.iter().next() {
            Some((i, 1)) if self.counts.len() == 1 => Some(i),
            _ => None,
        }
    }

    pub fn scaled(&self, k: u32) -> Self {
        assert!(k > 0);
        Experiment {
            counts: self
                .counts
                .iter()
                .map(|(i, &c)| (i.clone(), c * k))
                .collect(),
        }
    }

    /// Copy with one more instance of `i`.
    pub fn with_added(&self, i: InstructionId) -> Self {
        let mut out = self.clone();
        *out.counts.entry(i).or_insert(0) += 1;
        out
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (i, c)) in self.counts.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{i}: {c}")?;
        }
        f.write_str("}")
    }
}

/// Decomposes `e` into its µop masses under `m`.
///
/// Each µop `u` receives `Σ e(i)·n` over the edges `(i, n, u)`; the returned
/// two-level mapping covers exactly the µops with positive mass.
pub fn reduce_to_two_level(
    m: &PortMapping3,
    e: &Experiment,
) -> Result<(PortMapping2<PortSet>, MassExperiment<PortSet>)> {
    let mut masses: BTreeMap<PortSet, u64> = BTreeMap::new();
    for (i, count) in e.counts() {
        let uops = m
            .uops(i)
            .ok_or_else(|| Error::UnmappedInstruction(i.clone()))?;
        for (&u, &n) in uops {
            *masses.entry(u).or_insert(0) += count as u64 * n as u64;
        }
    }
    let m2 = PortMapping2 {
        num_ports: m.num_ports(),
        allowed: masses.keys().map(|&u| (u, u)).collect(),
    };
    Ok((m2, MassExperiment(masses)))
}

#[derive(Clone, PartialEq, Debug)]
pub struct Measurement {
    pub experiment: Experiment,
    pub cycles: f64,
}

/// Experiments paired with throughputs in cycles per experiment execution.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct MeasurementSet {
    entries: Vec<Measurement>,
}

impl MeasurementSet {
    /// Validates throughputs and merges duplicate experiments by the median
    /// of their cycles. First-occurrence order is kept.
    pub fn new<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Experiment, f64)>,
    {
        let mut order: Vec<Experiment> = Vec::new();
        let mut samples: BTreeMap<Experiment, Vec<f64>> = BTreeMap::new();
        for (e, cycles) in entries {
            if !(cycles.is_finite() && cycles > 0.0) {
                return Err(Error::NonPositiveThroughput {
                    experiment: e.to_string(),
                    value: cycles,
                });
            }
            let slot = samples.entry(e.clone()).or_default();
            if slot.is_empty() {
                order.push(e);
            }
            slot.push(cycles);
        }
        let entries = order
            .into_iter()
            .map(|e| {
                let cycles = median(samples.remove(&e).expect("every ordered key has samples"));
                Measurement {
                    experiment: e,
                    cycles,
                }
            })
            .collect();
        Ok(MeasurementSet { entries })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Measurement> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, e: &Experiment) -> Option<f64> {
        self.entries
            .iter()
            .find(|m| &m.experiment == e)
            .map(|m| m.cycles)
    }

    /// Throughputs of all `{i ↦ 1}` experiments.
    pub fn singleton_throughputs(&self) -> BTreeMap<InstructionId, f64> {
        self.entries
            .iter()
            .filter_map(|m| m.experiment.as_singleton().map(|i| (i.clone(), m.cycles)))
            .collect()
    }

    /// Sorted set of all instructions mentioned by any experiment.
    pub fn instructions(&self) -> Vec<InstructionId> {
        let mut out: Vec<InstructionId> = self
            .entries
            .iter()
            .flat_map(|m| m.experiment.instructions().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Keeps the entries for which `keep` holds.
    pub fn filtered(&self, mut keep: impl FnMut(&Measurement) -> bool) -> Self {
        MeasurementSet {
            entries: self.entries.iter().filter(|m| keep(m)).cloned().collect(),
        }
    }

    /// Scales every throughput by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        assert!(k > 0.0 && k.is_finite());
        MeasurementSet {
            entries: self
                .entries
                .iter()
                .map(|m| Measurement {
                    experiment: m.experiment.clone(),
                    cycles: m.cycles * k,
                })
                .collect(),
        }
    }
}

impl<'a> IntoIterator for &'a MeasurementSet {
    type Item = &'a Measurement;
    type IntoIter = std::slice::Iter<'a, Measurement>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Median; the mean of the two middle values for even lengths.
pub(crate) fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

/// Fixtures for the small worked mappings used across the test suites.
pub mod fixtures {
    use super::*;

    /// `mul → {P1}`, `add, sub → {P1,P2}`, `store → {P3}` as a two-level
    /// mapping, ports renumbered 0-based.
    pub fn two_level_example() -> PortMapping2<InstructionId> {
        let p12 = PortSet::from_ports(&[0, 1]).unwrap();
        PortMapping2::new(
            3,
            [
                (insn("mul"), PortSet::single(0)),
                (insn("add"), p12),
                (insn("sub"), p12),
                (insn("store"), PortSet::single(2)),
            ],
        )
        .unwrap()
    }

    /// The same mapping in the three-level model (one µop per instruction).
    pub fn two_level_example_as_three() -> PortMapping3 {
        let p12 = PortSet::from_ports(&[0, 1]).unwrap();
        PortMapping3::from_edges(
            3,
            [
                (insn("mul"), PortSet::single(0), 1),
                (insn("add"), p12, 1),
                (insn("sub"), p12, 1),
                (insn("store"), PortSet::single(2), 1),
            ],
        )
        .unwrap()
    }

    /// `mul → 2×U1`, `add, sub → U2`, `store → U2 + U3` with
    /// `U1 = {P1}`, `U2 = {P1,P2}`, `U3 = {P3}`, ports renumbered 0-based.
    pub fn three_level_example() -> PortMapping3 {
        let u1 = PortSet::single(0);
        let u2 = PortSet::from_ports(&[0, 1]).unwrap();
        let u3 = PortSet::single(2);
        PortMapping3::from_edges(
            3,
            [
                (insn("mul"), u1, 2),
                (insn("add"), u2, 1),
                (insn("sub"), u2, 1),
                (insn("store"), u2, 1),
                (insn("store"), u3, 1),
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn exp(items: &[(&str, u32)]) -> Experiment {
        Experiment::new(items.iter().map(|&(i, c)| (insn(i), c))).unwrap()
    }

    #[test]
    fn reduce_mul_add() {
        let (m2, e2) =
            reduce_to_two_level(&three_level_example(), &exp(&[("mul", 1), ("add", 1)])).unwrap();
        let u1 = PortSet::single(0);
        let u2 = PortSet::from_ports(&[0, 1]).unwrap();
        assert_eq!(e2, MassExperiment::new([(u1, 2), (u2, 1)]));
        assert_eq!(m2.items().count(), 2);
        assert_eq!(m2.ports_of(&u2), Some(u2));
    }

    #[test]
    fn reduce_single_edge_is_identity() {
        let u = PortSet::from_ports(&[1, 3]).unwrap();
        let m = PortMapping3::from_edges(4, [(insn("i"), u, 1)]).unwrap();
        let (_, e2) = reduce_to_two_level(&m, &exp(&[("i", 7)])).unwrap();
        assert_eq!(e2, MassExperiment::new([(u, 7)]));
    }

    #[test]
    fn reduce_store_twice() {
        let (_, e2) = reduce_to_two_level(&three_level_example(), &exp(&[("store", 2)])).unwrap();
        let u2 = PortSet::from_ports(&[0, 1]).unwrap();
        assert_eq!(e2, MassExperiment::new([(u2, 2), (PortSet::single(2), 2)]));
    }

    #[test]
    fn reduce_unmapped_instruction() {
        let err = reduce_to_two_level(&three_level_example(), &exp(&[("div", 1)])).unwrap_err();
        assert!(matches!(err, Error::UnmappedInstruction(i) if i.as_str() == "div"));
    }

    #[test]
    fn edges_merge_duplicates() {
        let u = PortSet::single(1);
        let m = PortMapping3::from_edges(2, [(insn("a"), u, 1), (insn("a"), u, 2)]).unwrap();
        assert_eq!(m.uops(&insn("a")).unwrap()[&u], 3);
        assert_eq!(m.volume(), 3);
    }

    #[test]
    fn mapping_rejects_bad_input() {
        assert!(PortMapping3::from_edges(2, [(insn("a"), PortSet::single(2), 1)]).is_err());
        assert!(PortMapping3::from_edges(2, [(insn("a"), PortSet::single(0), 0)]).is_err());
        assert!(PortMapping3::from_edges(0, []).is_err());
        assert!(PortSet::from_ports(&[]).is_err());
        assert!(PortSet::from_mask(0).is_none());
    }

    #[test]
    fn volume_counts_width() {
        // 2·1 + 1·2 + 1·2 + (1·2 + 1·1)
        assert_eq!(three_level_example().volume(), 9);
    }

    #[test]
    fn experiment_invariants() {
        assert!(Experiment::new([]).is_err());
        assert!(Experiment::new([(insn("a"), 0)]).is_err());
        let e = exp(&[("a", 1), ("b", 2), ("a", 1)]);
        assert_eq!(e.count(&insn("a")), 2);
        assert_eq!(e.total_mass(), 4);
        assert_eq!(e.to_string(), "{a: 2, b: 2}");
    }

    #[test]
    fn measurement_set_merges_by_median() {
        let a = exp(&[("a", 1)]);
        let b = exp(&[("b", 1)]);
        let set = MeasurementSet::new([
            (b.clone(), 4.0),
            (a.clone(), 1.0),
            (b.clone(), 1.0),
            (b.clone(), 2.0),
        ])
        .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.get(&b), Some(2.0));
        assert_eq!(set.iter().next().unwrap().experiment, b);
        assert!(MeasurementSet::new([(a.clone(), 0.0)]).is_err());
        assert!(MeasurementSet::new([(a, f64::NAN)]).is_err());
    }

    #[test]
    fn portset_display() {
        assert_eq!(PortSet::from_ports(&[0, 2]).unwrap().to_string(), "{P0,P2}");
        assert_eq!(PortSet::from_ports(&[0, 2]).unwrap().width(), 2);
    }

    fn arb_mapping() -> impl Strategy<Value = PortMapping3> {
        (1usize..=6).prop_flat_map(|ports| {
            let max_mask = (1u32 << ports) - 1;
            prop::collection::vec((0usize..5, 1u32..=max_mask, 1u32..4), 1..12).prop_map(
                move |edges| {
                    PortMapping3::from_edges(
                        ports,
                        edges.into_iter().map(|(i, mask, n)| {
                            (insn(&format!("i{i}")), PortSet::from_mask(mask).unwrap(), n)
                        }),
                    )
                    .unwrap()
                },
            )
        })
    }

    fn arb_experiment_for(m: &PortMapping3) -> impl Strategy<Value = Experiment> {
        let names: Vec<InstructionId> = m.instructions().cloned().collect();
        prop::collection::vec((prop::sample::select(names), 1u32..5), 1..5)
            .prop_map(|items| Experiment::new(items).unwrap())
    }

    proptest! {
        #[test]
        fn reduction_is_linear_and_conserves_mass(
            (m, e, k) in arb_mapping().prop_flat_map(|m| {
                let es = arb_experiment_for(&m);
                (Just(m), es, 1u32..6)
            })
        ) {
            let (_, e2) = reduce_to_two_level(&m, &e).unwrap();
            let (_, ke2) = reduce_to_two_level(&m, &e.scaled(k)).unwrap();
            for (u, mass) in e2.iter() {
                prop_assert_eq!(ke2.mass(u), mass * k as u64);
            }
            prop_assert_eq!(ke2.len(), e2.len());

            let expected: u64 = e
                .counts()
                .map(|(i, c)| c as u64 * m.uops(i).unwrap().values().map(|&n| n as u64).sum::<u64>())
                .sum();
            prop_assert_eq!(e2.total_mass(), expected);
        }
    }
}
