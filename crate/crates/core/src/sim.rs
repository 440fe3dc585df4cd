//! Bottleneck throughput simulation.
//!
//! The throughput of an experiment is the maximum, over all non-empty port
//! subsets `Q`, of the mass of items that can only run inside `Q` divided by
//! `|Q|`. Enumerating subsets is exponential in the port count but is a
//! tight loop over a handful of `(mask, mass)` pairs, which beats solving
//! the equivalent linear program by a wide margin for realistic port counts.
//! See [`crate::oracle`] for the independent flow-based reference.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{
    reduce_to_two_level, Experiment, MassExperiment, PortMapping2, PortMapping3, PortSet,
};

/// Port count limit of the subset enumeration.
pub const MAX_SIM_PORTS: usize = 16;

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SimResult {
    /// Cycles per execution of the experiment.
    pub throughput: f64,
    /// A maximizing port subset; smallest cardinality, then lowest bitmask.
    pub bottleneck_ports: PortSet,
}

/// Candidate subset with its exact numerator.
#[derive(Clone, Copy)]
struct Candidate {
    mass: u64,
    mask: u32,
}

impl Candidate {
    fn width(self) -> u64 {
        self.mask.count_ones() as u64
    }

    /// `Greater` means `self` is the preferred maximizer.
    fn prefer(self, other: Candidate) -> Ordering {
        let lhs = self.mass as u128 * other.width() as u128;
        let rhs = other.mass as u128 * self.width() as u128;
        lhs.cmp(&rhs)
            .then_with(|| other.width().cmp(&self.width()))
            .then_with(|| other.mask.cmp(&self.mask))
    }

    fn into_result(self) -> SimResult {
        SimResult {
            throughput: self.mass as f64 / self.width() as f64,
            bottleneck_ports: PortSet::from_mask(self.mask).expect("candidates are non-empty"),
        }
    }
}

#[inline]
fn mass_inside(q: u32, items: &[(u32, u64)]) -> u64 {
    items
        .iter()
        .map(|&(mask, mass)| if mask & !q == 0 { mass } else { 0 })
        .sum()
}

fn check_ports(num_ports: usize) -> Result<()> {
    if num_ports > MAX_SIM_PORTS {
        return Err(Error::PortCountExceeded {
            ports: num_ports,
            max: MAX_SIM_PORTS,
        });
    }
    Ok(())
}

/// Full enumeration over every non-empty subset of the `num_ports` ports.
pub fn bottleneck_exhaustive(num_ports: usize, items: &[(PortSet, u64)]) -> Result<SimResult> {
    check_ports(num_ports)?;
    let items: Vec<(u32, u64)> = items.iter().map(|&(u, m)| (u.mask(), m)).collect();
    let mut best = Candidate { mass: 0, mask: 1 };
    for q in 1u32..(1u32 << num_ports) {
        let cand = Candidate {
            mass: mass_inside(q, &items),
            mask: q,
        };
        if cand.prefer(best) == Ordering::Greater {
            best = cand;
        }
    }
    Ok(best.into_result())
}

/// Same result as [`bottleneck_exhaustive`], enumerating only subsets of the
/// ports that some item can use. Any other subset `Q` scores no better than
/// `Q ∩ used` with a strictly larger denominator.
pub fn bottleneck(num_ports: usize, items: &[(PortSet, u64)]) -> Result<SimResult> {
    check_ports(num_ports)?;
    let items: Vec<(u32, u64)> = items
        .iter()
        .filter(|&&(_, m)| m > 0)
        .map(|&(u, m)| (u.mask(), m))
        .collect();
    Ok(bottleneck_masks(&items))
}

/// Experiments up to this many distinct items avoid a heap allocation.
const STACK_ITEMS: usize = 16;

/// Largest dense port count handled with a stack table.
const TABLE_BITS: u32 = 10;

/// Hot path on raw `(mask, mass)` pairs with positive masses.
pub(crate) fn bottleneck_masks(items: &[(u32, u64)]) -> SimResult {
    let used = items.iter().fold(0u32, |acc, &(mask, _)| acc | mask);
    let total = items
        .iter()
        .fold(0u64, |acc, &(_, m)| acc.saturating_add(m));
    let (n, k) = (items.len() as u32, used.count_ones());
    if total >= 1 << 40 || n.min(k) > TABLE_BITS {
        bottleneck_scan(items, used)
    } else if n < k {
        if n <= 6 {
            bottleneck_unions::<{ 1 << 6 }>(items, used, total)
        } else {
            bottleneck_unions::<{ 1 << TABLE_BITS }>(items, used, total)
        }
    } else if k <= 6 {
        bottleneck_table::<{ 1 << 6 }>(items, used)
    } else {
        bottleneck_table::<{ 1 << TABLE_BITS }>(items, used)
    }
}

/// Running maximizer with exact `u64` cross-multiplication.
struct Best {
    mass: u64,
    width: u64,
    mask: u32,
}

impl Best {
    fn new() -> Self {
        Best {
            mass: 0,
            width: 1,
            mask: 1,
        }
    }

    #[inline]
    fn offer(&mut self, mass: u64, mask: u32) {
        let width = mask.count_ones() as u64;
        let (lhs, rhs) = (mass * self.width, self.mass * width);
        if lhs > rhs
            || (lhs == rhs && (width < self.width || (width == self.width && mask < self.mask)))
        {
            *self = Best { mass, width, mask };
        }
    }

    fn into_result(self) -> SimResult {
        Candidate {
            mass: self.mass,
            mask: self.mask,
        }
        .into_result()
    }
}

/// Enumerates only unions of item masks. A minimum-width maximizer is
/// always such a union: dropping ports that no contained item needs keeps
/// the numerator and shrinks the denominator.
fn bottleneck_unions<const N: usize>(items: &[(u32, u64)], used: u32, total: u64) -> SimResult {
    let n = items.len();
    let mut unions = [0u32; N];
    let mut best = Best::new();
    for s in 1usize..1 << n {
        let q = unions[s & (s - 1)] | items[s.trailing_zeros() as usize].0;
        unions[s] = q;
        let mass = if q == used {
            total
        } else {
            mass_inside(q, items)
        };
        best.offer(mass, q);
    }
    best.into_result()
}

/// Direct enumeration of the subsets of `used`.
fn bottleneck_scan(items: &[(u32, u64)], used: u32) -> SimResult {
    let mut best = Candidate { mass: 0, mask: 1 };
    let mut q = used;
    while q != 0 {
        let cand = Candidate {
            mass: mass_inside(q, items),
            mask: q,
        };
        if cand.prefer(best) == Ordering::Greater {
            best = cand;
        }
        q = (q - 1) & used;
    }
    best.into_result()
}

/// Relabels the used ports to the low bits, sums masses over all subsets
/// with a subset-sum transform and scans the table. Relabeling keeps the
/// numeric order of masks, so the tie-break is unchanged. Requires a total
/// mass below 2^40 so that `mass · width` fits in a `u64`.
fn bottleneck_table<const N: usize>(items: &[(u32, u64)], used: u32) -> SimResult {
    if used == 0 {
        return Candidate { mass: 0, mask: 1 }.into_result();
    }
    let mut ports = [0u8; 32];
    let mut dense_of = [0u8; 32];
    let mut k = 0usize;
    let mut rest = used;
    while rest != 0 {
        let p = rest.trailing_zeros() as usize;
        ports[k] = p as u8;
        dense_of[p] = k as u8;
        k += 1;
        rest &= rest - 1;
    }
    let size = 1usize << k;
    let mut storage = [0u64; N];
    let table = &mut storage[..size];
    for &(mask, mass) in items {
        let mut dense = 0usize;
        let mut rest = mask;
        while rest != 0 {
            dense |= 1 << dense_of[rest.trailing_zeros() as usize];
            rest &= rest - 1;
        }
        table[dense] += mass;
    }
    for bit in 0..k {
        let step = 1usize << bit;
        for block in table.chunks_exact_mut(2 * step) {
            let (low, high) = block.split_at_mut(step);
            for (h, &l) in high.iter_mut().zip(low.iter()) {
                *h += l;
            }
        }
    }
    let (mut best_mass, mut best_width, mut best_q) = (0u64, 1u64, 0usize);
    for (q, &mass) in table.iter().enumerate().skip(1) {
        let width = q.count_ones() as u64;
        let (lhs, rhs) = (mass * best_width, best_mass * width);
        if lhs > rhs || (lhs == rhs && width < best_width) {
            best_mass = mass;
            best_width = width;
            best_q = q;
        }
    }
    let mut mask = 0u32;
    for (j, &p) in ports[..k].iter().enumerate() {
        if best_q >> j & 1 == 1 {
            mask |= 1 << p;
        }
    }
    Candidate {
        mass: best_mass,
        mask,
    }
    .into_result()
}

/// Throughput of a two-level experiment.
pub fn simulate_bottleneck<K: Ord + fmt::Display>(
    m2: &PortMapping2<K>,
    e2: &MassExperiment<K>,
) -> Result<SimResult> {
    check_ports(m2.num_ports())?;
    let lookup = |(k, mass): (&K, u64)| {
        m2.ports_of(k)
            .map(|u| (u.mask(), mass))
            .ok_or_else(|| Error::UnmappedItem(k.to_string()))
    };
    let positive = e2.iter().filter(|&(_, mass)| mass > 0);
    if e2.len() <= STACK_ITEMS {
        let mut buf = [(0u32, 0u64); STACK_ITEMS];
        let mut len = 0;
        for entry in positive {
            buf[len] = lookup(entry)?;
            len += 1;
        }
        Ok(bottleneck_masks(&buf[..len]))
    } else {
        let items = positive.map(lookup).collect::<Result<Vec<_>>>()?;
        Ok(bottleneck_masks(&items))
    }
}

/// Throughput of an experiment under a three-level mapping.
pub fn simulate(m: &PortMapping3, e: &Experiment) -> Result<SimResult> {
    let (m2, e2) = reduce_to_two_level(m, e)?;
    simulate_bottleneck(&m2, &e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures, insn, InstructionId};
    use proptest::prelude::*;

    fn exp(items: &[(&str, u32)]) -> Experiment {
        Experiment::new(items.iter().map(|&(i, c)| (insn(i), c))).unwrap()
    }

    #[test]
    fn two_level_worked_example() {
        let m2 = fixtures::two_level_example();
        let e2: MassExperiment<InstructionId> =
            MassExperiment::new([(insn("add"), 2), (insn("mul"), 1), (insn("store"), 1)]);
        let r = simulate_bottleneck(&m2, &e2).unwrap();
        assert_eq!(r.throughput, 1.5);
        assert_eq!(r.bottleneck_ports, PortSet::from_ports(&[0, 1]).unwrap());
    }

    #[test]
    fn single_port_carries_everything() {
        let u = PortSet::single(0);
        let r = bottleneck(1, &[(u, 4)]).unwrap();
        assert_eq!(r.throughput, 4.0);
        assert_eq!(r.bottleneck_ports, u);
    }

    #[test]
    fn reduced_three_level_mul_add() {
        let u1 = PortSet::single(0);
        let u2 = PortSet::from_ports(&[0, 1]).unwrap();
        let r = bottleneck(3, &[(u1, 2), (u2, 1)]).unwrap();
        assert_eq!(r.throughput, 2.0);
        assert_eq!(r.bottleneck_ports, u1);
    }

    #[test]
    fn three_level_simulation() {
        let m = fixtures::three_level_example();
        // µop masses U1=2, U2=3, U3=1; {P1,P2} carries 5 over 2 ports.
        let r = simulate(&m, &exp(&[("add", 2), ("mul", 1), ("store", 1)])).unwrap();
        assert_eq!(r.throughput, 2.5);
        assert_eq!(r.bottleneck_ports, PortSet::from_ports(&[0, 1]).unwrap());

        // U2=2, U3=2: P3 alone carries 2; {P1,P2} carries 2 over 2 ports.
        let r = simulate(&m, &exp(&[("store", 2)])).unwrap();
        assert_eq!(r.throughput, 2.0);
        assert_eq!(r.bottleneck_ports, PortSet::single(2));
    }

    #[test]
    fn single_uop_instruction() {
        let m = PortMapping3::from_edges(1, [(insn("i"), PortSet::single(0), 1)]).unwrap();
        assert_eq!(simulate(&m, &exp(&[("i", 1)])).unwrap().throughput, 1.0);
    }

    #[test]
    fn errors() {
        let m2 = fixtures::two_level_example();
        let e2 = MassExperiment::new([(insn("div"), 1)]);
        assert!(matches!(
            simulate_bottleneck(&m2, &e2),
            Err(Error::UnmappedItem(_))
        ));
        assert!(matches!(
            bottleneck(17, &[(PortSet::single(16), 1)]),
            Err(Error::PortCountExceeded { ports: 17, .. })
        ));
        assert!(matches!(
            simulate(&fixtures::three_level_example(), &exp(&[("div", 1)])),
            Err(Error::UnmappedInstruction(_))
        ));
    }

    #[test]
    fn empty_experiment_has_zero_throughput() {
        let r = bottleneck(4, &[]).unwrap();
        assert_eq!(r.throughput, 0.0);
        assert_eq!(r, bottleneck_exhaustive(4, &[]).unwrap());
    }

    #[test]
    fn tie_break_prefers_small_then_low() {
        // {P0}: 1/1, {P1}: 1/1, {P0,P1}: 2/2 all equal.
        let r = bottleneck(2, &[(PortSet::single(0), 1), (PortSet::single(1), 1)]).unwrap();
        assert_eq!(r.bottleneck_ports, PortSet::single(0));
    }

    fn arb_items() -> impl Strategy<Value = (usize, Vec<(PortSet, u64)>)> {
        (1usize..=8).prop_flat_map(|ports| {
            let max = (1u32 << ports) - 1;
            (
                Just(ports),
                prop::collection::vec(
                    (1u32..=max)
                        .prop_map(|m| PortSet::from_mask(m).unwrap())
                        .prop_flat_map(|u| (Just(u), 1u64..=10)),
                    1..=10,
                ),
            )
        })
    }

    proptest! {
        #[test]
        fn pruned_equals_exhaustive((ports, items) in arb_items()) {
            prop_assert_eq!(bottleneck(ports, &items).unwrap(), bottleneck_exhaustive(ports, &items).unwrap());
        }

        #[test]
        fn wide_and_heavy_instances_agree(
            ports in 9usize..=12,
            raw in prop::collection::vec((1u32..4096, prop_oneof![1u64..=10, (1u64 << 40)..(1u64 << 42)]), 1..=14),
        ) {
            let items: Vec<(PortSet, u64)> = raw
                .iter()
                .map(|&(m, mass)| (PortSet::from_mask(m & ((1 << ports) - 1)).unwrap_or(PortSet::single(0)), mass))
                .collect();
            prop_assert_eq!(bottleneck(ports, &items).unwrap(), bottleneck_exhaustive(ports, &items).unwrap());
        }

        #[test]
        fn lower_bounds_hold((ports, items) in arb_items()) {
            let r = bottleneck(ports, &items).unwrap();
            let total: u64 = items.iter().map(|&(_, m)| m).sum();
            prop_assert!(r.throughput >= total as f64 / ports as f64 - 1e-12);
            for &(u, m) in &items {
                prop_assert!(r.throughput >= m as f64 / u.width() as f64 - 1e-12);
            }
            let inside: u64 = items.iter().filter(|(u, _)| u.is_subset_of(r.bottleneck_ports)).map(|&(_, m)| m).sum();
            prop_assert_eq!(r.throughput, inside as f64 / r.bottleneck_ports.width() as f64);
        }

        #[test]
        fn saturation((ports, masses) in (1usize..=8, prop::collection::vec(1u64..=10, 1..6)), port in 0usize..8) {
            let port = port % ports;
            let items: Vec<_> = masses.iter().map(|&m| (PortSet::single(port), m)).collect();
            prop_assert_eq!(bottleneck(ports, &items).unwrap().throughput, masses.iter().sum::<u64>() as f64);
        }
    }
}
