//! Experiment families: singletons, unordered pairs, and weighted pairs that
//! balance a slow instruction against enough copies of a faster one.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{Experiment, InstructionId};

/// Values within this distance of an integer are snapped before rounding up.
pub const INTEGER_GUARD: f64 = 1e-9;

/// `⌈x⌉`, treating values within [`INTEGER_GUARD`] of an integer as that
/// integer.
pub fn guarded_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= INTEGER_GUARD {
        r
    } else {
        x.ceil()
    }
}

/// One `{i ↦ 1}` per instruction, in ISA order.
pub fn gen_singletons(isa: &[InstructionId]) -> Result<Vec<Experiment>> {
    if isa.is_empty() {
        return Err(Error::EmptyIsa);
    }
    Ok(isa.iter().cloned().map(Experiment::singleton).collect())
}

/// `{a ↦ 1, b ↦ 1}` for every unordered pair, in ISA order.
pub fn gen_pairs(isa: &[InstructionId]) -> Result<Vec<Experiment>> {
    if isa.len() < 2 {
        return Err(Error::TooFewInstructions {
            needed: 2,
            got: isa.len(),
        });
    }
    let mut out = Vec::with_capacity(isa.len() * (isa.len() - 1) / 2);
    for (k, a) in isa.iter().enumerate() {
        for b in &isa[k + 1..] {
            out.push(Experiment::pair(a.clone(), 1, b.clone(), 1)?);
        }
    }
    Ok(out)
}

/// `{a ↦ 1, b ↦ n}` with `n = ⌈tp(a)/tp(b)⌉` for every ordered pair with
/// `tp(a) > tp(b)`. A ratio that snaps to 1 counts as equal throughput.
pub fn gen_weighted_pairs(
    isa: &[InstructionId],
    singleton_tp: &BTreeMap<InstructionId, f64>,
) -> Result<Vec<Experiment>> {
    let tps = isa
        .iter()
        .map(|i| {
            singleton_tp
                .get(i)
                .copied()
                .ok_or_else(|| Error::MissingThroughput(i.clone()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::new();
    for (a, &tp_a) in isa.iter().zip(&tps) {
        for (b, &tp_b) in isa.iter().zip(&tps) {
            if a == b || tp_a <= tp_b {
                continue;
            }
            let n = guarded_ceil(tp_a / tp_b);
            if n < 2.0 {
                continue;
            }
            out.push(Experiment::pair(a.clone(), 1, b.clone(), n as u32)?);
        }
    }
    Ok(out)
}

/// Concatenation of `parts` with later duplicates dropped.
pub fn dedup_experiments<I: IntoIterator<Item = Experiment>>(parts: I) -> Vec<Experiment> {
    let mut seen = BTreeSet::new();
    parts
        .into_iter()
        .filter(|e| seen.insert(e.clone()))
        .collect()
}

/// Singletons followed by pairs; weighted pairs need measured singletons.
pub fn gen_basic(isa: &[InstructionId]) -> Result<Vec<Experiment>> {
    let mut out = gen_singletons(isa)?;
    if isa.len() >= 2 {
        out.extend(gen_pairs(isa)?);
    }
    Ok(dedup_experiments(out))
}

/// All three families.
pub fn gen_all(
    isa: &[InstructionId],
    singleton_tp: &BTreeMap<InstructionId, f64>,
) -> Result<Vec<Experiment>> {
    let mut out = gen_basic(isa)?;
    out.extend(gen_weighted_pairs(isa, singleton_tp)?);
    Ok(dedup_experiments(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::insn;
    use proptest::prelude::*;

    fn isa(names: &[&str]) -> Vec<InstructionId> {
        names.iter().map(|n| insn(n)).collect()
    }

    fn exp(items: &[(&str, u32)]) -> Experiment {
        Experiment::new(items.iter().map(|&(i, c)| (insn(i), c))).unwrap()
    }

    #[test]
    fn singletons() {
        assert_eq!(
            gen_singletons(&isa(&["a", "b"])).unwrap(),
            vec![exp(&[("a", 1)]), exp(&[("b", 1)])]
        );
        assert_eq!(gen_singletons(&isa(&["a"])).unwrap().len(), 1);
        assert!(matches!(gen_singletons(&[]), Err(Error::EmptyIsa)));
        let big: Vec<_> = (0..310).map(|k| insn(&format!("f{k}"))).collect();
        assert_eq!(gen_singletons(&big).unwrap().len(), 310);
    }

    #[test]
    fn pairs() {
        assert_eq!(
            gen_pairs(&isa(&["a", "b", "c"])).unwrap(),
            vec![
                exp(&[("a", 1), ("b", 1)]),
                exp(&[("a", 1), ("c", 1)]),
                exp(&[("b", 1), ("c", 1)])
            ]
        );
        assert_eq!(
            gen_pairs(&isa(&["a", "b"])).unwrap(),
            vec![exp(&[("a", 1), ("b", 1)])]
        );
        let big: Vec<_> = (0..310).map(|k| insn(&format!("f{k}"))).collect();
        assert_eq!(gen_pairs(&big).unwrap().len(), 47_895);
        assert!(gen_pairs(&isa(&["a"])).is_err());
    }

    fn tps(values: &[(&str, f64)]) -> BTreeMap<InstructionId, f64> {
        values.iter().map(|&(i, t)| (insn(i), t)).collect()
    }

    #[test]
    fn weighted_pairs() {
        let ab = isa(&["a", "b"]);
        assert_eq!(
            gen_weighted_pairs(&ab, &tps(&[("a", 3.0), ("b", 1.0)])).unwrap(),
            vec![exp(&[("a", 1), ("b", 3)])]
        );
        assert_eq!(
            gen_weighted_pairs(&ab, &tps(&[("a", 1.5), ("b", 1.0)])).unwrap(),
            vec![exp(&[("a", 1), ("b", 2)])]
        );
        assert!(gen_weighted_pairs(&ab, &tps(&[("a", 1.0), ("b", 1.0)]))
            .unwrap()
            .is_empty());
        assert!(matches!(
            gen_weighted_pairs(&ab, &tps(&[("a", 1.0)])),
            Err(Error::MissingThroughput(i)) if i.as_str() == "b"
        ));
    }

    #[test]
    fn integer_guard() {
        assert_eq!(guarded_ceil(2.9999999997), 3.0);
        assert_eq!(guarded_ceil(3.0000000004), 3.0);
        assert_eq!(guarded_ceil(3.01), 4.0);
        let ab = isa(&["a", "b"]);
        let out = gen_weighted_pairs(&ab, &tps(&[("a", 2.9999999997), ("b", 1.0)])).unwrap();
        assert_eq!(out, vec![exp(&[("a", 1), ("b", 3)])]);
        // ratio snaps to 1: no weighted experiment
        assert!(
            gen_weighted_pairs(&ab, &tps(&[("a", 1.0 + 1e-12), ("b", 1.0)]))
                .unwrap()
                .is_empty()
        );
    }

    proptest! {
        #[test]
        fn families_are_duplicate_free_and_bounded(values in prop::collection::vec(0.25f64..8.0, 2..12)) {
            let names: Vec<_> = (0..values.len()).map(|k| insn(&format!("i{k}"))).collect();
            let tp: BTreeMap<_, _> = names.iter().cloned().zip(values.iter().copied()).collect();
            let all = gen_all(&names, &tp).unwrap();
            let mut seen = BTreeSet::new();
            for e in &all {
                prop_assert!(seen.insert(e.clone()));
            }
            let weighted = gen_weighted_pairs(&names, &tp).unwrap();
            let max_n = weighted.iter().flat_map(|e| e.counts().map(|(_, c)| c)).max().unwrap_or(1) as u64;
            for e in all.iter().chain(&weighted) {
                prop_assert!(e.total_mass() >= 1 && e.total_mass() <= 1 + max_n);
            }
            prop_assert_eq!(gen_all(&names, &tp).unwrap(), all);
        }
    }
}
