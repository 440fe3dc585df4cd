//! Congruence filtering: instructions that no experiment can tell apart are
//! collapsed onto one representative before the search.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{InstructionId, MeasurementSet, PortMapping3};

pub const DEFAULT_EPS: f64 = 0.05;

/// Symmetric relative difference of `t1` and `t2` is below `eps`. Identical
/// values are always equal, including under `eps = 0`.
pub fn tp_equal(t1: f64, t2: f64, eps: f64) -> bool {
    t1 == t2 || (t1 - t2).abs() / ((t1 + t2).abs() / 2.0) < eps
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Members sorted; classes ordered by representative.
    classes: Vec<Vec<InstructionId>>,
    representative: BTreeMap<InstructionId, InstructionId>,
    missing_evidence: Vec<(InstructionId, InstructionId)>,
}

impl Partition {
    /// Every instruction in its own class.
    pub fn identity(isa: &[InstructionId]) -> Self {
        Self::from_classes(isa.iter().map(|i| vec![i.clone()]).collect(), Vec::new())
    }

    /// Rebuilds a partition from explicit classes. Members must be disjoint.
    pub fn from_class_lists(
        classes: Vec<Vec<InstructionId>>,
        missing_evidence: Vec<(InstructionId, InstructionId)>,
    ) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &classes {
            if c.is_empty() {
                return Err(Error::InvalidConfig("empty congruence class".into()));
            }
            for i in c {
                if !seen.insert(i) {
                    return Err(Error::InvalidConfig(format!("`{i}` is in two classes")));
                }
            }
        }
        Ok(Self::from_classes(classes, missing_evidence))
    }

    fn from_classes(
        mut classes: Vec<Vec<InstructionId>>,
        missing_evidence: Vec<(InstructionId, InstructionId)>,
    ) -> Self {
        for c in &mut classes {
            c.sort();
            c.dedup();
        }
        classes.sort();
        let representative = classes
            .iter()
            .flat_map(|c| c.iter().map(move |i| (i.clone(), c[0].clone())))
            .collect();
        Partition {
            classes,
            representative,
            missing_evidence,
        }
    }

    pub fn classes(&self) -> &[Vec<InstructionId>] {
        &self.classes
    }

    pub fn representative_of(&self, i: &InstructionId) -> Option<&InstructionId> {
        self.representative.get(i)
    }

    pub fn representatives(&self) -> Vec<InstructionId> {
        self.classes.iter().map(|c| c[0].clone()).collect()
    }

    pub fn is_representative(&self, i: &InstructionId) -> bool {
        self.representative.get(i) == Some(i)
    }

    /// Pairs left unmerged only because some counterpart experiment was
    /// never measured.
    pub fn missing_evidence(&self) -> &[(InstructionId, InstructionId)] {
        &self.missing_evidence
    }

    /// Gives every class member the decomposition of its representative.
    pub fn expand_mapping(&self, m: &PortMapping3) -> Result<PortMapping3> {
        let mut out = m.clone();
        for class in &self.classes {
            for member in &class[1..] {
                out = out.with_alias(member.clone(), &class[0])?;
            }
        }
        Ok(out)
    }
}

type Shape = (InstructionId, u32, u32);

enum Verdict {
    Equal,
    Different,
    Missing,
}

fn compare(
    a: &InstructionId,
    b: &InstructionId,
    singles: &BTreeMap<&InstructionId, f64>,
    profiles: &BTreeMap<&InstructionId, BTreeMap<Shape, f64>>,
    eps: f64,
) -> Verdict {
    let (Some(&ta), Some(&tb)) = (singles.get(a), singles.get(b)) else {
        return Verdict::Missing;
    };
    if !tp_equal(ta, tb, eps) {
        return Verdict::Different;
    }
    let empty = BTreeMap::new();
    let pa = profiles.get(a).unwrap_or(&empty);
    let pb = profiles.get(b).unwrap_or(&empty);
    let mut missing = false;
    for (this, other) in [(pa, pb), (pb, pa)] {
        for (shape, &t) in this {
            if &shape.0 == a || &shape.0 == b {
                continue;
            }
            match other.get(shape) {
                Some(&u) if !tp_equal(t, u, eps) => return Verdict::Different,
                Some(_) => {}
                None => missing = true,
            }
        }
    }
    if missing {
        Verdict::Missing
    } else {
        Verdict::Equal
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Partitions `isa` by the transitive closure of pairwise indistinguishability
/// under `meas`: equal singleton throughputs and equal throughputs for every
/// `{a ↦ m, c ↦ n}` / `{b ↦ m, c ↦ n}` counterpart with a third instruction
/// `c`. Pairs lacking a singleton or a counterpart are not merged and are
/// reported through [`Partition::missing_evidence`].
pub fn partition(meas: &MeasurementSet, isa: &[InstructionId], eps: f64) -> Partition {
    let mut singles: BTreeMap<&InstructionId, f64> = BTreeMap::new();
    let mut profiles: BTreeMap<&InstructionId, BTreeMap<Shape, f64>> = BTreeMap::new();
    for m in meas {
        let e = &m.experiment;
        if let Some(i) = e.as_singleton() {
            singles.insert(i, m.cycles);
        }
        if e.distinct() == 2 {
            let mut it = e.counts();
            let (x, nx) = it.next().expect("two entries");
            let (y, ny) = it.next().expect("two entries");
            profiles
                .entry(x)
                .or_default()
                .insert((y.clone(), nx, ny), m.cycles);
            profiles
                .entry(y)
                .or_default()
                .insert((x.clone(), ny, nx), m.cycles);
        }
    }

    let mut parent: Vec<usize> = (0..isa.len()).collect();
    let mut missing_evidence = Vec::new();
    for (ka, a) in isa.iter().enumerate() {
        for (kb, b) in isa.iter().enumerate().skip(ka + 1) {
            match compare(a, b, &singles, &profiles, eps) {
                Verdict::Equal => {
                    let (ra, rb) = (find(&mut parent, ka), find(&mut parent, kb));
                    parent[ra.max(rb)] = ra.min(rb);
                }
                Verdict::Missing => missing_evidence.push((a.clone(), b.clone())),
                Verdict::Different => {}
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<InstructionId>> = BTreeMap::new();
    for (k, i) in isa.iter().enumerate() {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(i.clone());
    }
    Partition::from_classes(groups.into_values().collect(), missing_evidence)
}

/// Experiments made only of representatives.
pub fn project(meas: &MeasurementSet, partition: &Partition) -> MeasurementSet {
    meas.filtered(|m| {
        m.experiment
            .instructions()
            .all(|i| partition.is_representative(i))
    })
}
