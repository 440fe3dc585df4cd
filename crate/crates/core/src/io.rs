//! JSON file formats for mappings, experiments, measurements and ISA lists.
//!
//! ```text
//! mapping:      {"num_ports": 3, "assignment": {"add": [{"ports": [0, 1], "n": 1}]}}
//! experiments:  {"experiments": [{"add": 1, "mul": 2}]}
//! measurements: {"measurements": [{"experiment": {"add": 1}, "cycles": 0.5}]}
//! isa:          {"instructions": ["add", "mul"]}
//! ```
//!
//! Output is pretty-printed with keys in sorted order, so identical values
//! always serialize to identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::congruence::Partition;
use crate::error::{Error, Result};
use crate::model::{Experiment, InstructionId, MeasurementSet, PortMapping3, PortSet};

#[derive(Serialize, Deserialize)]
struct UopEntry {
    ports: Vec<usize>,
    n: u32,
}

#[derive(Serialize, Deserialize)]
struct MappingFile {
    num_ports: usize,
    assignment: BTreeMap<String, Vec<UopEntry>>,
}

type ExperimentDto = BTreeMap<String, u32>;

/// Provenance stored alongside generated benchmark sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMeta {
    pub sampling: String,
    pub size: u32,
    pub count: usize,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ExperimentFile {
    experiments: Vec<ExperimentDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<BenchmarkMeta>,
}

#[derive(Serialize, Deserialize)]
struct MeasurementEntry {
    experiment: ExperimentDto,
    cycles: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasurementFile {
    measurements: Vec<MeasurementEntry>,
}

#[derive(Serialize, Deserialize)]
struct ClassEntry {
    representative: String,
    members: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ClassesFile {
    classes: Vec<ClassEntry>,
    #[serde(default)]
    missing_evidence: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct IsaFile {
    instructions: Vec<String>,
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file DTOs always serialize");
    s.push('\n');
    s
}

fn experiment_to_dto(e: &Experiment) -> ExperimentDto {
    e.counts().map(|(i, c)| (i.to_string(), c)).collect()
}

fn experiment_from_dto(dto: ExperimentDto) -> Result<Experiment> {
    let counts = dto
        .into_iter()
        .map(|(name, c)| Ok((InstructionId::new(name)?, c)))
        .collect::<Result<Vec<_>>>()?;
    Experiment::new(counts)
}

pub fn mapping_to_string(m: &PortMapping3) -> String {
    let mut assignment: BTreeMap<String, Vec<UopEntry>> = BTreeMap::new();
    for (i, u, n) in m.edges() {
        assignment.entry(i.to_string()).or_default().push(UopEntry {
            ports: u.ports().collect(),
            n,
        });
    }
    to_pretty(&MappingFile {
        num_ports: m.num_ports(),
        assignment,
    })
}

pub fn parse_mapping(s: &str) -> Result<PortMapping3> {
    let file: MappingFile = serde_json::from_str(s)?;
    let mut edges = Vec::new();
    for (name, uops) in file.assignment {
        let i = InstructionId::new(name)?;
        if uops.is_empty() {
            return Err(Error::InvalidMapping(format!("`{i}` has no µops")));
        }
        for uop in uops {
            edges.push((i.clone(), PortSet::from_ports(&uop.ports)?, uop.n));
        }
    }
    PortMapping3::from_edges(file.num_ports, edges)
}

pub fn experiments_to_string(es: &[Experiment], meta: Option<&BenchmarkMeta>) -> String {
    to_pretty(&ExperimentFile {
        experiments: es.iter().map(experiment_to_dto).collect(),
        meta: meta.cloned(),
    })
}

pub fn parse_experiments(s: &str) -> Result<Vec<Experiment>> {
    let file: ExperimentFile = serde_json::from_str(s)?;
    file.experiments
        .into_iter()
        .map(experiment_from_dto)
        .collect()
}

pub fn measurements_to_string(set: &MeasurementSet) -> String {
    to_pretty(&MeasurementFile {
        measurements: set
            .iter()
            .map(|m| MeasurementEntry {
                experiment: experiment_to_dto(&m.experiment),
                cycles: m.cycles,
            })
            .collect(),
    })
}

/// Parses a measurement file; duplicate experiments are merged by median.
pub fn parse_measurements(s: &str) -> Result<MeasurementSet> {
    let file: MeasurementFile = serde_json::from_str(s)?;
    let entries = file
        .measurements
        .into_iter()
        .map(|m| Ok((experiment_from_dto(m.experiment)?, m.cycles)))
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(entries)
}

pub fn isa_to_string(isa: &[InstructionId]) -> String {
    to_pretty(&IsaFile {
        instructions: isa.iter().map(|i| i.to_string()).collect(),
    })
}

pub fn parse_isa(s: &str) -> Result<Vec<InstructionId>> {
    let file: IsaFile = serde_json::from_str(s)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(file.instructions.len());
    for name in file.instructions {
        if !seen.insert(name.clone()) {
            return Err(Error::InvalidExperiment(format!(
                "duplicate instruction `{name}`"
            )));
        }
        out.push(InstructionId::new(name)?);
    }
    Ok(out)
}

/// `{"classes": [{"representative": "a", "members": ["a", "b"]}], "missing_evidence": [["a", "c"]]}`
pub fn partition_to_string(p: &Partition) -> String {
    to_pretty(&ClassesFile {
        classes: p
            .classes()
            .iter()
            .map(|c| ClassEntry {
                representative: c[0].to_string(),
                members: c.iter().map(|i| i.to_string()).collect(),
            })
            .collect(),
        missing_evidence: p
            .missing_evidence()
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
    })
}

pub fn parse_partition(s: &str) -> Result<Partition> {
    let file: ClassesFile = serde_json::from_str(s)?;
    let name = |s: String| InstructionId::new(s);
    let mut classes = Vec::with_capacity(file.classes.len());
    for c in file.classes {
        let members = c
            .members
            .into_iter()
            .map(name)
            .collect::<Result<Vec<_>>>()?;
        let rep = name(c.representative)?;
        if members.iter().min() != Some(&rep) {
            return Err(Error::InvalidConfig(format!(
                "representative `{rep}` must be the smallest member of its class"
            )));
        }
        classes.push(members);
    }
    let missing = file
        .missing_evidence
        .into_iter()
        .map(|(a, b)| Ok((name(a)?, name(b)?)))
        .collect::<Result<Vec<_>>>()?;
    Partition::from_class_lists(classes, missing)
}

pub fn read_partition(path: impl AsRef<Path>) -> Result<Partition> {
    parse_partition(&fs::read_to_string(path)?)
}

pub fn write_partition(path: impl AsRef<Path>, p: &Partition) -> Result<()> {
    Ok(fs::write(path, partition_to_string(p))?)
}

pub fn read_mapping(path: impl AsRef<Path>) -> Result<PortMapping3> {
    parse_mapping(&fs::read_to_string(path)?)
}

pub fn write_mapping(path: impl AsRef<Path>, m: &PortMapping3) -> Result<()> {
    Ok(fs::write(path, mapping_to_string(m))?)
}

pub fn read_experiments(path: impl AsRef<Path>) -> Result<Vec<Experiment>> {
    parse_experiments(&fs::read_to_string(path)?)
}

pub fn write_experiments(
    path: impl AsRef<Path>,
    es: &[Experiment],
    meta: Option<&BenchmarkMeta>,
) -> Result<()> {
    Ok(fs::write(path, experiments_to_string(es, meta))?)
}

pub fn import_measurements(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    parse_measurements(&fs::read_to_string(path)?)
}

pub fn write_measurements(path: impl AsRef<Path>, set: &MeasurementSet) -> Result<()> {
    Ok(fs::write(path, measurements_to_string(set))?)
}

pub fn read_isa(path: impl AsRef<Path>) -> Result<Vec<InstructionId>> {
    parse_isa(&fs::read_to_string(path)?)
}

pub fn write_isa(path: impl AsRef<Path>, isa: &[InstructionId]) -> Result<()> {
    Ok(fs::write(path, isa_to_string(isa))?)
}
