//! Port mapping inference from throughput measurements.
//!
//! A port mapping describes how instructions decompose into µops and which
//! execution ports can run each µop. Given measured throughputs for small
//! instruction multisets, [`evolution::evolve`] searches for a mapping whose
//! predicted throughputs ([`sim::simulate`]) explain the measurements.
//!
//! Pipeline stages, each usable on its own:
//!
//! - [`expgen`]: singleton, pair and weighted-pair experiments
//! - [`measure`]: simulated processor or imported measurements
//! - [`congruence`]: collapse indistinguishable instructions
//! - [`evolution`]: evolutionary search plus hill-climbing
//! - [`eval`]: MAPE, Pearson/Spearman correlation, heat-map bins

pub mod congruence;
pub mod error;
pub mod eval;
pub mod evolution;
pub mod expgen;
pub mod io;
pub mod measure;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    insn, reduce_to_two_level, Experiment, InstructionId, MassExperiment, Measurement,
    MeasurementSet, PortMapping2, PortMapping3, PortSet,
};
pub use oracle::oracle_throughput;
pub use sim::{simulate, simulate_bottleneck, SimResult};
