//! Conditional quantile-association network inference.
//!
//! Pipeline: per-outcome quantile regression ([`quantreg`]), pairwise
//! contingency statistics ([`squac`]), and a threshold search with false
//! discovery rate control ([`fdr`]). [`baselines`] holds the competing
//! correlation tests. [`simgen`] and [`harness`] run the simulation study;
//! [`network`] covers inference and cohort comparison on real data.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod fdr;
pub mod harness;
pub mod network;
pub mod quantreg;
pub mod simgen;
pub mod specialfn;
pub mod squac;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use fdr::{control_fdr, control_fdr_two_sided, FdrOutcome, TailDistribution};
pub use harness::{
    emit_table, run_experiment, run_method, run_methods, Dependence, Experiment, Method, MethodRun,
    ReplicationResult, Summary, TableFormat,
};
pub use network::{
    compare_cohorts, diff_networks, infer_network, DifferentialReport, Edge, Network,
};
pub use quantreg::{fit_all, fit_pinball, QuantileFits, QuantileGrid, SignCountReport};
pub use simgen::{generate, GroundTruth, ScenarioId, SimData, SimScenario};
pub use specialfn::Probability;
pub use squac::{all_pair_statistics, PairMatrix, PairStatistics, SquacTable};
