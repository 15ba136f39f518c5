//! Estimating the largest community in a population that can only be
//! observed through random draws from boxes.
//!
//! An [`Instance`] holds the hidden counts, an [`Oracle`] samples from it,
//! and the estimators in [`algorithms`] spend a query budget to name a
//! mode. [`montecarlo`] measures their error rates, [`bounds`] evaluates
//! the analytic guarantees, and [`ingest`] builds instances from CSV.

pub mod algorithms;
pub mod bounds;
pub mod ingest;
pub mod instance;
pub mod montecarlo;
pub mod oracle;
pub mod rng;
pub mod schedule;

pub use algorithms::{run, AlgorithmError, AlgorithmId, KnowledgeMode, RunResult};
pub use instance::{Instance, InstanceError, InstanceSummary, Setting};
pub use oracle::{IdentityMode, Observation, Oracle, OracleError};
