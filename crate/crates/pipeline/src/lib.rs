//! Orchestrates the discovery pipeline end to end: correlation screening,
//! relevance and direction agents, instrument proposal and critique,
//! grounding, estimation, and the consistency evaluation, plus the
//! recovery/flawed benchmark runners.

pub mod benchmark;
pub mod config;
pub mod discovery;
pub mod report;

pub use benchmark::{run_flawed_benchmark, run_recovery_benchmark, FlawedRow, RecoveryRow};
pub use config::{build_provider, GrangerConfig, LagPolicy, PipelineConfig, ProviderKind};
pub use discovery::run_discovery;
pub use report::{DiscoveryReport, PairReport, PairStatus, RunDiagnostics};
