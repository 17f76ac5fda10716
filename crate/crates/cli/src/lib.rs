//! Command implementations behind the `ivw` binary, exposed as a library so
//! integration tests drive the exact code paths the executable runs.

pub mod commands;
pub mod manifest;

pub use commands::{
    cmd_benchmark, cmd_consistency, cmd_discover, cmd_estimate, cmd_generate, cmd_granger,
    BenchmarkArgs, BenchmarkMode, ConsistencyArgs, DiscoverArgs, EstimateArgs, GenerateArgs,
    GrangerArgs, ProviderOverrides,
};
pub use manifest::RunManifest;
