use clap::{Parser, Subcommand};

use ivw_cli::commands::{
    cmd_benchmark, cmd_consistency, cmd_discover, cmd_estimate, cmd_generate, cmd_granger,
    BenchmarkArgs, ConsistencyArgs, DiscoverArgs, EstimateArgs, GenerateArgs, GrangerArgs,
};

/// Workbench for discovering and validating instrumental variables in
/// observational panel data.
#[derive(Parser)]
#[command(name = "ivw", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full discovery pipeline over a panel dataset.
    Discover(DiscoverArgs),
    /// Two-stage least squares for one (treatment, outcome, instrument) triple.
    Estimate(EstimateArgs),
    /// Consistency metric for a fixed instrument set.
    Consistency(ConsistencyArgs),
    /// Lagged-prediction (Granger) test between two panel variables.
    Granger(GrangerArgs),
    /// Generate a synthetic structural-model dataset with known ground truth.
    Generate(GenerateArgs),
    /// Score a benchmark file in recovery or flawed mode.
    Benchmark(BenchmarkArgs),
}

fn main() {
    let cli = Cli::parse();
    let fixed_epoch =
        std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|value| value.parse::<u64>().ok());
    let result = match &cli.command {
        Command::Discover(args) => cmd_discover(args, fixed_epoch).map(|_| ()),
        Command::Estimate(args) => cmd_estimate(args).map(|_| ()),
        Command::Consistency(args) => cmd_consistency(args).map(|_| ()),
        Command::Granger(args) => cmd_granger(args).map(|_| ()),
        Command::Generate(args) => cmd_generate(args).map(|_| ()),
        Command::Benchmark(args) => cmd_benchmark(args, fixed_epoch).map(|_| ()),
    };
    if let Err(error) = result {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
