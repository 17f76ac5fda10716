//! Subcommand implementations. Each takes parsed arguments plus an optional
//! fixed epoch (from SOURCE_DATE_EPOCH) so emitted files can be
//! byte-reproducible.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use ivw_agents::recovery::{load_benchmark, BenchmarkEntry};
use ivw_agents::Provider;
use ivw_core::consistency::{self, ConsistencyReport, EstimationOptions};
use ivw_core::data::{load_panel, standardize};
use ivw_core::regress::{granger_test_pooled, two_stage_least_squares, GrangerSegment};
use ivw_core::synth::generate;
use ivw_core::{CausalQuery, GrangerResult, IvEstimate, PanelDataset};
use ivw_pipeline::{
    build_provider, run_discovery, run_flawed_benchmark, run_recovery_benchmark, DiscoveryReport,
    FlawedRow, PairStatus, PipelineConfig, ProviderKind, RecoveryRow,
};

use crate::manifest::RunManifest;

/// Provider settings that may be overridden from the command line.
#[derive(Debug, Clone, Default, Args)]
pub struct ProviderOverrides {
    /// Provider kind: script, replay, or http.
    #[arg(long)]
    pub provider: Option<ProviderKindArg>,
    /// Rule file for the scripted provider.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Transcript file for replay mode.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Record every provider exchange to this transcript file.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKindArg {
    Script,
    Replay,
    Http,
}

impl From<ProviderKindArg> for ProviderKind {
    fn from(value: ProviderKindArg) -> Self {
        match value {
            ProviderKindArg::Script => ProviderKind::Script,
            ProviderKindArg::Replay => ProviderKind::Replay,
            ProviderKindArg::Http => ProviderKind::Http,
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn apply_overrides(cfg: &mut PipelineConfig, seed: Option<u64>, overrides: &ProviderOverrides) {
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(kind) = overrides.provider {
        cfg.provider.kind = kind.into();
    }
    if overrides.script.is_some() {
        cfg.provider.script = overrides.script.clone();
    }
    if overrides.transcript.is_some() {
        cfg.provider.transcript = overrides.transcript.clone();
    }
    if overrides.record.is_some() {
        cfg.provider.record = overrides.record.clone();
    }
}

fn load_dataset(path: &Path, cfg: &PipelineConfig) -> anyhow::Result<PanelDataset> {
    load_panel(path, &cfg.data).with_context(|| format!("loading panel data {}", path.display()))
}

// ---------------------------------------------------------------------------
// discover

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// Long-format panel CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the report files.
    #[arg(long, default_value = "ivw-out")]
    pub out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub provider: ProviderOverrides,
}

/// Report file: the discovery report wrapped with its run manifest.
#[derive(Debug, Serialize, Deserialize)]
pub struct FullReport {
    pub manifest: RunManifest,
    pub report: DiscoveryReport,
}

#[derive(Debug)]
pub struct DiscoverOutput {
    pub report_path: PathBuf,
    pub summary_path: PathBuf,
    pub sample_paths: Vec<PathBuf>,
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn render_summary(full: &FullReport) -> String {
    let mut out = String::new();
    let report = &full.report;
    let _ = writeln!(out, "instrument discovery summary");
    let _ = writeln!(out, "seed: {}", report.seed);
    let _ = writeln!(out, "provider: {}", full.manifest.provider);
    let d = &report.diagnostics;
    let _ = writeln!(
        out,
        "screening: {} pairs evaluated, {} skipped, {} preselected, {} kept by relevance agent",
        d.pairs_evaluated, d.pairs_skipped, d.preselected, d.kept_by_relevance_agent
    );
    let _ = writeln!(
        out,
        "direction: {} directional, {} confirmed by the lagged-prediction test",
        d.directional, d.confirmed_by_temporal_test
    );
    for w in &d.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    for e in &d.errors {
        let _ = writeln!(out, "error: {e}");
    }
    for pair in &report.pairs {
        let _ = writeln!(out, "\npair: {} -> {}", pair.treatment, pair.outcome);
        let _ = writeln!(out, "  screening rho {:.6} over n = {}", pair.rho, pair.n);
        let _ = writeln!(out, "  status: {:?}", pair.status);
        if let Some(t) = &pair.temporal {
            let _ = writeln!(
                out,
                "  lagged-prediction test: F = {:.6}, p = {:.6}, lag = {} over n = {} (stationarity assumed, not tested)",
                t.result.f_stat, t.result.p_value, t.result.lag, t.result.n
            );
        }
        let _ = writeln!(
            out,
            "  candidates: {} proposed, {} past critics, {} grounded, {} reinvocation(s)",
            pair.stage_counts.proposed,
            pair.stage_counts.valid_after_critics,
            pair.stage_counts.grounded,
            pair.reinvocations
        );
        for (proxy, est) in &pair.estimates {
            let _ = writeln!(
                out,
                "  instrument {proxy}: effect = {:.6}, se = {:.6}, first-stage F = {:.6}, n = {}",
                est.beta, est.se, est.first_stage_f, est.n
            );
        }
        if let Some(c) = &pair.consistency {
            let _ = writeln!(
                out,
                "  consistency: gap = {:.6}, random baseline = {:.6}, normalized = {:.6}, p = {:.6} (null of {})",
                c.delta_llm,
                c.delta_rand_summary,
                c.c_norm,
                c.p_value,
                c.null_samples.len()
            );
        }
        if let Some(reason) = &pair.unevaluable_reason {
            let _ = writeln!(out, "  consistency unevaluable: {reason}");
        }
        for e in &pair.errors {
            let _ = writeln!(out, "  error: {e}");
        }
    }
    out
}

pub fn cmd_discover(args: &DiscoverArgs, fixed_epoch: Option<u64>) -> anyhow::Result<DiscoverOutput> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_overrides(&mut cfg, args.seed, &args.provider);
    cfg.validate()?;
    let dataset = load_dataset(&args.data, &cfg)?;
    let provider = build_provider(&cfg.provider, fixed_epoch).context("building the provider")?;
    let prompts = cfg.prompt_set().context("loading prompt templates")?;

    let mut manifest = RunManifest::new("discover", &cfg, provider.name(), fixed_epoch);
    manifest.digest_input(&args.data)?;
    if let Some(config_path) = &args.config {
        manifest.digest_input(config_path)?;
    }
    if let Some(script) = &cfg.provider.script {
        manifest.digest_input(script)?;
    }
    if let Some(transcript) = &cfg.provider.transcript {
        manifest.digest_input(transcript)?;
    }

    let report = run_discovery(&dataset, &cfg, &provider, &prompts);
    manifest.finish(fixed_epoch);
    let had_errors = !report.diagnostics.errors.is_empty();
    let full = FullReport { manifest, report };

    std::fs::create_dir_all(&args.out)?;
    let report_path = args.out.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&full)?)?;
    let summary_path = args.out.join("summary.txt");
    std::fs::write(&summary_path, render_summary(&full))?;

    let samples_dir = args.out.join("ate_samples");
    std::fs::create_dir_all(&samples_dir)?;
    let mut sample_paths = Vec::new();
    for pair in &full.report.pairs {
        let Some(c) = &pair.consistency else { continue };
        let mut body = String::from("# group\tvalue (group 0 = grounded instruments, 1 = random proxies)\n");
        for est in c.instrument_betas.values() {
            let _ = writeln!(body, "0\t{}", est.beta);
        }
        for beta in &c.rand_betas {
            let _ = writeln!(body, "1\t{beta}");
        }
        let path =
            samples_dir.join(format!("{}__{}.tsv", sanitize(&pair.treatment), sanitize(&pair.outcome)));
        std::fs::write(&path, body)?;
        sample_paths.push(path);
    }

    println!("{}", render_summary(&full));
    println!("report written to {}", report_path.display());
    if had_errors {
        bail!("discovery finished with run-level errors; see {}", report_path.display());
    }
    Ok(DiscoverOutput { report_path, summary_path, sample_paths })
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub treatment: String,
    #[arg(long)]
    pub outcome: String,
    #[arg(long)]
    pub instrument: String,
    /// Optional covariate columns (repeatable).
    #[arg(long = "covariate")]
    pub covariates: Vec<String>,
    /// Standardize every aligned column before estimation.
    #[arg(long)]
    pub standardize: bool,
}

pub fn cmd_estimate(args: &EstimateArgs) -> anyhow::Result<IvEstimate> {
    let cfg = load_config(args.config.as_deref())?;
    let dataset = load_dataset(&args.data, &cfg)?;
    let mut names: Vec<&str> = vec![&args.treatment, &args.outcome, &args.instrument];
    names.extend(args.covariates.iter().map(String::as_str));
    let table = dataset.align(&names)?;
    if table.n() < 4 {
        bail!(
            "only {} complete cases across {} variables; need at least 4",
            table.n(),
            names.len()
        );
    }
    let mut columns = table.columns;
    if args.standardize {
        for c in columns.iter_mut() {
            *c = standardize(c)?;
        }
    }
    let covariate_cols: Vec<&[f64]> = columns[3..].iter().map(Vec::as_slice).collect();
    let estimate = two_stage_least_squares(&columns[1], &columns[0], &columns[2], &covariate_cols)?;
    println!(
        "2SLS {} -> {} instrumented by {} over n = {}",
        args.treatment,
        args.outcome,
        args.instrument,
        estimate.n
    );
    println!(
        "effect = {:.6}, robust se = {:.6}, first-stage F = {:.6}",
        estimate.beta, estimate.se, estimate.first_stage_f
    );
    Ok(estimate)
}

// ---------------------------------------------------------------------------
// consistency

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub treatment: String,
    #[arg(long)]
    pub outcome: String,
    /// Grounded instrument columns (repeat at least twice).
    #[arg(long = "instrument", required = true)]
    pub instruments: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random pairs behind the baseline summary.
    #[arg(long)]
    pub r: Option<usize>,
    /// Random pairs behind the null distribution.
    #[arg(long)]
    pub null_pairs: Option<usize>,
    #[arg(long)]
    pub standardize: bool,
}

pub fn cmd_consistency(args: &ConsistencyArgs) -> anyhow::Result<ConsistencyReport> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.r {
        cfg.consistency.r = r;
    }
    if let Some(n) = args.null_pairs {
        cfg.consistency.null_pairs = n;
    }
    cfg.validate()?;
    let dataset = load_dataset(&args.data, &cfg)?;
    let query = CausalQuery::new(&args.treatment, &args.outcome, "")?;
    let opts = EstimationOptions { standardize: args.standardize };
    let report = consistency::evaluate(
        &dataset,
        &query,
        &args.instruments,
        cfg.consistency_seed(),
        cfg.consistency.r,
        cfg.consistency.null_pairs,
        &opts,
    )?;
    println!(
        "consistency for {} -> {} with {} instruments over a {}-pair null",
        args.treatment,
        args.outcome,
        args.instruments.len(),
        report.null_samples.len()
    );
    for (proxy, est) in &report.instrument_betas {
        println!("  {proxy}: effect = {:.6}, se = {:.6}, F = {:.6}", est.beta, est.se, est.first_stage_f);
    }
    println!(
        "gap = {:.6}, random baseline = {:.6}, normalized = {:.6}, empirical p = {:.6}",
        report.delta_llm, report.delta_rand_summary, report.c_norm, report.p_value
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// granger

#[derive(Debug, Args)]
pub struct GrangerArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Candidate predictor series.
    #[arg(long)]
    pub x: String,
    /// Predicted series.
    #[arg(long)]
    pub y: String,
    #[arg(long, default_value_t = 1)]
    pub lag: usize,
}

pub fn cmd_granger(args: &GrangerArgs) -> anyhow::Result<GrangerResult> {
    let cfg = load_config(args.config.as_deref())?;
    let dataset = load_dataset(&args.data, &cfg)?;
    let segments: Vec<GrangerSegment> = dataset
        .entity_paired_series(&args.x, &args.y)?
        .into_iter()
        .map(|(_, times, x, y)| GrangerSegment { times, x, y })
        .collect();
    let result = granger_test_pooled(&segments, args.lag)?;
    println!(
        "lagged-prediction test {} -> {} at lag {} over {} pooled rows",
        args.x, args.y, result.lag, result.n
    );
    println!(
        "F = {:.6}, p = {:.6}, rss restricted = {:.6}, rss unrestricted = {:.6}",
        result.f_stat, result.p_value, result.rss_restricted, result.rss_unrestricted
    );
    println!("note: weak stationarity of both series is assumed, not tested");
    Ok(result)
}

// ---------------------------------------------------------------------------
// generate

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Configuration file carrying an [scm] section.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON path.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn cmd_generate(args: &GenerateArgs) -> anyhow::Result<PathBuf> {
    let cfg = load_config(Some(&args.config))?;
    let mut spec = cfg
        .scm
        .clone()
        .context("the configuration file has no [scm] section to generate from")?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (dataset, truth) = generate(&spec)?;

    let mut writer = csv::Writer::from_path(&args.out)?;
    writer.write_record(["entity", "year", "variable", "value", "description", "unit"])?;
    for meta in dataset.variables() {
        let series = dataset.align_pair(&meta.name, &meta.name)?;
        for (key, value) in series.keys.iter().zip(series.x.iter()) {
            writer.write_record([
                key.0.as_str(),
                &key.1.to_string(),
                meta.name.as_str(),
                &format!("{value}"),
                meta.description.as_str(),
                meta.unit.as_str(),
            ])?;
        }
    }
    writer.flush()?;

    if let Some(truth_path) = &args.truth {
        std::fs::write(truth_path, serde_json::to_string_pretty(&truth)?)?;
    }
    println!(
        "wrote {} observations of {} variables to {}",
        dataset.variables().map(|m| dataset.presence_count(&m.name).unwrap_or(0)).sum::<usize>(),
        dataset.n_variables(),
        args.out.display()
    );
    Ok(args.out.clone())
}

// ---------------------------------------------------------------------------
// benchmark

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkMode {
    Recovery,
    Flawed,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Benchmark file: a JSON array of entries.
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long, value_enum)]
    pub mode: BenchmarkMode,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the scored table as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderOverrides,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchmarkRows {
    Recovery(Vec<RecoveryRow>),
    Flawed(Vec<FlawedRow>),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchmarkOutput {
    pub manifest: RunManifest,
    pub rows: BenchmarkRows,
}

pub fn cmd_benchmark(args: &BenchmarkArgs, fixed_epoch: Option<u64>) -> anyhow::Result<BenchmarkOutput> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_overrides(&mut cfg, args.seed, &args.provider);
    cfg.validate()?;
    let entries: Vec<BenchmarkEntry> = load_benchmark(&args.file)?;
    if entries.is_empty() {
        bail!("benchmark file {} holds no entries", args.file.display());
    }
    let provider = build_provider(&cfg.provider, fixed_epoch).context("building the provider")?;
    let prompts = cfg.prompt_set()?;
    let mut manifest = RunManifest::new("benchmark", &cfg, provider.name(), fixed_epoch);
    manifest.digest_input(&args.file)?;

    let rows = match args.mode {
        BenchmarkMode::Recovery => {
            let rows = run_recovery_benchmark(&entries, &cfg, &provider, &prompts)?;
            println!("{:<24} {:<24} {:>8} {:>8} {:>9} {:>7}", "treatment", "outcome", "EM", "CM", "proposed", "valid");
            for row in &rows {
                println!(
                    "{:<24} {:<24} {:>8.3} {:>8.3} {:>9} {:>7}",
                    row.treatment, row.outcome, row.em, row.cm, row.proposed, row.valid_after_critics
                );
            }
            BenchmarkRows::Recovery(rows)
        }
        BenchmarkMode::Flawed => {
            let rows = run_flawed_benchmark(&entries, &cfg, &provider, &prompts)?;
            println!("{:<24} {:<24} {:>4} {:>7}  injected", "treatment", "outcome", "HG", "Critic");
            for row in &rows {
                println!(
                    "{:<24} {:<24} {:>4} {:>7}  {}",
                    row.treatment,
                    row.outcome,
                    row.hg as u8,
                    row.critic as u8,
                    row.injected
                );
            }
            BenchmarkRows::Flawed(rows)
        }
    };
    manifest.finish(fixed_epoch);
    let output = BenchmarkOutput { manifest, rows };
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&output)?)?;
    }
    Ok(output)
}

// ---------------------------------------------------------------------------

/// Count of pairs that reached full evaluation, used by smoke tests.
pub fn evaluated_pairs(report: &DiscoveryReport) -> usize {
    report.pairs.iter().filter(|p| p.status == PairStatus::Evaluated).count()
}

