//! Per-stage failure handling: a discovery run records what broke and keeps
//! going instead of crashing.

use std::path::PathBuf;

use ivw_agents::script::PromptMatcher;
use ivw_agents::{PromptSet, ScriptedProvider};
use ivw_core::data::{load_panel, CsvSchema};
use ivw_pipeline::{run_discovery, PairStatus, PipelineConfig};

fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn golden_config() -> PipelineConfig {
    PipelineConfig::load(&fixture("fixtures/golden/config.toml")).unwrap()
}

fn golden_dataset() -> ivw_core::PanelDataset {
    load_panel(&fixture("fixtures/golden/panel.csv"), &CsvSchema::default()).unwrap()
}

#[test]
fn empty_preselection_is_a_warning_not_a_crash() {
    let mut cfg = golden_config();
    cfg.preselect.tau = 0.999;
    let provider = ScriptedProvider::new("unused");
    let prompts = PromptSet::builtin();
    let report = run_discovery(&golden_dataset(), &cfg, &provider, &prompts);
    assert!(report.pairs.is_empty());
    assert_eq!(report.diagnostics.preselected, 0);
    assert!(report
        .diagnostics
        .warnings
        .iter()
        .any(|w| w.contains("no pairs")), "{:?}", report.diagnostics.warnings);
    assert!(report.diagnostics.errors.is_empty());
}

#[test]
fn relevance_agent_failure_is_a_run_level_error() {
    let cfg = golden_config();
    // no rules at all: the first relevance prompt mismatches
    let provider = ScriptedProvider::new("empty");
    let prompts = PromptSet::builtin();
    let report = run_discovery(&golden_dataset(), &cfg, &provider, &prompts);
    assert!(report.pairs.is_empty());
    assert!(report
        .diagnostics
        .errors
        .iter()
        .any(|e| e.contains("relevance screening failed")), "{:?}", report.diagnostics.errors);
}

#[test]
fn provider_failure_mid_pair_marks_the_pair_failed() {
    let cfg = golden_config();
    let mut provider = ScriptedProvider::new("flaky");
    provider.push_rule(PromptMatcher::Contains("candidate pair (t, y)".into()), ["Answer = [Keep]"]);
    provider.push_rule(PromptMatcher::Contains("variable pair (t, y)".into()), ["Answer = [1]"]);
    provider.push_error_rule(
        PromptMatcher::Contains("possible instrumental variables".into()),
        "backend down",
    );
    let prompts = PromptSet::builtin();
    let report = run_discovery(&golden_dataset(), &cfg, &provider, &prompts);
    assert_eq!(report.pairs.len(), 1);
    let pair = &report.pairs[0];
    assert_eq!(pair.status, PairStatus::Failed);
    assert!(pair.errors.iter().any(|e| e.contains("backend down")), "{:?}", pair.errors);
    // the run itself completed; only the pair carries the failure
    assert!(report.diagnostics.errors.is_empty());
}

#[test]
fn single_confounder_configuration_is_flagged() {
    let mut cfg = golden_config();
    cfg.proposer.confounders = 1;
    cfg.preselect.tau = 0.999; // keep the run short
    let provider = ScriptedProvider::new("unused");
    let prompts = PromptSet::builtin();
    let report = run_discovery(&golden_dataset(), &cfg, &provider, &prompts);
    assert!(report
        .diagnostics
        .warnings
        .iter()
        .any(|w| w.contains("confounders = 1")), "{:?}", report.diagnostics.warnings);
}
