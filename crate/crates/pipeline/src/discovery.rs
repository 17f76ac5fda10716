//! The discovery orchestrator: screening, relevance and direction agents,
//! proposal/critique/grounding rounds, estimation, and consistency.
//!
//! Stages run sequentially per pair and pairs are processed in screening
//! order, so a run is fully deterministic given the dataset, the
//! configuration seed, and a deterministic provider. Per-stage failures are
//! recorded in the report instead of aborting the run.

use std::collections::BTreeMap;

use ivw_agents::{
    causal_direction, critique_exclusion, critique_independence, filter_valid, ground_instrument,
    human_proxy_select, propose_confounders, propose_instruments, AgentContext, AgentError,
    CandidateInstrument, Direction, PromptSet, Provider,
};
use ivw_core::consistency::{self, EstimationOptions};
use ivw_core::regress::{design_with_intercept, granger_test_pooled, lagged_rows, ols, GrangerSegment};
use ivw_core::{CausalQuery, Error, PairCandidate, PanelDataset, VariableMeta};

use crate::config::{GrangerConfig, LagPolicy, PipelineConfig};
use crate::report::{
    DiscoveryReport, PairReport, PairStatus, RunDiagnostics, StageCounts, TemporalEvidence,
    REPORT_SCHEMA_VERSION,
};

/// Derive a per-pair seed from the master seed and the pair's names.
fn pair_seed(master: u64, treatment: &str, outcome: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in treatment.bytes().chain(*b"|").chain(outcome.bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ master.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Pick the lag by scanning the unrestricted model's AIC over a common
/// sample (rows valid at the maximum candidate lag). Falls back to smaller
/// maxima until enough rows exist.
fn select_lag(segments: &[GrangerSegment], cfg: &GrangerConfig) -> Result<usize, Error> {
    match cfg.lag_policy {
        LagPolicy::Fixed => Ok(cfg.fixed_lag),
        LagPolicy::Aic => {
            let mut max_lag = cfg.max_lag;
            while max_lag > 1 {
                let rows = lagged_rows(segments, max_lag);
                if rows.n() >= 3 * max_lag + 10 {
                    break;
                }
                max_lag -= 1;
            }
            let rows = lagged_rows(segments, max_lag);
            if rows.n() < 3 * max_lag + 10 {
                return Err(Error::InsufficientData(format!(
                    "too few pooled rows ({}) for a lag-{max_lag} scan",
                    rows.n()
                )));
            }
            let n = rows.n() as f64;
            let mut best = (f64::INFINITY, 1usize);
            for p in 1..=max_lag {
                let mut cols: Vec<&[f64]> = Vec::with_capacity(2 * p);
                cols.extend(rows.y_lags[..p].iter().map(|c| c.as_slice()));
                cols.extend(rows.x_lags[..p].iter().map(|c| c.as_slice()));
                let design = design_with_intercept(&cols)?;
                let fit = ols(&rows.target, &design)?;
                let k = (2 * p + 1) as f64;
                let aic = if fit.rss <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    n * (fit.rss / n).ln() + 2.0 * k
                };
                if aic < best.0 {
                    best = (aic, p);
                }
            }
            Ok(best.1)
        }
    }
}

fn segments_for(d: &PanelDataset, x: &str, y: &str) -> Result<Vec<GrangerSegment>, Error> {
    Ok(d.entity_paired_series(x, y)?
        .into_iter()
        .map(|(_, times, xv, yv)| GrangerSegment { times, x: xv, y: yv })
        .collect())
}

fn describe(meta: Option<&VariableMeta>, name: &str) -> String {
    match meta {
        Some(m) if !m.description.is_empty() => format!("{name} ({})", m.description),
        _ => name.to_string(),
    }
}

struct PairOutcome {
    report: PairReport,
    directional: bool,
    temporal_pass: bool,
}

fn blank_pair_report(pair: &PairCandidate) -> PairReport {
    PairReport {
        treatment: pair.a.clone(),
        outcome: pair.b.clone(),
        rho: pair.rho,
        n: pair.n,
        status: PairStatus::Failed,
        direction: None,
        temporal: None,
        proposals: Vec::new(),
        grounded: Vec::new(),
        estimates: BTreeMap::new(),
        consistency: None,
        reinvocations: 0,
        stage_counts: StageCounts::default(),
        unevaluable_reason: None,
        errors: Vec::new(),
    }
}

fn process_pair(
    d: &PanelDataset,
    cfg: &PipelineConfig,
    ctx: &AgentContext<'_>,
    pair: &PairCandidate,
) -> Result<PairOutcome, AgentError> {
    let mut report = blank_pair_report(pair);

    // CausalOracle, LLM half: four-way direction judgment
    let judgment = causal_direction(pair, ctx)?;
    let directional = judgment.verdict.is_directional();
    let (treatment, outcome) = match judgment.verdict {
        Direction::ACausesB => (pair.a.clone(), pair.b.clone()),
        Direction::BCausesA => (pair.b.clone(), pair.a.clone()),
        _ => (pair.a.clone(), pair.b.clone()),
    };
    report.direction = Some(judgment);
    if !directional {
        report.status = PairStatus::DroppedNonDirectional;
        return Ok(PairOutcome { report, directional: false, temporal_pass: false });
    }
    report.treatment = treatment.clone();
    report.outcome = outcome.clone();

    // CausalOracle, statistical half: lagged-prediction test in the judged
    // direction (treatment series as the candidate predictor of the outcome)
    let segments = segments_for(d, &treatment, &outcome)
        .map_err(|e| AgentError::InvalidInput(e.to_string()))?;
    let lag = select_lag(&segments, &cfg.granger)
        .map_err(|e| AgentError::InvalidInput(e.to_string()))?;
    let forward =
        granger_test_pooled(&segments, lag).map_err(|e| AgentError::InvalidInput(e.to_string()))?;
    let mut pass = forward.p_value < cfg.granger.alpha;
    let reverse = if cfg.granger.strict_exclusive {
        let swapped: Vec<GrangerSegment> = segments
            .iter()
            .map(|s| GrangerSegment { times: s.times.clone(), x: s.y.clone(), y: s.x.clone() })
            .collect();
        let rev = granger_test_pooled(&swapped, lag)
            .map_err(|e| AgentError::InvalidInput(e.to_string()))?;
        pass = pass && rev.p_value >= cfg.granger.alpha;
        Some(rev)
    } else {
        None
    };
    report.temporal = Some(TemporalEvidence { result: forward, reverse, stationarity_assumed: true });
    if !pass {
        report.status = PairStatus::DroppedByTemporalTest;
        return Ok(PairOutcome { report, directional: true, temporal_pass: false });
    }

    // HypothesisGenerator -> CriticAgents -> Grounder, with re-invocation
    let base_context = format!(
        "observational panel data; treatment: {}; outcome: {}",
        describe(d.meta(&treatment), &treatment),
        describe(d.meta(&outcome), &outcome),
    );
    let vocab: Vec<VariableMeta> = d
        .variables()
        .filter(|m| m.name != treatment && m.name != outcome)
        .cloned()
        .collect();
    let base_query = CausalQuery::new(&treatment, &outcome, &base_context)
        .map_err(|e| AgentError::InvalidInput(e.to_string()))?;
    let mut rejected_texts: Vec<String> = Vec::new();
    let mut grounded: Vec<String> = Vec::new();
    let mut rounds_used = 0usize;
    for round in 0..=cfg.pipeline.max_reinvocations {
        rounds_used = round;
        // only the instrument proposer sees the retry bookkeeping; critics
        // and the confounder proposer get the plain pair description
        let context = if rejected_texts.is_empty() {
            base_context.clone()
        } else {
            format!("{base_context}. Avoid proposing: {}", rejected_texts.join("; "))
        };
        let propose_query = CausalQuery::new(&treatment, &outcome, &context)
            .map_err(|e| AgentError::InvalidInput(e.to_string()))?;
        let proposals = propose_instruments(&propose_query, cfg.proposer.instruments, ctx)?;
        let confounders = propose_confounders(&base_query, cfg.proposer.confounders, ctx)?;

        let mut candidates: Vec<CandidateInstrument> = Vec::with_capacity(proposals.len());
        for text in &proposals {
            let mut candidate = CandidateInstrument::generated(text);
            candidate.exclusion_verdict = critique_exclusion(text, &base_query, ctx)?;
            candidate.independence_verdict =
                critique_independence(text, &confounders, &base_query, ctx)?;
            candidates.push(candidate);
        }
        let valid = filter_valid(&candidates)?;
        for candidate in &valid {
            let proxy = ground_instrument(&candidate.text, &vocab, ctx)?;
            if let Some(name) = &proxy {
                if !grounded.contains(name) {
                    grounded.push(name.clone());
                }
            }
            if let Some(slot) = candidates.iter_mut().find(|c| c.text == candidate.text) {
                slot.proxy = proxy;
            }
        }
        report.stage_counts.proposed += candidates.len();
        report.stage_counts.valid_after_critics += valid.len();
        report.proposals.extend(candidates);
        if !grounded.is_empty() {
            break;
        }
        rejected_texts.extend(proposals);
    }
    report.reinvocations = rounds_used;
    report.stage_counts.grounded = grounded.len();
    report.grounded = grounded.clone();

    let q = base_query;
    let opts = EstimationOptions { standardize: cfg.pipeline.standardize };
    let mut estimable: Vec<String> = Vec::new();
    for proxy in &grounded {
        match consistency::estimate_with_instrument(d, &q, proxy, &opts) {
            Ok(estimate) => {
                report.estimates.insert(proxy.clone(), estimate);
                estimable.push(proxy.clone());
            }
            Err(e) => report.errors.push(format!("estimation with '{proxy}' failed: {e}")),
        }
    }

    if estimable.len() >= 2 {
        let seed = pair_seed(cfg.consistency_seed(), &treatment, &outcome);
        match consistency::evaluate(
            d,
            &q,
            &estimable,
            seed,
            cfg.consistency.r,
            cfg.consistency.null_pairs,
            &opts,
        ) {
            Ok(consistency_report) => {
                report.consistency = Some(consistency_report);
                report.status = PairStatus::Evaluated;
            }
            Err(e) => {
                report.errors.push(format!("consistency evaluation failed: {e}"));
                report.status = PairStatus::ConsistencyUnevaluable;
                report.unevaluable_reason = Some(e.to_string());
            }
        }
    } else {
        report.status = PairStatus::ConsistencyUnevaluable;
        report.unevaluable_reason = Some(if grounded.is_empty() {
            format!(
                "no grounded instruments after {} extra round(s)",
                cfg.pipeline.max_reinvocations
            )
        } else {
            format!("{} estimable instrument(s); consistency needs 2", estimable.len())
        });
    }
    Ok(PairOutcome { report, directional: true, temporal_pass: true })
}

/// Run the full discovery pipeline over a loaded dataset.
pub fn run_discovery(
    d: &PanelDataset,
    cfg: &PipelineConfig,
    provider: &dyn Provider,
    prompts: &PromptSet,
) -> DiscoveryReport {
    let ctx = AgentContext::new(provider, prompts);
    let mut diagnostics = RunDiagnostics::default();
    let mut report = DiscoveryReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.seed,
        pairs: Vec::new(),
        relevance_decisions: Vec::new(),
        diagnostics: RunDiagnostics::default(),
    };
    if cfg.proposer.confounders == 1 {
        diagnostics.warnings.push(
            "proposer.confounders = 1: independence critiques see a single hypothesized \
             confounder, a weak context for that criterion"
                .into(),
        );
    }

    let screened = match ivw_core::preselect(d, cfg.preselect.tau, cfg.preselect.n_min) {
        Ok(outcome) => outcome,
        Err(e) => {
            diagnostics.errors.push(format!("preselection failed: {e}"));
            report.diagnostics = diagnostics;
            return report;
        }
    };
    diagnostics.pairs_evaluated = screened.evaluated;
    diagnostics.pairs_skipped = screened.skipped;
    diagnostics.preselected = screened.pairs.len();
    if screened.pairs.is_empty() {
        diagnostics.warnings.push("preselection produced no pairs".into());
        report.diagnostics = diagnostics;
        return report;
    }

    let selection = match human_proxy_select(&screened.pairs, &ctx) {
        Ok(outcome) => outcome,
        Err(e) => {
            diagnostics.errors.push(format!("relevance screening failed: {e}"));
            report.diagnostics = diagnostics;
            return report;
        }
    };
    diagnostics.kept_by_relevance_agent = selection.kept.len();
    report.relevance_decisions = selection.decisions;
    if selection.kept.is_empty() {
        diagnostics.warnings.push("relevance agent kept no pairs".into());
    }

    for pair in &selection.kept {
        match process_pair(d, cfg, &ctx, pair) {
            Ok(outcome) => {
                if outcome.directional {
                    diagnostics.directional += 1;
                }
                if outcome.temporal_pass {
                    diagnostics.confirmed_by_temporal_test += 1;
                }
                report.pairs.push(outcome.report);
            }
            Err(e) => {
                let mut failed = blank_pair_report(pair);
                failed.errors.push(e.to_string());
                report.pairs.push(failed);
            }
        }
    }
    report.diagnostics = diagnostics;
    report
}
