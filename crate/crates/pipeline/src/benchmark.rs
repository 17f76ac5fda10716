//! Benchmark runners: canonical-instrument recovery and the flawed-IV
//! avoidance protocol. Neither touches a dataset; both drive the proposer
//! and critics per entry and score the outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ivw_agents::recovery::{flawed_mentioned, score_recovery, BenchmarkEntry};
use ivw_agents::{
    critique_exclusion, critique_independence, filter_valid, inject_flawed, propose_confounders,
    propose_instruments, AgentContext, AgentError, AgentResult, CandidateInstrument, PromptSet,
    Provenance, Provider,
};

use crate::config::PipelineConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub treatment: String,
    pub outcome: String,
    /// Max embedding similarity against the canonical set, clamped to [0, 1].
    pub em: f64,
    /// Max judge score / 10.
    pub cm: f64,
    pub best_em_suggestion: String,
    pub best_cm_suggestion: String,
    pub proposed: usize,
    pub valid_after_critics: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlawedRow {
    pub treatment: String,
    pub outcome: String,
    /// Proposer reproduced a discredited instrument.
    pub hg: bool,
    /// Critics rejected the injected discredited instrument.
    pub critic: bool,
    pub injected: String,
    /// Candidate list size the critics saw (proposals plus the injection).
    pub critic_input_size: usize,
}

fn critique_all(
    candidates: &mut [CandidateInstrument],
    confounders: &[String],
    q: &ivw_core::CausalQuery,
    ctx: &AgentContext<'_>,
) -> AgentResult<()> {
    for candidate in candidates.iter_mut() {
        candidate.exclusion_verdict = critique_exclusion(&candidate.text, q, ctx)?;
        candidate.independence_verdict = critique_independence(&candidate.text, confounders, q, ctx)?;
    }
    Ok(())
}

/// Propose, critique, and score suggestions against each entry's canonical
/// instruments.
pub fn run_recovery_benchmark(
    entries: &[BenchmarkEntry],
    cfg: &PipelineConfig,
    provider: &dyn Provider,
    prompts: &PromptSet,
) -> AgentResult<Vec<RecoveryRow>> {
    let ctx = AgentContext::new(provider, prompts);
    let mut rows = Vec::with_capacity(entries.len());
    for entry in entries {
        if entry.canonical_ivs.is_empty() {
            return Err(AgentError::InvalidInput(format!(
                "recovery entry {} -> {} has no canonical instruments",
                entry.treatment, entry.outcome
            )));
        }
        let q = entry.query()?;
        let proposals = propose_instruments(&q, cfg.proposer.instruments, &ctx)?;
        let confounders = propose_confounders(&q, cfg.proposer.confounders, &ctx)?;
        let mut candidates: Vec<CandidateInstrument> =
            proposals.iter().map(CandidateInstrument::generated).collect();
        critique_all(&mut candidates, &confounders, &q, &ctx)?;
        let valid = filter_valid(&candidates)?;
        let valid_texts: Vec<String> = valid.iter().map(|c| c.text.clone()).collect();
        let row = if valid_texts.is_empty() {
            RecoveryRow {
                treatment: entry.treatment.clone(),
                outcome: entry.outcome.clone(),
                em: 0.0,
                cm: 0.0,
                best_em_suggestion: String::new(),
                best_cm_suggestion: String::new(),
                proposed: proposals.len(),
                valid_after_critics: 0,
                note: Some("no candidate survived the critics".into()),
            }
        } else {
            let score = score_recovery(entry, &valid_texts, &ctx)?;
            RecoveryRow {
                treatment: entry.treatment.clone(),
                outcome: entry.outcome.clone(),
                em: score.em,
                cm: score.cm,
                best_em_suggestion: score.em_pair.0,
                best_cm_suggestion: score.cm_pair.0,
                proposed: proposals.len(),
                valid_after_critics: valid_texts.len(),
                note: None,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// The two-stage avoidance protocol: check whether the proposer reproduces
/// the discredited instrument, then inject it and check whether the critics
/// reject it.
pub fn run_flawed_benchmark(
    entries: &[BenchmarkEntry],
    cfg: &PipelineConfig,
    provider: &dyn Provider,
    prompts: &PromptSet,
) -> AgentResult<Vec<FlawedRow>> {
    let ctx = AgentContext::new(provider, prompts);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(entries.len());
    for entry in entries {
        let Some(z_minus) = entry.flawed_ivs.first() else {
            return Err(AgentError::InvalidInput(format!(
                "flawed entry {} -> {} declares no flawed instruments",
                entry.treatment, entry.outcome
            )));
        };
        let q = entry.query()?;

        // stage 1: unprompted proposer behavior
        let proposals = propose_instruments(&q, cfg.proposer.instruments, &ctx)?;
        let hg = flawed_mentioned(entry, &proposals, cfg.benchmark.em_threshold, &ctx)?;

        // stage 2: explicit injection, then both critics over the whole list
        let candidates: Vec<CandidateInstrument> =
            proposals.iter().map(CandidateInstrument::generated).collect();
        let mut injected_list = inject_flawed(candidates, z_minus, &mut rng);
        let critic_input_size = injected_list.len();
        debug_assert!(injected_list.iter().any(|c| c.provenance == Provenance::Injected));
        let confounders = propose_confounders(&q, cfg.proposer.confounders, &ctx)?;
        critique_all(&mut injected_list, &confounders, &q, &ctx)?;
        let valid = filter_valid(&injected_list)?;
        let injected_passed = valid.iter().any(|c| c.provenance == Provenance::Injected);

        rows.push(FlawedRow {
            treatment: entry.treatment.clone(),
            outcome: entry.outcome.clone(),
            hg,
            critic: !injected_passed,
            injected: z_minus.clone(),
            critic_input_size,
        });
    }
    Ok(rows)
}
