//! The agent behaviors: propose, critique, select, orient, and ground.
//!
//! Parse failures get exactly one re-prompt with the same rendered prompt,
//! then surface as hard errors carrying the raw response text. Transport
//! failures are never retried here; that is the provider's job.

use rand::Rng;
use serde::{Deserialize, Serialize};

use ivw_core::{CausalQuery, PairCandidate, VariableMeta};

use crate::error::{AgentError, AgentResult};
use crate::parse;
use crate::prompts::{self, PromptSet};
use crate::provider::{cosine_similarity, DecodingOptions, Provider};

/// A critic's judgment of one validity condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid,
    Unevaluated,
}

/// Where a candidate instrument came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Injected,
}

/// A proposed instrument and everything decided about it so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInstrument {
    pub text: String,
    pub exclusion_verdict: Verdict,
    pub independence_verdict: Verdict,
    /// Dataset variable the candidate was grounded to, when grounding found one.
    pub proxy: Option<String>,
    pub provenance: Provenance,
}

impl CandidateInstrument {
    pub fn generated(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            exclusion_verdict: Verdict::Unevaluated,
            independence_verdict: Verdict::Unevaluated,
            proxy: None,
            provenance: Provenance::Generated,
        }
    }

    pub fn both_valid(&self) -> bool {
        self.exclusion_verdict == Verdict::Valid && self.independence_verdict == Verdict::Valid
    }
}

/// Causal-direction verdict from the four-way prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ACausesB,
    BCausesA,
    Bidirectional,
    NoLink,
}

impl Direction {
    pub fn is_directional(&self) -> bool {
        matches!(self, Direction::ACausesB | Direction::BCausesA)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionJudgment {
    pub verdict: Direction,
    pub rationale: String,
}

/// Provider, templates, and decoding options bundled for the operations.
pub struct AgentContext<'a> {
    pub provider: &'a dyn Provider,
    pub prompts: &'a PromptSet,
    pub decoding: DecodingOptions,
}

impl<'a> AgentContext<'a> {
    pub fn new(provider: &'a dyn Provider, prompts: &'a PromptSet) -> Self {
        Self { provider, prompts, decoding: DecodingOptions::default() }
    }

    /// Complete, parse, and re-prompt once if parsing fails.
    fn ask<T>(&self, prompt: &str, parse: impl Fn(&str) -> AgentResult<T>) -> AgentResult<T> {
        let first = self.provider.complete(prompt, &self.decoding)?;
        match parse(&first) {
            Ok(v) => Ok(v),
            Err(AgentError::Parse { .. }) => {
                let second = self.provider.complete(prompt, &self.decoding)?;
                parse(&second)
            }
            Err(other) => Err(other),
        }
    }
}

fn distinct_nonempty(items: Vec<String>, expected: usize) -> AgentResult<Vec<String>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let trimmed = item.trim().to_string();
        if trimmed.is_empty() {
            continue;
        }
        if seen.insert(trimmed.to_ascii_lowercase()) {
            out.push(trimmed);
        }
    }
    if out.len() != expected {
        return Err(AgentError::parse(
            format!("expected {expected} distinct items, got {}", out.len()),
            out.join(", "),
        ));
    }
    Ok(out)
}

fn propose(
    template: &str,
    q: &CausalQuery,
    count: usize,
    ctx: &AgentContext<'_>,
) -> AgentResult<Vec<String>> {
    if count < 1 {
        return Err(AgentError::InvalidInput("proposal count must be at least 1".into()));
    }
    let n = count.to_string();
    let prompt = ctx.prompts.render(
        template,
        &[("T", &q.treatment), ("Y", &q.outcome), ("N", &n), ("Context", &q.context)],
    )?;
    ctx.ask(&prompt, |text| distinct_nonempty(parse::parse_list(text)?, count))
}

/// Ask for `i` candidate instrument descriptions.
pub fn propose_instruments(q: &CausalQuery, i: usize, ctx: &AgentContext<'_>) -> AgentResult<Vec<String>> {
    propose(prompts::PROPOSE_INSTRUMENTS, q, i, ctx)
}

/// Ask for `j` hypothesized confounders.
pub fn propose_confounders(q: &CausalQuery, j: usize, ctx: &AgentContext<'_>) -> AgentResult<Vec<String>> {
    propose(prompts::PROPOSE_CONFOUNDERS, q, j, ctx)
}

/// Exclusion-restriction critique of one candidate.
pub fn critique_exclusion(z: &str, q: &CausalQuery, ctx: &AgentContext<'_>) -> AgentResult<Verdict> {
    if z.trim().is_empty() {
        return Err(AgentError::InvalidInput("candidate text must be nonempty".into()));
    }
    let prompt = ctx.prompts.render(
        prompts::CRITIQUE_EXCLUSION,
        &[("T", &q.treatment), ("Y", &q.outcome), ("Z", z), ("Context", &q.context)],
    )?;
    ctx.ask(&prompt, parse::parse_verdict)
}

/// Independence critique of one candidate against the hypothesized confounders.
pub fn critique_independence(
    z: &str,
    confounders: &[String],
    q: &CausalQuery,
    ctx: &AgentContext<'_>,
) -> AgentResult<Verdict> {
    if z.trim().is_empty() {
        return Err(AgentError::InvalidInput("candidate text must be nonempty".into()));
    }
    if confounders.is_empty() {
        return Err(AgentError::InvalidInput(
            "independence critique needs at least one hypothesized confounder".into(),
        ));
    }
    let joined = confounders.join("; ");
    let prompt = ctx.prompts.render(
        prompts::CRITIQUE_INDEPENDENCE,
        &[
            ("T", &q.treatment),
            ("Y", &q.outcome),
            ("Z", z),
            ("Confounders", &joined),
            ("Context", &q.context),
        ],
    )?;
    ctx.ask(&prompt, parse::parse_verdict)
}

/// Keep exactly the candidates both critics marked valid, in input order.
pub fn filter_valid(candidates: &[CandidateInstrument]) -> AgentResult<Vec<CandidateInstrument>> {
    for c in candidates {
        if c.exclusion_verdict == Verdict::Unevaluated || c.independence_verdict == Verdict::Unevaluated {
            return Err(AgentError::State(format!(
                "candidate {:?} still has an unevaluated verdict",
                c.text
            )));
        }
    }
    Ok(candidates.iter().filter(|c| c.both_valid()).cloned().collect())
}

/// Insert a known-flawed candidate at a seeded-random position.
pub fn inject_flawed(
    mut candidates: Vec<CandidateInstrument>,
    z_minus: &str,
    rng: &mut impl Rng,
) -> Vec<CandidateInstrument> {
    assert!(!z_minus.trim().is_empty(), "injected candidate text must be nonempty");
    let position = rng.random_range(0..=candidates.len());
    let mut injected = CandidateInstrument::generated(z_minus);
    injected.provenance = Provenance::Injected;
    candidates.insert(position, injected);
    candidates
}

/// One kept/dropped decision with the provider's reasoning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDecision {
    pub a: String,
    pub b: String,
    pub keep: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, Default)]
pub struct HumanProxyOutcome {
    pub kept: Vec<PairCandidate>,
    pub decisions: Vec<PairDecision>,
}

/// Screen statistically plausible pairs for socio-economic meaning.
pub fn human_proxy_select(
    pairs: &[PairCandidate],
    ctx: &AgentContext<'_>,
) -> AgentResult<HumanProxyOutcome> {
    if pairs.is_empty() {
        return Err(AgentError::InvalidInput("human proxy needs at least one pair".into()));
    }
    let mut outcome = HumanProxyOutcome::default();
    for pair in pairs {
        let prompt = ctx.prompts.render(prompts::HUMAN_PROXY, &[("A", &pair.a), ("B", &pair.b)])?;
        let (keep, rationale) = ctx.ask(&prompt, |text| {
            parse::parse_decision(text).map(|keep| (keep, text.to_string()))
        })?;
        if keep {
            outcome.kept.push(pair.clone());
        }
        outcome.decisions.push(PairDecision {
            a: pair.a.clone(),
            b: pair.b.clone(),
            keep,
            rationale,
        });
    }
    Ok(outcome)
}

/// Four-way causal-direction judgment for a screened pair.
pub fn causal_direction(pair: &PairCandidate, ctx: &AgentContext<'_>) -> AgentResult<DirectionJudgment> {
    let prompt = ctx.prompts.render(prompts::CAUSAL_DIRECTION, &[("A", &pair.a), ("B", &pair.b)])?;
    let (choice, rationale) =
        ctx.ask(&prompt, |text| parse::parse_choice(text, 1, 4).map(|c| (c, text.to_string())))?;
    let verdict = match choice {
        1 => Direction::ACausesB,
        2 => Direction::BCausesA,
        3 => Direction::Bidirectional,
        _ => Direction::NoLink,
    };
    Ok(DirectionJudgment { verdict, rationale })
}

/// Cap on the vocabulary shortlist offered without embedding support.
const LEXICAL_SHORTLIST_CAP: usize = 50;
const EMBED_SHORTLIST: usize = 5;

fn lexical_tokens(text: &str) -> std::collections::BTreeSet<String> {
    text.to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(ToString::to_string)
        .collect()
}

fn lexical_overlap(z: &str, meta: &VariableMeta) -> usize {
    let z_tokens = lexical_tokens(z);
    let vocab_tokens = lexical_tokens(&format!("{} {} {}", meta.name, meta.description, meta.unit));
    z_tokens.intersection(&vocab_tokens).count()
}

fn shortlist<'v>(
    z: &str,
    vocab: &'v [VariableMeta],
    ctx: &AgentContext<'_>,
) -> AgentResult<Vec<&'v VariableMeta>> {
    let mut scored: Vec<(f64, &VariableMeta)> = if ctx.provider.has_embedding() {
        let z_vec = ctx.provider.embed(z)?;
        let mut scored = Vec::with_capacity(vocab.len());
        for meta in vocab {
            let text = format!("{}: {}", meta.name, meta.description);
            let v = ctx.provider.embed(&text)?;
            scored.push((cosine_similarity(&z_vec, &v), meta));
        }
        scored
    } else {
        vocab.iter().map(|meta| (lexical_overlap(z, meta) as f64, meta)).collect()
    };
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.name.cmp(&b.1.name))
    });
    let cap = if ctx.provider.has_embedding() { EMBED_SHORTLIST } else { LEXICAL_SHORTLIST_CAP };
    Ok(scored.into_iter().take(cap).map(|(_, m)| m).collect())
}

/// Map a proposed instrument onto a concrete dataset variable, or decide
/// that no indicator operationalizes it.
///
/// With embedding support the completion model chooses among the top-5
/// vocabulary entries by cosine similarity; otherwise it sees the full
/// vocabulary (capped at 50) ranked by lexical overlap.
pub fn ground_instrument(
    z: &str,
    vocab: &[VariableMeta],
    ctx: &AgentContext<'_>,
) -> AgentResult<Option<String>> {
    if vocab.is_empty() {
        return Err(AgentError::InvalidInput("grounding vocabulary is empty".into()));
    }
    let choices = shortlist(z, vocab, ctx)?;
    let listing: String = choices
        .iter()
        .map(|m| {
            if m.description.is_empty() {
                format!("- {}", m.name)
            } else {
                format!("- {}: {}", m.name, m.description)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let prompt =
        ctx.prompts.render(prompts::GROUND_INSTRUMENT, &[("Z", z), ("Choices", &listing)])?;
    ctx.ask(&prompt, |text| {
        let payload = parse::extract_answer(text)
            .ok_or_else(|| AgentError::parse("no 'Answer = [...]' marker found", text))?;
        let lowered = payload.to_ascii_lowercase();
        if lowered == "none" {
            return Ok(None);
        }
        for meta in &choices {
            if meta.name.to_ascii_lowercase() == lowered {
                return Ok(Some(meta.name.clone()));
            }
        }
        Err(AgentError::parse(
            format!("answer {payload:?} names no offered indicator"),
            text,
        ))
    })
}
