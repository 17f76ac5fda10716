//! Recovery-benchmark scoring: embedding-similarity exact match and
//! judge-scored conceptual match against literature-established instruments.

use serde::{Deserialize, Serialize};

use ivw_core::CausalQuery;

use crate::error::{AgentError, AgentResult};
use crate::ops::AgentContext;
use crate::parse;
use crate::prompts;
use crate::provider::cosine_similarity;

/// One benchmark task: a treatment-outcome pair with its accepted
/// instruments and, for the avoidance protocol, its discredited ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub treatment: String,
    pub outcome: String,
    #[serde(default)]
    pub context: String,
    #[serde(default)]
    pub canonical_ivs: Vec<String>,
    #[serde(default)]
    pub flawed_ivs: Vec<String>,
    /// Free-text source note (literature citation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl BenchmarkEntry {
    pub fn query(&self) -> AgentResult<CausalQuery> {
        CausalQuery::new(&self.treatment, &self.outcome, &self.context)
            .map_err(|e| AgentError::InvalidInput(e.to_string()))
    }
}

/// Load a benchmark file: a JSON array of entries.
pub fn load_benchmark(path: &std::path::Path) -> AgentResult<Vec<BenchmarkEntry>> {
    let raw = std::fs::read_to_string(path)?;
    serde_json::from_str(&raw).map_err(|e| AgentError::Malformed(e.to_string()))
}

/// Cosine similarity between the embeddings of a suggestion and a canonical
/// instrument. Requires embedding capability.
pub fn exact_match(suggestion: &str, canonical: &str, ctx: &AgentContext<'_>) -> AgentResult<f64> {
    if suggestion.trim().is_empty() || canonical.trim().is_empty() {
        return Err(AgentError::InvalidInput("exact match needs nonempty texts".into()));
    }
    if !ctx.provider.has_embedding() {
        return Err(AgentError::Capability("embedding".into()));
    }
    let a = ctx.provider.embed(suggestion)?;
    let b = ctx.provider.embed(canonical)?;
    Ok(cosine_similarity(&a, &b))
}

/// Judge-rated conceptual similarity on a 1..=10 scale.
pub fn conceptual_match(
    suggestion: &str,
    canonical: &str,
    q: &CausalQuery,
    ctx: &AgentContext<'_>,
) -> AgentResult<u8> {
    if suggestion.trim().is_empty() || canonical.trim().is_empty() {
        return Err(AgentError::InvalidInput("conceptual match needs nonempty texts".into()));
    }
    let prompt = ctx.prompts.render(
        prompts::CONCEPTUAL_MATCH,
        &[
            ("T", &q.treatment),
            ("Y", &q.outcome),
            ("Suggestion", suggestion),
            ("Canonical", canonical),
        ],
    )?;
    let first = ctx.provider.complete(&prompt, &ctx.decoding)?;
    match parse::parse_choice(&first, 1, 10) {
        Ok(v) => Ok(v),
        Err(AgentError::Parse { .. }) => {
            let second = ctx.provider.complete(&prompt, &ctx.decoding)?;
            parse::parse_choice(&second, 1, 10)
        }
        Err(other) => Err(other),
    }
}

/// Per-entry aggregates of the recovery benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryScore {
    /// Max cosine similarity over (suggestion, canonical) pairs, clamped at
    /// zero for reporting (cosine can be negative; the reported scale is [0, 1]).
    pub em: f64,
    /// Unclamped max cosine, kept for diagnosis.
    pub em_raw: f64,
    /// (suggestion, canonical) pair achieving the EM maximum.
    pub em_pair: (String, String),
    /// Max judge score divided by 10.
    pub cm: f64,
    pub cm_pair: (String, String),
}

/// Score a suggestion set against an entry's canonical instruments: both
/// aggregates take the max over all (suggestion, canonical) pairs.
pub fn score_recovery(
    entry: &BenchmarkEntry,
    suggestions: &[String],
    ctx: &AgentContext<'_>,
) -> AgentResult<RecoveryScore> {
    if entry.canonical_ivs.is_empty() {
        return Err(AgentError::InvalidInput(format!(
            "recovery entry {} -> {} has no canonical instruments",
            entry.treatment, entry.outcome
        )));
    }
    if suggestions.is_empty() {
        return Err(AgentError::InvalidInput("recovery scoring needs at least one suggestion".into()));
    }
    let q = entry.query()?;
    let mut em_raw = f64::NEG_INFINITY;
    let mut em_pair = (String::new(), String::new());
    let mut cm_best = 0u8;
    let mut cm_pair = (String::new(), String::new());
    for suggestion in suggestions {
        for canonical in &entry.canonical_ivs {
            let sim = exact_match(suggestion, canonical, ctx)?;
            if sim > em_raw {
                em_raw = sim;
                em_pair = (suggestion.clone(), canonical.clone());
            }
            let score = conceptual_match(suggestion, canonical, &q, ctx)?;
            if score > cm_best {
                cm_best = score;
                cm_pair = (suggestion.clone(), canonical.clone());
            }
        }
    }
    Ok(RecoveryScore {
        em: em_raw.max(0.0),
        em_raw,
        em_pair,
        cm: cm_best as f64 / 10.0,
        cm_pair,
    })
}

/// Flags from the flawed-instrument protocol.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlawedScore {
    /// The proposer reproduced a discredited instrument.
    pub hg: bool,
    /// The critics rejected the injected discredited instrument.
    pub critic: bool,
}

/// Did any suggestion match a discredited instrument? Exact case-insensitive
/// text match always applies; when embeddings are available, cosine
/// similarity at or above `em_threshold` also counts.
pub fn flawed_mentioned(
    entry: &BenchmarkEntry,
    suggestions: &[String],
    em_threshold: f64,
    ctx: &AgentContext<'_>,
) -> AgentResult<bool> {
    if entry.flawed_ivs.is_empty() {
        return Err(AgentError::InvalidInput(format!(
            "entry {} -> {} declares no flawed instruments",
            entry.treatment, entry.outcome
        )));
    }
    for suggestion in suggestions {
        for flawed in &entry.flawed_ivs {
            if suggestion.trim().eq_ignore_ascii_case(flawed.trim()) {
                return Ok(true);
            }
            if ctx.provider.has_embedding() && exact_match(suggestion, flawed, ctx)? >= em_threshold {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Combine the proposer and critic outcomes into the benchmark flags.
pub fn score_flawed(
    entry: &BenchmarkEntry,
    suggestions: &[String],
    injected_rejected: bool,
    em_threshold: f64,
    ctx: &AgentContext<'_>,
) -> AgentResult<FlawedScore> {
    let hg = flawed_mentioned(entry, suggestions, em_threshold, ctx)?;
    Ok(FlawedScore { hg, critic: injected_rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::PromptSet;
    use crate::script::{PromptMatcher, ScriptedProvider};

    fn entry() -> BenchmarkEntry {
        BenchmarkEntry {
            treatment: "education".into(),
            outcome: "wages".into(),
            context: "labor economics".into(),
            canonical_ivs: vec!["compulsory schooling laws".into(), "distance to college".into()],
            flawed_ivs: vec!["rainfall".into()],
            notes: None,
        }
    }

    /// Unit-normalizing embedder keyed by exact text: identical strings map
    /// to identical unit vectors.
    fn normalizing_mock(pairs: &[(&str, Vec<f64>)]) -> ScriptedProvider {
        let mut p = ScriptedProvider::new("embed-mock");
        for (text, vector) in pairs {
            let norm: f64 = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            let unit: Vec<f64> = vector.iter().map(|v| v / norm).collect();
            p.push_embed_rule(PromptMatcher::Exact((*text).into()), [unit]);
        }
        p
    }

    #[test]
    fn identical_strings_have_unit_similarity() {
        let p = normalizing_mock(&[("compulsory schooling laws", vec![0.3, 0.4, 0.5])]);
        let prompts = PromptSet::builtin();
        let ctx = AgentContext::new(&p, &prompts);
        let sim = exact_match("compulsory schooling laws", "compulsory schooling laws", &ctx).unwrap();
        assert!((sim - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_mock_vectors_score_zero() {
        let p = normalizing_mock(&[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]);
        let prompts = PromptSet::builtin();
        let ctx = AgentContext::new(&p, &prompts);
        assert!(exact_match("a", "b", &ctx).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exact_match_requires_embeddings() {
        let p = ScriptedProvider::from_responses(["irrelevant"]);
        let prompts = PromptSet::builtin();
        let ctx = AgentContext::new(&p, &prompts);
        assert!(matches!(exact_match("a", "b", &ctx), Err(AgentError::Capability(_))));
    }

    #[test]
    fn conceptual_match_parses_and_bounds() {
        let q = CausalQuery::new("education", "wages", "").unwrap();
        let prompts = PromptSet::builtin();
        let p = ScriptedProvider::from_responses(["Answer = [10]"]);
        let ctx = AgentContext::new(&p, &prompts);
        assert_eq!(conceptual_match("a", "b", &q, &ctx).unwrap(), 10);
        let p = ScriptedProvider::from_responses(["Answer = [0]", "Answer = [0]"]);
        let ctx = AgentContext::new(&p, &prompts);
        assert!(conceptual_match("a", "b", &q, &ctx).is_err());
    }

    #[test]
    fn judge_transcript_scores_paraphrase_high() {
        let q = CausalQuery::new("education", "wages", "").unwrap();
        let prompts = PromptSet::builtin();
        let mut p = ScriptedProvider::new("judge");
        p.push_rule(
            PromptMatcher::Contains("raised compulsory school-leaving age".into()),
            ["close paraphrase of the accepted instrument. Answer = [9]"],
        );
        let ctx = AgentContext::new(&p, &prompts);
        let got = conceptual_match(
            "raised compulsory school-leaving age",
            "compulsory schooling age",
            &q,
            &ctx,
        )
        .unwrap();
        assert!(got >= 8);
    }

    fn scoring_provider() -> ScriptedProvider {
        let mut p = ScriptedProvider::new("score-mock");
        // embeddings: verbatim canonical shares a vector with the suggestion
        for (text, v) in [
            ("compulsory schooling laws", vec![1.0, 0.0, 0.0]),
            ("distance to college", vec![0.0, 1.0, 0.0]),
            ("teacher strikes", vec![0.0, 0.0, 1.0]),
        ] {
            p.push_embed_rule(PromptMatcher::Exact(text.into()), [v]);
        }
        // judge scores: 3 then 7 then 9 then 2 for successive calls
        p.push_rule(
            PromptMatcher::Contains("rate on a scale".into()),
            ["Answer = [3]", "Answer = [7]", "Answer = [9]", "Answer = [2]"],
        );
        p
    }

    #[test]
    fn recovery_score_takes_maxima() {
        let prompts = PromptSet::builtin();
        let p = scoring_provider();
        let ctx = AgentContext::new(&p, &prompts);
        let suggestions = vec!["compulsory schooling laws".to_string(), "teacher strikes".to_string()];
        let score = score_recovery(&entry(), &suggestions, &ctx).unwrap();
        assert!((score.em - 1.0).abs() < 1e-6, "verbatim canonical must give EM 1, got {}", score.em);
        assert_eq!(score.em_pair.0, "compulsory schooling laws");
        // max of the scripted judge scores {3, 7, 9, 2} is 9 -> 0.9
        assert!((score.cm - 0.9).abs() < 1e-12);
    }

    #[test]
    fn recovery_score_is_permutation_invariant_and_max_monotone() {
        let prompts = PromptSet::builtin();
        let suggestions = vec!["compulsory schooling laws".to_string(), "teacher strikes".to_string()];
        let reversed: Vec<String> = suggestions.iter().rev().cloned().collect();
        // fresh providers per run with a position-independent judge score
        let fixed_judge = || {
            let mut p = ScriptedProvider::new("fixed");
            for (text, v) in [
                ("compulsory schooling laws", vec![1.0, 0.0, 0.0]),
                ("distance to college", vec![0.0, 1.0, 0.0]),
                ("teacher strikes", vec![0.0, 0.0, 1.0]),
            ] {
                p.push_embed_rule(PromptMatcher::Exact(text.into()), [v]);
            }
            p.push_rule(PromptMatcher::Any, ["Answer = [5]"]);
            p
        };
        let p1 = fixed_judge();
        let p2 = fixed_judge();
        let ctx1 = AgentContext::new(&p1, &prompts);
        let ctx2 = AgentContext::new(&p2, &prompts);
        let a = score_recovery(&entry(), &suggestions, &ctx1).unwrap();
        let b = score_recovery(&entry(), &reversed, &ctx2).unwrap();
        assert!((a.em - b.em).abs() < 1e-12);
        assert!((a.cm - b.cm).abs() < 1e-12);

        // adding a suggestion never lowers EM
        let p3 = fixed_judge();
        let ctx3 = AgentContext::new(&p3, &prompts);
        let fewer = score_recovery(&entry(), &suggestions[..1], &ctx3).unwrap();
        assert!(a.em >= fewer.em - 1e-12);
    }

    #[test]
    fn orthogonal_suggestions_clamp_to_zero() {
        let prompts = PromptSet::builtin();
        let mut p = ScriptedProvider::new("neg");
        p.push_embed_rule(PromptMatcher::Exact("opposite".into()), [vec![-1.0, 0.0]]);
        p.push_embed_rule(PromptMatcher::Any, [vec![1.0, 0.0]]);
        p.push_rule(PromptMatcher::Any, ["Answer = [1]"]);
        let ctx = AgentContext::new(&p, &prompts);
        let score = score_recovery(&entry(), &["opposite".to_string()], &ctx).unwrap();
        assert_eq!(score.em, 0.0);
        assert!(score.em_raw < 0.0);
    }

    #[test]
    fn flawed_mention_by_exact_text() {
        let prompts = PromptSet::builtin();
        let p = ScriptedProvider::from_responses(["unused"]);
        let ctx = AgentContext::new(&p, &prompts);
        let suggestions = vec!["Rainfall".to_string(), "tariffs".to_string()];
        assert!(flawed_mentioned(&entry(), &suggestions, 0.85, &ctx).unwrap());
        let clean = vec!["tariffs".to_string()];
        assert!(!flawed_mentioned(&entry(), &clean, 0.85, &ctx).unwrap());
    }

    #[test]
    fn flawed_mention_by_embedding_threshold() {
        let prompts = PromptSet::builtin();
        let mut p = ScriptedProvider::new("emb");
        p.push_embed_rule(PromptMatcher::Exact("seasonal rain totals".into()), [vec![0.95, 0.05]]);
        p.push_embed_rule(PromptMatcher::Exact("rainfall".into()), [vec![1.0, 0.0]]);
        let ctx = AgentContext::new(&p, &prompts);
        let suggestions = vec!["seasonal rain totals".to_string()];
        assert!(flawed_mentioned(&entry(), &suggestions, 0.85, &ctx).unwrap());
    }

    #[test]
    fn score_flawed_combines_flags() {
        let prompts = PromptSet::builtin();
        let p = ScriptedProvider::from_responses(["unused"]);
        let ctx = AgentContext::new(&p, &prompts);
        let s = score_flawed(&entry(), &["rainfall".to_string()], true, 0.85, &ctx).unwrap();
        assert!(s.hg && s.critic);
        let s = score_flawed(&entry(), &["tariffs".to_string()], false, 0.85, &ctx).unwrap();
        assert!(!s.hg && !s.critic);
    }
}
