//! Agent flows against recorded transcript fixtures: the replay provider
//! serves previously captured responses keyed by prompt hash, so these runs
//! are exact re-executions of a live session.

use std::io::Write;
use std::path::Path;

use ivw_agents::transcript::{sha256_hex, TranscriptRecord};
use ivw_agents::{
    critique_exclusion, propose_instruments, AgentContext, PromptSet, Provider, ReplayProvider,
    Verdict,
};
use ivw_core::CausalQuery;

fn write_transcript(path: &Path, records: &[TranscriptRecord]) {
    let mut file = std::fs::File::create(path).unwrap();
    for record in records {
        serde_json::to_writer(&file, record).unwrap();
        file.write_all(b"\n").unwrap();
    }
}

fn complete_record(prompt: &str, response: &str) -> TranscriptRecord {
    TranscriptRecord {
        kind: "complete".into(),
        prompt_sha256: sha256_hex(prompt),
        prompt: prompt.to_string(),
        response: Some(response.to_string()),
        vector: None,
        unix_time: 1_700_000_000,
    }
}

fn embed_record(text: &str, vector: Vec<f64>) -> TranscriptRecord {
    TranscriptRecord {
        kind: "embed".into(),
        prompt_sha256: sha256_hex(text),
        prompt: text.to_string(),
        response: None,
        vector: Some(vector),
        unix_time: 1_700_000_000,
    }
}

#[test]
fn replayed_education_wages_session_recovers_the_canonical_instrument() {
    let prompts = PromptSet::builtin();
    let query = CausalQuery::new("education", "wages", "returns to schooling").unwrap();
    let rendered = prompts
        .render(
            ivw_agents::prompts::PROPOSE_INSTRUMENTS,
            &[
                ("T", "education"),
                ("Y", "wages"),
                ("N", "5"),
                ("Context", "returns to schooling"),
            ],
        )
        .unwrap();
    let response = "Institutional features that shift schooling but not wages directly: \
        Answer = [compulsory schooling laws, quarter of birth, distance to college, \
        tuition subsidies, school construction programs]";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("education_wages.jsonl");
    write_transcript(&path, &[complete_record(&rendered, response)]);

    let provider = ReplayProvider::from_file(&path).unwrap();
    let ctx = AgentContext::new(&provider, &prompts);
    let suggestions = propose_instruments(&query, 5, &ctx).unwrap();
    assert!(
        suggestions.iter().any(|s| s == "compulsory schooling laws"),
        "canonical instrument missing from {suggestions:?}"
    );
}

#[test]
fn replayed_critic_rejects_rainfall_for_gdp_conflict() {
    let prompts = PromptSet::builtin();
    let query = CausalQuery::new("gdp", "civil conflict", "macro panel").unwrap();
    let rendered = prompts
        .render(
            ivw_agents::prompts::CRITIQUE_EXCLUSION,
            &[("T", "gdp"), ("Y", "civil conflict"), ("Z", "rainfall"), ("Context", "macro panel")],
        )
        .unwrap();
    let response = "Rainfall affects conflict through agricultural channels directly, \
        bypassing gdp, so the exclusion restriction fails. Answer = [Invalid]";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gdp_conflict_critic.jsonl");
    write_transcript(&path, &[complete_record(&rendered, response)]);

    let provider = ReplayProvider::from_file(&path).unwrap();
    let ctx = AgentContext::new(&provider, &prompts);
    let verdict = critique_exclusion("rainfall", &query, &ctx).unwrap();
    assert_eq!(verdict, Verdict::Invalid);
}

#[test]
fn replayed_embedder_scores_a_paraphrase_between_zero_and_one() {
    let prompts = PromptSet::builtin();
    let suggestion = "raised compulsory school-leaving age";
    let canonical = "compulsory schooling age";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paraphrase_embeddings.jsonl");
    write_transcript(
        &path,
        &[
            embed_record(suggestion, vec![0.8, 0.6, 0.0]),
            embed_record(canonical, vec![0.9, 0.43, 0.1]),
        ],
    );
    let provider = ReplayProvider::from_file(&path).unwrap();
    assert!(provider.has_embedding());
    let ctx = AgentContext::new(&provider, &prompts);
    let similarity = ivw_agents::recovery::exact_match(suggestion, canonical, &ctx).unwrap();
    assert!(
        similarity > 0.0 && similarity < 1.0,
        "paraphrase similarity should be strictly between 0 and 1, got {similarity}"
    );
}
