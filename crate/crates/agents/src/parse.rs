//! Extraction of structured values from agent responses.
//!
//! Every template instructs the model to finish with `Answer = [...]`; the
//! last such marker in the response wins, so chain-of-thought text that
//! mentions the marker format early on does not confuse extraction.

use regex::Regex;
use std::sync::OnceLock;

use crate::error::{AgentError, AgentResult};
use crate::ops::Verdict;

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[Aa]nswer\s*=\s*\[([^\]]*)\]").expect("static regex"))
}

/// Payload of the last `Answer = [...]` marker, trimmed.
pub fn extract_answer(text: &str) -> Option<String> {
    marker().captures_iter(text).last().map(|c| c[1].trim().to_string())
}

/// Expected shape of an answer payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerShape {
    /// Comma-separated items.
    List,
    /// Valid / Invalid.
    Verdict,
    /// Keep / Drop.
    Decision,
    /// An integer between the bounds, inclusive.
    Choice { lo: u8, hi: u8 },
}

/// A parsed answer payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    List(Vec<String>),
    Verdict(Verdict),
    Decision(bool),
    Choice(u8),
}

/// Parse the last answer marker of `text` into the expected shape.
pub fn parse_answer(text: &str, shape: AnswerShape) -> AgentResult<Answer> {
    let payload = extract_answer(text)
        .ok_or_else(|| AgentError::parse("no 'Answer = [...]' marker found", text))?;
    match shape {
        AnswerShape::List => {
            let items: Vec<String> = payload
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            Ok(Answer::List(items))
        }
        AnswerShape::Verdict => match payload.to_ascii_lowercase().as_str() {
            "valid" => Ok(Answer::Verdict(Verdict::Valid)),
            "invalid" => Ok(Answer::Verdict(Verdict::Invalid)),
            other => Err(AgentError::parse(format!("expected Valid/Invalid, got {other:?}"), text)),
        },
        AnswerShape::Decision => match payload.to_ascii_lowercase().as_str() {
            "keep" => Ok(Answer::Decision(true)),
            "drop" => Ok(Answer::Decision(false)),
            other => Err(AgentError::parse(format!("expected Keep/Drop, got {other:?}"), text)),
        },
        AnswerShape::Choice { lo, hi } => {
            let value: u8 = payload
                .parse()
                .map_err(|_| AgentError::parse(format!("expected an integer, got {payload:?}"), text))?;
            if value < lo || value > hi {
                return Err(AgentError::parse(
                    format!("choice {value} outside {lo}..={hi}"),
                    text,
                ));
            }
            Ok(Answer::Choice(value))
        }
    }
}

pub fn parse_list(text: &str) -> AgentResult<Vec<String>> {
    match parse_answer(text, AnswerShape::List)? {
        Answer::List(items) => Ok(items),
        _ => unreachable!(),
    }
}

pub fn parse_verdict(text: &str) -> AgentResult<Verdict> {
    match parse_answer(text, AnswerShape::Verdict)? {
        Answer::Verdict(v) => Ok(v),
        _ => unreachable!(),
    }
}

pub fn parse_decision(text: &str) -> AgentResult<bool> {
    match parse_answer(text, AnswerShape::Decision)? {
        Answer::Decision(v) => Ok(v),
        _ => unreachable!(),
    }
}

pub fn parse_choice(text: &str, lo: u8, hi: u8) -> AgentResult<u8> {
    match parse_answer(text, AnswerShape::Choice { lo, hi })? {
        Answer::Choice(v) => Ok(v),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_with_reasoning_prefix() {
        let got = parse_list("some reasoning first... Answer = [a, b]").unwrap();
        assert_eq!(got, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn five_item_list() {
        let text = "Answer = [distance to port, commodity prices, rainfall, tariffs, rail density]";
        let got = parse_list(text).unwrap();
        assert_eq!(got.len(), 5);
        assert_eq!(got[0], "distance to port");
        assert_eq!(got[4], "rail density");
    }

    #[test]
    fn verdict_tolerates_spacing_and_case() {
        assert_eq!(parse_verdict("Answer=[ Valid ]").unwrap(), Verdict::Valid);
        assert_eq!(parse_verdict("Answer = [invalid]").unwrap(), Verdict::Invalid);
    }

    #[test]
    fn last_marker_wins() {
        let text = "First guess: Answer = [a]. On reflection: Answer = [b, c]";
        assert_eq!(parse_list(text).unwrap(), vec!["b".to_string(), "c".to_string()]);
    }

    #[test]
    fn missing_marker() {
        let err = parse_list("no structured ending here").unwrap_err();
        assert!(matches!(err, AgentError::Parse { .. }));
    }

    #[test]
    fn choice_range() {
        assert_eq!(parse_choice("Answer = [1]", 1, 4).unwrap(), 1);
        assert_eq!(parse_choice("Answer = [4]", 1, 4).unwrap(), 4);
        assert!(parse_choice("Answer = [5]", 1, 4).is_err());
        assert!(parse_choice("Answer = [0]", 1, 10).is_err());
        assert!(parse_choice("Answer = [ten]", 1, 10).is_err());
    }

    #[test]
    fn empty_list_parses_to_zero_items() {
        assert_eq!(parse_list("Answer = []").unwrap().len(), 0);
    }

    #[test]
    fn decision_parsing() {
        assert!(parse_decision("Answer = [Keep]").unwrap());
        assert!(!parse_decision("Answer = [drop]").unwrap());
        assert!(parse_decision("Answer = [maybe]").is_err());
    }
}
