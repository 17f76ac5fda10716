//! Scripted provider: ordered prompt-pattern rules with canned replies.
//!
//! Rules are checked in order and the first match wins. Each rule holds a
//! FIFO queue of replies; when only one reply remains it repeats forever, so
//! lookup-table scripts (one reply per rule) and stateful scripts (malformed
//! first reply, corrected second) both work.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::Deserialize;

use crate::error::{AgentError, AgentResult};
use crate::provider::{DecodingOptions, Provider};

#[derive(Debug, Clone)]
pub enum PromptMatcher {
    Exact(String),
    Contains(String),
    Regex(Regex),
    Any,
}

impl PromptMatcher {
    pub fn regex(pattern: &str) -> AgentResult<Self> {
        Ok(Self::Regex(Regex::new(pattern).map_err(|e| AgentError::Malformed(e.to_string()))?))
    }

    fn matches(&self, prompt: &str) -> bool {
        match self {
            Self::Exact(p) => prompt == p,
            Self::Contains(p) => prompt.contains(p.as_str()),
            Self::Regex(re) => re.is_match(prompt),
            Self::Any => true,
        }
    }
}

/// One canned reply.
#[derive(Debug, Clone)]
pub enum ScriptReply {
    Text(String),
    Vector(Vec<f64>),
    /// Simulated transport failure.
    Error(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RuleKind {
    Complete,
    Embed,
}

#[derive(Debug)]
struct ScriptRule {
    kind: RuleKind,
    matcher: PromptMatcher,
    replies: VecDeque<ScriptReply>,
}

impl ScriptRule {
    fn next_reply(&mut self) -> Option<ScriptReply> {
        if self.replies.len() > 1 {
            self.replies.pop_front()
        } else {
            self.replies.front().cloned()
        }
    }
}

/// Deterministic mock provider driven by an ordered rule list.
pub struct ScriptedProvider {
    name: String,
    rules: Mutex<Vec<ScriptRule>>,
    embedding: bool,
}

impl ScriptedProvider {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), rules: Mutex::new(Vec::new()), embedding: false }
    }

    /// Queue of responses served in order regardless of prompt content.
    pub fn from_responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut p = Self::new("scripted");
        let replies: VecDeque<ScriptReply> =
            responses.into_iter().map(|s| ScriptReply::Text(s.into())).collect();
        p.rules
            .get_mut()
            .expect("fresh mutex")
            .push(ScriptRule { kind: RuleKind::Complete, matcher: PromptMatcher::Any, replies });
        p
    }

    pub fn push_rule<I, S>(&mut self, matcher: PromptMatcher, responses: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let replies = responses.into_iter().map(|s| ScriptReply::Text(s.into())).collect();
        self.rules.get_mut().expect("unpoisoned").push(ScriptRule {
            kind: RuleKind::Complete,
            matcher,
            replies,
        });
        self
    }

    pub fn push_error_rule(&mut self, matcher: PromptMatcher, message: &str) -> &mut Self {
        self.rules.get_mut().expect("unpoisoned").push(ScriptRule {
            kind: RuleKind::Complete,
            matcher,
            replies: VecDeque::from([ScriptReply::Error(message.to_string())]),
        });
        self
    }

    pub fn push_embed_rule<I>(&mut self, matcher: PromptMatcher, vectors: I) -> &mut Self
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let replies = vectors.into_iter().map(ScriptReply::Vector).collect();
        self.rules.get_mut().expect("unpoisoned").push(ScriptRule {
            kind: RuleKind::Embed,
            matcher,
            replies,
        });
        self.embedding = true;
        self
    }

    /// Load rules from a JSON script file (see the repository fixtures for
    /// the format: a top-level `rules` array of `{kind, match, responses}`).
    pub fn from_file(path: &Path) -> AgentResult<Self> {
        let raw = std::fs::read_to_string(path)?;
        let spec: ScriptFile =
            serde_json::from_str(&raw).map_err(|e| AgentError::Malformed(e.to_string()))?;
        let mut provider = Self::new(format!("script:{}", path.display()));
        for rule in spec.rules {
            let matcher = rule.matcher()?;
            let kind = match rule.kind.as_deref() {
                None | Some("complete") => RuleKind::Complete,
                Some("embed") => RuleKind::Embed,
                Some(other) => {
                    return Err(AgentError::Malformed(format!("unknown rule kind '{other}'")))
                }
            };
            if kind == RuleKind::Embed {
                provider.embedding = true;
            }
            let mut replies = VecDeque::new();
            for value in rule.responses {
                replies.push_back(reply_from_value(value)?);
            }
            if replies.is_empty() {
                return Err(AgentError::Malformed("rule with no responses".into()));
            }
            provider.rules.get_mut().expect("unpoisoned").push(ScriptRule { kind, matcher, replies });
        }
        Ok(provider)
    }

    fn serve(&self, kind: RuleKind, prompt: &str) -> AgentResult<ScriptReply> {
        let mut rules = self.rules.lock().expect("script mutex poisoned");
        for rule in rules.iter_mut() {
            if rule.kind == kind && rule.matcher.matches(prompt) {
                if let Some(reply) = rule.next_reply() {
                    return Ok(reply);
                }
            }
        }
        Err(AgentError::TranscriptMismatch { prompt_head: head(prompt) })
    }
}

fn head(prompt: &str) -> String {
    prompt.chars().take(80).collect()
}

fn reply_from_value(value: serde_json::Value) -> AgentResult<ScriptReply> {
    match value {
        serde_json::Value::String(s) => Ok(ScriptReply::Text(s)),
        serde_json::Value::Array(items) => {
            let vector = items
                .into_iter()
                .map(|v| v.as_f64().ok_or_else(|| AgentError::Malformed("non-numeric embedding".into())))
                .collect::<AgentResult<Vec<f64>>>()?;
            Ok(ScriptReply::Vector(vector))
        }
        serde_json::Value::Object(map) => {
            let msg = map
                .get("error")
                .and_then(|v| v.as_str())
                .ok_or_else(|| AgentError::Malformed("object reply must carry an 'error' key".into()))?;
            Ok(ScriptReply::Error(msg.to_string()))
        }
        other => Err(AgentError::Malformed(format!("unsupported reply value {other}"))),
    }
}

#[derive(Debug, Deserialize)]
struct ScriptFile {
    rules: Vec<ScriptRuleSpec>,
}

#[derive(Debug, Deserialize)]
struct ScriptRuleSpec {
    #[serde(default)]
    kind: Option<String>,
    #[serde(rename = "match", default)]
    match_spec: Option<MatchSpec>,
    responses: Vec<serde_json::Value>,
}

impl ScriptRuleSpec {
    fn matcher(&self) -> AgentResult<PromptMatcher> {
        let Some(spec) = &self.match_spec else { return Ok(PromptMatcher::Any) };
        match (&spec.exact, &spec.contains, &spec.regex) {
            (Some(p), None, None) => Ok(PromptMatcher::Exact(p.clone())),
            (None, Some(p), None) => Ok(PromptMatcher::Contains(p.clone())),
            (None, None, Some(p)) => PromptMatcher::regex(p),
            (None, None, None) => Ok(PromptMatcher::Any),
            _ => Err(AgentError::Malformed("rule must use at most one of exact/contains/regex".into())),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
struct MatchSpec {
    exact: Option<String>,
    contains: Option<String>,
    regex: Option<String>,
}

impl Provider for ScriptedProvider {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn complete(&self, prompt: &str, _opts: &DecodingOptions) -> AgentResult<String> {
        match self.serve(RuleKind::Complete, prompt)? {
            ScriptReply::Text(s) => Ok(s),
            ScriptReply::Error(msg) => Err(AgentError::Transport { attempts: 1, message: msg }),
            ScriptReply::Vector(_) => {
                Err(AgentError::Malformed("embed reply served for a completion".into()))
            }
        }
    }

    fn has_embedding(&self) -> bool {
        self.embedding
    }

    fn embed(&self, text: &str) -> AgentResult<Vec<f64>> {
        if !self.embedding {
            return Err(AgentError::Capability("embedding".into()));
        }
        match self.serve(RuleKind::Embed, text)? {
            ScriptReply::Vector(v) => Ok(v),
            _ => Err(AgentError::Malformed("text reply served for an embedding".into())),
        }
    }
}
