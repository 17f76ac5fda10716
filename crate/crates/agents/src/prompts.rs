//! Prompt templates with `{Placeholder}` substitution.
//!
//! The templates ship compiled into the binary and can be overridden from a
//! directory so they stay auditable and swappable without a rebuild. A
//! render fails if the template mentions a placeholder the caller did not
//! supply, which guarantees no prompt ever goes out with an unsubstituted
//! `{...}` in it.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{AgentError, AgentResult};

pub const PROPOSE_INSTRUMENTS: &str = "propose_instruments";
pub const PROPOSE_CONFOUNDERS: &str = "propose_confounders";
pub const CRITIQUE_EXCLUSION: &str = "critique_exclusion";
pub const CRITIQUE_INDEPENDENCE: &str = "critique_independence";
pub const HUMAN_PROXY: &str = "human_proxy";
pub const CAUSAL_DIRECTION: &str = "causal_direction";
pub const GROUND_INSTRUMENT: &str = "ground_instrument";
pub const CONCEPTUAL_MATCH: &str = "conceptual_match";

const BUILTIN: &[(&str, &str)] = &[
    (PROPOSE_INSTRUMENTS, include_str!("../templates/propose_instruments.txt")),
    (PROPOSE_CONFOUNDERS, include_str!("../templates/propose_confounders.txt")),
    (CRITIQUE_EXCLUSION, include_str!("../templates/critique_exclusion.txt")),
    (CRITIQUE_INDEPENDENCE, include_str!("../templates/critique_independence.txt")),
    (HUMAN_PROXY, include_str!("../templates/human_proxy.txt")),
    (CAUSAL_DIRECTION, include_str!("../templates/causal_direction.txt")),
    (GROUND_INSTRUMENT, include_str!("../templates/ground_instrument.txt")),
    (CONCEPTUAL_MATCH, include_str!("../templates/conceptual_match.txt")),
];

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z][A-Za-z0-9_]*)\}").expect("static regex"))
}

/// The set of named templates used by the agent operations.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl PromptSet {
    /// Templates compiled into the binary.
    pub fn builtin() -> Self {
        let templates =
            BUILTIN.iter().map(|(k, v)| (k.to_string(), v.trim_end().to_string())).collect();
        Self { templates }
    }

    /// Builtin templates with per-name overrides loaded from `<dir>/<name>.txt`.
    pub fn with_overrides(dir: &Path) -> AgentResult<Self> {
        let mut set = Self::builtin();
        for name in BUILTIN.iter().map(|(k, _)| *k) {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                let content = std::fs::read_to_string(&path)?;
                set.templates.insert(name.to_string(), content.trim_end().to_string());
            }
        }
        Ok(set)
    }

    pub fn template(&self, name: &str) -> AgentResult<&str> {
        self.templates
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| AgentError::Template(format!("unknown template '{name}'")))
    }

    /// Substitute every `{Placeholder}` in the named template.
    pub fn render(&self, name: &str, values: &[(&str, &str)]) -> AgentResult<String> {
        let template = self.template(name)?;
        let map: BTreeMap<&str, &str> = values.iter().copied().collect();
        let mut missing = Vec::new();
        let rendered = placeholder_re().replace_all(template, |caps: &regex::Captures<'_>| {
            let key = &caps[1];
            match map.get(key) {
                Some(v) => (*v).to_string(),
                None => {
                    missing.push(key.to_string());
                    String::new()
                }
            }
        });
        if !missing.is_empty() {
            missing.sort();
            missing.dedup();
            return Err(AgentError::Template(format!(
                "template '{name}' needs values for {{{}}}",
                missing.join("}, {")
            )));
        }
        Ok(rendered.into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_is_complete() {
        let set = PromptSet::builtin();
        for (name, _) in BUILTIN {
            assert!(set.template(name).is_ok(), "missing builtin template {name}");
        }
    }

    #[test]
    fn render_substitutes_all_placeholders() {
        let set = PromptSet::builtin();
        let prompt = set
            .render(
                PROPOSE_INSTRUMENTS,
                &[("T", "education"), ("Y", "wages"), ("N", "5"), ("Context", "labor economics")],
            )
            .unwrap();
        assert!(prompt.contains("education"));
        assert!(prompt.contains("wages"));
        assert!(!placeholder_re().is_match(&prompt), "unsubstituted placeholder in {prompt}");
    }

    #[test]
    fn render_reports_missing_values() {
        let set = PromptSet::builtin();
        let err = set.render(PROPOSE_INSTRUMENTS, &[("T", "education")]).unwrap_err();
        match err {
            AgentError::Template(msg) => {
                assert!(msg.contains("Y") && msg.contains("Context"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn every_builtin_template_renders_cleanly() {
        let set = PromptSet::builtin();
        let values = [
            ("T", "t"),
            ("Y", "y"),
            ("Z", "z"),
            ("N", "5"),
            ("Context", "ctx"),
            ("Confounders", "u1; u2"),
            ("A", "a"),
            ("B", "b"),
            ("Choices", "- v1: first"),
            ("Suggestion", "s"),
            ("Canonical", "c"),
        ];
        for (name, _) in BUILTIN {
            let prompt = set.render(name, &values).unwrap();
            assert!(!placeholder_re().is_match(&prompt), "{name} left a placeholder: {prompt}");
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("human_proxy.txt"), "custom {A} {B}").unwrap();
        let set = PromptSet::with_overrides(dir.path()).unwrap();
        let prompt = set.render(HUMAN_PROXY, &[("A", "x"), ("B", "y")]).unwrap();
        assert_eq!(prompt, "custom x y");
        // untouched templates still come from the builtin set
        assert!(set.template(CAUSAL_DIRECTION).unwrap().contains("causal direction"));
    }
}
