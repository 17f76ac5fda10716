//! The contract every completion backend implements.

use serde::{Deserialize, Serialize};

use crate::error::{AgentError, AgentResult};

/// Decoding parameters sent with each completion request. The defaults ask
/// for deterministic decoding (temperature 0, top-p 1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecodingOptions {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: Option<u32>,
}

impl Default for DecodingOptions {
    fn default() -> Self {
        Self { temperature: 0.0, top_p: 1.0, max_tokens: None }
    }
}

/// A completion backend, optionally with an embedding capability.
///
/// Implementations must be safe to share across threads; callers may issue
/// requests for independent candidates concurrently.
pub trait Provider: Send + Sync {
    /// Stable identity string recorded in run manifests.
    fn name(&self) -> String;

    fn complete(&self, prompt: &str, opts: &DecodingOptions) -> AgentResult<String>;

    fn has_embedding(&self) -> bool {
        false
    }

    fn embed(&self, _text: &str) -> AgentResult<Vec<f64>> {
        Err(AgentError::Capability("embedding".into()))
    }
}

impl<P: Provider + ?Sized> Provider for &P {
    fn name(&self) -> String {
        (**self).name()
    }

    fn complete(&self, prompt: &str, opts: &DecodingOptions) -> AgentResult<String> {
        (**self).complete(prompt, opts)
    }

    fn has_embedding(&self) -> bool {
        (**self).has_embedding()
    }

    fn embed(&self, text: &str) -> AgentResult<Vec<f64>> {
        (**self).embed(text)
    }
}

impl Provider for Box<dyn Provider> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn complete(&self, prompt: &str, opts: &DecodingOptions) -> AgentResult<String> {
        (**self).complete(prompt, opts)
    }

    fn has_embedding(&self) -> bool {
        (**self).has_embedding()
    }

    fn embed(&self, text: &str) -> AgentResult<Vec<f64>> {
        (**self).embed(text)
    }
}

/// Cosine similarity of two embedding vectors; zero-norm inputs map to 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(cosine_similarity(&[1.0], &[1.0, 2.0]), 0.0);
    }
}
