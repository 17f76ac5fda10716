//! The treatment-outcome pair under study.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered (treatment, outcome) pair plus free-text context handed to the
/// agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalQuery {
    pub treatment: String,
    pub outcome: String,
    pub context: String,
}

impl CausalQuery {
    pub fn new(treatment: impl Into<String>, outcome: impl Into<String>, context: impl Into<String>) -> Result<Self> {
        let treatment = treatment.into();
        let outcome = outcome.into();
        if treatment == outcome {
            return Err(Error::Domain(format!("treatment and outcome are both '{treatment}'")));
        }
        Ok(Self { treatment, outcome, context: context.into() })
    }
}
