//! LLM-facing layer: the provider contract, prompt templates, response
//! parsing, and the agent behaviors that propose, critique, and ground
//! candidate instruments.
//!
//! Every operation here works against the [`provider::Provider`] trait, so
//! the whole layer runs identically against a live HTTP endpoint, a recorded
//! transcript replay, or a scripted mock. All decoding defaults request
//! temperature 0 and top-p 1 so runs are as reproducible as the backend
//! allows; the scripted and replay providers are exactly reproducible.

pub mod error;
pub mod http;
pub mod ops;
pub mod parse;
pub mod prompts;
pub mod provider;
pub mod recovery;
pub mod script;
pub mod transcript;

pub use error::{AgentError, AgentResult};
pub use ops::{
    causal_direction, critique_exclusion, critique_independence, filter_valid, ground_instrument,
    human_proxy_select, inject_flawed, propose_confounders, propose_instruments, AgentContext,
    CandidateInstrument, Direction, DirectionJudgment, HumanProxyOutcome, PairDecision, Provenance,
    Verdict,
};
pub use prompts::PromptSet;
pub use provider::{DecodingOptions, Provider};
pub use script::ScriptedProvider;
pub use transcript::{RecordingProvider, ReplayProvider};
