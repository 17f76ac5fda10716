//! Structured discovery report. Every collection serializes in a
//! deterministic order so identical runs produce identical bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use ivw_agents::{CandidateInstrument, DirectionJudgment, PairDecision};
use ivw_core::consistency::ConsistencyReport;
use ivw_core::{GrangerResult, IvEstimate};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Where a pair's processing ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    /// Full evaluation including the consistency report.
    Evaluated,
    /// Grounded fewer than two instruments; estimates (if any) are reported
    /// but the consistency metric is undefined.
    ConsistencyUnevaluable,
    /// Dropped because the direction agent saw no usable direction.
    DroppedNonDirectional,
    /// Dropped because the lag test did not confirm the direction.
    DroppedByTemporalTest,
    /// A stage failed hard; see `errors`.
    Failed,
}

/// Granger evidence as reported per pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemporalEvidence {
    pub result: GrangerResult,
    /// Reverse-direction result, present under strict exclusivity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse: Option<GrangerResult>,
    /// Weak stationarity of both series is assumed by the test, never
    /// verified; flagged here so readers see the caveat.
    pub stationarity_assumed: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageCounts {
    pub proposed: usize,
    pub valid_after_critics: usize,
    pub grounded: usize,
}

/// Everything decided about one screened (treatment, outcome) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairReport {
    pub treatment: String,
    pub outcome: String,
    /// Screening correlation and sample size.
    pub rho: f64,
    pub n: usize,
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionJudgment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<TemporalEvidence>,
    /// Every proposal across all rounds, with verdicts and grounding.
    pub proposals: Vec<CandidateInstrument>,
    /// Grounded proxy variables in proposal order, deduplicated.
    pub grounded: Vec<String>,
    pub estimates: BTreeMap<String, IvEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencyReport>,
    pub reinvocations: usize,
    pub stage_counts: StageCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unevaluable_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Unordered pairs examined by the correlation screen.
    pub pairs_evaluated: usize,
    /// Pairs the screen skipped (no overlap, constant column, too short).
    pub pairs_skipped: usize,
    pub preselected: usize,
    pub kept_by_relevance_agent: usize,
    pub directional: usize,
    pub confirmed_by_temporal_test: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

/// Full output of a discovery run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub schema_version: u32,
    pub seed: u64,
    pub pairs: Vec<PairReport>,
    /// Kept/dropped decisions from the relevance agent, with rationales.
    pub relevance_decisions: Vec<PairDecision>,
    pub diagnostics: RunDiagnostics,
}

impl DiscoveryReport {
    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
