//! Pipeline configuration: a TOML file with one section per stage, plus
//! environment-variable handling for provider secrets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ivw_agents::http::{HttpProvider, HttpProviderConfig};
use ivw_agents::{AgentError, AgentResult, PromptSet, Provider, ReplayProvider, ScriptedProvider};
use ivw_core::data::CsvSchema;
use ivw_core::synth::ScmSpec;
use ivw_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; all stage-level randomness derives from it.
    pub seed: u64,
    pub data: CsvSchema,
    pub preselect: PreselectConfig,
    pub proposer: ProposerConfig,
    pub granger: GrangerConfig,
    pub pipeline: StageConfig,
    pub consistency: ConsistencyConfig,
    pub provider: ProviderConfig,
    pub templates: TemplateConfig,
    pub benchmark: BenchmarkConfig,
    /// Structural-model section consumed by the dataset generator command.
    pub scm: Option<ScmSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreselectConfig {
    pub tau: f64,
    pub n_min: usize,
}

impl Default for PreselectConfig {
    fn default() -> Self {
        Self { tau: 0.7, n_min: 30 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposerConfig {
    /// Candidate instruments requested per round.
    pub instruments: usize,
    /// Hypothesized confounders requested per round.
    pub confounders: usize,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        Self { instruments: 5, confounders: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagPolicy {
    Fixed,
    Aic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrangerConfig {
    pub lag_policy: LagPolicy,
    /// Upper bound of the AIC scan.
    pub max_lag: usize,
    /// Lag used under the fixed policy.
    pub fixed_lag: usize,
    pub alpha: f64,
    /// Require the reverse direction NOT to reject as well.
    pub strict_exclusive: bool,
}

impl Default for GrangerConfig {
    fn default() -> Self {
        Self { lag_policy: LagPolicy::Aic, max_lag: 4, fixed_lag: 1, alpha: 0.05, strict_exclusive: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    /// Extra proposal rounds when no candidate grounds.
    pub max_reinvocations: usize,
    /// Standardize aligned columns before every pipeline regression.
    pub standardize: bool,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self { max_reinvocations: 3, standardize: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    /// Random pairs behind the baseline summary.
    pub r: usize,
    /// Random pairs behind the null distribution.
    pub null_pairs: usize,
    /// Base seed for the random sampling; the master seed when absent.
    pub seed: Option<u64>,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self { r: 100, null_pairs: 2000, seed: None }
    }
}

impl PipelineConfig {
    /// Seed feeding the consistency sampling.
    pub fn consistency_seed(&self) -> u64 {
        self.consistency.seed.unwrap_or(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Script,
    Replay,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Rule file for the scripted provider.
    pub script: Option<PathBuf>,
    /// Transcript file replayed verbatim.
    pub transcript: Option<PathBuf>,
    /// When set, every exchange is also recorded here.
    pub record: Option<PathBuf>,
    pub http: HttpProviderConfig,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Script,
            script: None,
            transcript: None,
            record: None,
            http: HttpProviderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    /// Directory of per-template overrides; builtin templates otherwise.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Embedding-similarity threshold at which a suggestion counts as a
    /// mention of a discredited instrument.
    pub em_threshold: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { em_threshold: 0.85 }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let cfg: Self =
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.proposer.instruments < 1 || self.proposer.confounders < 1 {
            return Err(Error::Config("proposer counts must be at least 1".into()));
        }
        if !(self.granger.alpha > 0.0 && self.granger.alpha < 1.0) {
            return Err(Error::Config(format!(
                "granger alpha must lie in (0, 1), got {}",
                self.granger.alpha
            )));
        }
        if self.granger.max_lag < 1 || self.granger.fixed_lag < 1 {
            return Err(Error::Config("granger lags must be at least 1".into()));
        }
        if !(self.preselect.tau > 0.0 && self.preselect.tau < 1.0) {
            return Err(Error::Config(format!(
                "preselect tau must lie in (0, 1), got {}",
                self.preselect.tau
            )));
        }
        if self.consistency.r < 1 || self.consistency.null_pairs < 1 {
            return Err(Error::Config("consistency sample counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn prompt_set(&self) -> AgentResult<PromptSet> {
        match &self.templates.dir {
            Some(dir) => PromptSet::with_overrides(dir),
            None => Ok(PromptSet::builtin()),
        }
    }
}

/// Instantiate the configured provider, wrapping it in a recorder when a
/// record path is set.
pub fn build_provider(cfg: &ProviderConfig, fixed_time: Option<u64>) -> AgentResult<Box<dyn Provider>> {
    let inner: Box<dyn Provider> = match cfg.kind {
        ProviderKind::Script => {
            let path = cfg.script.as_ref().ok_or_else(|| {
                AgentError::InvalidInput("provider.kind = script needs provider.script".into())
            })?;
            Box::new(ScriptedProvider::from_file(path)?)
        }
        ProviderKind::Replay => {
            let path = cfg.transcript.as_ref().ok_or_else(|| {
                AgentError::InvalidInput("provider.kind = replay needs provider.transcript".into())
            })?;
            Box::new(ReplayProvider::from_file(path)?)
        }
        ProviderKind::Http => Box::new(HttpProvider::new(cfg.http.clone())?),
    };
    match &cfg.record {
        Some(path) => Ok(Box::new(ivw_agents::RecordingProvider::create(inner, path, fixed_time)?)),
        None => Ok(inner),
    }
}
