//! Transcript recording and replay.
//!
//! A transcript is a line-delimited JSON file; each record carries the
//! request kind, the SHA-256 of the prompt, the prompt itself, the response
//! (text or embedding vector), and a timestamp. Recording wraps any live
//! provider; replay serves recorded responses keyed by prompt hash, FIFO
//! within identical prompts, so every live run can be re-run offline.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AgentError, AgentResult};
use crate::provider::{DecodingOptions, Provider};

pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed timestamps make recorded artifacts byte-reproducible; callers pass
/// one when an external epoch (e.g. SOURCE_DATE_EPOCH) is in force.
fn unix_now(fixed: Option<u64>) -> u64 {
    fixed.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub kind: String,
    pub prompt_sha256: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    pub unix_time: u64,
}

/// Wraps a provider and appends every exchange to a transcript file.
pub struct RecordingProvider<P> {
    inner: P,
    writer: Mutex<BufWriter<File>>,
    fixed_time: Option<u64>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn create(inner: P, path: &Path, fixed_time: Option<u64>) -> AgentResult<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner, writer: Mutex::new(BufWriter::new(file)), fixed_time })
    }

    fn write_record(&self, record: &TranscriptRecord) -> AgentResult<()> {
        let mut writer = self.writer.lock().expect("transcript writer poisoned");
        serde_json::to_writer(&mut *writer, record)
            .map_err(|e| AgentError::Malformed(e.to_string()))?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn name(&self) -> String {
        format!("recording({})", self.inner.name())
    }

    fn complete(&self, prompt: &str, opts: &DecodingOptions) -> AgentResult<String> {
        let response = self.inner.complete(prompt, opts)?;
        self.write_record(&TranscriptRecord {
            kind: "complete".into(),
            prompt_sha256: sha256_hex(prompt),
            prompt: prompt.to_string(),
            response: Some(response.clone()),
            vector: None,
            unix_time: unix_now(self.fixed_time),
        })?;
        Ok(response)
    }

    fn has_embedding(&self) -> bool {
        self.inner.has_embedding()
    }

    fn embed(&self, text: &str) -> AgentResult<Vec<f64>> {
        let vector = self.inner.embed(text)?;
        self.write_record(&TranscriptRecord {
            kind: "embed".into(),
            prompt_sha256: sha256_hex(text),
            prompt: text.to_string(),
            response: None,
            vector: Some(vector.clone()),
            unix_time: unix_now(self.fixed_time),
        })?;
        Ok(vector)
    }
}

/// Serves recorded responses; an unrecorded prompt is a hard mismatch.
pub struct ReplayProvider {
    name: String,
    records: Mutex<HashMap<(String, String), VecDeque<TranscriptRecord>>>,
    embedding: bool,
}

impl ReplayProvider {
    pub fn from_file(path: &Path) -> AgentResult<Self> {
        let file = File::open(path)?;
        let mut records: HashMap<(String, String), VecDeque<TranscriptRecord>> = HashMap::new();
        let mut embedding = false;
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord =
                serde_json::from_str(&line).map_err(|e| AgentError::Malformed(e.to_string()))?;
            if record.kind == "embed" {
                embedding = true;
            }
            records
                .entry((record.kind.clone(), record.prompt_sha256.clone()))
                .or_default()
                .push_back(record);
        }
        Ok(Self {
            name: format!("replay:{}", path.display()),
            records: Mutex::new(records),
            embedding,
        })
    }

    fn take(&self, kind: &str, prompt: &str) -> AgentResult<TranscriptRecord> {
        let key = (kind.to_string(), sha256_hex(prompt));
        let mut records = self.records.lock().expect("replay records poisoned");
        let queue = records.get_mut(&key);
        match queue {
            Some(q) => {
                // repeat the last record for re-prompts beyond the recording
                if q.len() > 1 {
                    Ok(q.pop_front().expect("checked nonempty"))
                } else {
                    q.front().cloned().ok_or_else(|| AgentError::TranscriptMismatch {
                        prompt_head: prompt.chars().take(80).collect(),
                    })
                }
            }
            None => Err(AgentError::TranscriptMismatch {
                prompt_head: prompt.chars().take(80).collect(),
            }),
        }
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn complete(&self, prompt: &str, _opts: &DecodingOptions) -> AgentResult<String> {
        let record = self.take("complete", prompt)?;
        record.response.ok_or_else(|| AgentError::Malformed("record lacks a response".into()))
    }

    fn has_embedding(&self) -> bool {
        self.embedding
    }

    fn embed(&self, text: &str) -> AgentResult<Vec<f64>> {
        let record = self.take("embed", text)?;
        record.vector.ok_or_else(|| AgentError::Malformed("record lacks a vector".into()))
    }
}
