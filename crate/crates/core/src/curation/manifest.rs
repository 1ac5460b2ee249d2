//! Caption attachment and the JSONL clip manifest.

use serde::{Deserialize, Serialize};

use super::{ClipRecord, ClipScores, CurationError, Result};
use crate::media::Fps;
use crate::providers::{CaptionRequest, ModelProvider, ProviderError};

/// Share of caption failures tolerated before the manifest stage aborts.
pub const MAX_CAPTION_FAILURE_RATE: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub source: String,
    pub frame_start: usize,
    pub frame_end: usize,
    pub fps: Fps,
    pub scores: ClipScores,
    pub caption: String,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestOutcome {
    /// Sorted by clip id.
    pub entries: Vec<ManifestEntry>,
    /// `(clip id, reason)` for passing clips left out because captioning failed.
    pub skipped: Vec<(String, String)>,
}

impl ManifestOutcome {
    /// One JSON object per line, each line newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }
}

pub fn caption_request(record: &ClipRecord) -> CaptionRequest {
    CaptionRequest {
        id: record.id.clone(),
        source: record.source.clone(),
        frame_start: record.frame_start,
        frame_end: record.frame_end,
        fps: record.fps,
        hint: record.caption.clone(),
    }
}

/// Records with a passing verdict, sorted by id.
pub fn passing_records(records: &[ClipRecord]) -> Vec<&ClipRecord> {
    let mut passing: Vec<&ClipRecord> = records
        .iter()
        .filter(|r| r.verdict.as_ref().is_some_and(|v| v.pass))
        .collect();
    passing.sort_by(|a, b| a.id.cmp(&b.id));
    passing
}

/// Pair passing records with caption results (same order as
/// [`passing_records`]). Failed or blank captions skip the record; more
/// than 10% of them aborts.
pub fn finish_manifest(
    passing: &[&ClipRecord],
    captions: Vec<std::result::Result<String, ProviderError>>,
) -> Result<ManifestOutcome> {
    assert_eq!(passing.len(), captions.len(), "one caption result per passing record");
    let mut entries = Vec::with_capacity(passing.len());
    let mut skipped = Vec::new();
    for (record, caption) in passing.iter().zip(captions) {
        let caption = match caption {
            Ok(c) if !c.trim().is_empty() => c,
            Ok(_) => {
                log::warn!("clip {}: provider returned an empty caption; skipped", record.id);
                skipped.push((record.id.clone(), "empty caption".to_string()));
                continue;
            }
            Err(e) => {
                log::warn!("clip {}: caption failed: {e}; skipped", record.id);
                skipped.push((record.id.clone(), e.to_string()));
                continue;
            }
        };
        entries.push(ManifestEntry {
            id: record.id.clone(),
            source: record.source.clone(),
            frame_start: record.frame_start,
            frame_end: record.frame_end,
            fps: record.fps,
            scores: record.scores.clone(),
            caption,
            tags: record.tags.clone(),
        });
    }
    if skipped.len() as f64 > MAX_CAPTION_FAILURE_RATE * passing.len() as f64 {
        return Err(CurationError::TooManyCaptionFailures {
            failed: skipped.len(),
            attempted: passing.len(),
        });
    }
    Ok(ManifestOutcome { entries, skipped })
}

/// Caption every passing record with `provider` and assemble the manifest.
pub fn build_manifest(records: &[ClipRecord], provider: &dyn ModelProvider) -> Result<ManifestOutcome> {
    let passing = passing_records(records);
    let captions = passing.iter().map(|r| provider.caption(&caption_request(r))).collect();
    finish_manifest(&passing, captions)
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CurationError::Manifest {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
