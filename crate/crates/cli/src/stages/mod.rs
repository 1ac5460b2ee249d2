//! Pipeline stages. Each reads the previous stage's files from the output
//! directory and writes its own, so any stage can be rerun on its own.

mod condition;
mod curate;
mod evaluate;
mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anicurate_core::media::{Fps, FrameSequence};
use serde::{Deserialize, Serialize};

pub use condition::{condition, fold_text, ConditionMeta};
pub use curate::{calibrate, filter, histogram, manifest, scenes, score};
pub use evaluate::{evaluate, report};
pub use synth::{synth_benchmark, synth_corpus, CorpusSpec};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::pool::Workers;

pub const CLIPS: &str = "clips.jsonl";
pub const SCORES: &str = "scores.jsonl";
pub const RULE: &str = "rule.json";
pub const CALIBRATION: &str = "calibration.json";
pub const VERDICTS: &str = "verdicts.jsonl";
pub const MANIFEST: &str = "manifest.jsonl";
pub const CONDITION_DIR: &str = "condition";
pub const SAMPLES: &str = "samples.jsonl";
pub const HISTOGRAM: &str = "histogram.csv";

/// Everything a stage needs: the validated config, where artifacts go and
/// the worker pool.
pub struct Ctx {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub workers: Workers,
}

impl Ctx {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            out: config.out_dir.clone(),
            workers: Workers::new(config.workers)?,
            config,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        io::stage_seed(self.config.seed, stage)
    }
}

/// Run `f` and log how long it took.
pub fn timed<T>(stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("{stage}: start");
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    match &out {
        Ok(_) => log::info!("{stage}: done in {:.3}s", elapsed.as_secs_f64()),
        Err(e) => log::error!("{stage}: failed after {:.3}s: {e}", elapsed.as_secs_f64()),
    }
    out
}

/// One clip cut from a source video by scene detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipSpan {
    pub id: String,
    pub source: String,
    pub frame_start: usize,
    pub frame_end: usize,
    pub fps: Fps,
}

/// Decode every distinct source once, in parallel.
fn load_sources<'a>(
    ctx: &Ctx,
    sources: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, FrameSequence>> {
    let mut names: Vec<&str> = sources.into_iter().collect();
    names.sort_unstable();
    names.dedup();
    let fps = ctx.config.frame_dir_fps;
    let loaded = ctx.workers.map(&names, |name| io::load_video(Path::new(name), fps));
    names
        .iter()
        .zip(loaded)
        .map(|(name, seq)| Ok((name.to_string(), seq?)))
        .collect()
}

fn clip_of(
    sources: &BTreeMap<String, FrameSequence>,
    source: &str,
    range: std::ops::Range<usize>,
    id: &str,
) -> Result<FrameSequence> {
    let seq = sources
        .get(source)
        .ok_or_else(|| CliError::Input(format!("source {source} was not loaded")))?;
    if range.end > seq.len() || range.start >= range.end {
        return Err(CliError::Input(format!(
            "clip {id}: frames {range:?} outside source {source} with {} frames",
            seq.len()
        )));
    }
    Ok(seq.slice(range, id)?)
}
