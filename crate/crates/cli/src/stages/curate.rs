use std::path::{Path, PathBuf};

use anicurate_core::analysis::detect_scenes;
use anicurate_core::curation::{
    self, apply_filter, caption_request, finish_manifest, histogram_report, passing_records, score_clip,
    synthetic_scores, write_histogram_csv, ClipRecord, ClipScores, CurationError, FilterRule, Verdict,
};

use super::{clip_of, load_sources, ClipSpan, Ctx, CALIBRATION, CLIPS, HISTOGRAM, MANIFEST, RULE, SCORES, VERDICTS};
use crate::error::{CliError, Result};
use crate::io;
use crate::pool::Providers;

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.trim_end_matches(".y4m").to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::Input(format!("{}: cannot derive a clip id", path.display())))
}

/// Split every input into scenes and write `clips.jsonl`.
pub fn scenes(ctx: &Ctx, inputs: &[PathBuf]) -> Result<Vec<ClipSpan>> {
    let inputs = if inputs.is_empty() { &ctx.config.inputs } else { inputs };
    if inputs.is_empty() {
        return Err(CliError::Config("no inputs given on the command line or in `inputs`".into()));
    }
    let mut stems: Vec<(String, &PathBuf)> = inputs.iter().map(|p| Ok((stem(p)?, p))).collect::<Result<_>>()?;
    stems.sort();
    if let Some(w) = stems.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CliError::Input(format!(
            "inputs {} and {} share the id prefix `{}`",
            w[0].1.display(),
            w[1].1.display(),
            w[0].0
        )));
    }
    let params = &ctx.config.analysis.scene;
    let fps = ctx.config.frame_dir_fps;
    let per_input = ctx.workers.map(&stems, |(stem, path)| -> Result<Vec<ClipSpan>> {
        let seq = io::load_video(path, fps)?;
        let ranges = detect_scenes(&seq, params)?;
        log::debug!("{}: {} frames, {} scenes", path.display(), seq.len(), ranges.len());
        Ok(ranges
            .into_iter()
            .enumerate()
            .map(|(i, r)| ClipSpan {
                id: format!("{stem}-{i:04}"),
                source: path.display().to_string(),
                frame_start: r.start,
                frame_end: r.end,
                fps: seq.fps(),
            })
            .collect())
    });
    let mut clips = Vec::new();
    for spans in per_input {
        clips.extend(spans?);
    }
    log::info!("scenes: {} inputs, {} clips", stems.len(), clips.len());
    io::write_jsonl(&ctx.path(CLIPS), &clips)?;
    Ok(clips)
}

/// Score every clip in `clips.jsonl` and write `scores.jsonl`.
pub fn score(ctx: &Ctx) -> Result<Vec<ClipRecord>> {
    let clips: Vec<ClipSpan> = io::read_jsonl(&ctx.path(CLIPS))?;
    let sources = load_sources(ctx, clips.iter().map(|c| c.source.as_str()))?;
    let analysis = &ctx.config.analysis;
    let scored = ctx.workers.map(&clips, |c| -> Result<ClipRecord> {
        let seq = clip_of(&sources, &c.source, c.frame_start..c.frame_end, &c.id)?;
        let scores = score_clip(&seq, analysis)?;
        let tags = scores
            .flow
            .map(|f| vec![format!("motion-{}", analysis.motion.degree(f))])
            .unwrap_or_default();
        Ok(ClipRecord {
            id: c.id.clone(),
            source: c.source.clone(),
            frame_start: c.frame_start,
            frame_end: c.frame_end,
            fps: c.fps,
            scores,
            verdict: None,
            caption: None,
            tags,
        })
    });
    let records = scored.into_iter().collect::<Result<Vec<_>>>()?;
    io::write_jsonl(&ctx.path(SCORES), &records)?;
    Ok(records)
}

/// Fit a rule to a retention target and write `rule.json` plus `calibration.json`.
pub fn calibrate(ctx: &Ctx, target: Option<f64>, synthetic: Option<usize>) -> Result<FilterRule> {
    let target = target
        .or(ctx.config.calibration.target)
        .ok_or_else(|| CliError::Config("calibrate needs --target or calibration.target".into()))?;
    let scores: Vec<ClipScores> = match synthetic {
        Some(n) => synthetic_scores(n, ctx.stage_seed("calibrate")),
        None => io::read_jsonl::<ClipRecord>(&ctx.path(SCORES))?
            .into_iter()
            .map(|r| r.scores)
            .collect(),
    };
    let cal = curation::calibrate(&scores, target)?;
    log::info!(
        "calibrate: target {target}, achieved {:.4} on {} clips",
        cal.achieved,
        cal.samples
    );
    io::write_json(&ctx.path(RULE), &cal.rule)?;
    io::write_json(&ctx.path(CALIBRATION), &cal)?;
    Ok(cal.rule)
}

/// `--rule` if given, else a calibrated `rule.json` in the output directory,
/// else the `[filter]` table.
fn resolve_rule(ctx: &Ctx, rule: Option<&Path>) -> Result<FilterRule> {
    let calibrated = ctx.path(RULE);
    let (rule, from) = match rule {
        Some(p) => (io::read_json::<FilterRule>(p)?, p.display().to_string()),
        None if calibrated.exists() => (io::read_json(&calibrated)?, calibrated.display().to_string()),
        None => (ctx.config.filter.clone(), "config".to_string()),
    };
    rule.validate()?;
    log::info!("filter: rule from {from}");
    Ok(rule)
}

/// Verdict for one record; a missing score fails the clip on that dimension.
fn verdict(record: &ClipRecord, rule: &FilterRule) -> Result<Verdict> {
    match apply_filter(&record.id, &record.scores, rule) {
        Ok(v) => Ok(v),
        Err(CurationError::MissingScore { clip, dimension }) => {
            log::warn!("filter: {clip} has no {dimension} score, failing it");
            Ok(Verdict {
                pass: false,
                reasons: vec![dimension],
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn filter(ctx: &Ctx, rule: Option<&Path>) -> Result<Vec<ClipRecord>> {
    let rule = resolve_rule(ctx, rule)?;
    let records: Vec<ClipRecord> = io::read_jsonl(&ctx.path(SCORES))?;
    let verdicts = ctx.workers.map(&records, |r| verdict(r, &rule));
    let mut out = Vec::with_capacity(records.len());
    for (mut r, v) in records.into_iter().zip(verdicts) {
        r.verdict = Some(v?);
        out.push(r);
    }
    let kept = out.iter().filter(|r| r.verdict.as_ref().is_some_and(|v| v.pass)).count();
    log::info!("filter: kept {kept} of {} clips", out.len());
    io::write_jsonl(&ctx.path(VERDICTS), &out)?;
    Ok(out)
}

/// Caption passing clips and write `manifest.jsonl`.
pub fn manifest(ctx: &Ctx) -> Result<usize> {
    let records: Vec<ClipRecord> = io::read_jsonl(&ctx.path(VERDICTS))?;
    let passing = passing_records(&records);
    let providers = Providers::from_config(&ctx.config, ctx.workers.size())?;
    let captions = ctx
        .workers
        .map(&passing, |r| providers.caption.get().caption(&caption_request(r)));
    // every request failing points at the provider, not at the clips
    if !captions.is_empty() && captions.iter().all(|c| c.is_err()) {
        let first = captions.into_iter().find_map(|c| c.err()).expect("non-empty");
        return Err(first.into());
    }
    let outcome = finish_manifest(&passing, captions)?;
    for (id, reason) in &outcome.skipped {
        log::warn!("manifest: skipped {id}: {reason}");
    }
    log::info!("manifest: {} entries", outcome.entries.len());
    io::write_atomic(&ctx.path(MANIFEST), outcome.to_jsonl().as_bytes())?;
    Ok(outcome.entries.len())
}

/// Per-dimension score histograms over `scores.jsonl`.
pub fn histogram(ctx: &Ctx, bins: usize) -> Result<()> {
    let scores: Vec<ClipScores> = io::read_jsonl::<ClipRecord>(&ctx.path(SCORES))?
        .into_iter()
        .map(|r| r.scores)
        .collect();
    let rows = histogram_report(&scores, bins)?;
    let mut buf = Vec::new();
    write_histogram_csv(&rows, &mut buf)?;
    io::write_atomic(&ctx.path(HISTOGRAM), &buf)
}
