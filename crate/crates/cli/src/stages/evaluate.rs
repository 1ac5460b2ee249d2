use std::path::{Path, PathBuf};

use anicurate_core::evalkit::{
    build_character_store, evaluate_sample, load_benchmark, Benchmark, BenchmarkEntry, EvalProviders, MetricOutcome,
    MetricVector, SampleInputs,
};
use anicurate_core::media::{decode_ppm, Frame, FrameSequence};
use anicurate_core::report::{aggregate, alignment, build_table, human_mean, read_ratings_csv, Format, SampleResult};
use serde_json::json;

use super::{Ctx, SAMPLES};
use crate::error::{CliError, Result};
use crate::io;
use crate::pool::Providers;

fn read_image(path: &Path) -> Result<Frame> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(decode_ppm(&bytes, &path.display().to_string())?)
}

/// `<dir>/<id>.y4m`, or a frame directory `<dir>/<id>/`.
fn generated_clip(ctx: &Ctx, dir: &Path, id: &str) -> Result<FrameSequence> {
    let file = dir.join(format!("{id}.y4m"));
    let frames = dir.join(id);
    let path = if file.is_file() {
        file
    } else if frames.is_dir() {
        frames
    } else {
        return Err(CliError::Input(format!("no generated clip for {id} in {}", dir.display())));
    };
    io::load_video(&path, ctx.config.frame_dir_fps)
}

fn all_failed(reason: &str) -> MetricVector {
    let failed = || MetricOutcome::Failed { reason: reason.to_string() };
    MetricVector {
        smoothness: failed(),
        motion: failed(),
        appeal: failed(),
        text_video: failed(),
        image_video: failed(),
        character: failed(),
    }
}

fn evaluate_entry(
    ctx: &Ctx,
    bench: &Benchmark,
    entry: &BenchmarkEntry,
    generated: &Path,
    providers: &Providers,
) -> Result<(MetricVector, Vec<String>)> {
    let video = generated_clip(ctx, generated, &entry.id)?;
    let guide = read_image(&bench.resolve(&entry.guide_frames[0].image))?;
    let mut refs = Vec::new();
    for r in &entry.character_refs {
        for img in &r.images {
            refs.push((r.character_id.as_str(), read_image(&bench.resolve(img))?));
        }
    }
    let mut notes = Vec::new();
    let store = if refs.is_empty() {
        None
    } else {
        match build_character_store(refs.iter().map(|(id, f)| (*id, f)), providers.character.get()) {
            Ok(s) => Some(s),
            Err(e) => {
                notes.push(format!("character store: {e}"));
                None
            }
        }
    };
    let inputs = SampleInputs {
        video: &video,
        prompt: &entry.prompt,
        guide: &guide,
        characters: store.as_ref(),
    };
    let roles = EvalProviders {
        encoder: providers.embed.get(),
        image: providers.image.get(),
        regression: providers.regression.get(),
        character: providers.character.get(),
        smoothness: providers.smoothness.as_ref().map(|p| p.get()),
    };
    let (mut metrics, more) = evaluate_sample(&inputs, &roles, &ctx.config.evaluation);
    notes.extend(more);
    if !refs.is_empty() && store.is_none() {
        metrics.character = MetricOutcome::Failed {
            reason: "character store could not be built".into(),
        };
    }
    Ok((metrics, notes))
}

/// Score generated clips against a benchmark and write `samples.jsonl`
/// (or `output`). Missing or unreadable clips become failed samples.
pub fn evaluate(
    ctx: &Ctx,
    benchmark: &Path,
    generated: &Path,
    model: &str,
    output: Option<&Path>,
) -> Result<Vec<SampleResult>> {
    let bench = load_benchmark(benchmark)?;
    for w in &bench.warnings {
        log::warn!("benchmark: {w}");
    }
    let providers = Providers::from_config(&ctx.config, ctx.workers.size())?;
    let samples = ctx.workers.map(&bench.entries, |entry| {
        let (metrics, notes) = match evaluate_entry(ctx, &bench, entry, generated, &providers) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("evaluate: {}: {e}", entry.id);
                (all_failed(&e.to_string()), vec![format!("sample failed: {e}")])
            }
        };
        SampleResult {
            model: model.to_string(),
            entry: entry.id.clone(),
            metrics,
            notes,
        }
    });
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| ctx.path(SAMPLES));
    io::write_jsonl(&path, &samples)?;
    log::info!("evaluate: {} samples for {model}", samples.len());
    Ok(samples)
}

/// Aggregate sample files into the score table. Writes `report.md` or
/// `report.csv` and `report.json`, and returns the rendered table.
pub fn report(ctx: &Ctx, samples: &[PathBuf], ratings: Option<&Path>, format: Format) -> Result<String> {
    let default = [ctx.path(SAMPLES)];
    let files = if samples.is_empty() { &default[..] } else { samples };
    let mut results: Vec<SampleResult> = Vec::new();
    for f in files {
        results.extend(io::read_jsonl::<SampleResult>(f)?);
    }
    let scores = aggregate(&results);
    let human = match ratings {
        Some(p) => {
            let file = std::fs::File::open(p).map_err(|e| CliError::io(p, e))?;
            Some(human_mean(&read_ratings_csv(file)?))
        }
        None => None,
    };
    let aligned = match &human {
        Some(h) => match alignment(&scores, h) {
            Ok(a) => json!(a),
            Err(e) => {
                log::warn!("report: no alignment: {e}");
                json!({ "unavailable": e.to_string() })
            }
        },
        None => serde_json::Value::Null,
    };
    let table = build_table(&scores, human.as_deref());
    let rendered = table.render(format);
    let name = match format {
        Format::Markdown => "report.md",
        Format::Csv => "report.csv",
    };
    io::write_atomic(&ctx.path(name), rendered.as_bytes())?;
    io::write_json(
        &ctx.path("report.json"),
        &json!({ "models": scores, "human": human, "alignment": aligned }),
    )?;
    Ok(rendered)
}
