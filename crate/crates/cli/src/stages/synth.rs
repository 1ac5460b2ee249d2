//! Synthetic inputs for trying the pipeline without real footage.

use std::path::PathBuf;

use anicurate_core::media::{encode_ppm, write_y4m, ColorRange, FrameSequence};
use anicurate_core::synth::{palette, scene_video, sprite_video, Sprite};
use serde_json::json;

use super::Ctx;
use crate::error::Result;
use crate::io;

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub fps: u32,
}

fn write_video(path: &std::path::Path, seq: &FrameSequence) -> Result<()> {
    io::write_atomic(path, &write_y4m(seq, ColorRange::Full))
}

/// Multi-scene sprite videos in `<out>/corpus/`. Scene lengths, sprite
/// speeds and palettes vary per video so clips land on both sides of the
/// duration and motion gates. Returns the written paths.
pub fn synth_corpus(ctx: &Ctx, spec: &CorpusSpec) -> Result<Vec<PathBuf>> {
    let seed = ctx.stage_seed("synth");
    let dir = ctx.path("corpus");
    let indices: Vec<usize> = (0..spec.count).collect();
    let written = ctx.workers.map(&indices, |&i| -> Result<PathBuf> {
        let r = io::item_seed(seed, &i.to_string());
        let scenes = 1 + (r % 3) as usize;
        let lengths: Vec<usize> = (0..scenes)
            .map(|k| {
                let pick = io::item_seed(r, &format!("len{k}"));
                spec.fps as usize + (pick % (4 * spec.fps as u64)) as usize
            })
            .collect();
        let speed = ((r >> 8) % 4) as isize;
        let (seq, _) = scene_video(spec.width, spec.height, &lengths, speed, spec.fps, r);
        let path = dir.join(format!("video-{i:04}.y4m"));
        write_video(&path, &seq)?;
        Ok(path)
    });
    let paths = written.into_iter().collect::<Result<Vec<_>>>()?;
    log::info!("synth: {} videos in {}", paths.len(), dir.display());
    Ok(paths)
}

const ACTIONS: [&str; 3] = ["idle", "walk", "run"];

/// A small benchmark in `<out>/bench/`: ground-truth clips, guide and
/// character images, `benchmark.json`, and a `generated/` directory holding
/// a perfect model's output (the ground truth itself).
pub fn synth_benchmark(ctx: &Ctx, entries: usize) -> Result<PathBuf> {
    let dir = ctx.path("bench");
    let mut list = Vec::new();
    for i in 0..entries {
        let id = format!("entry-{i:04}");
        let speed = (i % ACTIONS.len()) as isize * 2;
        let sprite = Sprite::solid(8 + (i % 4) as isize * 4, 20, 16, 20, palette(i)).moving(speed, 0);
        let seq = sprite_video(64, 64, 16, [24, 24, 40], &[sprite], 8);
        write_video(&dir.join(format!("gt/{id}.y4m")), &seq)?;
        write_video(&dir.join(format!("generated/{id}.y4m")), &seq)?;
        let still = encode_ppm(seq.frame(0));
        io::write_atomic(&dir.join(format!("guides/{id}.ppm")), &still)?;
        io::write_atomic(&dir.join(format!("chars/{id}.ppm")), &still)?;
        let action = ACTIONS[i % ACTIONS.len()];
        list.push(json!({
            "id": id,
            "action_label": action,
            "style": "2D",
            "prompt": format!("A colored character {} across a dark stage.", if action == "idle" { "stands still" } else { "moves" }),
            "guide_frames": [{ "position": 0, "image": format!("guides/{id}.ppm") }],
            "character_refs": [{ "character_id": format!("char-{i}"), "images": [format!("chars/{id}.ppm")] }],
            "gt_clip": format!("gt/{id}.y4m"),
        }));
    }
    let manifest = dir.join("benchmark.json");
    io::write_json(&manifest, &json!({ "full_set": false, "entries": list }))?;
    Ok(manifest)
}
