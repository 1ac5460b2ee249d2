use anicurate_core::conditioning::{
    assemble_condition_input, build_guide, clamp_static_latent, encode_latent_stub, noisy_latent, reproject_mask,
    sample_unmask_plan, track_foreground, union_masks, v_target, BundleSidecar, Guide, GuidePlan, LatentTensor,
    MaskVolume, ScheduleParams, SPATIAL_FACTOR, TEMPORAL_FACTOR,
};
use anicurate_core::curation::{read_manifest, ManifestEntry};
use anicurate_core::media::{BinaryMask, FrameSequence};
use serde::{Deserialize, Serialize};

use super::{clip_of, load_sources, Ctx, CONDITION_DIR, MANIFEST};
use crate::config::GuideMode;
use crate::error::{CliError, Result};
use crate::io;
use crate::pool::Providers;

/// Sidecar written next to each `<id>.f32` input tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionMeta {
    pub id: String,
    pub mode: GuideMode,
    /// Source frames encoded (the clip truncated to a multiple of 4).
    pub frames_used: usize,
    /// Latent frames carrying a guide.
    pub guide_positions: Vec<usize>,
    /// Diffusion step in `1..=steps`.
    pub timestep: usize,
    pub alpha_bar: f64,
    /// Layout of `<id>.f32`.
    pub input: BundleSidecar,
    /// `<id>.v.f32`: the v-prediction target, 16 channels on the same grid.
    pub target_file: String,
}

/// Fold a text embedding onto `c` channels by summing index classes mod `c`,
/// then rescale to unit length (left at zero if the fold cancels out).
pub fn fold_text(values: &[f64], c: usize) -> Vec<f64> {
    let mut out = vec![0.0; c];
    for (i, v) in values.iter().enumerate() {
        out[i % c] += v;
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|v| *v /= norm);
    }
    out
}

/// Drop trailing frames so the count is a multiple of the temporal factor.
fn truncate_frames(seq: &FrameSequence, id: &str) -> Result<FrameSequence> {
    let usable = seq.len() / TEMPORAL_FACTOR * TEMPORAL_FACTOR;
    if usable < 2 * TEMPORAL_FACTOR {
        return Err(CliError::Input(format!(
            "clip {id}: {} frames, conditioning needs at least {}",
            seq.len(),
            2 * TEMPORAL_FACTOR
        )));
    }
    Ok(seq.slice(0..usable, id)?)
}

fn draw_timestep(seed: u64, schedule: &ScheduleParams) -> usize {
    1 + (io::item_seed(seed, "timestep") % schedule.steps() as u64) as usize
}

/// Foreground of the first frame from the character provider, tracked
/// through the clip and merged into the motion area mask.
fn motion_area(seq: &FrameSequence, providers: &Providers, ctx: &Ctx) -> Result<BinaryMask> {
    let first = seq.frame(0);
    let mut initial = BinaryMask::empty(first.width(), first.height());
    for m in providers.character.get().char_masks(first)? {
        initial = initial.union(&m)?;
    }
    if initial.is_empty() {
        log::warn!("condition: {}: no foreground in the first frame", seq.source_id());
    }
    let tracked = track_foreground(seq, &initial, &ctx.config.analysis.flow)?;
    Ok(union_masks(&tracked)?)
}

struct Built {
    meta: ConditionMeta,
    input: Vec<u8>,
    target: Vec<u8>,
}

fn condition_one(
    ctx: &Ctx,
    entry: &ManifestEntry,
    clip: &FrameSequence,
    providers: &Providers,
    schedule: &ScheduleParams,
    stage_seed: u64,
) -> Result<Built> {
    let cfg = &ctx.config.conditioning;
    let seq = truncate_frames(clip, &entry.id)?;
    let mut x0 = encode_latent_stub(&seq)?;
    let (w, h, n, c) = x0.shape();
    let seed = io::item_seed(stage_seed, &entry.id);

    let guides = match cfg.mode {
        GuideMode::Keyframe => sample_unmask_plan(n, seed, cfg.k)?
            .into_iter()
            .map(|p| Guide {
                position: p,
                latent: x0.frame(p),
                mask: None,
            })
            .collect(),
        GuideMode::MotionArea => {
            let m_f = motion_area(&seq, providers, ctx)?;
            let guide = x0.frame(0);
            let m_latent = reproject_mask(&MaskVolume::repeat(&m_f, 1), (w, h, 1))?.frame(0);
            x0 = clamp_static_latent(&x0, &guide, &m_latent)?;
            vec![Guide {
                position: 0,
                latent: guide,
                mask: Some(m_f),
            }]
        }
    };
    let plan = GuidePlan::new(n, (w, h, c), guides)?;
    let (g, m) = build_guide(&plan);
    let m_latent = reproject_mask(&m, (w, h, n))?;

    let eps = LatentTensor::gaussian(w, h, n, c, io::item_seed(seed, "noise"));
    let t = draw_timestep(seed, schedule);
    let x_t = noisy_latent(&x0, &eps, schedule, t)?;
    let v = v_target(&x0, &eps, schedule, t)?;
    let text = providers.embed.get().embed_text(&entry.caption)?;
    let bundle = assemble_condition_input(&x_t, &m_latent, &g, &fold_text(text.values(), cfg.c_text))?;

    let target = tensor_bytes(&v);
    Ok(Built {
        meta: ConditionMeta {
            id: entry.id.clone(),
            mode: cfg.mode,
            frames_used: seq.len(),
            guide_positions: plan.positions(),
            timestep: t,
            alpha_bar: schedule.alpha_bar(t)?,
            input: bundle.sidecar(),
            target_file: format!("{}.v.f32", entry.id),
        },
        input: bundle.to_f32_le(),
        target,
    })
}

/// Little-endian f32 values in tensor order.
fn tensor_bytes(t: &LatentTensor) -> Vec<u8> {
    t.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

/// Build the conditioned training input for every manifest entry and
/// write `condition/<id>.f32`, `<id>.v.f32` and `<id>.json`.
pub fn condition(ctx: &Ctx) -> Result<Vec<ConditionMeta>> {
    let text = io::read_text(&ctx.path(MANIFEST))?;
    let entries = read_manifest(&text)?;
    if let Some(e) = entries.iter().find(|e| e.frame_end <= e.frame_start) {
        return Err(CliError::Input(format!("manifest entry {} has an empty frame range", e.id)));
    }
    let sources = load_sources(ctx, entries.iter().map(|e| e.source.as_str()))?;
    for (name, seq) in &sources {
        if seq.width() % SPATIAL_FACTOR != 0 || seq.height() % SPATIAL_FACTOR != 0 {
            return Err(CliError::Input(format!(
                "{name}: {}x{} frames; conditioning needs width and height divisible by {SPATIAL_FACTOR}",
                seq.width(),
                seq.height()
            )));
        }
    }
    let schedule = ctx.config.conditioning.schedule()?;
    let providers = Providers::from_config(&ctx.config, ctx.workers.size())?;
    let stage_seed = ctx.stage_seed("condition");
    let dir = ctx.path(CONDITION_DIR);
    let metas = ctx.workers.map(&entries, |e| -> Result<ConditionMeta> {
        let clip = clip_of(&sources, &e.source, e.frame_start..e.frame_end, &e.id)?;
        let built = condition_one(ctx, e, &clip, &providers, &schedule, stage_seed)?;
        io::write_atomic(&dir.join(format!("{}.f32", e.id)), &built.input)?;
        io::write_atomic(&dir.join(&built.meta.target_file), &built.target)?;
        io::write_json(&dir.join(format!("{}.json", e.id)), &built.meta)?;
        Ok(built.meta)
    });
    let metas = metas.into_iter().collect::<Result<Vec<_>>>()?;
    io::write_jsonl(&dir.join("index.jsonl"), &metas)?;
    log::info!("condition: {} bundles", metas.len());
    Ok(metas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sums_index_classes_and_normalizes() {
        let f = fold_text(&[3.0, 0.0, 1.0, 3.0], 2);
        assert!((f[0] - 0.8).abs() < 1e-12 && (f[1] - 0.6).abs() < 1e-12);
        assert_eq!(fold_text(&[1.0, -1.0], 1), vec![0.0]);
        assert_eq!(fold_text(&[2.0], 3), vec![1.0, 0.0, 0.0]);
    }
}
