//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails for a reason other than the host
//! lacking the cores a parallel speedup needs.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use anicurate::io::stage_seed;
use anicurate_core::analysis::{block_flow, flow_score, FlowParams};
use anicurate_core::conditioning::{
    assemble_condition_input, build_guide, clamp_static_latent, noisy_latent, sample_unmask_plan, unmask_candidates,
    v_target, Guide, GuidePlan, LatentTensor, MaskVolume, Part, ScheduleParams,
};
use anicurate_core::curation::{apply_filter, synthetic_scores, ClipScores, Dimension, FilterRule};
use anicurate_core::evalkit::{
    appeal_score, build_character_store, character_consistency, image_video_consistency, motion_mask_precision,
    motion_score, motion_softmax, smoothness_score, text_video_consistency,
};
use anicurate_core::media::{write_y4m, BinaryMask, ColorRange, Fps, Frame, FrameSequence};
use anicurate_core::providers::{
    Embedding, Endpoint, ModelProvider, ProviderError, ReferenceProvider, RemoteOptions, RemoteProvider,
};
use anicurate_core::report::SampleResult;
use anicurate_core::synth::{self, Sprite};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_anicurate");

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn cli_ok(args: &[&str]) -> Result<String, String> {
    let out = cli(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn random_tensor(rng: &mut ChaCha8Rng, w: usize, h: usize, t: usize, c: usize) -> LatentTensor {
    let data = (0..w * h * t * c).map(|_| rng.gen_range(-3.0..3.0)).collect();
    LatentTensor::new(w, h, t, c, data).unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(0.5))
}

/// Independent linear-schedule cumulative product.
fn alpha_bar_oracle(steps: usize, start: f64, end: f64, t: usize) -> f64 {
    (1..=t)
        .map(|i| {
            let beta = start + (end - start) * (i - 1) as f64 / (steps - 1) as f64;
            1.0 - beta
        })
        .product()
}

fn c1_schedule_algebra() -> Check {
    let params = ScheduleParams::linear(1000, 1e-4, 0.02).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let t = rng.gen_range(1..=1000);
        let x0 = random_tensor(&mut rng, 2, 2, 1, 4);
        let eps = random_tensor(&mut rng, 2, 2, 1, 4);
        let a = alpha_bar_oracle(1000, 1e-4, 0.02, t);
        let ab = params.alpha_bar(t).unwrap();
        ensure((a - ab).abs() < 1e-12, format!("alpha_bar({t}) = {ab}, oracle {a}"))?;
        let xt = noisy_latent(&x0, &eps, &params, t).unwrap();
        let v = v_target(&x0, &eps, &params, t).unwrap();
        for i in 0..x0.data().len() {
            let (xt_i, v_i) = (xt.data()[i], v.data()[i]);
            let x0_back = a.sqrt() * xt_i + (1.0 - a).sqrt() * v_i;
            let eps_back = (1.0 - a).sqrt() * xt_i - a.sqrt() * v_i;
            worst = worst.max((x0_back - x0.data()[i]).abs()).max((eps_back - eps.data()[i]).abs());
        }
    }
    ensure(worst <= 1e-6, format!("max recovery error {worst:e}"))?;
    Ok(format!("max recovery error {worst:.1e} over 1000 draws"))
}

fn c2_condition_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let (w, h, t) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..5));
        let (cn, cg, ct) = (rng.gen_range(1..17), rng.gen_range(1..17), rng.gen_range(1..9));
        let noise = random_tensor(&mut rng, w, h, t, cn);
        let guide = random_tensor(&mut rng, w, h, t, cg);
        let bits = (0..w * h * t).map(|_| rng.gen_bool(0.5)).collect();
        let mask = MaskVolume::new(w, h, t, bits).unwrap();
        let text: Vec<f64> = (0..ct).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = assemble_condition_input(&noise, &mask, &guide, &text).map_err(|e| e.to_string())?;
        ensure(x.x.channels() == cn + 1 + cg + ct, format!("case {case}: channel count"))?;
        ensure(x.slice(Part::Noise) == noise, format!("case {case}: noise slice"))?;
        ensure(x.slice(Part::Guide) == guide, format!("case {case}: guide slice"))?;
        ensure(x.slice(Part::Mask) == mask.to_tensor(), format!("case {case}: mask slice"))?;
        ensure(x.mask() == mask, format!("case {case}: mask recovery"))?;
        let text_slice = x.slice(Part::Text);
        for f in 0..t {
            for y in 0..h {
                for xx in 0..w {
                    ensure(text_slice.cell(xx, y, f) == &text[..], format!("case {case}: text cell"))?;
                }
            }
        }
    }
    Ok("100 random layouts sliced back bit-exactly".into())
}

fn c3_guide_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let n = rng.gen_range(1..10);
        let (w, h, c) = (rng.gen_range(1..4), rng.gen_range(1..4), 16);
        let spatial = case % 2 == 1;
        let positions: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        let guides: Vec<Guide> = positions
            .iter()
            .map(|&p| Guide {
                position: p,
                latent: random_tensor(&mut rng, w, h, 1, c),
                mask: spatial.then(|| random_mask(&mut rng, 8 * w, 8 * h)),
            })
            .collect();
        let plan = GuidePlan::new(n, (w, h, c), guides.clone()).map_err(|e| e.to_string())?;
        let (g, m) = build_guide(&plan);
        ensure(m.dims() == (8 * w, 8 * h, 4 * n), format!("case {case}: mask dims {:?}", m.dims()))?;
        for j in 0..n {
            let guide = guides.iter().find(|gd| gd.position == j);
            match guide {
                None => {
                    ensure(g.frame_abs_sum(j) == 0.0, format!("case {case}: G frame {j} not zero"))?;
                    for k in 0..4 {
                        ensure(m.frame(4 * j + k).is_empty(), format!("case {case}: M frame {j} set"))?;
                    }
                }
                Some(gd) => {
                    ensure(g.frame(j) == gd.latent, format!("case {case}: G frame {j} differs"))?;
                    let expected = gd.mask.clone().unwrap_or_else(|| BinaryMask::full(8 * w, 8 * h));
                    for k in 0..4 {
                        ensure(m.frame(4 * j + k) == expected, format!("case {case}: M frame {j} differs"))?;
                    }
                }
            }
        }
    }
    Ok("200 random plans, off-position frames zero, M_p = M_F".into())
}

fn c4_clamping() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..200 {
        let (w, h, t, c) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..5), rng.gen_range(1..17));
        let video = random_tensor(&mut rng, w, h, t, c);
        let guide = random_tensor(&mut rng, w, h, 1, c);
        let mask = random_mask(&mut rng, w, h);
        let out = clamp_static_latent(&video, &guide, &mask).map_err(|e| e.to_string())?;
        for f in 0..t {
            for y in 0..h {
                for x in 0..w {
                    let expected = if mask.get(x, y) { video.cell(x, y, f) } else { guide.cell(x, y, 0) };
                    ensure(out.cell(x, y, f) == expected, format!("case {case}: cell ({x},{y},{f})"))?;
                }
            }
        }
        let again = clamp_static_latent(&out, &guide, &mask).unwrap();
        ensure(again == out, format!("case {case}: not idempotent"))?;
    }
    Ok("200 random cases cellwise exact and idempotent".into())
}

fn c5_unmask_statistics() -> Check {
    let n = 24;
    let candidates = unmask_candidates(n, 2).map_err(|e| e.to_string())?;
    let mut counts = vec![0usize; candidates.len()];
    let seeds = 100_000u64;
    for seed in 0..seeds {
        let plan = sample_unmask_plan(n, seed, 2).unwrap();
        ensure(!plan.is_empty(), format!("seed {seed}: empty plan"))?;
        for p in plan {
            let i = candidates.iter().position(|&c| c == p).ok_or(format!("seed {seed}: {p} not a candidate"))?;
            counts[i] += 1;
        }
    }
    let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / seeds as f64).collect();
    for (c, r) in candidates.iter().zip(&rates) {
        ensure((r - 0.5).abs() <= 0.01, format!("candidate {c}: rate {r}"))?;
    }
    Ok(format!("candidates {candidates:?}, rates {rates:.4?}"))
}

fn write_video(path: &Path, seq: &FrameSequence) {
    std::fs::write(path, write_y4m(seq, ColorRange::Full)).unwrap();
}

fn read_clips(out: &Path) -> Vec<(String, usize, usize)> {
    std::fs::read_to_string(out.join("clips.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (
                v["id"].as_str().unwrap().to_string(),
                v["frame_start"].as_u64().unwrap() as usize,
                v["frame_end"].as_u64().unwrap() as usize,
            )
        })
        .collect()
}

fn c6_scene_detection(dir: &Path) -> Check {
    let videos = dir.join("videos");
    std::fs::create_dir_all(&videos).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut expected: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mut inputs = Vec::new();
    let mut add = |name: String, seq: &FrameSequence, ranges: Vec<(usize, usize)>, inputs: &mut Vec<PathBuf>| {
        let path = videos.join(format!("{name}.y4m"));
        write_video(&path, seq);
        inputs.push(path);
        expected.insert(name, ranges);
    };
    for i in 0..20 {
        let scenes = rng.gen_range(2..5);
        let lengths: Vec<usize> = (0..scenes).map(|_| rng.gen_range(16..50)).collect();
        let (seq, cuts) = synth::scene_video(64, 48, &lengths, rng.gen_range(0..3), 24, 600 + i);
        let mut bounds = vec![0];
        bounds.extend(&cuts);
        bounds.push(seq.len());
        add(format!("cuts{i:02}"), &seq, bounds.windows(2).map(|w| (w[0], w[1])).collect(), &mut inputs);
    }
    for i in 0..2 {
        let still = FrameSequence::still(synth::noise_frame(64, 48, 60 + i), 40, Fps::integer(24).unwrap(), "c").unwrap();
        add(format!("constant{i}"), &still, vec![(0, 40)], &mut inputs);
    }
    let (two, _) = synth::scene_video(64, 48, &[30, 30], 1, 24, 62);
    add("twoscene".into(), &two, vec![(0, 30), (30, 60)], &mut inputs);

    let out = dir.join("out");
    let mut args = vec!["--out", s(&out), "scenes"];
    args.extend(inputs.iter().map(|p| s(p)));
    cli_ok(&args)?;
    let mut found: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (id, a, b) in read_clips(&out) {
        let stem = id.rsplit_once('-').unwrap().0.to_string();
        found.entry(stem).or_default().push((a, b));
    }
    for (name, ranges) in &expected {
        ensure(found.get(name) == Some(ranges), format!("{name}: found {:?}, expected {ranges:?}", found.get(name)))?;
    }
    Ok(format!("{} videos exact, two-scene fixture {:?}", expected.len(), found["twoscene"]))
}

fn c7_optical_flow() -> Check {
    let params = FlowParams::default();
    let r = params.radius as isize;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut good, mut total) = (0usize, 0usize);
    for case in 0..40 {
        let (dx, dy) = (rng.gen_range(-r..=r), rng.gen_range(-r..=r));
        let a = synth::noise_frame(96, 96, 700 + case);
        let b = synth::wrap_shift(&a, dx, dy);
        let field = block_flow(&a, &b, &params).map_err(|e| e.to_string())?;
        let margin = params.radius.div_ceil(params.block);
        for row in margin..field.rows - margin {
            for col in margin..field.cols - margin {
                total += 1;
                if field.vector(col, row) == (dx as i32, dy as i32) {
                    good += 1;
                }
            }
        }
    }
    let share = good as f64 / total as f64;
    ensure(share >= 0.9, format!("exact recovery on {share:.3} of interior blocks"))?;
    let still = FrameSequence::still(synth::noise_frame(64, 64, 8), 12, Fps::integer(24).unwrap(), "s").unwrap();
    let f = flow_score(&still, &params).map_err(|e| e.to_string())?;
    ensure(f == 0.0, format!("static flow_score {f}"))?;
    Ok(format!("{:.1}% of {total} interior blocks exact, static flow 0", 100.0 * share))
}

fn c8_duration_gate() -> Check {
    let rule = FilterRule::default();
    let fps = Fps::integer(10).unwrap();
    for (frames, pass) in [(19usize, false), (20, true), (200, true), (201, false)] {
        let seq = FrameSequence::still(synth::noise_frame(8, 8, 1), frames, fps, "d").unwrap();
        let scores = ClipScores {
            text_cover: Some(0.0),
            flow: Some(10.0),
            aesthetic: Some(5.0),
            duration: seq.duration_seconds(),
            frame_count: frames,
        };
        let v = apply_filter("d", &scores, &rule).map_err(|e| e.to_string())?;
        ensure(
            v.pass == pass && v.reasons.contains(&Dimension::Duration) != pass,
            format!("{:.1}s: verdict {v:?}", scores.duration),
        )?;
    }
    Ok("1.9s and 20.1s fail, 2.0s and 20.0s pass".into())
}

fn c9_retention(dir: &Path) -> Check {
    let mut lines = Vec::new();
    for target in [0.10, 0.005] {
        let out = dir.join(format!("cal-{target}"));
        cli_ok(&["--out", s(&out), "--seed", "9", "calibrate", "--target", &target.to_string(), "--synthetic", "10000"])?;
        let rule: FilterRule = serde_json::from_str(&std::fs::read_to_string(out.join("rule.json")).unwrap()).unwrap();
        let corpus = synthetic_scores(10_000, stage_seed(9, "calibrate"));
        let kept = corpus.iter().filter(|c| apply_filter("c", c, &rule).unwrap().pass).count();
        let retention = kept as f64 / corpus.len() as f64;
        ensure(
            (retention - target).abs() <= 0.1 * target,
            format!("target {target}: counted retention {retention}"),
        )?;
        lines.push(format!("{target} -> {retention:.4}"));
    }
    Ok(format!("counted retention {}", lines.join(", ")))
}

fn red_sprite_frame() -> Frame {
    synth::sprite_video(48, 48, 1, [20, 20, 20], &[Sprite::solid(10, 10, 12, 12, [240, 60, 60])], 8)
        .frame(0)
        .clone()
}

fn unit(v: &[f64]) -> Embedding {
    Embedding::normalized(v.to_vec()).unwrap()
}

/// Character stores and head anchors through `provider`: values that must
/// come out as 1, 0, 0.5 and 1, 0.5, 0.
fn anchor_suite(provider: &dyn ModelProvider) -> Result<Vec<(String, f64, f64)>, String> {
    let fps = Fps::integer(8).unwrap();
    let frame = red_sprite_frame();
    let store = build_character_store([("hero", &frame)], provider).map_err(|e| e.to_string())?;
    let moving = synth::sprite_video(48, 48, 8, [20, 20, 20], &[Sprite::solid(4, 10, 12, 12, [240, 60, 60]).moving(3, 1)], 8);
    let blue = synth::sprite_video(48, 48, 8, [20, 20, 20], &[Sprite::solid(4, 10, 12, 12, [40, 60, 240])], 8);
    let blank = Frame::filled(48, 48, [20, 20, 20]).unwrap();
    let half_frames: Vec<Frame> = (0..8).map(|i| if i < 4 { frame.clone() } else { blank.clone() }).collect();
    let half = FrameSequence::new(half_frames, fps, "half").unwrap();
    let cc = |seq: &FrameSequence| character_consistency(seq, &store, provider, 8).map_err(|e| e.to_string());
    let head = |a: &[f64], b: &[f64]| provider.score_regression(&unit(a), &unit(b)).map_err(|e| e.to_string());
    Ok(vec![
        ("character same".into(), cc(&moving)?, 1.0),
        ("character other".into(), cc(&blue)?, 0.0),
        ("character half".into(), cc(&half)?, 0.5),
        ("head cos 1".into(), head(&[1.0, 0.0], &[1.0, 0.0])?, 1.0),
        ("head cos 0".into(), head(&[1.0, 0.0], &[0.0, 1.0])?, 0.5),
        ("head cos -1".into(), head(&[1.0, 0.0], &[-1.0, 0.0])?, 0.0),
    ])
}

fn c10_metric_formulas() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1000 {
        let (a, b) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        let (m, st) = motion_softmax(a, b);
        ensure((m + st - 1.0).abs() <= 1e-12, format!("softmax({a}, {b}) sums to {}", m + st))?;
        let oracle = a.exp() / (a.exp() + b.exp());
        ensure((m - oracle).abs() <= 1e-12, format!("softmax({a}, {b}) = {m}, oracle {oracle}"))?;
    }
    let e = std::f64::consts::E;
    let (m, _) = motion_softmax(1.0, 0.0);
    ensure((m - e / (e + 1.0)).abs() <= 1e-6 && (m - 0.7311).abs() < 1e-4, format!("constructed case {m}"))?;
    for (name, got, want) in anchor_suite(&ReferenceProvider::default())? {
        ensure((got - want).abs() <= 1e-6, format!("{name}: {got}, expected {want}"))?;
    }
    Ok(format!("softmax complementary, constructed case {m:.6}, stores 1/0/0.5, head anchors 1/0.5/0"))
}

fn two_sprite_clip() -> FrameSequence {
    synth::sprite_video(
        64,
        32,
        4,
        [0, 0, 0],
        &[
            Sprite::solid(8, 8, 8, 8, [0; 3]).textured(11).moving(2, 0),
            Sprite::solid(40, 8, 8, 8, [0; 3]).textured(11).moving(2, 0),
        ],
        8,
    )
}

fn c11_motion_mask_precision() -> Check {
    let flow = FlowParams::default();
    let left = BinaryMask::from_fn(64, 32, |x, _| x < 32);
    let p = motion_mask_precision(&two_sprite_clip(), &left, &flow, 0.5).map_err(|e| e.to_string())?;
    ensure((p - 0.5).abs() <= 0.02, format!("two-sprite precision {p}"))?;
    let inside = synth::sprite_video(64, 32, 4, [0; 3], &[Sprite::solid(8, 8, 8, 8, [0; 3]).textured(4).moving(2, 0)], 8);
    let q = motion_mask_precision(&inside, &left, &flow, 0.5).unwrap();
    ensure(q == 1.0, format!("inside-only precision {q}"))?;
    let mut mask = BinaryMask::from_fn(64, 32, |x, y| (10..14).contains(&x) && (10..14).contains(&y));
    let mut last = motion_mask_precision(&two_sprite_clip(), &mask, &flow, 0.5).unwrap();
    for _ in 0..12 {
        mask = mask.dilate(3);
        let next = motion_mask_precision(&two_sprite_clip(), &mask, &flow, 0.5).unwrap();
        ensure(next >= last, format!("dilation lowered precision {last} -> {next}"))?;
        last = next;
    }
    Ok(format!("two-sprite {p:.3}, inside-only 1.0, monotone under 12 dilations"))
}

fn sample_line(model: &str, entry: &str, v: [f64; 6]) -> String {
    let m = |x: f64| serde_json::json!({ "status": "ok", "value": x });
    let value = serde_json::json!({
        "model": model,
        "entry": entry,
        "metrics": {
            "smoothness": m(v[0]), "motion": m(v[1]), "appeal": m(v[2]),
            "text_video": m(v[3]), "image_video": m(v[4]), "character": m(v[5]),
        },
    });
    let line = value.to_string();
    let _: SampleResult = serde_json::from_str(&line).expect("fixture matches the sample schema");
    line
}

fn c12_report(dir: &Path) -> Check {
    let row = [71.47, 47.94, 64.44, 72.92, 81.54, 94.54];
    let mut text = String::new();
    for (i, d) in [-0.02, 0.0, 0.02].iter().enumerate() {
        text.push_str(&sample_line("AniSora", &format!("e{i}"), row.map(|v| v / 100.0 + d)));
        text.push('\n');
    }
    let fixture = dir.join("table1.jsonl");
    std::fs::write(&fixture, text).unwrap();
    let out = dir.join("report");
    let md = cli_ok(&["--out", s(&out), "report", "--samples", s(&fixture)])?;
    let header = md.lines().next().unwrap_or_default();
    let order = ["Visual Smooth", "Visual Motion", "Visual Appeal", "Text-Video", "Image-Video", "Character Consistency"];
    let positions: Vec<usize> = order.iter().map(|t| header.find(t).unwrap_or(usize::MAX)).collect();
    ensure(positions.windows(2).all(|w| w[0] < w[1]) && positions[5] != usize::MAX, format!("header {header}"))?;
    ensure(
        md.contains("| AniSora | 71.47 | 47.94 | 64.44 | 72.92 | 81.54 | 94.54 |"),
        format!("table:\n{md}"),
    )?;

    let mut samples = String::new();
    let mut ratings = String::from("rater,entry,model,smooth,motion,appeal,tvc,ivc,ipc\n");
    for (i, model) in ["m1", "m2", "m3", "m4"].iter().enumerate() {
        samples.push_str(&sample_line(model, "e", [0.2 + 0.15 * i as f64; 6]));
        samples.push('\n');
        let r = i + 1;
        ratings.push_str(&format!("r,e,{model},{r},{r},{r},{r},{r},{r}\n"));
    }
    let (sp, rp) = (dir.join("aligned.jsonl"), dir.join("ratings.csv"));
    std::fs::write(&sp, samples).unwrap();
    std::fs::write(&rp, ratings).unwrap();
    let out = dir.join("aligned");
    cli_ok(&["--out", s(&out), "report", "--samples", s(&sp), "--ratings", s(&rp)])?;
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let rows = report["alignment"].as_array().ok_or("no alignment in report.json")?;
    ensure(rows.len() == 6, format!("{} alignment rows", rows.len()))?;
    for a in rows {
        let (p, r) = (a["pearson"].as_f64().unwrap_or(0.0), a["spearman"].as_f64().unwrap_or(0.0));
        ensure((p - 1.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-9, format!("alignment {a}"))?;
    }
    Ok("published AniSora row reproduced in column order; alignment (1.0, 1.0)".into())
}

struct Speed {
    serial: Duration,
    parallel: Duration,
}

fn c13_determinism(dir: &Path) -> Result<(String, Speed), String> {
    let base = dir.join("base");
    cli_ok(&["--out", s(&base), "synth", "corpus", "--count", "32"])?;
    let corpus: Vec<PathBuf> = {
        let mut v: Vec<PathBuf> = std::fs::read_dir(base.join("corpus"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        v.sort();
        v
    };
    let mut args = vec!["--out", s(&base), "scenes"];
    args.extend(corpus.iter().map(|p| s(p)));
    cli_ok(&args)?;
    let mut timings = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.join(format!("w{workers}"));
        std::fs::create_dir_all(&out).unwrap();
        std::fs::copy(base.join("clips.jsonl"), out.join("clips.jsonl")).unwrap();
        let start = Instant::now();
        for stage in ["score", "filter", "manifest"] {
            cli_ok(&["--out", s(&out), "--workers", workers, stage])?;
        }
        timings.push(start.elapsed());
    }
    let mut sizes = Vec::new();
    for file in ["scores.jsonl", "verdicts.jsonl", "manifest.jsonl"] {
        let a = std::fs::read(dir.join("w1").join(file)).unwrap();
        let b = std::fs::read(dir.join("w8").join(file)).unwrap();
        ensure(a == b, format!("{file} differs between 1 and 8 workers"))?;
        ensure(!a.is_empty(), format!("{file} is empty"))?;
        sizes.push(a.lines_count());
    }
    Ok((
        format!("byte-identical scores/verdicts/manifest ({sizes:?} lines)"),
        Speed {
            serial: timings[0],
            parallel: timings[1],
        },
    ))
}

trait LinesCount {
    fn lines_count(&self) -> usize;
}

impl LinesCount for Vec<u8> {
    fn lines_count(&self) -> usize {
        self.iter().filter(|&&b| b == b'\n').count()
    }
}

/// Every provider-backed metric on fixed clips, as (name, value).
fn provider_metrics(p: &dyn ModelProvider) -> Result<Vec<(String, f64)>, String> {
    let flow = FlowParams::default();
    let sprite = Sprite::solid(4, 12, 12, 14, [240, 200, 40]).moving(3, 0);
    let clip = synth::sprite_video(48, 48, 12, [30, 30, 90], &[sprite], 8);
    let e = |r: Result<f64, anicurate_core::evalkit::EvalError>| r.map_err(|e| e.to_string());
    let mut out = vec![
        ("motion".to_string(), e(motion_score(&clip, p))?),
        ("appeal".into(), e(appeal_score(&clip, p, 5))?),
        ("text_video".into(), e(text_video_consistency(&clip, "a yellow block slides right", p, p))?),
        ("image_video".into(), e(image_video_consistency(&clip, clip.frame(0), p, p))?),
        ("smoothness".into(), e(smoothness_score(&clip, Some(p), &flow, 0.1).map(|r| r.0))?),
    ];
    out.extend(anchor_suite(p)?.into_iter().map(|(n, v, _)| (n, v)));
    Ok(out)
}

fn provider_class(endpoint: &str, timeout: Duration) -> String {
    let remote = RemoteProvider::new(
        Endpoint::Command(endpoint.into()),
        RemoteOptions { timeout, retries: 0 },
    )
    .unwrap();
    match remote.embed_text("x") {
        Ok(_) => "ok".into(),
        Err(e) => e.class().into(),
    }
}

fn c14_provider_protocol(dir: &Path) -> Check {
    let local = provider_metrics(&ReferenceProvider::default())?;
    let remote = RemoteProvider::new(
        Endpoint::Command(format!("{BIN} providers serve")),
        RemoteOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let over_wire = provider_metrics(&remote)?;
    for ((name, a), (_, b)) in local.iter().zip(&over_wire) {
        ensure((a - b).abs() <= 1e-9, format!("{name}: in-process {a}, subprocess {b}"))?;
    }
    for (name, got, want) in anchor_suite(&remote)? {
        ensure((got - want).abs() <= 1e-6, format!("subprocess {name}: {got}, expected {want}"))?;
    }

    let hang = dir.join("hang.sh");
    std::fs::write(&hang, "while read line; do sleep 30; done\n").unwrap();
    let garbage = dir.join("garbage.sh");
    std::fs::write(&garbage, "while read line; do echo '{not json'; done\n").unwrap();
    let wrong_id = dir.join("wrong_id.sh");
    std::fs::write(&wrong_id, "while read line; do echo '{\"id\":999,\"ok\":true,\"result\":{}}'; done\n").unwrap();
    let short = Duration::from_millis(300);
    let classes = [
        ("hang", provider_class(&format!("sh {}", s(&hang)), short), "timeout"),
        ("garbage", provider_class(&format!("sh {}", s(&garbage)), short), "protocol"),
        ("wrong id", provider_class(&format!("sh {}", s(&wrong_id)), short), "protocol"),
        ("exit", provider_class("exit 0", short), "transport"),
    ];
    for (fault, got, want) in &classes {
        ensure(got == want, format!("{fault}: class {got}, expected {want}"))?;
    }

    let config = dir.join("fast.toml");
    std::fs::write(&config, "[providers]\ntimeout_secs = 0.3\nretries = 0\n").unwrap();
    for (script, want) in [(&hang, "timeout"), (&garbage, "protocol")] {
        let endpoint = format!("cmd:sh {}", s(script));
        let out = cli(&["--config", s(&config), "providers", "test", "--endpoint", &endpoint]);
        let stderr = String::from_utf8_lossy(&out.stderr);
        let last = stderr.lines().last().unwrap_or_default();
        let json: serde_json::Value = serde_json::from_str(last).map_err(|_| format!("stderr tail not JSON: {last}"))?;
        ensure(
            !out.status.success() && json["error"]["class"] == want,
            format!("providers test on {}: {last}", script.display()),
        )?;
    }
    Ok(format!(
        "{} metrics match over the wire; faults -> {}",
        local.len(),
        classes.iter().map(|(f, c, _)| format!("{f}:{c}")).collect::<Vec<_>>().join(" ")
    ))
}

struct Line {
    id: u8,
    name: &'static str,
    ok: bool,
    /// Failed only because this host cannot show a parallel speedup.
    host_limited: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn run(id: u8, name: &'static str, budget: Duration, f: impl FnOnce() -> Check) -> Line {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
        Err(e) => (false, e),
    };
    Line {
        id,
        name,
        ok,
        host_limited: false,
        detail,
        elapsed,
        budget,
    }
}

fn main() {
    provider_error_classes_are_distinct();
    let tmp = tempfile::tempdir().unwrap();
    let sub = |name: &str| {
        let p = tmp.path().join(name);
        std::fs::create_dir_all(&p).unwrap();
        p
    };
    let secs = Duration::from_secs;
    let mut lines = vec![
        run(1, "schedule algebra", secs(1), c1_schedule_algebra),
        run(2, "condition input round-trip", secs(1), c2_condition_round_trip),
        run(3, "guide/mask contract", secs(1), c3_guide_contract),
        run(4, "static-region clamping", secs(1), c4_clamping),
        run(5, "unmask plan statistics", secs(10), c5_unmask_statistics),
        run(6, "scene detection", secs(30), || c6_scene_detection(&sub("c6"))),
        run(7, "optical flow", secs(30), c7_optical_flow),
        run(8, "duration gate", secs(1), c8_duration_gate),
        run(9, "retention calibration", secs(10), || c9_retention(&sub("c9"))),
        run(10, "metric formula suite", secs(5), c10_metric_formulas),
        run(11, "motion-mask precision", secs(10), c11_motion_mask_precision),
        run(12, "report fixtures", secs(1), || c12_report(&sub("c12"))),
    ];

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut speed = None;
    let mut c13 = run(13, "determinism/parallelism", secs(120), || {
        let (detail, s) = c13_determinism(&sub("c13"))?;
        let timing = format!("1 worker {:.2}s, 8 workers {:.2}s", s.serial.as_secs_f64(), s.parallel.as_secs_f64());
        // with one core any difference is scheduling noise, not a speedup
        let faster = cores >= 2 && s.parallel < s.serial;
        speed = Some(faster);
        if faster {
            Ok(format!("{detail}; {timing}"))
        } else {
            Err(format!("{detail}; no 8-worker speedup shown ({timing}, {cores} CPU available)"))
        }
    });
    // byte identity held and only the speedup is missing on a single-core host
    c13.host_limited = !c13.ok && speed == Some(false) && cores < 2;
    lines.push(c13);
    lines.push(run(14, "provider protocol", secs(30), || c14_provider_protocol(&sub("c14"))));

    for l in &lines {
        println!(
            "criterion {:>2} {:<26} {} ({:.2}s of {}s) {}",
            l.id,
            l.name,
            if l.ok { "PASS" } else { "FAIL" },
            l.elapsed.as_secs_f64(),
            l.budget.as_secs(),
            l.detail
        );
    }
    let blocking: Vec<u8> = lines.iter().filter(|l| !l.ok && !l.host_limited).map(|l| l.id).collect();
    if !blocking.is_empty() {
        eprintln!("failed criteria: {blocking:?}");
        std::process::exit(1);
    }
}

fn provider_error_classes_are_distinct() {
    let classes = [
        ProviderError::Timeout(Duration::from_secs(1)).class(),
        ProviderError::Protocol(String::new()).class(),
        ProviderError::Transport(String::new()).class(),
    ];
    assert_eq!(classes, ["timeout", "protocol", "transport"]);
}
