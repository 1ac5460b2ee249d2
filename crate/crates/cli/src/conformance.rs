//! Schema checks run against a provider endpoint by `providers test`.

use anicurate_core::media::Fps;
use anicurate_core::providers::{CaptionRequest, Embedding, ModelProvider, ProviderError};
use anicurate_core::synth::{self, Sprite};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn unit(e: &Embedding) -> Result<(), ProviderError> {
    if (e.norm() - 1.0).abs() > 1e-6 {
        return Err(ProviderError::Protocol(format!("embedding norm {}", e.norm())));
    }
    Ok(())
}

fn in_unit_interval(name: &str, s: f64) -> Result<(), ProviderError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(ProviderError::Protocol(format!("{name} {s} outside [0, 1]")));
    }
    Ok(())
}

/// Exercise every operation once on small synthetic inputs.
pub fn run_checks(provider: &dyn ModelProvider) -> Vec<Check> {
    let sprite = Sprite::solid(4, 8, 10, 10, [220, 40, 40]).moving(2, 0);
    let video = synth::sprite_video(32, 32, 8, [20, 20, 60], &[sprite], 8);
    let frame = video.frame(0).clone();
    let request = CaptionRequest {
        id: "conformance-0000".into(),
        source: "conformance".into(),
        frame_start: 0,
        frame_end: video.len(),
        fps: Fps::integer(8).expect("8 fps"),
        hint: None,
    };

    let mut checks = Vec::new();
    let mut record = |name: &str, result: Result<(), ProviderError>| {
        checks.push(match result {
            Ok(()) => Check {
                name: name.into(),
                ok: true,
                class: None,
                message: None,
            },
            Err(e) => Check {
                name: name.into(),
                ok: false,
                class: Some(e.class().into()),
                message: Some(e.to_string()),
            },
        });
    };

    record("embed_text", (|| {
        let a = provider.embed_text("a red character runs to the right")?;
        unit(&a)?;
        let again = provider.embed_text("a red character runs to the right")?;
        if a != again {
            return Err(ProviderError::Protocol("embed_text is not deterministic".into()));
        }
        Ok(())
    })());
    record("embed_video", (|| {
        let v = provider.embed_video(&video)?;
        unit(&v)?;
        let t = provider.embed_text("motion")?;
        v.cosine(&t).map(|_| ())
    })());
    record("embed_image", (|| unit(&provider.embed_image(&frame)?))());
    record("caption", (|| {
        let c = provider.caption(&request)?;
        if c.trim().is_empty() {
            return Err(ProviderError::Protocol("empty caption".into()));
        }
        Ok(())
    })());
    record("char_masks", (|| {
        for m in provider.char_masks(&frame)? {
            m.check_dims(frame.width(), frame.height())
                .map_err(|e| ProviderError::Protocol(e.to_string()))?;
        }
        Ok(())
    })());
    record("score_smoothness", (|| in_unit_interval("smoothness", provider.score_smoothness(&video)?))());
    record("score_aesthetic", (|| {
        let e = provider.embed_image(&frame)?;
        in_unit_interval("aesthetic", provider.score_aesthetic(&e, &frame)?)
    })());
    record("score_regression", (|| {
        let a = provider.embed_video(&video)?;
        let b = provider.embed_text("a red character runs to the right")?;
        in_unit_interval("regression", provider.score_regression(&a, &b)?)
    })());
    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use anicurate_core::providers::ReferenceProvider;

    #[test]
    fn reference_provider_conforms() {
        let checks = run_checks(&ReferenceProvider::default());
        assert_eq!(checks.len(), 8);
        assert!(checks.iter().all(|c| c.ok), "{checks:?}");
    }
}
