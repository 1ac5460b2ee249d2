//! Pipeline configuration, read from a TOML file.
//!
//! Every key is optional and unknown keys are rejected. The defaults are:
//!
//! ```toml
//! seed = 0
//! workers = 1
//! out_dir = "out"
//! inputs = []            # .y4m files or directories of numbered .ppm frames
//! frame_dir_fps = "24"   # frame rate assumed for frame directories
//!
//! [analysis]             # scene, flow, text, aesthetic and motion-class parameters
//! score_frames = 8
//! [analysis.scene]
//! threshold = 27.0
//! min_scene_len = 15
//! [analysis.flow]
//! block = 8
//! radius = 7
//! max_fps = 8.0
//! min_overlap = 0.5
//!
//! [filter]               # thresholds used when no calibrated rule is given
//! text_cover_max = 0.02
//! flow_min = 1.0
//! flow_max = 200.0
//! aesthetic_min = 3.0
//! duration_min = 2.0
//! duration_max = 20.0
//!
//! [calibration]
//! # target = 0.10       # retention target for `calibrate` when --target is absent
//!
//! [providers]            # endpoints: "ref", "cmd:<shell command>" or "tcp://host:port"
//! caption = "ref"
//! embed = "ref"
//! image = "ref"
//! regression = "ref"
//! character = "ref"
//! # smoothness = "ref"  # unset: built-in warp-residual scorer
//! timeout_secs = 30.0
//! retries = 1
//!
//! [conditioning]
//! c_text = 8             # text-embedding channels in the assembled input
//! k = 2                  # interior unmask candidates
//! mode = "keyframe"      # or "motion_area"
//! steps = 1000           # linear beta schedule
//! beta_start = 0.0001
//! beta_end = 0.02
//! # betas = [...]        # explicit schedule, overrides the linear one
//!
//! [evaluation]           # keyframes (K), character_frames (S) and scorer knobs
//! keyframes = 5
//! character_frames = 8
//! ```
//!
//! `ANICURATE_PROVIDER_<ROLE>` environment variables override `[providers]`.

use std::path::{Path, PathBuf};

use anicurate_core::analysis::AnalysisConfig;
use anicurate_core::conditioning::ScheduleParams;
use anicurate_core::curation::FilterRule;
use anicurate_core::evalkit::EvalParams;
use anicurate_core::media::Fps;
use anicurate_core::providers::Endpoint;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub frame_dir_fps: Fps,
    pub analysis: AnalysisConfig,
    pub filter: FilterRule,
    pub calibration: CalibrationConfig,
    pub providers: ProviderConfig,
    pub conditioning: ConditioningConfig,
    pub evaluation: EvalParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            out_dir: PathBuf::from("out"),
            inputs: Vec::new(),
            frame_dir_fps: Fps::integer(24).expect("24 fps"),
            analysis: AnalysisConfig::default(),
            filter: FilterRule::default(),
            calibration: CalibrationConfig::default(),
            providers: ProviderConfig::default(),
            conditioning: ConditioningConfig::default(),
            evaluation: EvalParams::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target: Option<f64>,
}

/// The learned-model roles a pipeline run may call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Caption,
    Embed,
    Image,
    Regression,
    Character,
    Smoothness,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Caption,
        Role::Embed,
        Role::Image,
        Role::Regression,
        Role::Character,
        Role::Smoothness,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Role::Caption => "caption",
            Role::Embed => "embed",
            Role::Image => "image",
            Role::Regression => "regression",
            Role::Character => "character",
            Role::Smoothness => "smoothness",
        }
    }

    pub fn env_var(self) -> String {
        format!("ANICURATE_PROVIDER_{}", self.key().to_uppercase())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub caption: String,
    pub embed: String,
    pub image: String,
    pub regression: String,
    pub character: String,
    pub smoothness: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            caption: "ref".into(),
            embed: "ref".into(),
            image: "ref".into(),
            regression: "ref".into(),
            character: "ref".into(),
            smoothness: None,
            timeout_secs: 30.0,
            retries: 1,
        }
    }
}

impl ProviderConfig {
    /// Endpoint text for `role`, before environment overrides.
    fn configured(&self, role: Role) -> Option<&str> {
        match role {
            Role::Caption => Some(&self.caption),
            Role::Embed => Some(&self.embed),
            Role::Image => Some(&self.image),
            Role::Regression => Some(&self.regression),
            Role::Character => Some(&self.character),
            Role::Smoothness => self.smoothness.as_deref(),
        }
    }

    /// Effective endpoint for `role`; `None` only for an unset smoothness scorer.
    pub fn endpoint(&self, role: Role) -> Result<Option<Endpoint>, CliError> {
        let from_env = std::env::var(role.env_var()).ok().filter(|v| !v.trim().is_empty());
        match from_env.as_deref().or(self.configured(role)) {
            None => Ok(None),
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|e| CliError::Config(format!("providers.{}: {e}", role.key()))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuideMode {
    /// Whole guide frames at the sampled unmask positions.
    Keyframe,
    /// First-frame guide restricted to the tracked motion area; static
    /// regions of the target are clamped to the guide.
    MotionArea,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditioningConfig {
    pub c_text: usize,
    pub k: usize,
    pub mode: GuideMode,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub betas: Option<Vec<f64>>,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        Self {
            c_text: 8,
            k: 2,
            mode: GuideMode::Keyframe,
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            betas: None,
        }
    }
}

impl ConditioningConfig {
    pub fn schedule(&self) -> Result<ScheduleParams, CliError> {
        let s = match &self.betas {
            Some(b) => ScheduleParams::new(b.clone()),
            None => ScheduleParams::linear(self.steps, self.beta_start, self.beta_end),
        };
        s.map_err(|e| CliError::Config(format!("conditioning: {e}")))
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: String| CliError::Config(e);
        if self.workers == 0 {
            return Err(cfg("workers must be >= 1".into()));
        }
        self.analysis.validate().map_err(|e| cfg(format!("analysis: {e}")))?;
        self.filter.validate().map_err(|e| cfg(format!("filter: {e}")))?;
        self.evaluation.validate().map_err(|e| cfg(format!("evaluation: {e}")))?;
        if let Some(t) = self.calibration.target {
            if !(t > 0.0 && t < 1.0) {
                return Err(cfg(format!("calibration.target {t} must be in (0, 1)")));
            }
        }
        if !(self.providers.timeout_secs > 0.0 && self.providers.timeout_secs.is_finite()) {
            return Err(cfg("providers.timeout_secs must be > 0".into()));
        }
        for role in Role::ALL {
            self.providers.endpoint(role)?;
        }
        if self.conditioning.c_text == 0 {
            return Err(cfg("conditioning.c_text must be >= 1".into()));
        }
        self.conditioning.schedule()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = PipelineConfig::from_toml(&doc).unwrap();
        assert_eq!(parsed, PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("sede = 3").is_err());
        assert!(PipelineConfig::from_toml("[filter]\nflow_mni = 3.0").is_err());
        assert!(PipelineConfig::from_toml("[analysis.scene]\nthreshold = 10.0\nbogus = 1").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::from_toml("workers = 0").is_err());
        assert!(PipelineConfig::from_toml("[providers]\nembed = \"http://x\"").is_err());
        assert!(PipelineConfig::from_toml("[conditioning]\nbetas = [0.5, 1.5]").is_err());
        assert!(PipelineConfig::from_toml("[calibration]\ntarget = 1.0").is_err());
    }

    #[test]
    fn overrides_parse() {
        let c = PipelineConfig::from_toml(
            "seed = 9\nworkers = 4\n[filter]\naesthetic_min = 4.5\n[conditioning]\nmode = \"motion_area\"\nbetas = [0.1, 0.2]",
        )
        .unwrap();
        assert_eq!((c.seed, c.workers, c.filter.aesthetic_min), (9, 4, 4.5));
        assert_eq!(c.conditioning.mode, GuideMode::MotionArea);
        assert_eq!(c.conditioning.schedule().unwrap().steps(), 2);
    }
}
