use std::path::Path;

use anicurate_core::analysis::AnalysisError;
use anicurate_core::conditioning::ConditioningError;
use anicurate_core::curation::CurationError;
use anicurate_core::evalkit::EvalError;
use anicurate_core::media::MediaError;
use anicurate_core::providers::ProviderError;
use anicurate_core::report::ReportError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Conditioning(#[from] ConditioningError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{failed} of {checked} provider checks failed")]
    Conformance {
        failed: usize,
        checked: usize,
        /// Error class of the first failed check.
        class: Option<String>,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Input(_) => "input",
            CliError::Media(_) => "media",
            CliError::Analysis(_) => "analysis",
            CliError::Curation(_) => "curation",
            CliError::Conditioning(_) => "conditioning",
            CliError::Eval(EvalError::Provider(_)) | CliError::Provider(_) => "provider",
            CliError::Eval(_) => "evaluation",
            CliError::Report(_) => "report",
            CliError::Conformance { .. } => "conformance",
        }
    }

    fn provider_class(&self) -> Option<&str> {
        match self {
            CliError::Provider(e) | CliError::Eval(EvalError::Provider(e)) => Some(e.class()),
            CliError::Conformance { class, .. } => class.as_deref(),
            _ => None,
        }
    }

    /// The JSON object printed on stderr when a command fails.
    pub fn to_json(&self, stage: &str) -> Value {
        let mut error = json!({
            "stage": stage,
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let Some(class) = self.provider_class() {
            error["class"] = json!(class);
        }
        json!({ "error": error })
    }
}
