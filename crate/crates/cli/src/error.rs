use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("stage {stage}: {artifact} changed since it was produced; rerun upstream stages or pass --force")]
    Stale { stage: &'static str, artifact: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Stage { .. } | CliError::Stale { .. } => 4,
        }
    }

    pub(crate) fn stage(stage: &'static str, e: impl std::fmt::Display) -> CliError {
        CliError::Stage { stage, message: e.to_string() }
    }
}
