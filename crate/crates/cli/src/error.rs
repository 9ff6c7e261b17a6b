use std::fmt::Display;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rabamcp_core::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("episode {episode} (seed {seed}) failed: {source}")]
    Episode { episode: usize, seed: u64, source: rabamcp_core::Error },

    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn io(path: impl Display, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(_) => "core",
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::Episode { .. } => "episode",
            CliError::Format(_) => "format",
        }
    }

    /// One-line JSON object written to stderr before a nonzero exit.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            episode: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            seed: Option<u64>,
        }
        let (episode, seed) = match self {
            CliError::Episode { episode, seed, .. } => (Some(*episode), Some(*seed)),
            _ => (None, None),
        };
        serde_json::to_string(&Report { error: self.kind(), message: self.to_string(), episode, seed }).unwrap()
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Format(e.to_string())
    }
}
