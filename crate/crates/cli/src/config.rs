//! Run configuration and its TOML form.

use std::fs;
use std::path::Path;

use rabamcp_core::domains::{BettingConfig, RoadNetworkConfig};
use rabamcp_core::pg::PgConfig;
use rabamcp_core::SearchConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rabamcp,
    Bamcp,
    CvarViEmdp,
    CvarViBamdp,
    CvarPg,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rabamcp => "rabamcp",
            Method::Bamcp => "bamcp",
            Method::CvarViEmdp => "cvar-vi-emdp",
            Method::CvarViBamdp => "cvar-vi-bamdp",
            Method::CvarPg => "cvar-pg",
        }
    }
}

/// A domain definition as stored in a TOML file: `[betting]` or `[road]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainConfig {
    Betting(BettingConfig),
    Road(RoadNetworkConfig),
}

impl DomainConfig {
    /// `"betting"` and `"road"` name the built-in domains; anything else is a file path.
    pub fn load(spec: &str) -> Result<Self, CliError> {
        match spec {
            "betting" => Ok(DomainConfig::Betting(BettingConfig::default())),
            "road" => Ok(DomainConfig::Road(RoadNetworkConfig::default_grid())),
            path => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))
            }
        }
    }

    pub fn is_betting(&self) -> bool {
        matches!(self, DomainConfig::Betting(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `betting`, `road` or the path of a domain TOML file.
    pub domain: String,
    pub method: Method,
    pub alpha: f64,
    pub episodes: usize,
    pub seed: u64,
    pub workers: usize,
    /// Points of the log-spaced budget grid used by value iteration.
    pub grid_points: usize,
    pub search: SearchConfig,
    pub pg: PgConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: "betting".into(),
            method: Method::Rabamcp,
            alpha: 0.03,
            episodes: 2000,
            seed: 0,
            workers: 1,
            grid_points: 20,
            search: SearchConfig::default(),
            pg: PgConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configs always serialise")
    }

    /// Confidence level the method optimises; plain BAMCP is risk neutral.
    pub fn effective_alpha(&self) -> f64 {
        if self.method == Method::Bamcp {
            1.0
        } else {
            self.alpha
        }
    }

    /// Search settings with the run's confidence level filled in.
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig { alpha: self.effective_alpha(), ..self.search }
    }

    pub fn pg_config(&self) -> PgConfig {
        PgConfig { alpha: self.alpha, ..self.pg }
    }

    pub fn validate(&self, domain: &DomainConfig) -> Result<(), CliError> {
        if self.episodes == 0 {
            return Err(CliError::Config("episodes must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CliError::Config(format!("alpha = {} is outside (0, 1]", self.alpha)));
        }
        if self.grid_points < 2 {
            return Err(CliError::Config("grid_points must be at least 2".into()));
        }
        if self.method == Method::CvarViBamdp && !domain.is_betting() {
            return Err(CliError::Config("cvar-vi-bamdp enumerates beliefs and is limited to the betting domain".into()));
        }
        self.search_config().validate()?;
        if self.method == Method::CvarPg {
            self.pg_config().validate()?;
        }
        Ok(())
    }
}
