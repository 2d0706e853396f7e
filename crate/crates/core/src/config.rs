//! Engine configuration, loadable from TOML.
//!
//! Every key is optional; omitted keys take the defaults below. Unknown keys
//! are rejected, and the loaded values are validated before use.
//!
//! ```toml
//! seed = 7
//! budget = 100
//! pool_size = 10
//!
//! [exdos]
//! beta_sigmoid = 5.0
//!
//! [prefs]
//! lr = 0.001
//! query_budget = 15
//!
//! [summarizer]
//! reward_lr = 0.005
//!
//! [reward]
//! alpha = 0.8
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ConceptUnit, DEFAULT_EMBED_DIM};
use crate::eval::RewardCoeffs;
use crate::exdos::ExDosHyper;
use crate::prefs::Strategy;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Concept-preference learning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrefsConfig {
    /// Bradley-Terry learning rate.
    pub lr: f64,
    pub epochs: usize,
    /// Concept pairs asked per session.
    pub query_budget: usize,
    pub strategy: Strategy,
}

impl Default for PrefsConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 1000,
            query_budget: 10,
            strategy: Strategy::Heuristic,
        }
    }
}

/// Summary pool, reward learning and the TD policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummarizerConfig {
    pub reward_lr: f64,
    pub reward_epochs: usize,
    /// Summary pairs shown to the user after the concept phase.
    pub summary_queries: usize,
    pub episodes: usize,
    pub eta: f64,
    pub epsilon0: f64,
}

impl Default for SummarizerConfig {
    fn default() -> Self {
        Self {
            reward_lr: 5e-3,
            reward_epochs: 2000,
            summary_queries: 10,
            episodes: 300,
            eta: 0.01,
            epsilon0: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub seed: u64,
    /// Summary length limit in words.
    pub budget: usize,
    pub pool_size: usize,
    pub unit: ConceptUnit,
    /// Number of ExDoS clusters; absent means chosen by silhouette.
    pub clusters: Option<usize>,
    pub embed_dim: usize,
    /// Hill-climbing restarts for ExDoS selection.
    pub restarts: usize,
    /// Concepts shown per adaptive query.
    pub group_size: usize,
    pub exdos: ExDosHyper,
    pub prefs: PrefsConfig,
    pub summarizer: SummarizerConfig,
    pub reward: RewardCoeffs,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: 100,
            pool_size: 10,
            unit: ConceptUnit::Unigram,
            clusters: None,
            embed_dim: DEFAULT_EMBED_DIM,
            restarts: 5,
            group_size: 5,
            exdos: ExDosHyper::default(),
            prefs: PrefsConfig::default(),
            summarizer: SummarizerConfig::default(),
            reward: RewardCoeffs::default(),
        }
    }
}

fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            key,
            reason: format!("must be a positive number, got {v}"),
        })
    }
}

fn at_least(key: &'static str, v: usize, min: usize) -> Result<(), ConfigError> {
    if v >= min {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            key,
            reason: format!("must be at least {min}, got {v}"),
        })
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: EngineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Reads the file named by `PERSUM_CONFIG`, or returns the defaults.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os("PERSUM_CONFIG") {
            Some(p) => Self::load(Path::new(&p)),
            None => Ok(Self::default()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        at_least("budget", self.budget, 1)?;
        at_least("pool_size", self.pool_size, 2)?;
        at_least("embed_dim", self.embed_dim, 1)?;
        at_least("restarts", self.restarts, 1)?;
        at_least("group_size", self.group_size, 1)?;
        if let Some(k) = self.clusters {
            at_least("clusters", k, 2)?;
        }
        self.exdos.validate().map_err(|e| ConfigError::Invalid {
            key: "exdos",
            reason: e.to_string(),
        })?;
        positive("prefs.lr", self.prefs.lr)?;
        at_least("prefs.epochs", self.prefs.epochs, 1)?;
        at_least("prefs.query_budget", self.prefs.query_budget, 1)?;
        positive("summarizer.reward_lr", self.summarizer.reward_lr)?;
        at_least("summarizer.reward_epochs", self.summarizer.reward_epochs, 1)?;
        at_least("summarizer.episodes", self.summarizer.episodes, 1)?;
        positive("summarizer.eta", self.summarizer.eta)?;
        if !(0.0..=1.0).contains(&self.summarizer.epsilon0) {
            return Err(ConfigError::Invalid {
                key: "summarizer.epsilon0",
                reason: format!("must lie in [0, 1], got {}", self.summarizer.epsilon0),
            });
        }
        for (key, v) in [
            ("reward.alpha", self.reward.alpha),
            ("reward.beta", self.reward.beta),
            ("reward.gamma", self.reward.gamma),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::Invalid {
                    key,
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(())
    }
}
