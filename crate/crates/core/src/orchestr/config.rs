//! Run configuration, loadable from TOML.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MAX_FIX_ATTEMPTS, MAX_RCA_ROUNDS};
use crate::engine::DEFAULT_DEPTH;
use crate::specgram::DEFAULT_BUDGET;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config: `{field}` must be positive")]
    NotPositive { field: &'static str },
    #[error("config: `{field}` = {value} exceeds the ledger cap {cap}")]
    AboveCap { field: &'static str, value: u32, cap: u32 },
}

/// What happens when a loop gives up and asks for a human.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HilMode {
    /// Park the item; the run finishes with items pending.
    #[default]
    Interactive,
    AutoDecline,
    AutoAccept,
}

impl HilMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HilMode::Interactive => "interactive",
            HilMode::AutoDecline => "auto_decline",
            HilMode::AutoAccept => "auto_accept",
        }
    }

    pub fn parse(s: &str) -> Option<HilMode> {
        [HilMode::Interactive, HilMode::AutoDecline, HilMode::AutoAccept].into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub max_fix_attempts: u32,
    pub max_critic_rounds: u32,
    /// Consecutive clean approvals that end the critic loop.
    pub convergence_approvals: u32,
    pub max_rca_rounds: u32,
    pub max_coverage_rounds: u32,
    pub proof_depth: usize,
    pub hil_mode: HilMode,
    /// Byte budget for the prompt context handed to the backend.
    pub prompt_budget: usize,
    /// Fixed run id; derived from the inputs when absent.
    pub run_id: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_fix_attempts: MAX_FIX_ATTEMPTS,
            max_critic_rounds: 4,
            convergence_approvals: 2,
            max_rca_rounds: MAX_RCA_ROUNDS,
            max_coverage_rounds: 5,
            proof_depth: DEFAULT_DEPTH,
            hil_mode: HilMode::Interactive,
            prompt_budget: DEFAULT_BUDGET,
            run_id: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("max_fix_attempts", self.max_fix_attempts),
            ("max_critic_rounds", self.max_critic_rounds),
            ("convergence_approvals", self.convergence_approvals),
            ("max_rca_rounds", self.max_rca_rounds),
            ("max_coverage_rounds", self.max_coverage_rounds),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(ConfigError::NotPositive { field });
            }
        }
        if self.proof_depth == 0 {
            return Err(ConfigError::NotPositive { field: "proof_depth" });
        }
        if self.prompt_budget == 0 {
            return Err(ConfigError::NotPositive { field: "prompt_budget" });
        }
        // the ledger refuses anything beyond these, so a larger cap could never be honoured
        if self.max_fix_attempts > MAX_FIX_ATTEMPTS {
            return Err(ConfigError::AboveCap {
                field: "max_fix_attempts",
                value: self.max_fix_attempts,
                cap: MAX_FIX_ATTEMPTS,
            });
        }
        if self.max_rca_rounds > MAX_RCA_ROUNDS {
            return Err(ConfigError::AboveCap {
                field: "max_rca_rounds",
                value: self.max_rca_rounds,
                cap: MAX_RCA_ROUNDS,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_toml() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.max_fix_attempts, c.max_critic_rounds, c.max_rca_rounds), (5, 4, 3));
        assert_eq!((c.max_coverage_rounds, c.proof_depth), (5, 16));
        let c = RunConfig::from_toml("hil_mode = \"auto_accept\"\nproof_depth = 8\n").unwrap();
        assert_eq!(c.hil_mode, HilMode::AutoAccept);
        assert_eq!(c.proof_depth, 8);
    }

    #[test]
    fn rejects_bad_caps() {
        assert_eq!(
            RunConfig::from_toml("max_critic_rounds = 0"),
            Err(ConfigError::NotPositive { field: "max_critic_rounds" })
        );
        assert!(matches!(RunConfig::from_toml("max_fix_attempts = 6"), Err(ConfigError::AboveCap { .. })));
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::from_toml("hil_mode = \"sometimes\""), Err(ConfigError::Parse(_))));
    }
}
