//! Human-in-the-loop items and the hook the pipeline escalates through.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::HilMode;
use crate::rca::RcaReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HilKind {
    UnfixableProperty,
    UnconvergedCritic,
    UnresolvedRca,
}

impl HilKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HilKind::UnfixableProperty => "UnfixableProperty",
            HilKind::UnconvergedCritic => "UnconvergedCritic",
            HilKind::UnresolvedRca => "UnresolvedRca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HilStatus {
    Pending,
    Accepted,
    Corrected,
    Declined,
}

impl HilStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            HilStatus::Pending => "pending",
            HilStatus::Accepted => "accepted",
            HilStatus::Corrected => "corrected",
            HilStatus::Declined => "declined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HilTransitionError {
    #[error("item {item} is already {from}")]
    IllegalTransition { item: String, from: &'static str },
    #[error("a correction is required iff the decision is `corrected`")]
    CorrectionMismatch,
}

/// One escalation awaiting (or carrying) a human decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilItem {
    pub item_id: String,
    pub run_id: String,
    pub kind: HilKind,
    /// Empty for a whole critic batch.
    pub property_id: String,
    /// Property text under review; a critic batch is one property per line.
    pub text: String,
    pub diagnostics: Vec<String>,
    pub error_signature: String,
    /// Last prompt context sent to the agent about this item.
    pub prompt: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<RcaReport>,
    pub status: HilStatus,
    #[serde(default)]
    pub correction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "correction", rename_all = "snake_case")]
pub enum HilDecision {
    /// Leave the item for later; the run finishes with it pending.
    Pending,
    Accepted,
    Declined,
    Corrected(String),
}

impl HilDecision {
    pub fn as_str(&self) -> &'static str {
        match self {
            HilDecision::Pending => "pending",
            HilDecision::Accepted => "accepted",
            HilDecision::Declined => "declined",
            HilDecision::Corrected(_) => "corrected",
        }
    }

    /// Build from the HTTP shape `{decision, correction?}`.
    pub fn from_parts(decision: &str, correction: Option<String>) -> Result<Self, HilTransitionError> {
        match (decision, correction) {
            ("accepted", None) => Ok(HilDecision::Accepted),
            ("declined", None) => Ok(HilDecision::Declined),
            ("corrected", Some(c)) => Ok(HilDecision::Corrected(c)),
            _ => Err(HilTransitionError::CorrectionMismatch),
        }
    }
}

impl HilItem {
    /// pending → accepted | corrected | declined; anything else is refused.
    pub fn transition(&mut self, decision: &HilDecision) -> Result<(), HilTransitionError> {
        if self.status != HilStatus::Pending {
            return Err(HilTransitionError::IllegalTransition {
                item: self.item_id.clone(),
                from: self.status.as_str(),
            });
        }
        match decision {
            HilDecision::Pending => {}
            HilDecision::Accepted => self.status = HilStatus::Accepted,
            HilDecision::Declined => self.status = HilStatus::Declined,
            HilDecision::Corrected(text) => {
                self.status = HilStatus::Corrected;
                self.correction = Some(text.clone());
            }
        }
        Ok(())
    }
}

/// What the handler decided, plus an optional serialized dataset record to log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilResolution {
    pub decision: HilDecision,
    pub record: Option<String>,
}

impl From<HilDecision> for HilResolution {
    fn from(decision: HilDecision) -> Self {
        HilResolution { decision, record: None }
    }
}

pub trait HilHandler {
    fn escalate(&mut self, item: &HilItem) -> HilResolution;
}

/// Fixed answer per [`HilMode`]; interactive mode parks every item.
#[derive(Debug, Clone, Copy)]
pub struct ModeHandler(pub HilMode);

impl HilHandler for ModeHandler {
    fn escalate(&mut self, _item: &HilItem) -> HilResolution {
        match self.0 {
            HilMode::Interactive => HilDecision::Pending,
            HilMode::AutoAccept => HilDecision::Accepted,
            HilMode::AutoDecline => HilDecision::Declined,
        }
        .into()
    }
}
