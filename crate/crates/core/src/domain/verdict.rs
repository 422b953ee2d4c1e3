use serde::{Deserialize, Serialize};

use super::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictStatus {
    Proven,
    Failed,
    Vacuous,
    Inconclusive,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Proven => "Proven",
            VerdictStatus::Failed => "Failed",
            VerdictStatus::Vacuous => "Vacuous",
            VerdictStatus::Inconclusive => "Inconclusive",
        }
    }
}

/// Counterexample: the offending trace plus the free-input sequence that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trace: Trace,
    /// `inputs[t]` = free-input values at cycle `t`, in port declaration order.
    pub inputs: Vec<Vec<u64>>,
    /// Cycle at which the violation becomes definite.
    pub violated_at: usize,
}

/// Outcome of a bounded proof. Construct through the associated functions so
/// the status/cex invariants hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property_id: String,
    pub status: VerdictStatus,
    pub cex: Option<Counterexample>,
    pub depth: usize,
    pub antecedent_ever_true: bool,
    /// Product states visited by the engine.
    #[serde(default)]
    pub explored: usize,
}

impl Verdict {
    pub fn proven(property_id: impl Into<String>, depth: usize, explored: usize) -> Self {
        Verdict {
            property_id: property_id.into(),
            status: VerdictStatus::Proven,
            cex: None,
            depth,
            antecedent_ever_true: true,
            explored,
        }
    }

    pub fn failed(property_id: impl Into<String>, depth: usize, cex: Counterexample, explored: usize) -> Self {
        Verdict {
            property_id: property_id.into(),
            status: VerdictStatus::Failed,
            cex: Some(cex),
            depth,
            antecedent_ever_true: true,
            explored,
        }
    }

    pub fn vacuous(property_id: impl Into<String>, depth: usize, explored: usize) -> Self {
        Verdict {
            property_id: property_id.into(),
            status: VerdictStatus::Vacuous,
            cex: None,
            depth,
            antecedent_ever_true: false,
            explored,
        }
    }

    pub fn inconclusive(
        property_id: impl Into<String>,
        depth: usize,
        antecedent_ever_true: bool,
        explored: usize,
    ) -> Self {
        Verdict {
            property_id: property_id.into(),
            status: VerdictStatus::Inconclusive,
            cex: None,
            depth,
            antecedent_ever_true,
            explored,
        }
    }

    pub fn is_proven(&self) -> bool {
        self.status == VerdictStatus::Proven
    }
}
