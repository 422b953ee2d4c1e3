//! Signal-binding coverage of proven properties.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::check::BoundProperty;
use crate::domain::{DesignModel, Direction, Verdict, VerdictStatus};
use crate::{format_hundredths, truncated_hundredths};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageHole {
    pub signal: String,
    /// Where a property targeting this signal should look: the design
    /// assignment driving it, or `input port`.
    pub locus: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub design: String,
    /// Covered signals in design order.
    pub covered_signals: Vec<String>,
    pub total_signals: usize,
    /// Hundredths of a percent, truncated.
    pub percent_hundredths: u64,
    /// `NN.NN` rendering of the same value.
    pub percent: String,
    pub holes: Vec<CoverageHole>,
}

impl CoverageReport {
    pub fn covered_count(&self) -> usize {
        self.covered_signals.len()
    }
}

/// A signal counts as covered when some Proven, non-vacuous property binds it.
pub fn compute_coverage(design: &DesignModel, results: &[(&BoundProperty<'_>, &Verdict)]) -> CoverageReport {
    let mut covered = BTreeSet::new();
    for (p, v) in results {
        if v.status == VerdictStatus::Proven && v.antecedent_ever_true {
            covered.extend(p.binding.values().cloned());
        }
    }
    let mut covered_signals = Vec::new();
    let mut holes = Vec::new();
    for (i, s) in design.signals().iter().enumerate() {
        if covered.contains(&s.name) {
            covered_signals.push(s.name.clone());
            continue;
        }
        let locus = match design.driver_of(i) {
            Some(a) => design.describe_assignment(a),
            None if design.ports.iter().any(|p| p.name == s.name && p.dir == Direction::Input) => {
                "input port".to_string()
            }
            None => "undriven".to_string(),
        };
        holes.push(CoverageHole { signal: s.name.clone(), locus });
    }
    let total = design.signals().len();
    let h = truncated_hundredths(covered_signals.len() as u64, total as u64);
    CoverageReport {
        design: design.name.clone(),
        covered_signals,
        total_signals: total,
        percent_hundredths: h,
        percent: format_hundredths(h),
        holes,
    }
}
