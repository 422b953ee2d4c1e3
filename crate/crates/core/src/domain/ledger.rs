//! Append-only event log of one verification run, persisted as JSONL.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::verdict::VerdictStatus;

/// Fix attempts allowed per property before escalation.
pub const MAX_FIX_ATTEMPTS: u32 = 5;
/// RCA rounds allowed per counterexample before escalation.
pub const MAX_RCA_ROUNDS: u32 = 3;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("bound violation: {0}")]
    BoundViolation(String),
    #[error("timestamp {got} precedes last event timestamp {last}")]
    NonMonotonic { got: u64, last: u64 },
    #[error("ledger line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Event {
    SpecParsed {
        signals: Vec<String>,
        edge: String,
        diagnostics: Vec<String>,
    },
    PropertyGenerated {
        property: String,
        source: String,
        text: String,
    },
    LintRound {
        property: String,
        codes: Vec<String>,
        clean: bool,
    },
    FixAttempt {
        property: String,
        attempt: u32,
        codes: Vec<String>,
        via: String,
        text: String,
    },
    CriticRound {
        round: u32,
        verdict: String,
        notes: String,
        clean: bool,
    },
    EngineVerdict {
        property: String,
        status: VerdictStatus,
        depth: usize,
        explored: usize,
        cex: Option<String>,
        signals: Vec<String>,
    },
    CoverageRound {
        round: u32,
        covered_before: usize,
        covered_after: usize,
        total: usize,
        holes: Vec<String>,
        requested: Vec<String>,
    },
    RcaRound {
        cex: String,
        property: String,
        round: u32,
        class: String,
        consistency: bool,
        patch: Option<String>,
    },
    HilRequested {
        item: String,
        hil_kind: String,
        property: String,
        reason: String,
    },
    HilResolved {
        item: String,
        decision: String,
        correction: Option<String>,
    },
    DatasetRecordEmitted {
        item: String,
        record: String,
    },
    BackendProtocolError {
        role: String,
        message: String,
        retry: bool,
    },
    RunCompleted {
        status: String,
        n_assertions: usize,
        proven: usize,
        covered: usize,
        total_signals: usize,
    },
}

impl Event {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Event::SpecParsed { .. } => "SpecParsed",
            Event::PropertyGenerated { .. } => "PropertyGenerated",
            Event::LintRound { .. } => "LintRound",
            Event::FixAttempt { .. } => "FixAttempt",
            Event::CriticRound { .. } => "CriticRound",
            Event::EngineVerdict { .. } => "EngineVerdict",
            Event::CoverageRound { .. } => "CoverageRound",
            Event::RcaRound { .. } => "RcaRound",
            Event::HilRequested { .. } => "HilRequested",
            Event::HilResolved { .. } => "HilResolved",
            Event::DatasetRecordEmitted { .. } => "DatasetRecordEmitted",
            Event::BackendProtocolError { .. } => "BackendProtocolError",
            Event::RunCompleted { .. } => "RunCompleted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub seq: u64,
    pub ts: u64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    run_id: String,
    design: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunLedger {
    pub run_id: String,
    pub design: String,
    entries: Vec<LedgerEntry>,
    fix_counts: HashMap<String, u32>,
    rca_counts: HashMap<String, u32>,
}

impl RunLedger {
    pub fn new(run_id: impl Into<String>, design: impl Into<String>) -> Self {
        RunLedger { run_id: run_id.into(), design: design.into(), ..Default::default() }
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_ts(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.ts)
    }

    pub fn fix_attempts(&self, property: &str) -> u32 {
        self.fix_counts.get(property).copied().unwrap_or(0)
    }

    pub fn rca_rounds(&self, cex: &str) -> u32 {
        self.rca_counts.get(cex).copied().unwrap_or(0)
    }

    /// Append one event. Rejects decreasing timestamps and events that would
    /// push a property past [`MAX_FIX_ATTEMPTS`] or a counterexample past
    /// [`MAX_RCA_ROUNDS`].
    pub fn append(&mut self, ts: u64, event: Event) -> Result<&LedgerEntry, LedgerError> {
        if let Some(last) = self.entries.last() {
            if ts < last.ts {
                return Err(LedgerError::NonMonotonic { got: ts, last: last.ts });
            }
        }
        match &event {
            Event::FixAttempt { property, .. } => {
                let n = self.fix_attempts(property);
                if n >= MAX_FIX_ATTEMPTS {
                    return Err(LedgerError::BoundViolation(format!(
                        "fix attempt {} for property `{property}` exceeds cap {MAX_FIX_ATTEMPTS}",
                        n + 1
                    )));
                }
                self.fix_counts.insert(property.clone(), n + 1);
            }
            Event::RcaRound { cex, .. } => {
                let n = self.rca_rounds(cex);
                if n >= MAX_RCA_ROUNDS {
                    return Err(LedgerError::BoundViolation(format!(
                        "RCA round {} for counterexample `{cex}` exceeds cap {MAX_RCA_ROUNDS}",
                        n + 1
                    )));
                }
                self.rca_counts.insert(cex.clone(), n + 1);
            }
            _ => {}
        }
        let seq = self.entries.len() as u64;
        self.entries.push(LedgerEntry { seq, ts, event });
        Ok(self.entries.last().unwrap())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Header { run_id: self.run_id.clone(), design: self.design.clone() })
            .expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Re-read a persisted ledger, replaying every event through [`append`](Self::append).
    pub fn from_jsonl(text: &str) -> Result<Self, LedgerError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(LedgerError::Malformed { line: 1, msg: "empty ledger".into() })?;
        let header: Header =
            serde_json::from_str(head).map_err(|e| LedgerError::Malformed { line: 1, msg: e.to_string() })?;
        let mut ledger = RunLedger::new(header.run_id, header.design);
        for (i, line) in lines {
            let entry: LedgerEntry =
                serde_json::from_str(line).map_err(|e| LedgerError::Malformed { line: i + 1, msg: e.to_string() })?;
            if entry.seq != ledger.entries.len() as u64 {
                return Err(LedgerError::Malformed { line: i + 1, msg: format!("sequence gap at {}", entry.seq) });
            }
            ledger.append(entry.ts, entry.event)?;
        }
        Ok(ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix(p: &str, n: u32) -> Event {
        Event::FixAttempt { property: p.into(), attempt: n, codes: vec![], via: "test".into(), text: String::new() }
    }

    fn rca(c: &str, n: u32) -> Event {
        Event::RcaRound {
            cex: c.into(),
            property: "p".into(),
            round: n,
            class: "DesignDefect".into(),
            consistency: false,
            patch: None,
        }
    }

    #[test]
    fn first_event_on_empty_ledger() {
        let mut l = RunLedger::new("r", "d");
        l.append(0, Event::SpecParsed { signals: vec!["clk".into()], edge: "posedge clk".into(), diagnostics: vec![] })
            .unwrap();
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn fifth_fix_ok_sixth_rejected() {
        let mut l = RunLedger::new("r", "d");
        for n in 1..=5 {
            l.append(n as u64, fix("p", n)).unwrap();
        }
        assert!(matches!(l.append(6, fix("p", 6)), Err(LedgerError::BoundViolation(_))));
        // other properties have their own budget
        l.append(7, fix("q", 1)).unwrap();
        assert_eq!(l.len(), 6);
    }

    #[test]
    fn third_rca_ok_fourth_rejected() {
        let mut l = RunLedger::new("r", "d");
        for n in 1..=3 {
            l.append(n as u64, rca("c", n)).unwrap();
        }
        assert!(matches!(l.append(4, rca("c", 4)), Err(LedgerError::BoundViolation(_))));
    }

    #[test]
    fn timestamps_must_not_decrease() {
        let mut l = RunLedger::new("r", "d");
        l.append(5, fix("p", 1)).unwrap();
        l.append(5, fix("p", 2)).unwrap();
        assert!(matches!(l.append(4, fix("p", 3)), Err(LedgerError::NonMonotonic { .. })));
    }

    #[test]
    fn jsonl_has_fixed_key_order() {
        let mut l = RunLedger::new("r1", "handshake");
        l.append(0, Event::LintRound { property: "p".into(), codes: vec!["ParseFailure".into()], clean: false })
            .unwrap();
        assert_eq!(
            l.to_jsonl(),
            "{\"run_id\":\"r1\",\"design\":\"handshake\"}\n\
             {\"seq\":0,\"ts\":0,\"event\":{\"kind\":\"LintRound\",\"property\":\"p\",\"codes\":[\"ParseFailure\"],\"clean\":false}}\n"
        );
    }
}
