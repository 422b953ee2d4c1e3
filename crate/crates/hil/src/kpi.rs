//! KPI rows recomputed from run ledgers.

use std::collections::BTreeMap;
use std::fmt;

use forge_core::domain::{Event, RunLedger, VerdictStatus};
use forge_core::{format_hundredths, rounded_hundredths, truncated_hundredths};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KpiError {
    #[error("run {0} has no RunCompleted event")]
    IncompleteRun(String),
}

/// A percentage in hundredths, rendered `NN.NN`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pct(pub u64);

impl Pct {
    pub fn of(num: u64, den: u64, rounding: Rounding) -> Pct {
        Pct(match rounding {
            Rounding::Truncate => truncated_hundredths(num, den),
            Rounding::HalfUp => rounded_hundredths(num, den),
        })
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Pct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_hundredths(self.0))
    }
}

impl std::str::FromStr for Pct {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("not a percentage: {s:?}");
        let (whole, frac) = s.trim().split_once('.').unwrap_or((s.trim(), "0"));
        if frac.len() > 2 {
            return Err(bad());
        }
        let w: u64 = whole.parse().map_err(|_| bad())?;
        let f: u64 = format!("{frac:0<2}").parse().map_err(|_| bad())?;
        Ok(Pct(w * 100 + f))
    }
}

impl Serialize for Pct {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Pct {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Rounding {
    #[default]
    Truncate,
    HalfUp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiRow {
    pub design: String,
    pub model_label: String,
    pub pass_index: u32,
    pub n_assertions: usize,
    pub first_generation: bool,
    pub fix_attempts: u32,
    pub pct_proven: Pct,
    pub pct_coverage: Pct,
    /// True when a human resolved at least one item during the run.
    pub with_hil: bool,
}

/// How a ledger is labelled in the bench tables.
#[derive(Debug, Clone, Default)]
pub struct KpiOptions {
    pub model_label: String,
    pub pass_index: u32,
    pub rounding: Rounding,
}

/// Recompute the headline numbers of a finished run from its ledger alone.
pub fn compute_kpis(ledger: &RunLedger, opts: &KpiOptions) -> Result<KpiRow, KpiError> {
    let mut fixes: BTreeMap<&str, u32> = BTreeMap::new();
    let mut completed = None;
    let mut with_hil = false;
    for e in ledger.entries() {
        match &e.event {
            Event::FixAttempt { property, .. } => *fixes.entry(property).or_default() += 1,
            Event::HilResolved { .. } => with_hil = true,
            Event::RunCompleted { n_assertions, proven, covered, total_signals, .. } => {
                completed = Some((*n_assertions, *proven, *covered, *total_signals))
            }
            _ => {}
        }
    }
    let (n, proven, covered, total) = completed.ok_or_else(|| KpiError::IncompleteRun(ledger.run_id.clone()))?;
    Ok(KpiRow {
        design: ledger.design.clone(),
        model_label: opts.model_label.clone(),
        pass_index: opts.pass_index.max(1),
        n_assertions: n,
        first_generation: fixes.is_empty(),
        fix_attempts: fixes.values().copied().max().unwrap_or(0),
        pct_proven: Pct::of(proven as u64, n as u64, opts.rounding),
        pct_coverage: Pct::of(covered as u64, total as u64, opts.rounding),
        with_hil,
    })
}

/// A minimal finished ledger with `n` verdicts of which `proven` are Proven.
pub fn synthesize_ledger(design: &str, n: usize, proven: usize, covered: usize, total_signals: usize) -> RunLedger {
    let mut l = RunLedger::new(format!("synthetic-{design}-{n}-{proven}"), design);
    let mut ts = 0;
    let mut push = |l: &mut RunLedger, e: Event| {
        l.append(ts, e).expect("synthetic ledger stays in bounds");
        ts += 1;
    };
    for i in 0..n {
        let property = format!("p{}", i + 1);
        push(
            &mut l,
            Event::PropertyGenerated { property: property.clone(), source: "generation".into(), text: String::new() },
        );
        push(&mut l, Event::LintRound { property: property.clone(), codes: vec![], clean: true });
        let status = if i < proven { VerdictStatus::Proven } else { VerdictStatus::Failed };
        push(&mut l, Event::EngineVerdict { property, status, depth: 16, explored: 1, cex: None, signals: vec![] });
    }
    push(&mut l, Event::RunCompleted { status: "done".into(), n_assertions: n, proven, covered, total_signals });
    l
}
