//! Counterexample triage: VCD reading, the four analysts, and the report.

mod analyze;
mod vcd;

pub use analyze::{
    analyze, Analyst, AssertionVerdict, RationaleHook, RcaContext, RcaError, RcaReport, RootCauseClass, RtlFinding,
    SpecAssertFinding,
};
pub use vcd::{
    extract_window, parse_vcd, EvidenceError, EvidenceRow, EvidenceTable, VcdChange, VcdDocument, VcdError, VcdSignal,
};
