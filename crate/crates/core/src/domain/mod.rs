//! Shared domain types: designs, traces, verdicts and the run ledger.

mod design;
mod ledger;
mod trace;
mod verdict;

pub use design::{
    load_design, mask, ActiveLevel, Assignment, BinOp, DesignError, DesignModel, Direction, Expr, Port, ResetKind,
    ResetSpec, SignalInfo, SignalKind, StateVar, UnOp, MAX_STATE_BITS,
};
pub use ledger::{Event, LedgerEntry, LedgerError, RunLedger, MAX_FIX_ATTEMPTS, MAX_RCA_ROUNDS};
pub use trace::{Trace, TraceError, TraceSignal};
pub use verdict::{Counterexample, Verdict, VerdictStatus};
