//! Bounded proof engine, reference trace evaluator, VCD writer and coverage.

mod check;
mod coverage;
mod eval;
mod monitor;
mod vcd;

pub use check::{check, BoundProperty, CheckOptions, EngineError, DEFAULT_BUDGET, DEFAULT_DEPTH, MAX_INPUT_BITS};
pub use coverage::{compute_coverage, CoverageHole, CoverageReport};
pub use eval::{evaluate_on_trace, Evaluation};
pub use monitor::MAX_ALTERNATIVES;
pub use vcd::{emit_vcd, id_code};
