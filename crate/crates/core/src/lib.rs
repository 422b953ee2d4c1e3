//! Agentic formal-verification pipeline for small synchronous designs.
//!
//! Structured rulebook specifications are turned into SVA-subset properties,
//! pushed through a lint/fix/validate loop, proven with a bounded exhaustive
//! engine, and triaged when they fail. Every step is recorded in an
//! append-only [`domain::RunLedger`].
//!
//! - [`domain`]: designs, traces, verdicts and the run ledger
//! - [`specgram`]: rulebook spec grammar, learning cache, rules, prompt context
//! - [`svapars`]: SVA subset lexer/parser/printer, linter and canonical fixer
//! - [`kgraph`]: typed knowledge graph with subgraph retrieval
//! - [`engine`]: bounded proof engine, trace evaluator, VCD writer, coverage
//! - [`rca`]: VCD reader and counterexample root-cause analysis
//! - [`orchestr`]: the sequential multi-agent workflow
//! - [`testkit`]: seeded generators and the brute-force reference checker

pub mod domain;
pub mod engine;
pub mod kgraph;
pub mod orchestr;
pub mod rca;
pub mod specgram;
pub mod svapars;
pub mod testkit;

/// Truncate `100 * num / den` to two decimals, returned in hundredths of a percent.
///
/// `den == 0` yields zero.
pub fn truncated_hundredths(num: u64, den: u64) -> u64 {
    if den == 0 {
        return 0;
    }
    (num as u128 * 10_000 / den as u128) as u64
}

/// Round-half-up variant of [`truncated_hundredths`].
pub fn rounded_hundredths(num: u64, den: u64) -> u64 {
    if den == 0 {
        return 0;
    }
    (num as u128 * 20_000 / den as u128).div_ceil(2) as u64
}

/// Render hundredths of a percent as `NN.NN`.
pub fn format_hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}
