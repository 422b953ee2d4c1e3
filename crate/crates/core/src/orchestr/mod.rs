//! The sequential multi-agent workflow over a pluggable agent backend.
//!
//! Phases and their legal successors (see [`Phase::successors`]):
//!
//! ```text
//! SpecIntake -> Generation -> SyntaxLoop -> CriticLoop -> Proving -> CoverageLoop -> Done
//!                                 ^  |          |  ^         |  ^        |  |
//!                                 |  +----------+  |         v  |        |  |
//!                                 |                |        Rca-+        |  |
//!                                 +----------------+---------------------+  |
//!                                                                           v
//!   any of Generation, SyntaxLoop, CriticLoop, Rca, CoverageLoop -> Hil -> back
//! ```
//!
//! Every step appends to the run ledger with a logical clock, so the same
//! scripted backend, config and inputs always yield the same ledger bytes.

mod backend;
mod config;
mod hil;
mod materialize;
mod run;

pub use backend::{
    parse_reply, AgentBackend, AgentReply, AgentRequest, BackendError, Critique, CritiqueVerdict, Role, Scenario,
    ScriptedBackend, ScriptedReply,
};
pub use config::{ConfigError, HilMode, RunConfig};
pub use hil::{HilDecision, HilHandler, HilItem, HilKind, HilResolution, HilStatus, HilTransitionError, ModeHandler};
pub use materialize::{artifact_files, materialize, WorkspaceError};
pub use run::{
    derive_run_id, run, Phase, Pipeline, PropertyStatus, RunError, RunKpis, RunOutcome, RunStatus, Session,
    TrackedProperty,
};
