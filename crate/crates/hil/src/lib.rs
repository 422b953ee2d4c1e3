//! Human review of escalated items, dataset capture, KPI recomputation and
//! benchmark tables, plus the HTTP API a review console talks to.
//!
//! - [`queue`]: per-run item queues; resolving feeds the dataset and the learning cache
//! - [`dataset`]: append-only JSONL of decisions
//! - [`kpi`]: KPI rows recomputed from ledgers
//! - [`bench`]: Pass@k, with/without-HIL and iteration tables, CSV
//! - [`server`]: axum routes and SSE ledger streaming

pub mod bench;
pub mod dataset;
pub mod kpi;
pub mod queue;
pub mod server;

pub use bench::{bench_report, rows_from_csv, rows_to_csv, BenchReport, GroupKey, Table};
pub use dataset::{classify_correction, read_records, DatasetError, DatasetLog, DatasetRecord, RESOLUTION_PATTERNS};
pub use kpi::{compute_kpis, synthesize_ledger, KpiError, KpiOptions, KpiRow, Pct, Rounding};
pub use queue::{HilError, HilQueue, Resolved, RunSummary};
pub use server::{router, serve, ResolveBody, ResolveResponse, ServeConfig, TOKEN_ENV};
