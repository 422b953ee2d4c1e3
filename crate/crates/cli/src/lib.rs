//! Library side of the `forge` binary, so the commands can be driven from tests.

pub mod http;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use forge_core::domain::{load_design, DesignError, LedgerError, RunLedger};
use forge_core::kgraph::{answer_context, axi_seed, retrieve_subgraph, KgError, KnowledgeGraph};
use forge_core::orchestr::{
    materialize, AgentBackend, ConfigError, HilMode, ModeHandler, Pipeline, RunConfig, RunError, RunOutcome, RunStatus,
    Scenario, ScriptedBackend, WorkspaceError,
};
use forge_core::specgram::{CacheError, LearningCache, RuleSet};
use forge_hil::{
    bench_report, compute_kpis, rows_from_csv, DatasetError, GroupKey, HilError, KpiError, KpiOptions, KpiRow, Rounding,
};
use thiserror::Error;

pub use http::HttpBackend;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Kpi(#[from] KpiError),
    #[error(transparent)]
    Graph(#[from] KgError),
    #[error("scenario {path}: {msg}")]
    Scenario { path: PathBuf, msg: String },
    #[error("backend must be scripted:<scenario.json> or http:<url>, got `{0}`")]
    BackendSpec(String),
    #[error("kpi rows: {0}")]
    Rows(String),
    #[error(transparent)]
    Hil(#[from] HilError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("server: {0}")]
    Serve(io::Error),
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

/// `scripted:<file>` or `http:<url>`.
pub fn backend_from_spec(spec: &str) -> Result<Box<dyn AgentBackend>, CliError> {
    if let Some(file) = spec.strip_prefix("scripted:") {
        let path = PathBuf::from(file);
        let sc = Scenario::from_json(&read(&path)?).map_err(|e| CliError::Scenario { path, msg: e.to_string() })?;
        Ok(Box::new(ScriptedBackend::new(sc)))
    } else if let Some(url) = spec.strip_prefix("http:") {
        // `http:http://host/agent` and `http://host` both work
        let url = if url.starts_with("//") { format!("http:{url}") } else { url.to_string() };
        Ok(Box::new(HttpBackend::new(&url)))
    } else {
        Err(CliError::BackendSpec(spec.into()))
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub design: PathBuf,
    pub spec: PathBuf,
    pub backend: String,
    pub config: Option<PathBuf>,
    pub hil: Option<HilMode>,
    pub workspace: PathBuf,
    /// Defaults to `<workspace>/cache.jsonl`, seeded on first use.
    pub cache: Option<PathBuf>,
}

pub struct RunReport {
    pub outcome: RunOutcome,
    pub dir: PathBuf,
}

impl RunReport {
    /// 0 when done, 2 when human decisions are still open.
    pub fn exit_code(&self) -> i32 {
        match self.outcome.status {
            RunStatus::Done => 0,
            RunStatus::HilPending => 2,
        }
    }

    pub fn summary(&self) -> String {
        let k = &self.outcome.kpis;
        let mut s = format!(
            "run {}: {}\n  assertions {} proven {} ({}%) coverage {}% first generation {} max fix attempts {}\n  workspace {}\n",
            self.outcome.run_id,
            self.outcome.status.as_str(),
            k.n_assertions,
            k.proven,
            k.pct_proven,
            k.pct_coverage,
            if k.first_generation { "yes" } else { "no" },
            k.fix_attempts,
            self.dir.display()
        );
        for i in self.outcome.pending_hil() {
            s.push_str(&format!("  pending {} {} {}\n", i.item_id, i.kind.as_str(), i.reason));
        }
        s
    }
}

pub fn execute_run(args: &RunArgs) -> Result<RunReport, CliError> {
    let design = load_design(&read(&args.design)?)?;
    let spec = read(&args.spec)?;
    let mut config = match &args.config {
        Some(p) => RunConfig::from_toml(&read(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(mode) = args.hil {
        config.hil_mode = mode;
    }
    let cache_path = args.cache.clone().unwrap_or_else(|| args.workspace.join("cache.jsonl"));
    let cache = LearningCache::open_seeded(&cache_path)?;
    let rules = RuleSet::seeded();
    let mut backend = backend_from_spec(&args.backend)?;
    let pipe = Pipeline { design: &design, rules: &rules, cache: &cache, config: &config };
    let outcome = pipe.run(&spec, backend.as_mut(), &mut ModeHandler(config.hil_mode))?;
    let dir = materialize(&outcome, &design, &args.workspace)?;
    Ok(RunReport { outcome, dir })
}

/// Retrieval against a saved graph, or the AXI seed when none is given.
pub fn kg_query(text: &str, hops: usize, budget: usize, graph: Option<&Path>) -> Result<String, CliError> {
    let g = match graph {
        Some(p) => KnowledgeGraph::load(p)?,
        None => axi_seed(),
    };
    Ok(answer_context(&retrieve_subgraph(&g.snapshot(), text, hops, budget)))
}

/// One KPI row per ledger file, pass index in argument order.
pub fn kpi_rows(ledgers: &[PathBuf], model: &str, round: bool) -> Result<Vec<KpiRow>, CliError> {
    let rounding = if round { Rounding::HalfUp } else { Rounding::Truncate };
    ledgers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let l = RunLedger::from_jsonl(&read(p)?)?;
            let opts = KpiOptions { model_label: model.into(), pass_index: i as u32 + 1, rounding };
            Ok(compute_kpis(&l, &opts)?)
        })
        .collect()
}

/// Text tables (or their CSV) for rows read from a KPI CSV file.
pub fn bench(rows_csv: &Path, grouping: &[GroupKey], as_csv: bool) -> Result<String, CliError> {
    let text = read(rows_csv)?;
    let rows = rows_from_csv(&text).map_err(CliError::Rows)?;
    let r = bench_report(&rows, grouping);
    Ok(if as_csv {
        [&r.pass_at_k, &r.hil_delta, &r.iterations].map(|t| t.to_csv()).join("\n")
    } else {
        r.render_text()
    })
}
