use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use forge::{bench, execute_run, kg_query, kpi_rows, CliError, RunArgs};
use forge_core::kgraph::{DEFAULT_HOPS, DEFAULT_NODE_BUDGET};
use forge_core::orchestr::HilMode;
use forge_core::specgram::LearningCache;
use forge_hil::{rows_to_csv, serve, DatasetLog, GroupKey, HilQueue, ServeConfig};

#[derive(Parser)]
#[command(name = "forge", version, about = "Assertion generation, bounded proof and HIL review for toy designs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Hil {
    Interactive,
    AutoAccept,
    AutoDecline,
}

impl From<Hil> for HilMode {
    fn from(h: Hil) -> Self {
        match h {
            Hil::Interactive => HilMode::Interactive,
            Hil::AutoAccept => HilMode::AutoAccept,
            Hil::AutoDecline => HilMode::AutoDecline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    Design,
    Model,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the pipeline once and write its artifacts. Exits 2 when HIL items stay pending.
    Run {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// scripted:<scenario.json> or http:<url>
        #[arg(long)]
        backend: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        hil: Option<Hil>,
        #[arg(long, default_value = "forge-runs")]
        workspace: PathBuf,
        /// Learning cache file; defaults to <workspace>/cache.jsonl
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Knowledge-graph commands.
    Kg {
        #[command(subcommand)]
        cmd: KgCmd,
    },
    /// Recompute KPI rows from ledgers (pass index = argument order) as CSV.
    Kpi {
        ledgers: Vec<PathBuf>,
        #[arg(long, default_value = "scripted")]
        model: String,
        /// Round half up instead of truncating.
        #[arg(long)]
        round: bool,
    },
    /// Render bench tables from a KPI CSV.
    Bench {
        rows: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',')]
        group: Vec<Group>,
        #[arg(long)]
        csv: bool,
    },
    /// Serve the HIL API over the runs in a workspace.
    Serve {
        #[arg(long, default_value = "forge-runs")]
        workspace: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8787")]
        addr: SocketAddr,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Dataset JSONL; defaults to <workspace>/dataset.jsonl
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KgCmd {
    /// Retrieve a subgraph for a query and print the cited context.
    Query {
        text: String,
        #[arg(long, default_value_t = DEFAULT_HOPS)]
        hops: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: usize,
        /// Graph JSONL; the AXI seed when absent.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    // usage errors get their own code; 2 means HIL items are pending
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(64);
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<u8, CliError> {
    match cmd {
        Cmd::Run { design, spec, backend, config, hil, workspace, cache } => {
            let report =
                execute_run(&RunArgs { design, spec, backend, config, hil: hil.map(Into::into), workspace, cache })?;
            print!("{}", report.summary());
            Ok(report.exit_code() as u8)
        }
        Cmd::Kg { cmd: KgCmd::Query { text, hops, budget, graph } } => {
            print!("{}", kg_query(&text, hops, budget, graph.as_deref())?);
            Ok(0)
        }
        Cmd::Kpi { ledgers, model, round } => {
            print!("{}", rows_to_csv(&kpi_rows(&ledgers, &model, round)?));
            Ok(0)
        }
        Cmd::Bench { rows, group, csv } => {
            let grouping: Vec<GroupKey> = group
                .into_iter()
                .map(|g| match g {
                    Group::Design => GroupKey::Design,
                    Group::Model => GroupKey::Model,
                })
                .collect();
            print!("{}", bench(&rows, &grouping, csv)?);
            Ok(0)
        }
        Cmd::Serve { workspace, addr, cache, dataset } => {
            let cache = LearningCache::open_seeded(cache.unwrap_or_else(|| workspace.join("cache.jsonl")))?;
            let dataset = DatasetLog::open(dataset.unwrap_or_else(|| workspace.join("dataset.jsonl")))?;
            let queue = Arc::new(HilQueue::new(Arc::new(cache), Arc::new(dataset)));
            let n = queue.load_dir(&workspace)?;
            eprintln!("loaded {n} runs from {}", workspace.display());
            let rt = tokio::runtime::Runtime::new().map_err(CliError::Serve)?;
            rt.block_on(serve(queue, ServeConfig::from_env(addr))).map_err(CliError::Serve)?;
            Ok(0)
        }
    }
}
