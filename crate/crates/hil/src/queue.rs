//! Per-run HIL queues and the resolve operation that feeds the dataset and
//! the learning cache.
//!
//! Each run sits behind its own mutex, so resolves on one run are serialized
//! (and a single item can never be resolved twice concurrently) while other
//! runs proceed independently.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use forge_core::domain::{load_design, DesignModel, Event, LedgerEntry, LedgerError, RunLedger};
use forge_core::engine::CoverageReport;
use forge_core::orchestr::{HilDecision, HilItem, HilStatus, HilTransitionError, RunOutcome};
use forge_core::specgram::{CacheError, LearningCache, NewEntry, Origin, RuleSet, SpecGrammar};
use forge_core::svapars::{validate_with, LintCode};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;

use crate::dataset::{signature_for, DatasetError, DatasetLog, DatasetRecord};

#[derive(Debug, Error)]
pub enum HilError {
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("unknown HIL item `{0}`")]
    UnknownItem(String),
    #[error("item `{0}` is already queued")]
    DuplicateItem(String),
    #[error("correction for `{item}` does not validate: {}", diagnostics.join("; "))]
    InvalidCorrection { item: String, diagnostics: Vec<String> },
    #[error(transparent)]
    Transition(#[from] HilTransitionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("{path}: {msg}")]
    Load { path: PathBuf, msg: String },
}

/// Listing entry for `GET /runs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub design: String,
    /// `done`, `hil_pending`, or `running` before RunCompleted.
    pub status: String,
    pub events: usize,
    pub pending: usize,
}

/// What a resolve produced.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub item: HilItem,
    pub record: DatasetRecord,
    /// Id of the cache entry recorded for a correction.
    pub cache_entry: Option<u64>,
}

struct RunState {
    ledger: RunLedger,
    coverage: Option<CoverageReport>,
    items: Vec<HilItem>,
    design: DesignModel,
    spec: Option<SpecGrammar>,
    dir: Option<PathBuf>,
    tx: broadcast::Sender<LedgerEntry>,
}

impl RunState {
    fn append(&mut self, event: Event) -> Result<(), LedgerError> {
        let ts = if self.ledger.is_empty() { 0 } else { self.ledger.last_ts() + 1 };
        let entry = self.ledger.append(ts, event)?.clone();
        // no subscribers is fine
        let _ = self.tx.send(entry);
        Ok(())
    }

    fn persist(&self) -> Result<(), HilError> {
        if let Some(dir) = &self.dir {
            fs::write(dir.join("ledger.jsonl"), self.ledger.to_jsonl())?;
            let items = serde_json::to_string_pretty(&self.items).expect("items serialize") + "\n";
            fs::write(dir.join("hil_items.json"), items)?;
        }
        Ok(())
    }
}

/// Diagnostic strings look like `Code: message`; map each known code to its tag.
fn tags_of(diagnostics: &[String]) -> Vec<String> {
    let mut tags: Vec<String> = Vec::new();
    for d in diagnostics {
        let code = d.split(':').next().unwrap_or("").trim();
        if let Some(c) = LintCode::parse(code) {
            if !tags.iter().any(|t| t == c.tag()) {
                tags.push(c.tag().into());
            }
        }
    }
    tags
}

pub struct HilQueue {
    runs: RwLock<BTreeMap<String, Arc<Mutex<RunState>>>>,
    cache: Arc<LearningCache>,
    dataset: Arc<DatasetLog>,
    rules: RuleSet,
}

impl HilQueue {
    pub fn new(cache: Arc<LearningCache>, dataset: Arc<DatasetLog>) -> Self {
        HilQueue { runs: RwLock::new(BTreeMap::new()), cache, dataset, rules: RuleSet::seeded() }
    }

    pub fn cache(&self) -> &Arc<LearningCache> {
        &self.cache
    }

    pub fn dataset(&self) -> &Arc<DatasetLog> {
        &self.dataset
    }

    fn insert(&self, run_id: String, state: RunState) {
        self.runs.write().unwrap().insert(run_id, Arc::new(Mutex::new(state)));
    }

    fn run(&self, run_id: &str) -> Result<Arc<Mutex<RunState>>, HilError> {
        self.runs.read().unwrap().get(run_id).cloned().ok_or_else(|| HilError::UnknownRun(run_id.into()))
    }

    /// Track a finished run and its items. `spec` sharpens correction checks;
    /// `dir` is where resolves are written back to, if anywhere.
    pub fn register(
        &self,
        outcome: &RunOutcome,
        design: &DesignModel,
        spec: Option<SpecGrammar>,
        dir: Option<PathBuf>,
    ) {
        let (tx, _) = broadcast::channel(256);
        self.insert(
            outcome.run_id.clone(),
            RunState {
                ledger: outcome.ledger.clone(),
                coverage: outcome.coverage.clone(),
                items: outcome.hil_items.clone(),
                design: design.clone(),
                spec,
                dir,
                tx,
            },
        );
    }

    /// Track a run from bare parts, e.g. a ledger still being written.
    pub fn register_ledger(&self, ledger: RunLedger, design: &DesignModel) {
        let (tx, _) = broadcast::channel(256);
        let run_id = ledger.run_id.clone();
        self.insert(
            run_id,
            RunState { ledger, coverage: None, items: Vec::new(), design: design.clone(), spec: None, dir: None, tx },
        );
    }

    /// Load every materialized run directory under `root`.
    pub fn load_dir(&self, root: &Path) -> Result<usize, HilError> {
        let mut n = 0;
        if !root.exists() {
            return Ok(0);
        }
        let mut dirs: Vec<PathBuf> = fs::read_dir(root)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        dirs.sort();
        for dir in dirs {
            if !dir.join("ledger.jsonl").is_file() || !dir.join("design.dsn").is_file() {
                continue;
            }
            let load = |p: &Path, msg: String| HilError::Load { path: p.to_path_buf(), msg };
            let ledger = RunLedger::from_jsonl(&fs::read_to_string(dir.join("ledger.jsonl"))?)?;
            let design_path = dir.join("design.dsn");
            let design =
                load_design(&fs::read_to_string(&design_path)?).map_err(|e| load(&design_path, e.to_string()))?;
            let read_json = |name: &str| -> Result<Option<String>, HilError> {
                let p = dir.join(name);
                Ok(if p.is_file() { Some(fs::read_to_string(p)?) } else { None })
            };
            let coverage = match read_json("coverage.json")? {
                Some(t) => Some(serde_json::from_str(&t).map_err(|e| load(&dir.join("coverage.json"), e.to_string()))?),
                None => None,
            };
            let items = match read_json("hil_items.json")? {
                Some(t) => serde_json::from_str(&t).map_err(|e| load(&dir.join("hil_items.json"), e.to_string()))?,
                None => Vec::new(),
            };
            let (tx, _) = broadcast::channel(256);
            self.insert(
                ledger.run_id.clone(),
                RunState { ledger, coverage, items, design, spec: None, dir: Some(dir.clone()), tx },
            );
            n += 1;
        }
        Ok(n)
    }

    pub fn runs(&self) -> Vec<RunSummary> {
        let runs = self.runs.read().unwrap();
        runs.iter()
            .map(|(id, r)| {
                let r = r.lock().unwrap();
                let status = r
                    .ledger
                    .entries()
                    .iter()
                    .rev()
                    .find_map(|e| match &e.event {
                        Event::RunCompleted { status, .. } => Some(status.clone()),
                        _ => None,
                    })
                    .unwrap_or_else(|| "running".into());
                RunSummary {
                    run_id: id.clone(),
                    design: r.ledger.design.clone(),
                    status,
                    events: r.ledger.len(),
                    pending: r.items.iter().filter(|i| i.status == HilStatus::Pending).count(),
                }
            })
            .collect()
    }

    pub fn ledger(&self, run_id: &str) -> Result<RunLedger, HilError> {
        Ok(self.run(run_id)?.lock().unwrap().ledger.clone())
    }

    pub fn coverage(&self, run_id: &str) -> Result<Option<CoverageReport>, HilError> {
        Ok(self.run(run_id)?.lock().unwrap().coverage.clone())
    }

    pub fn items(&self, run_id: &str) -> Result<Vec<HilItem>, HilError> {
        Ok(self.run(run_id)?.lock().unwrap().items.clone())
    }

    /// Pending items of every run, runs in id order, items in queue order.
    pub fn pending(&self) -> Vec<HilItem> {
        let runs = self.runs.read().unwrap();
        runs.values()
            .flat_map(|r| {
                let r = r.lock().unwrap();
                r.items.iter().filter(|i| i.status == HilStatus::Pending).cloned().collect::<Vec<_>>()
            })
            .collect()
    }

    /// Current entries plus a receiver for everything appended afterwards.
    pub fn subscribe(&self, run_id: &str) -> Result<(Vec<LedgerEntry>, broadcast::Receiver<LedgerEntry>), HilError> {
        let run = self.run(run_id)?;
        let r = run.lock().unwrap();
        Ok((r.ledger.entries().to_vec(), r.tx.subscribe()))
    }

    /// Append an event to a tracked run's ledger and notify subscribers.
    pub fn append_event(&self, run_id: &str, event: Event) -> Result<(), HilError> {
        self.run(run_id)?.lock().unwrap().append(event)?;
        Ok(())
    }

    /// Queue a new item on its run. Logs HilRequested unless the ledger already has it.
    pub fn enqueue(&self, item: HilItem) -> Result<(), HilError> {
        let run = self.run(&item.run_id)?;
        let mut r = run.lock().unwrap();
        if r.items.iter().any(|i| i.item_id == item.item_id) {
            return Err(HilError::DuplicateItem(item.item_id));
        }
        let logged = r
            .ledger
            .entries()
            .iter()
            .any(|e| matches!(&e.event, Event::HilRequested { item: id, .. } if *id == item.item_id));
        if !logged {
            r.append(Event::HilRequested {
                item: item.item_id.clone(),
                hil_kind: item.kind.as_str().into(),
                property: item.property_id.clone(),
                reason: item.reason.clone(),
            })?;
        }
        r.items.push(item);
        r.persist()
    }

    fn owner_of(&self, item_id: &str) -> Result<Arc<Mutex<RunState>>, HilError> {
        let runs = self.runs.read().unwrap();
        runs.values()
            .find(|r| r.lock().unwrap().items.iter().any(|i| i.item_id == item_id))
            .cloned()
            .ok_or_else(|| HilError::UnknownItem(item_id.into()))
    }

    /// Resolve a pending item.
    ///
    /// A correction must validate against the run's design (each line, for a
    /// critic batch). The record goes to the dataset, a correction becomes a
    /// cache entry, and the run ledger gains HilResolved, a clean LintRound for
    /// a corrected property, and DatasetRecordEmitted.
    pub fn resolve(&self, item_id: &str, decision: HilDecision, now: DateTime<Utc>) -> Result<Resolved, HilError> {
        if decision == HilDecision::Pending {
            return Err(HilTransitionError::CorrectionMismatch.into());
        }
        let run = self.owner_of(item_id)?;
        let mut r = run.lock().unwrap();
        let idx =
            r.items.iter().position(|i| i.item_id == item_id).ok_or_else(|| HilError::UnknownItem(item_id.into()))?;
        let mut item = r.items[idx].clone();
        let before = item.clone();
        item.transition(&decision)?;

        if let HilDecision::Corrected(text) = &decision {
            let parts: Vec<&str> = if item.property_id.is_empty() {
                text.lines().filter(|l| !l.trim().is_empty()).collect()
            } else {
                vec![text.as_str()]
            };
            let mut diagnostics = Vec::new();
            if parts.is_empty() {
                diagnostics.push("empty correction".to_string());
            }
            for p in &parts {
                if let Err(ds) = validate_with(p, &r.design, r.spec.as_ref(), &self.rules) {
                    diagnostics.extend(ds.iter().map(|d| format!("{}: {}", d.code.as_str(), d.message)));
                }
            }
            if !diagnostics.is_empty() {
                return Err(HilError::InvalidCorrection { item: item_id.into(), diagnostics });
            }
        }

        let record = DatasetRecord::for_decision(&before, &decision, now);
        self.dataset.append(&record)?;
        let cache_entry = match &decision {
            HilDecision::Corrected(text) => {
                let snippet = if item.property_id.is_empty() {
                    text.lines().find(|l| !l.trim().is_empty()).unwrap_or(text).to_string()
                } else {
                    text.clone()
                };
                let mut explanation = before.diagnostics.clone();
                explanation.push(format!("resolved by a reviewer ({})", record.resolution_pattern));
                Some(self.cache.record(NewEntry {
                    error_signature: signature_for(&before),
                    incorrect_snippet: before.text.clone(),
                    explanation,
                    corrected_snippet: snippet,
                    tags: tags_of(&before.diagnostics),
                    origin: Origin::Hil,
                    created_at: Some(now),
                })?)
            }
            _ => None,
        };

        r.append(Event::HilResolved {
            item: item_id.into(),
            decision: decision.as_str().into(),
            correction: item.correction.clone(),
        })?;
        if matches!(decision, HilDecision::Corrected(_)) && !item.property_id.is_empty() {
            r.append(Event::LintRound { property: item.property_id.clone(), codes: vec![], clean: true })?;
        }
        r.append(Event::DatasetRecordEmitted { item: item_id.into(), record: record.to_json() })?;
        r.items[idx] = item.clone();
        r.persist()?;
        tracing::info!(item = item_id, decision = decision.as_str(), "HIL item resolved");
        Ok(Resolved { item, record, cache_entry })
    }
}
