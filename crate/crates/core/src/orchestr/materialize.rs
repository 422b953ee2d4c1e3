//! Writes a finished run's properties, bind manifest, ledger, coverage,
//! HIL items and design source to disk.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::run::RunOutcome;
use crate::domain::DesignModel;
use crate::engine::BoundProperty;
use crate::svapars::parse_recovering;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{dir} already holds different content for this run ({path})")]
    WorkspaceConflict { dir: PathBuf, path: String },
    #[error("workspace io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    id: &'a str,
    file: String,
    name: String,
    source: &'a str,
    status: Option<&'static str>,
    /// Property signal → design signal.
    binding: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run_id: &'a str,
    design: &'a str,
    properties: Vec<ManifestEntry<'a>>,
}

/// Relative path → contents for everything [`materialize`] writes.
pub fn artifact_files(outcome: &RunOutcome, design: &DesignModel) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let mut entries = Vec::new();
    for p in outcome.active() {
        let file = format!("properties/{}.sva", p.id);
        let mut text = p.text.trim_end().to_string();
        text.push('\n');
        let ast = parse_recovering(&p.text).ok().map(|x| x.ast);
        let binding =
            ast.as_ref().and_then(|a| BoundProperty::bind(a, design).ok()).map(|b| b.binding).unwrap_or_default();
        entries.push(ManifestEntry {
            id: &p.id,
            file: file.clone(),
            name: ast.map(|a| a.name).unwrap_or_default(),
            source: &p.source,
            status: p.verdict.as_ref().map(|v| v.status.as_str()),
            binding,
        });
        files.insert(file, text);
    }
    let manifest = Manifest { run_id: &outcome.run_id, design: &design.name, properties: entries };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    files.insert("bind_manifest.json".into(), json);
    files.insert("ledger.jsonl".into(), outcome.ledger.to_jsonl());
    if let Some(c) = &outcome.coverage {
        files.insert("coverage.json".into(), serde_json::to_string_pretty(c).expect("coverage serializes") + "\n");
    }
    let items = serde_json::to_string_pretty(&outcome.hil_items).expect("items serialize");
    files.insert("hil_items.json".into(), items + "\n");
    files.insert("design.dsn".into(), design.source().to_string());
    files
}

fn read_tree(dir: &Path, prefix: &str, out: &mut BTreeMap<String, String>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = format!("{prefix}{}", entry.file_name().to_string_lossy());
        if entry.file_type()?.is_dir() {
            read_tree(&entry.path(), &format!("{name}/"), out)?;
        } else {
            out.insert(name, fs::read_to_string(entry.path())?);
        }
    }
    Ok(())
}

/// Write `<root>/<run_id>/`. Idempotent: an existing directory with exactly
/// the same files is left alone; anything else is a conflict.
pub fn materialize(outcome: &RunOutcome, design: &DesignModel, root: &Path) -> Result<PathBuf, WorkspaceError> {
    let dir = root.join(&outcome.run_id);
    let files = artifact_files(outcome, design);
    if dir.exists() {
        let mut existing = BTreeMap::new();
        read_tree(&dir, "", &mut existing)?;
        let differing = files
            .iter()
            .find(|(k, v)| existing.get(*k) != Some(*v))
            .map(|(k, _)| k.clone())
            .or_else(|| existing.keys().find(|k| !files.contains_key(*k)).cloned());
        return match differing {
            None => Ok(dir),
            Some(path) => Err(WorkspaceError::WorkspaceConflict { dir, path }),
        };
    }
    for (rel, text) in &files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
    }
    Ok(dir)
}
