//! Learning cache of documented mistakes and their corrections.
//!
//! Entries live in memory behind a `RwLock` and, when the cache is file-backed,
//! are appended one JSON object per line. A record is written to disk and
//! pushed to memory while the write lock is held, so readers see whole entries
//! or nothing.

use std::cmp::Reverse;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::signature::normalize_error_signature;
use crate::svapars::parse_property;

const SEED: &str = include_str!("../../rulebook/seed_cache.jsonl");

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("corrected snippet does not parse: {0}")]
    InvalidCorrection(String),
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Seeded,
    Hil,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub id: u64,
    pub error_signature: String,
    pub incorrect_snippet: String,
    pub explanation: Vec<String>,
    pub corrected_snippet: String,
    pub tags: Vec<String>,
    pub origin: Origin,
    pub created_at: DateTime<Utc>,
}

/// Entry contents before an id is assigned.
#[derive(Debug, Clone)]
pub struct NewEntry {
    pub error_signature: String,
    pub incorrect_snippet: String,
    pub explanation: Vec<String>,
    pub corrected_snippet: String,
    pub tags: Vec<String>,
    pub origin: Origin,
    /// Defaults to now.
    pub created_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Default)]
pub struct LearningCache {
    entries: RwLock<Vec<CacheEntry>>,
    path: Option<PathBuf>,
}

/// The two entries shipped with the rulebook.
pub fn seed_entries() -> Vec<CacheEntry> {
    SEED.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("seed cache is valid"))
        .collect()
}

impl LearningCache {
    pub fn in_memory() -> Self {
        LearningCache::default()
    }

    pub fn seeded() -> Self {
        LearningCache { entries: RwLock::new(seed_entries()), path: None }
    }

    /// Open a JSONL-backed cache, creating it with the seed entries when absent or empty.
    pub fn open_seeded(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref();
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        if fresh {
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = File::create(path)?;
            for e in seed_entries() {
                writeln!(f, "{}", serde_json::to_string(&e).expect("entry serializes"))?;
            }
            f.sync_all()?;
        }
        Self::open(path)
    }

    /// Open a JSONL-backed cache (missing file = empty cache).
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: CacheEntry = serde_json::from_str(&line)
                    .map_err(|err| CacheError::Malformed { line: i + 1, msg: err.to_string() })?;
                entries.push(e);
            }
        }
        Ok(LearningCache { entries: RwLock::new(entries), path: Some(path) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn entries(&self) -> Vec<CacheEntry> {
        self.entries.read().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: u64) -> Option<CacheEntry> {
        self.entries.read().unwrap().iter().find(|e| e.id == id).cloned()
    }

    /// Store a correction. The signature is normalized; the corrected snippet must parse.
    pub fn record(&self, entry: NewEntry) -> Result<u64, CacheError> {
        parse_property(&entry.corrected_snippet).map_err(|e| CacheError::InvalidCorrection(e.to_string()))?;
        let mut guard = self.entries.write().unwrap();
        let id = guard.iter().map(|e| e.id).max().unwrap_or(0) + 1;
        let stored = CacheEntry {
            id,
            error_signature: normalize_error_signature(&entry.error_signature),
            incorrect_snippet: entry.incorrect_snippet,
            explanation: entry.explanation,
            corrected_snippet: entry.corrected_snippet,
            tags: entry.tags,
            origin: entry.origin,
            created_at: entry.created_at.unwrap_or_else(Utc::now),
        };
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&stored).expect("entry serializes");
            line.push('\n');
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        guard.push(stored);
        Ok(id)
    }

    /// Entries related to `signature` or sharing a tag, best first.
    ///
    /// Order: signature relation (exact, then containment), tag overlap,
    /// recency, then ascending id. Entries with neither a signature relation
    /// nor a shared tag are not returned.
    pub fn lookup(&self, signature: &str, tags: &[String]) -> Vec<CacheEntry> {
        let sig = normalize_error_signature(signature);
        let guard = self.entries.read().unwrap();
        let mut scored: Vec<(u8, usize, &CacheEntry)> = guard
            .iter()
            .filter_map(|e| {
                let relation = if !sig.is_empty() && e.error_signature == sig {
                    2
                } else if !sig.is_empty()
                    && !e.error_signature.is_empty()
                    && (e.error_signature.contains(&sig) || sig.contains(&e.error_signature))
                {
                    1
                } else {
                    0
                };
                let overlap = e.tags.iter().filter(|t| tags.contains(t)).count();
                (relation > 0 || overlap > 0).then_some((relation, overlap, e))
            })
            .collect();
        scored.sort_by_key(|(rel, overlap, e)| (Reverse(*rel), Reverse(*overlap), Reverse(e.created_at), e.id));
        scored.into_iter().map(|(_, _, e)| e.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn new_entry(sig: &str, tags: &[&str], at: DateTime<Utc>) -> NewEntry {
        NewEntry {
            error_signature: sig.into(),
            incorrect_snippet: String::new(),
            explanation: vec![],
            corrected_snippet: "@(posedge clk) a |-> b".into(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
            origin: Origin::Hil,
            created_at: Some(at),
        }
    }

    #[test]
    fn seeded_entry_ranks_first_for_its_signature() {
        let c = LearningCache::seeded();
        let hits = c.lookup(
            "clock edge mismatch; delay window mismatch; semantic mismatch",
            &["clock-edge".into(), "delay-window".into()],
        );
        assert_eq!(hits[0].id, 1);
        assert!(hits[0].corrected_snippet.contains("req |-> (error or ##[1:2] ack)"));
    }

    #[test]
    fn empty_cache_lookup() {
        assert!(LearningCache::in_memory().lookup("anything", &["clock-edge".into()]).is_empty());
    }

    #[test]
    fn equal_scores_break_ties_by_id() {
        let c = LearningCache::in_memory();
        let t = Utc.with_ymd_and_hms(2025, 3, 1, 0, 0, 0).unwrap();
        let a = c.record(new_entry("parse error", &["x"], t)).unwrap();
        let b = c.record(new_entry("parse error", &["x"], t)).unwrap();
        let ids: Vec<u64> = c.lookup("parse error", &[]).iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![a, b]);
    }

    #[test]
    fn recency_beats_id_when_scores_tie() {
        let c = LearningCache::in_memory();
        let old = Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap();
        let new = Utc.with_ymd_and_hms(2025, 6, 1, 0, 0, 0).unwrap();
        c.record(new_entry("parse error", &[], old)).unwrap();
        let b = c.record(new_entry("parse error", &[], new)).unwrap();
        assert_eq!(c.lookup("parse error", &[])[0].id, b);
    }

    #[test]
    fn record_then_lookup_and_reject_bad_correction() {
        let c = LearningCache::in_memory();
        let mut e = new_entry("Missing Reset Disable", &["reset-handling"], Utc::now());
        e.corrected_snippet =
            "property done_signal_validity;\n@(posedge clk) disable iff (!rst_async_n) (i_start && !enc_done) |=> !o_done;\nendproperty\nassert property (done_signal_validity);\n".into();
        let id = c.record(e).unwrap();
        assert_eq!(c.lookup("missing reset disable", &[])[0].id, id);

        let mut bad = new_entry("x", &[], Utc::now());
        bad.corrected_snippet = "@(negedge clk) a |-> b unless c".into();
        assert!(matches!(c.record(bad), Err(CacheError::InvalidCorrection(_))));
    }

    #[test]
    fn file_backed_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let c = LearningCache::open_seeded(&path).unwrap();
        assert_eq!(c.len(), 2);
        let id = c.record(new_entry("semantic mismatch", &["semantic"], Utc::now())).unwrap();
        let reopened = LearningCache::open(&path).unwrap();
        assert_eq!(reopened.entries(), c.entries());
        assert_eq!(reopened.get(id).unwrap().origin, Origin::Hil);
        // reopening a populated file does not re-seed
        assert_eq!(LearningCache::open_seeded(&path).unwrap().len(), 3);
    }
}
