//! Append-only JSONL log of human decisions, one [`DatasetRecord`] per line.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use forge_core::orchestr::{HilDecision, HilItem, HilKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resolution patterns a record can carry.
pub const RESOLUTION_PATTERNS: [&str; 6] =
    ["reset-disable-added", "clock-edge-fixed", "window-fixed", "rewrite-manual", "declined", "manual"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset io: {0}")]
    Io(#[from] io::Error),
    #[error("dataset line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub refined_response: String,
    pub originating_prompt: String,
    pub context: String,
    pub error_signatures: Vec<String>,
    pub resolution_pattern: String,
    pub run_id: String,
    pub item_id: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s).map(|t| t.with_timezone(&Utc)).map_err(serde::de::Error::custom)
    }
}

/// Which kind of edit turned `before` into `after`.
///
/// Checked in order: a reset disable appearing, the clock edge changing, the
/// delay window changing; anything else is a manual rewrite.
pub fn classify_correction(before: &str, after: &str) -> &'static str {
    let edge = |t: &str| {
        if t.contains("negedge") {
            "negedge"
        } else if t.contains("posedge") {
            "posedge"
        } else {
            ""
        }
    };
    let windows = |t: &str| -> Vec<String> {
        t.split("##").skip(1).map(|w| w.split_whitespace().next().unwrap_or("").to_string()).collect()
    };
    if !before.contains("disable iff") && after.contains("disable iff") {
        "reset-disable-added"
    } else if edge(before) != edge(after) {
        "clock-edge-fixed"
    } else if windows(before) != windows(after) {
        "window-fixed"
    } else {
        "rewrite-manual"
    }
}

pub(crate) fn signature_for(item: &HilItem) -> String {
    if !item.error_signature.is_empty() {
        return item.error_signature.clone();
    }
    match item.kind {
        HilKind::UnfixableProperty => "unfixable property",
        HilKind::UnconvergedCritic => "unconverged critic",
        HilKind::UnresolvedRca => "unresolved rca",
    }
    .into()
}

impl DatasetRecord {
    /// Record for a non-pending decision on `item`.
    pub fn for_decision(item: &HilItem, decision: &HilDecision, now: DateTime<Utc>) -> Self {
        let (refined, pattern) = match decision {
            HilDecision::Corrected(t) => (t.clone(), classify_correction(&item.text, t)),
            HilDecision::Declined => (item.text.clone(), "declined"),
            HilDecision::Accepted | HilDecision::Pending => (item.text.clone(), "manual"),
        };
        let refined_response = if refined.trim().is_empty() { item.reason.clone() } else { refined };
        let mut context = format!("{}: {}", item.kind.as_str(), item.reason);
        if !item.property_id.is_empty() {
            context.push_str(&format!(" (property {})", item.property_id));
        }
        for d in &item.diagnostics {
            context.push('\n');
            context.push_str(d);
        }
        if let Some(r) = &item.report {
            context.push_str(&format!(
                "\nrca: {:?} at cycle {}; {}",
                r.root_cause_class, r.violated_at, r.verification_note
            ));
        }
        DatasetRecord {
            refined_response,
            originating_prompt: if item.prompt.is_empty() { item.reason.clone() } else { item.prompt.clone() },
            context,
            error_signatures: vec![signature_for(item)],
            resolution_pattern: pattern.into(),
            run_id: item.run_id.clone(),
            item_id: item.item_id.clone(),
            created_at: now,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    /// Names of the fields that are empty; the pattern may be `manual` but not blank.
    pub fn empty_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, v) in [
            ("refined_response", &self.refined_response),
            ("originating_prompt", &self.originating_prompt),
            ("context", &self.context),
            ("resolution_pattern", &self.resolution_pattern),
            ("run_id", &self.run_id),
            ("item_id", &self.item_id),
        ] {
            if v.trim().is_empty() {
                out.push(name);
            }
        }
        if self.error_signatures.is_empty() || self.error_signatures.iter().any(|s| s.is_empty()) {
            out.push("error_signatures");
        }
        out
    }

    pub fn created_at_rfc3339(&self) -> String {
        self.created_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

/// The dataset file, or an in-memory list when no path is given.
#[derive(Debug, Default)]
pub struct DatasetLog {
    path: Option<PathBuf>,
    mem: Mutex<Vec<DatasetRecord>>,
}

impl DatasetLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (creating if needed) a JSONL file; existing records are loaded.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref().to_path_buf();
        OpenOptions::new().create(true).append(true).open(&path)?;
        let records = read_records(&path)?;
        Ok(DatasetLog { path: Some(path), mem: Mutex::new(records) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, record: &DatasetRecord) -> Result<(), DatasetError> {
        let mut guard = self.mem.lock().unwrap();
        if let Some(path) = &self.path {
            let mut line = record.to_json();
            line.push('\n');
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        guard.push(record.clone());
        Ok(())
    }

    pub fn records(&self) -> Vec<DatasetRecord> {
        self.mem.lock().unwrap().clone()
    }
}

/// Read every record of a dataset file.
pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Malformed { line: i + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns() {
        let bare = "@(posedge clk) a |-> b";
        assert_eq!(classify_correction(bare, "@(posedge clk) disable iff (!rst_n) a |-> b"), "reset-disable-added");
        assert_eq!(classify_correction("@(negedge clk) a |-> b", bare), "clock-edge-fixed");
        assert_eq!(classify_correction("@(posedge clk) a |-> ##[1:3] b", "@(posedge clk) a |-> ##2 b"), "window-fixed");
        assert_eq!(classify_correction(bare, "@(posedge clk) a |=> b"), "rewrite-manual");
        for p in ["reset-disable-added", "clock-edge-fixed", "window-fixed", "rewrite-manual"] {
            assert!(RESOLUTION_PATTERNS.contains(&p));
        }
    }
}
