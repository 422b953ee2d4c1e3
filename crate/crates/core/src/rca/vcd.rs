//! Value change dump reader and evidence extraction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{mask, Trace, TraceSignal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcdError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: unknown identifier code `{id}`")]
    UnknownIdCode { line: usize, id: String },
    #[error("line {line}: time {time} does not advance past {previous}")]
    NonMonotonicTime { line: usize, time: u64, previous: u64 },
    #[error("line {line}: bad value change `{text}`")]
    MalformedValue { line: usize, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcdSignal {
    pub id: String,
    pub name: String,
    pub width: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcdChange {
    pub time: u64,
    /// Index into [`VcdDocument::signals`].
    pub signal: usize,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcdDocument {
    pub timescale: String,
    pub scope: String,
    pub signals: Vec<VcdSignal>,
    /// Time-ordered value changes.
    pub changes: Vec<VcdChange>,
    /// Last `#time` marker, which may follow the final change.
    pub end_time: u64,
}

type Command = (String, Vec<String>);

/// Split a header into `$keyword ... $end` groups.
fn header_commands(text: &str) -> Result<(Vec<Command>, usize), VcdError> {
    let mut cmds = Vec::new();
    let mut current: Option<(String, Vec<String>)> = None;
    for (ln, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            match (&mut current, tok) {
                (Some(_), "$end") => {
                    let (kw, args) = current.take().unwrap();
                    let done = kw == "$enddefinitions";
                    cmds.push((kw, args));
                    if done {
                        return Ok((cmds, ln + 1));
                    }
                }
                (Some((_, args)), t) => args.push(t.to_string()),
                (None, t) if t.starts_with('$') => current = Some((t.to_string(), Vec::new())),
                (None, t) => return Err(VcdError::MalformedHeader(format!("line {}: unexpected `{t}`", ln + 1))),
            }
        }
    }
    Err(VcdError::MalformedHeader("missing $enddefinitions".into()))
}

pub fn parse_vcd(text: &str) -> Result<VcdDocument, VcdError> {
    let (cmds, body_start) = header_commands(text)?;
    let mut timescale = None;
    let mut scope = String::new();
    let mut signals = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (kw, args) in cmds {
        match kw.as_str() {
            "$timescale" => timescale = Some(args.join("")),
            "$scope" => {
                if scope.is_empty() {
                    scope = args.get(1).cloned().unwrap_or_default();
                }
            }
            "$var" => {
                let [_kind, width, id, name, ..] = args.as_slice() else {
                    return Err(VcdError::MalformedHeader(format!("short $var: {}", args.join(" "))));
                };
                let width: u32 = width
                    .parse()
                    .ok()
                    .filter(|w| (1..=64).contains(w))
                    .ok_or_else(|| VcdError::MalformedHeader(format!("bad width `{width}` for {name}")))?;
                if ids.insert(id.clone(), signals.len()).is_some() {
                    return Err(VcdError::MalformedHeader(format!("duplicate identifier `{id}`")));
                }
                signals.push(VcdSignal { id: id.clone(), name: name.clone(), width });
            }
            _ => {}
        }
    }
    let timescale = timescale.ok_or_else(|| VcdError::MalformedHeader("missing $timescale".into()))?;

    let mut changes = Vec::new();
    let mut time: Option<u64> = None;
    for (ln0, line) in text.lines().enumerate().skip(body_start) {
        let line_no = ln0 + 1;
        let mut toks = line.split_whitespace().peekable();
        while let Some(tok) = toks.next() {
            if tok.starts_with('$') {
                // $dumpvars / $end and friends only bracket ordinary changes
                continue;
            }
            if let Some(t) = tok.strip_prefix('#') {
                let t: u64 =
                    t.parse().map_err(|_| VcdError::MalformedValue { line: line_no, text: tok.to_string() })?;
                if let Some(prev) = time {
                    if t <= prev {
                        return Err(VcdError::NonMonotonicTime { line: line_no, time: t, previous: prev });
                    }
                }
                time = Some(t);
                continue;
            }
            let bad = || VcdError::MalformedValue { line: line_no, text: tok.to_string() };
            let (value, id) = if let Some(bits) = tok.strip_prefix(['b', 'B']) {
                let id = toks.next().ok_or_else(bad)?;
                (parse_bits(bits).ok_or_else(bad)?, id.to_string())
            } else {
                let mut cs = tok.chars();
                let v = cs.next().ok_or_else(bad)?;
                (parse_bits(&v.to_string()).ok_or_else(bad)?, cs.as_str().to_string())
            };
            let &signal = ids.get(&id).ok_or(VcdError::UnknownIdCode { line: line_no, id: id.clone() })?;
            let t = time.ok_or_else(bad)?;
            if value & !mask(signals[signal].width) != 0 {
                return Err(bad());
            }
            changes.push(VcdChange { time: t, signal, value });
        }
    }
    Ok(VcdDocument { timescale, scope, signals, changes, end_time: time.unwrap_or(0) })
}

/// Binary digits; `x` and `z` read as 0.
fn parse_bits(bits: &str) -> Option<u64> {
    if bits.is_empty() || bits.len() > 64 {
        return None;
    }
    bits.chars().try_fold(0u64, |acc, c| match c {
        '0' | 'x' | 'X' | 'z' | 'Z' => Some(acc << 1),
        '1' => Some(acc << 1 | 1),
        _ => None,
    })
}

impl VcdDocument {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s.name == name)
    }

    /// Value of every signal at each integer time `0..len`, holding the last
    /// change; signals read 0 before their first change.
    fn sampled(&self, len: u64) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::with_capacity(len as usize); self.signals.len()];
        let mut cur = vec![0u64; self.signals.len()];
        let mut i = 0;
        for t in 0..len {
            while i < self.changes.len() && self.changes[i].time <= t {
                cur[self.changes[i].signal] = self.changes[i].value;
                i += 1;
            }
            for (s, v) in cur.iter().enumerate() {
                out[s].push(*v);
            }
        }
        out
    }

    /// Rebuild a per-cycle trace: one cycle per time unit, up to the final marker.
    pub fn to_trace(&self) -> Trace {
        let len = self.end_time.max(self.changes.last().map_or(0, |c| c.time + 1));
        Trace {
            design: self.scope.clone(),
            signals: self.signals.iter().map(|s| TraceSignal { name: s.name.clone(), width: s.width }).collect(),
            length: len as usize,
            values: self.sampled(len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvidenceError {
    #[error("signal `{0}` is not in the dump")]
    UnknownSignal(String),
    #[error("window start {t0} is after its end {t1}")]
    EmptyWindow { t0: u64, t1: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub time: u64,
    pub values: Vec<u64>,
}

/// Sampled values of selected signals over a time window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceTable {
    pub signals: Vec<String>,
    pub rows: Vec<EvidenceRow>,
}

impl EvidenceTable {
    pub fn value(&self, signal: &str, time: u64) -> Option<u64> {
        let s = self.signals.iter().position(|n| n == signal)?;
        self.rows.iter().find(|r| r.time == time).map(|r| r.values[s])
    }
}

/// Per-time values of `signals` for `t0..=t1`. An empty signal list gives an
/// empty table.
pub fn extract_window(doc: &VcdDocument, signals: &[&str], t0: u64, t1: u64) -> Result<EvidenceTable, EvidenceError> {
    if t0 > t1 {
        return Err(EvidenceError::EmptyWindow { t0, t1 });
    }
    let idx: Vec<usize> = signals
        .iter()
        .map(|s| doc.index_of(s).ok_or_else(|| EvidenceError::UnknownSignal(s.to_string())))
        .collect::<Result<_, _>>()?;
    if idx.is_empty() {
        return Ok(EvidenceTable { signals: Vec::new(), rows: Vec::new() });
    }
    let all = doc.sampled(t1 + 1);
    let rows =
        (t0..=t1).map(|t| EvidenceRow { time: t, values: idx.iter().map(|&i| all[i][t as usize]).collect() }).collect();
    Ok(EvidenceTable { signals: signals.iter().map(|s| s.to_string()).collect(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_WIRE: &str = "$timescale 1ns $end\n$scope module top $end\n$var wire 1 ! w $end\n\
                            $upscope $end\n$enddefinitions $end\n#0\n0!\n#5\n1!\n";

    #[test]
    fn minimal_document() {
        let d = parse_vcd(ONE_WIRE).unwrap();
        assert_eq!(d.timescale, "1ns");
        assert_eq!(d.signals, [VcdSignal { id: "!".into(), name: "w".into(), width: 1 }]);
        let ch: Vec<(u64, &str, u64)> =
            d.changes.iter().map(|c| (c.time, d.signals[c.signal].name.as_str(), c.value)).collect();
        assert_eq!(ch, [(0, "w", 0), (5, "w", 1)]);
        assert_eq!(d.to_trace().values, [vec![0, 0, 0, 0, 0, 1]]);
    }

    #[test]
    fn header_and_body_errors() {
        let no_end = ONE_WIRE.replace("$enddefinitions $end\n", "");
        assert!(matches!(parse_vcd(&no_end), Err(VcdError::MalformedHeader(_))));
        let unknown = ONE_WIRE.replace("1!", "1?");
        assert!(matches!(parse_vcd(&unknown), Err(VcdError::UnknownIdCode { line: 9, .. })));
        let backwards = ONE_WIRE.replace("#5", "#0");
        assert!(matches!(parse_vcd(&backwards), Err(VcdError::NonMonotonicTime { time: 0, .. })));
        let wide = ONE_WIRE.replace("1!", "b11 !");
        assert!(matches!(parse_vcd(&wide), Err(VcdError::MalformedValue { .. })));
    }

    #[test]
    fn windows_hold_values_between_changes() {
        let d = parse_vcd(ONE_WIRE).unwrap();
        let w = extract_window(&d, &["w"], 3, 6).unwrap();
        assert_eq!(w.rows.iter().map(|r| r.values[0]).collect::<Vec<_>>(), [0, 0, 1, 1]);
        assert_eq!(w.value("w", 4), Some(0));
        assert!(extract_window(&d, &[], 0, 3).unwrap().rows.is_empty());
        assert_eq!(extract_window(&d, &["v"], 0, 1), Err(EvidenceError::UnknownSignal("v".into())));
        assert!(extract_window(&d, &["w"], 2, 1).is_err());
    }
}
