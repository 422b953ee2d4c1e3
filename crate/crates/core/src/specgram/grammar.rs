//! Rulebook specification grammar:
//!
//! ```text
//! Signals: [clk, req, ack, error]
//! Property: [assert, concurrent, positive edge of clk]
//! Condition: [if req is high, then ack must be high within 2 cycles unless error is high]
//! ```

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::DesignModel;
use crate::svapars::{ClockSpec, Edge};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("duplicate section `{0}`")]
    DuplicateSection(&'static str),
    #[error("empty signal list")]
    EmptySignalList,
    #[error("duplicate signal `{0}`")]
    DuplicateSignal(String),
    #[error("bad signal name `{0}`")]
    BadSignalName(String),
    #[error("property keywords need exactly one edge phrase, found {0}")]
    EdgePhrase(usize),
    #[error("empty condition")]
    EmptyCondition,
    #[error("line {line}: unexpected text `{text}`")]
    Malformed { line: usize, text: String },
}

/// Line range the spec was parsed from (1-based, inclusive).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecGrammar {
    pub signals: Vec<String>,
    pub property_kind: Vec<String>,
    pub condition: String,
    pub source_span: SourceSpan,
}

// Equality ignores where the text came from.
impl PartialEq for SpecGrammar {
    fn eq(&self, other: &Self) -> bool {
        self.signals == other.signals && self.property_kind == other.property_kind && self.condition == other.condition
    }
}

impl Eq for SpecGrammar {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecDiagnostic {
    UnknownSignal(String),
}

fn section_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(signals|property|condition)\s*:\s*\[").unwrap())
}

fn edge_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(positive|negative) edge of ([A-Za-z_][A-Za-z0-9_]*)$").unwrap())
}

fn window_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bwithin\s+(\d+)\s+(?:clock\s+)?cycles?\b").unwrap())
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte].matches('\n').count() + 1
}

/// Parse the three bracketed sections. Sections may sit on separate lines or
/// share one line separated by `/`.
pub fn parse_structured_spec(text: &str) -> Result<SpecGrammar, SpecError> {
    let mut signals = None;
    let mut kind = None;
    let mut condition = None;
    let mut cursor = 0;
    let (mut first_line, mut last_line) = (usize::MAX, 0);

    while cursor < text.len() {
        let Some(m) = section_re().captures_at(text, cursor) else {
            break;
        };
        let whole = m.get(0).unwrap();
        let between = &text[cursor..whole.start()];
        if let Some(bad) = between.split(['\n', '/']).map(str::trim).find(|s| !s.is_empty()) {
            return Err(SpecError::Malformed { line: line_of(text, cursor), text: bad.to_string() });
        }
        let body_start = whole.end();
        let close = text[body_start..]
            .rfind_close()
            .map(|i| body_start + i)
            .ok_or(SpecError::Malformed { line: line_of(text, body_start), text: "unterminated `[`".into() })?;
        let body = text[body_start..close].trim().to_string();
        first_line = first_line.min(line_of(text, whole.start()));
        last_line = last_line.max(line_of(text, close));
        let name = m.get(1).unwrap().as_str().to_ascii_lowercase();
        let slot = match name.as_str() {
            "signals" => (&mut signals, "Signals"),
            "property" => (&mut kind, "Property"),
            _ => (&mut condition, "Condition"),
        };
        if slot.0.is_some() {
            return Err(SpecError::DuplicateSection(slot.1));
        }
        *slot.0 = Some(body);
        cursor = close + 1;
    }
    let trailing = text[cursor.min(text.len())..].trim_matches(|c: char| c.is_whitespace() || c == '/');
    if !trailing.is_empty() && (signals.is_some() || kind.is_some() || condition.is_some()) {
        return Err(SpecError::Malformed { line: line_of(text, cursor.min(text.len())), text: trailing.to_string() });
    }

    let signals = signals.ok_or(SpecError::MissingSection("Signals"))?;
    let kind = kind.ok_or(SpecError::MissingSection("Property"))?;
    let condition = condition.ok_or(SpecError::MissingSection("Condition"))?;

    let signals: Vec<String> = signals.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if signals.is_empty() {
        return Err(SpecError::EmptySignalList);
    }
    for (i, s) in signals.iter().enumerate() {
        if !is_ident(s) {
            return Err(SpecError::BadSignalName(s.clone()));
        }
        if signals[..i].contains(s) {
            return Err(SpecError::DuplicateSignal(s.clone()));
        }
    }
    let property_kind: Vec<String> = kind.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    let edges = property_kind.iter().filter(|k| edge_re().is_match(k)).count();
    if edges != 1 {
        return Err(SpecError::EdgePhrase(edges));
    }
    if condition.is_empty() {
        return Err(SpecError::EmptyCondition);
    }
    Ok(SpecGrammar {
        signals,
        property_kind,
        condition,
        source_span: SourceSpan { start_line: first_line, end_line: last_line },
    })
}

trait FindClose {
    fn rfind_close(&self) -> Option<usize>;
}

impl FindClose for str {
    /// Offset of the `]` closing an already-opened bracket.
    fn rfind_close(&self) -> Option<usize> {
        let mut depth = 1usize;
        for (i, c) in self.char_indices() {
            match c {
                '[' => depth += 1,
                ']' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            }
        }
        None
    }
}

impl SpecGrammar {
    /// Clock edge named by the edge phrase.
    pub fn edge(&self) -> ClockSpec {
        let caps = self.property_kind.iter().find_map(|k| edge_re().captures(k)).expect("validated at parse time");
        let edge = if caps[1].eq_ignore_ascii_case("positive") { Edge::Posedge } else { Edge::Negedge };
        ClockSpec { edge, signal: caps[2].to_string() }
    }

    /// `N` when the condition says "within N cycles".
    pub fn window_cycles(&self) -> Option<u32> {
        window_re().captures(&self.condition).and_then(|c| c[1].parse().ok())
    }

    pub fn mentions_next_cycle(&self) -> bool {
        self.condition.to_ascii_lowercase().contains("next cycle")
    }

    /// Spec signals that the condition prose mentions, in signal-list order.
    pub fn condition_signals(&self) -> Vec<String> {
        let words: Vec<&str> = self
            .condition
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .filter(|w| !w.is_empty())
            .collect();
        self.signals.iter().filter(|s| words.contains(&s.as_str())).cloned().collect()
    }

    pub fn render(&self) -> String {
        format!(
            "Signals: [{}]\nProperty: [{}]\nCondition: [{}]\n",
            self.signals.join(", "),
            self.property_kind.join(", "),
            self.condition
        )
    }

    /// Keyword tags used for cache lookups.
    pub fn tags(&self) -> Vec<String> {
        let mut tags = vec!["clock-edge".to_string()];
        if self.window_cycles().is_some() {
            tags.push("delay-window".into());
        }
        tags
    }
}

/// One diagnostic per spec signal the design does not declare.
pub fn validate_against_design(spec: &SpecGrammar, design: &DesignModel) -> Vec<SpecDiagnostic> {
    spec.signals.iter().filter(|s| !design.has_signal(s)).map(|s| SpecDiagnostic::UnknownSignal(s.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::load_design;

    const FIG_CACHE: &str = "Signals: [clk, req, ack, error]\nProperty: [assert, concurrent, positive edge of clk]\nCondition: [if req is high, then ack must be high within 2 cycles unless error is high]\n";

    #[test]
    fn parses_handshake_spec() {
        let g = parse_structured_spec(FIG_CACHE).unwrap();
        assert_eq!(g.signals, ["clk", "req", "ack", "error"]);
        assert_eq!(g.edge(), ClockSpec { edge: Edge::Posedge, signal: "clk".into() });
        assert_eq!(g.window_cycles(), Some(2));
        assert_eq!(g.condition_signals(), ["req", "ack", "error"]);
        assert_eq!((g.source_span.start_line, g.source_span.end_line), (1, 3));
    }

    #[test]
    fn parses_single_line_slash_form() {
        let g = parse_structured_spec(
            "Signals: [clk, i_start, enc_done, o_done] / Property: [assert, concurrent, positive edge of clk] / Condition: [if i_start is high and enc_done is low, o_done must be low in next cycle]",
        )
        .unwrap();
        assert_eq!(g.signals.len(), 4);
        assert!(g.mentions_next_cycle());
        assert_eq!(g.window_cycles(), None);
    }

    #[test]
    fn section_names_are_case_insensitive() {
        let g =
            parse_structured_spec(&FIG_CACHE.to_uppercase().replace("POSITIVE EDGE OF CLK", "positive edge of CLK"))
                .unwrap();
        assert_eq!(g.edge().signal, "CLK");
    }

    #[test]
    fn errors() {
        assert_eq!(parse_structured_spec(""), Err(SpecError::MissingSection("Signals")));
        assert_eq!(
            parse_structured_spec(&format!("{FIG_CACHE}Signals: [a]")),
            Err(SpecError::DuplicateSection("Signals"))
        );
        assert_eq!(
            parse_structured_spec(&FIG_CACHE.replace("[clk, req, ack, error]", "[ ]")),
            Err(SpecError::EmptySignalList)
        );
        assert_eq!(
            parse_structured_spec(&FIG_CACHE.replace("positive edge of clk", "rising")),
            Err(SpecError::EdgePhrase(0))
        );
        assert_eq!(
            parse_structured_spec(&FIG_CACHE.replace("ack, error]", "ack, ack]")),
            Err(SpecError::DuplicateSignal("ack".into()))
        );
    }

    #[test]
    fn validate_against_designs() {
        let d = load_design(include_str!("../../fixtures/handshake.dsn")).unwrap();
        let g = parse_structured_spec(FIG_CACHE).unwrap();
        assert!(validate_against_design(&g, &d).is_empty());
        let bad = parse_structured_spec(&FIG_CACHE.replace("ack,", "ackk,")).unwrap();
        assert_eq!(validate_against_design(&bad, &d), vec![SpecDiagnostic::UnknownSignal("ackk".into())]);
        let empty = load_design("design empty\nports:\n  ck: input\nclock: ck\n").unwrap();
        assert_eq!(validate_against_design(&g, &empty).len(), 4);
    }
}
