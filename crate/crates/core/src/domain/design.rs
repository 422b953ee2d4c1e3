//! Miniature synchronous design format.
//!
//! A design is a handful of ports, a few state registers and one expression
//! per register (next state) and per output port. The grammar lives in
//! `docs/design-format.ebnf`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Total register budget. Keeps exhaustive reachability at desk scale.
pub const MAX_STATE_BITS: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DesignError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("width error at line {line}: {msg}")]
    Width { line: usize, msg: String },
    #[error("unknown name `{name}` at line {line}")]
    UnknownName { line: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub dir: Direction,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVar {
    pub name: String,
    pub width: u32,
    pub reset_value: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActiveLevel {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetKind {
    Sync,
    Async,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetSpec {
    pub port: String,
    pub active: ActiveLevel,
    pub kind: ResetKind,
}

impl ResetSpec {
    /// Port value that asserts reset.
    pub fn asserted_value(&self) -> u64 {
        match self.active {
            ActiveLevel::High => 1,
            ActiveLevel::Low => 0,
        }
    }

    /// Boolean expression text that is true while reset is asserted, e.g. `!rst_n`.
    pub fn active_expr(&self) -> String {
        match self.active {
            ActiveLevel::High => self.port.clone(),
            ActiveLevel::Low => format!("!{}", self.port),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    /// Logical not: 1 iff operand is zero.
    Not,
    /// Bitwise complement.
    BitNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    And,
    Or,
    Xor,
    Eq,
    Ne,
    Add,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Add => "+",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::Xor => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne => 4,
            BinOp::Add => 5,
        }
    }
}

/// Compiled design expression. Signal references are resolved to indices
/// into the design's signal table; every node carries its result width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const { value: u64, width: u32 },
    Sig { index: usize, width: u32 },
    Unary { op: UnOp, arg: Box<Expr>, width: u32 },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, width: u32 },
    Ternary { cond: Box<Expr>, then: Box<Expr>, other: Box<Expr>, width: u32 },
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Expr {
    pub fn width(&self) -> u32 {
        match self {
            Expr::Const { width, .. }
            | Expr::Sig { width, .. }
            | Expr::Unary { width, .. }
            | Expr::Binary { width, .. }
            | Expr::Ternary { width, .. } => *width,
        }
    }

    /// Evaluate against a full signal-value vector (indexed like [`DesignModel::signals`]).
    pub fn eval(&self, env: &[u64]) -> u64 {
        match self {
            Expr::Const { value, .. } => *value,
            Expr::Sig { index, .. } => env[*index],
            Expr::Unary { op, arg, width } => {
                let v = arg.eval(env);
                match op {
                    UnOp::Not => (v == 0) as u64,
                    UnOp::BitNot => !v & mask(*width),
                }
            }
            Expr::Binary { op, lhs, rhs, width } => {
                let (a, b) = (lhs.eval(env), rhs.eval(env));
                let v = match op {
                    BinOp::And => a & b,
                    BinOp::Or => a | b,
                    BinOp::Xor => a ^ b,
                    BinOp::Eq => (a == b) as u64,
                    BinOp::Ne => (a != b) as u64,
                    BinOp::Add => a.wrapping_add(b),
                };
                v & mask(*width)
            }
            Expr::Ternary { cond, then, other, .. } => {
                if cond.eval(env) != 0 {
                    then.eval(env)
                } else {
                    other.eval(env)
                }
            }
        }
    }

    /// Indices of every signal this expression reads.
    pub fn support(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const { .. } => {}
            Expr::Sig { index, .. } => {
                if !out.contains(index) {
                    out.push(*index)
                }
            }
            Expr::Unary { arg, .. } => arg.support(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.support(out);
                rhs.support(out);
            }
            Expr::Ternary { cond, then, other, .. } => {
                cond.support(out);
                then.support(out);
                other.support(out);
            }
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.render_into(names, 0, &mut s);
        s
    }

    fn render_into(&self, names: &[String], parent_prec: u8, out: &mut String) {
        match self {
            Expr::Const { value, .. } => out.push_str(&value.to_string()),
            Expr::Sig { index, .. } => out.push_str(&names[*index]),
            Expr::Unary { op, arg, .. } => {
                out.push(if *op == UnOp::Not { '!' } else { '~' });
                arg.render_into(names, 9, out);
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let prec = op.precedence();
                let paren = prec < parent_prec;
                if paren {
                    out.push('(');
                }
                lhs.render_into(names, prec, out);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                rhs.render_into(names, prec + 1, out);
                if paren {
                    out.push(')');
                }
            }
            Expr::Ternary { cond, then, other, .. } => {
                let paren = parent_prec > 0;
                if paren {
                    out.push('(');
                }
                cond.render_into(names, 1, out);
                out.push_str(" ? ");
                then.render_into(names, 1, out);
                out.push_str(" : ");
                other.render_into(names, 0, out);
                if paren {
                    out.push(')');
                }
            }
        }
    }
}

/// One `name = expr` line from the `next:` or `out:` section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub target: usize,
    pub expr: Expr,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Input,
    Output,
    State,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalInfo {
    pub name: String,
    pub width: u32,
    pub kind: SignalKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignModel {
    pub name: String,
    pub ports: Vec<Port>,
    pub state_vars: Vec<StateVar>,
    pub clock: String,
    pub reset: Option<ResetSpec>,
    /// One entry per state var, in state declaration order.
    pub next_state: Vec<Assignment>,
    /// One entry per output port, in port declaration order.
    pub outputs: Vec<Assignment>,
    signals: Vec<SignalInfo>,
    index: HashMap<String, usize>,
    source: String,
}

impl DesignModel {
    /// Signal table: ports in declaration order followed by state vars.
    pub fn signals(&self) -> &[SignalInfo] {
        &self.signals
    }

    pub fn signal_names(&self) -> Vec<String> {
        self.signals.iter().map(|s| s.name.clone()).collect()
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn has_signal(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn width_of(&self, name: &str) -> Option<u32> {
        self.signal_index(name).map(|i| self.signals[i].width)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn state_bits(&self) -> u32 {
        self.state_vars.iter().map(|s| s.width).sum()
    }

    /// Input ports the environment drives freely (everything but clock and reset).
    pub fn free_inputs(&self) -> Vec<usize> {
        self.ports
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                p.dir == Direction::Input
                    && p.name != self.clock
                    && self.reset.as_ref().is_none_or(|r| r.port != p.name)
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn reset_index(&self) -> Option<usize> {
        self.reset.as_ref().and_then(|r| self.signal_index(&r.port))
    }

    pub fn clock_index(&self) -> usize {
        self.index[&self.clock]
    }

    fn state_offset(&self) -> usize {
        self.ports.len()
    }

    pub fn reset_state(&self) -> Vec<u64> {
        self.state_vars.iter().map(|s| s.reset_value).collect()
    }

    /// Build the full signal vector for one cycle: inputs given by `free`
    /// (ordered like [`free_inputs`](Self::free_inputs)), reset per `reset_active`,
    /// clock sampled high, then state and combinational outputs.
    pub fn sample(&self, state: &[u64], free: &[u64], reset_active: bool) -> Vec<u64> {
        let mut env = vec![0u64; self.signals.len()];
        for (slot, &idx) in self.free_inputs().iter().enumerate() {
            env[idx] = free.get(slot).copied().unwrap_or(0) & mask(self.signals[idx].width);
        }
        env[self.clock_index()] = 1;
        if let (Some(r), Some(ri)) = (&self.reset, self.reset_index()) {
            env[ri] = if reset_active { r.asserted_value() } else { 1 - r.asserted_value() };
        }
        let off = self.state_offset();
        let forced_reset = reset_active && self.reset.as_ref().is_some_and(|r| r.kind == ResetKind::Async);
        for (i, s) in self.state_vars.iter().enumerate() {
            env[off + i] = if forced_reset { s.reset_value } else { state[i] };
        }
        for a in &self.outputs {
            env[a.target] = a.expr.eval(&env) & mask(self.signals[a.target].width);
        }
        env
    }

    /// Next register values from a sampled cycle.
    pub fn step(&self, env: &[u64], reset_active: bool) -> Vec<u64> {
        if reset_active && self.reset.as_ref().is_some_and(|r| r.kind == ResetKind::Sync) {
            return self.reset_state();
        }
        self.next_state.iter().map(|a| a.expr.eval(env) & mask(self.signals[a.target].width)).collect()
    }

    /// Simulate from reset. `inputs[t]` holds the free-input values of cycle `t`,
    /// `reset[t]` whether reset is asserted at cycle `t` (missing entries mean deasserted).
    pub fn simulate(&self, inputs: &[Vec<u64>], reset: &[bool]) -> super::Trace {
        let mut state = self.reset_state();
        let mut rows = Vec::with_capacity(inputs.len());
        for (t, free) in inputs.iter().enumerate() {
            let r = reset.get(t).copied().unwrap_or(false);
            let env = self.sample(&state, free, r);
            state = self.step(&env, r);
            rows.push(env);
        }
        super::Trace::from_rows(self, rows)
    }

    /// Design assignment lines (`next x = ...` / `out y = ...`) for reports.
    pub fn describe_assignment(&self, a: &Assignment) -> String {
        let names = self.signal_names();
        let section = if self.signals[a.target].kind == SignalKind::State { "next" } else { "out" };
        format!("{section} {} = {}", names[a.target], a.expr.render(&names))
    }

    /// The assignment driving a signal, if any (inputs have none).
    pub fn driver_of(&self, index: usize) -> Option<&Assignment> {
        self.next_state.iter().chain(self.outputs.iter()).find(|a| a.target == index)
    }

    /// Assignments reading a signal.
    pub fn readers_of(&self, index: usize) -> Vec<&Assignment> {
        self.next_state
            .iter()
            .chain(self.outputs.iter())
            .filter(|a| {
                let mut s = Vec::new();
                a.expr.support(&mut s);
                s.contains(&index)
            })
            .collect()
    }
}

impl fmt::Display for DesignModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(u64),
    Op(&'static str),
}

fn lex_expr(text: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, DesignError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = col0 + i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), col));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let lit = text[start..i].replace('_', "");
            let parsed = if let Some(h) = lit.strip_prefix("0x") {
                u64::from_str_radix(h, 16)
            } else if let Some(b) = lit.strip_prefix("0b") {
                u64::from_str_radix(b, 2)
            } else {
                lit.parse()
            };
            let v = parsed.map_err(|_| DesignError::Parse { line, col, msg: format!("bad literal `{lit}`") })?;
            out.push((Tok::Num(v), col));
            continue;
        }
        let two = text.get(i..i + 2).unwrap_or("");
        let op: &'static str = match two {
            "==" => "==",
            "!=" => "!=",
            _ => match c {
                '&' => "&",
                '|' => "|",
                '^' => "^",
                '!' => "!",
                '~' => "~",
                '+' => "+",
                '?' => "?",
                ':' => ":",
                '(' => "(",
                ')' => ")",
                _ => return Err(DesignError::Parse { line, col, msg: format!("unexpected character `{c}`") }),
            },
        };
        i += op.len();
        out.push((Tok::Op(op), col));
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
    index: &'a HashMap<String, usize>,
    widths: &'a [u32],
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn err(&self, msg: impl Into<String>) -> DesignError {
        DesignError::Parse { line: self.line, col: self.col(), msg: msg.into() }
    }

    fn eat(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Op(o)) if *o == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ternary(&mut self) -> Result<Expr, DesignError> {
        let cond = self.binary(1)?;
        if self.eat("?") {
            let then = self.ternary()?;
            if !self.eat(":") {
                return Err(self.err("expected `:` in ternary"));
            }
            let other = self.ternary()?;
            let width = then.width().max(other.width());
            return Ok(Expr::Ternary { cond: Box::new(cond), then: Box::new(then), other: Box::new(other), width });
        }
        Ok(cond)
    }

    fn binop_at(&self) -> Option<BinOp> {
        match self.peek() {
            Some(Tok::Op("&")) => Some(BinOp::And),
            Some(Tok::Op("|")) => Some(BinOp::Or),
            Some(Tok::Op("^")) => Some(BinOp::Xor),
            Some(Tok::Op("==")) => Some(BinOp::Eq),
            Some(Tok::Op("!=")) => Some(BinOp::Ne),
            Some(Tok::Op("+")) => Some(BinOp::Add),
            _ => None,
        }
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, DesignError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop_at() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            let width = match op {
                BinOp::Eq | BinOp::Ne => 1,
                _ => lhs.width().max(rhs.width()),
            };
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), width };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, DesignError> {
        match self.peek().cloned() {
            Some(Tok::Op("!")) => {
                self.pos += 1;
                let arg = self.unary()?;
                Ok(Expr::Unary { op: UnOp::Not, arg: Box::new(arg), width: 1 })
            }
            Some(Tok::Op("~")) => {
                self.pos += 1;
                let arg = self.unary()?;
                let width = arg.width();
                Ok(Expr::Unary { op: UnOp::BitNot, arg: Box::new(arg), width })
            }
            Some(Tok::Op("(")) => {
                self.pos += 1;
                let e = self.ternary()?;
                if !self.eat(")") {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const { value: v, width: (64 - v.leading_zeros()).max(1) })
            }
            Some(Tok::Ident(name)) => {
                let idx =
                    *self.index.get(&name).ok_or(DesignError::UnknownName { line: self.line, name: name.clone() })?;
                self.pos += 1;
                Ok(Expr::Sig { index: idx, width: self.widths[idx] })
            }
            Some(t) => Err(self.err(format!("unexpected token {t:?}"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    None,
    Ports,
    State,
    Next,
    Out,
}

/// Parse the line-oriented design format.
pub fn load_design(text: &str) -> Result<DesignModel, DesignError> {
    let mut name: Option<String> = None;
    let mut ports: Vec<(Port, usize)> = Vec::new();
    let mut states: Vec<(StateVar, usize)> = Vec::new();
    let mut clock: Option<(String, usize)> = None;
    let mut reset: Option<(ResetSpec, usize)> = None;
    let mut next_lines: Vec<(String, String, usize, usize)> = Vec::new();
    let mut out_lines: Vec<(String, String, usize, usize)> = Vec::new();
    let mut section = Section::None;
    let mut seen_sections: Vec<&str> = Vec::new();

    for (ln0, raw) in text.lines().enumerate() {
        let line = ln0 + 1;
        let content = raw.split('#').next().unwrap_or("");
        let content = content.split("//").next().unwrap_or("");
        let indent = content.len() - content.trim_start().len();
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let perr = |col: usize, msg: String| DesignError::Parse { line, col: col + 1, msg };

        if let Some(rest) = content.strip_prefix("design ") {
            if name.is_some() {
                return Err(perr(indent, "duplicate design header".into()));
            }
            let n = rest.trim();
            if !is_ident(n) {
                return Err(perr(indent + 7, format!("bad design name `{n}`")));
            }
            name = Some(n.to_string());
            continue;
        }

        // section headers (possibly with inline value)
        if let Some((head, value)) = content.split_once(':') {
            let head_t = head.trim();
            let key = match head_t {
                "ports" | "state" | "clock" | "reset" | "next" | "out" => Some(head_t),
                _ => None,
            };
            if let Some(key) = key {
                let value = value.trim();
                if seen_sections.contains(&key) {
                    return Err(perr(indent, format!("duplicate `{key}:` declaration")));
                }
                seen_sections.push(key);
                match key {
                    "clock" => {
                        if !is_ident(value) {
                            return Err(perr(indent, "clock needs a port name".into()));
                        }
                        clock = Some((value.to_string(), line));
                        section = Section::None;
                    }
                    "reset" => {
                        let parts: Vec<&str> = value.split_whitespace().collect();
                        if parts.len() != 3 || !is_ident(parts[0]) {
                            return Err(perr(
                                indent,
                                "reset expects `<port> active_high|active_low sync|async`".into(),
                            ));
                        }
                        let active = match parts[1] {
                            "active_high" | "high" => ActiveLevel::High,
                            "active_low" | "low" => ActiveLevel::Low,
                            other => return Err(perr(indent, format!("bad reset level `{other}`"))),
                        };
                        let kind = match parts[2] {
                            "sync" => ResetKind::Sync,
                            "async" => ResetKind::Async,
                            other => return Err(perr(indent, format!("bad reset kind `{other}`"))),
                        };
                        reset = Some((ResetSpec { port: parts[0].to_string(), active, kind }, line));
                        section = Section::None;
                    }
                    _ => {
                        if !value.is_empty() {
                            return Err(perr(indent, format!("`{key}:` takes an indented block")));
                        }
                        section = match key {
                            "ports" => Section::Ports,
                            "state" => Section::State,
                            "next" => Section::Next,
                            _ => Section::Out,
                        };
                    }
                }
                continue;
            }
        }

        match section {
            Section::Ports => {
                let (n, rest) = content
                    .split_once(':')
                    .ok_or_else(|| perr(indent, "expected `name: input|output <width>`".into()))?;
                let n = n.trim();
                if !is_ident(n) {
                    return Err(perr(indent, format!("bad port name `{n}`")));
                }
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.is_empty() || parts.len() > 2 {
                    return Err(perr(indent, "expected `input|output [width]`".into()));
                }
                let dir = match parts[0] {
                    "input" | "in" => Direction::Input,
                    "output" | "out" => Direction::Output,
                    d => return Err(perr(indent, format!("bad direction `{d}`"))),
                };
                let width = match parts.get(1) {
                    Some(w) => w.parse::<u32>().map_err(|_| perr(indent, format!("bad width `{w}`")))?,
                    None => 1,
                };
                ports.push((Port { name: n.to_string(), dir, width }, line));
            }
            Section::State => {
                let (n, rest) =
                    content.split_once(':').ok_or_else(|| perr(indent, "expected `name: <width> [= reset]`".into()))?;
                let n = n.trim();
                if !is_ident(n) {
                    return Err(perr(indent, format!("bad state name `{n}`")));
                }
                let (w, rv) = match rest.split_once('=') {
                    Some((w, rv)) => (w.trim(), Some(rv.trim())),
                    None => (rest.trim(), None),
                };
                let width = w.parse::<u32>().map_err(|_| perr(indent, format!("bad width `{w}`")))?;
                let reset_value = match rv {
                    Some(v) => parse_literal(v).ok_or_else(|| perr(indent, format!("bad reset value `{v}`")))?,
                    None => 0,
                };
                states.push((StateVar { name: n.to_string(), width, reset_value }, line));
            }
            Section::Next | Section::Out => {
                let (lhs, rhs) = content
                    .split_once('=')
                    .filter(|(_, r)| !r.starts_with('='))
                    .ok_or_else(|| perr(indent, "expected `name = expr`".into()))?;
                let lhs = lhs.trim();
                if !is_ident(lhs) {
                    return Err(perr(indent, format!("bad assignment target `{lhs}`")));
                }
                let col = indent + content.find('=').unwrap() + 1;
                let entry = (lhs.to_string(), rhs.to_string(), line, col);
                if section == Section::Next {
                    next_lines.push(entry);
                } else {
                    out_lines.push(entry);
                }
            }
            Section::None => return Err(perr(indent, format!("unexpected line `{content}`"))),
        }
    }

    let name = name.ok_or(DesignError::Parse { line: 1, col: 1, msg: "missing `design <name>` header".into() })?;
    let (clock, clock_line) = clock.ok_or(DesignError::Parse { line: 1, col: 1, msg: "missing `clock:`".into() })?;

    // widths and budget
    for (p, line) in &ports {
        if p.width == 0 || p.width > 64 {
            return Err(DesignError::Width {
                line: *line,
                msg: format!("port `{}` width {} out of range 1..=64", p.name, p.width),
            });
        }
    }
    for (s, line) in &states {
        if s.width == 0 || s.width > 64 {
            return Err(DesignError::Width {
                line: *line,
                msg: format!("state `{}` width {} out of range 1..=64", s.name, s.width),
            });
        }
        if s.reset_value & !mask(s.width) != 0 {
            return Err(DesignError::Width {
                line: *line,
                msg: format!("reset value of `{}` exceeds {} bits", s.name, s.width),
            });
        }
    }
    let total: u32 = states.iter().map(|(s, _)| s.width).sum();
    if total > MAX_STATE_BITS {
        let line = states.last().map_or(1, |(_, l)| *l);
        return Err(DesignError::Width { line, msg: "state budget exceeded".into() });
    }

    let mut signals = Vec::new();
    let mut index = HashMap::new();
    for (p, line) in &ports {
        let kind = if p.dir == Direction::Input { SignalKind::Input } else { SignalKind::Output };
        if index.insert(p.name.clone(), signals.len()).is_some() {
            return Err(DesignError::Parse { line: *line, col: 1, msg: format!("duplicate signal `{}`", p.name) });
        }
        signals.push(SignalInfo { name: p.name.clone(), width: p.width, kind });
    }
    for (s, line) in &states {
        if index.insert(s.name.clone(), signals.len()).is_some() {
            return Err(DesignError::Parse { line: *line, col: 1, msg: format!("duplicate signal `{}`", s.name) });
        }
        signals.push(SignalInfo { name: s.name.clone(), width: s.width, kind: SignalKind::State });
    }

    match index.get(&clock).map(|&i| &signals[i]) {
        Some(s) if s.kind == SignalKind::Input && s.width == 1 => {}
        Some(_) => {
            return Err(DesignError::Width { line: clock_line, msg: format!("clock `{clock}` must be a 1-bit input") })
        }
        None => return Err(DesignError::UnknownName { line: clock_line, name: clock }),
    }
    if let Some((r, line)) = &reset {
        if r.port == clock {
            return Err(DesignError::Parse { line: *line, col: 1, msg: "reset port must differ from clock".into() });
        }
        match index.get(&r.port).map(|&i| &signals[i]) {
            Some(s) if s.kind == SignalKind::Input && s.width == 1 => {}
            Some(_) => {
                return Err(DesignError::Width {
                    line: *line,
                    msg: format!("reset `{}` must be a 1-bit input", r.port),
                })
            }
            None => return Err(DesignError::UnknownName { line: *line, name: r.port.clone() }),
        }
    }

    let widths: Vec<u32> = signals.iter().map(|s| s.width).collect();
    let compile = |rhs: &str, line: usize, col: usize| -> Result<Expr, DesignError> {
        let toks = lex_expr(rhs, line, col)?;
        let mut p = ExprParser { toks, pos: 0, line, end_col: col + rhs.len(), index: &index, widths: &widths };
        let e = p.ternary()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing tokens in expression"));
        }
        Ok(e)
    };

    let mut next_map: BTreeMap<usize, Assignment> = BTreeMap::new();
    for (lhs, rhs, line, col) in &next_lines {
        let target = *index.get(lhs).ok_or(DesignError::UnknownName { line: *line, name: lhs.clone() })?;
        if signals[target].kind != SignalKind::State {
            return Err(DesignError::Parse { line: *line, col: 1, msg: format!("`{lhs}` is not a state var") });
        }
        let expr = compile(rhs, *line, *col)?;
        if next_map.insert(target, Assignment { target, expr, line: *line }).is_some() {
            return Err(DesignError::Parse { line: *line, col: 1, msg: format!("`{lhs}` assigned twice") });
        }
    }
    let mut out_map: BTreeMap<usize, Assignment> = BTreeMap::new();
    for (lhs, rhs, line, col) in &out_lines {
        let target = *index.get(lhs).ok_or(DesignError::UnknownName { line: *line, name: lhs.clone() })?;
        if signals[target].kind != SignalKind::Output {
            return Err(DesignError::Parse { line: *line, col: 1, msg: format!("`{lhs}` is not an output port") });
        }
        let expr = compile(rhs, *line, *col)?;
        let mut support = Vec::new();
        expr.support(&mut support);
        if let Some(&bad) = support.iter().find(|&&i| signals[i].kind == SignalKind::Output) {
            return Err(DesignError::Parse {
                line: *line,
                col: 1,
                msg: format!(
                    "output `{lhs}` reads output `{}`; outputs depend on inputs and state only",
                    signals[bad].name
                ),
            });
        }
        if out_map.insert(target, Assignment { target, expr, line: *line }).is_some() {
            return Err(DesignError::Parse { line: *line, col: 1, msg: format!("`{lhs}` assigned twice") });
        }
    }

    let state_off = ports.len();
    for (i, (s, line)) in states.iter().enumerate() {
        if !next_map.contains_key(&(state_off + i)) {
            return Err(DesignError::Parse {
                line: *line,
                col: 1,
                msg: format!("state `{}` has no next-state assignment", s.name),
            });
        }
    }
    for (i, (p, line)) in ports.iter().enumerate() {
        if p.dir == Direction::Output && !out_map.contains_key(&i) {
            return Err(DesignError::Parse {
                line: *line,
                col: 1,
                msg: format!("output `{}` has no `out:` assignment", p.name),
            });
        }
    }

    Ok(DesignModel {
        name,
        ports: ports.into_iter().map(|(p, _)| p).collect(),
        state_vars: states.into_iter().map(|(s, _)| s).collect(),
        clock,
        reset: reset.map(|(r, _)| r),
        next_state: next_map.into_values().collect(),
        outputs: out_map.into_values().collect(),
        signals,
        index,
        source: text.to_string(),
    })
}

fn parse_literal(v: &str) -> Option<u64> {
    let v = v.replace('_', "");
    if let Some(h) = v.strip_prefix("0x") {
        u64::from_str_radix(h, 16).ok()
    } else if let Some(b) = v.strip_prefix("0b") {
        u64::from_str_radix(b, 2).ok()
    } else {
        v.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HANDSHAKE: &str = include_str!("../../fixtures/handshake.dsn");

    #[test]
    fn loads_handshake_fixture() {
        let d = load_design(HANDSHAKE).unwrap();
        let ports: Vec<&str> = d.ports.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(ports, ["clk", "rst_n", "req", "error", "ack"]);
        assert_eq!(d.state_bits(), 2);
        let r = d.reset.as_ref().unwrap();
        assert_eq!((r.active, r.kind), (ActiveLevel::Low, ResetKind::Async));
        assert_eq!(d.free_inputs().len(), 2);
    }

    #[test]
    fn state_budget_is_enforced() {
        let mut text = String::from("design big\nports:\n  clk: input 1\nstate:\n");
        for i in 0..21 {
            text.push_str(&format!("  s{i}: 1\n"));
        }
        text.push_str("clock: clk\nnext:\n");
        for i in 0..21 {
            text.push_str(&format!("  s{i} = s{i}\n"));
        }
        match load_design(&text) {
            Err(DesignError::Width { msg, .. }) => assert_eq!(msg, "state budget exceeded"),
            other => panic!("expected WidthError, got {other:?}"),
        }
        // 20 bits is fine
        let ok = text.replace("  s20: 1\n", "").replace("  s20 = s20\n", "");
        assert_eq!(load_design(&ok).unwrap().state_bits(), 20);
    }

    #[test]
    fn two_clocks_is_a_parse_error() {
        let text = HANDSHAKE.replace("clock: clk", "clock: clk\nclock: clk");
        assert!(matches!(load_design(&text), Err(DesignError::Parse { .. })));
    }

    #[test]
    fn unknown_names_are_reported() {
        let text = HANDSHAKE.replace("req & !error", "req & !erorr");
        assert!(matches!(
            load_design(&text),
            Err(DesignError::UnknownName { name, .. }) if name == "erorr"
        ));
    }

    #[test]
    fn reset_must_not_be_clock() {
        let text = HANDSHAKE.replace("reset: rst_n active_low async", "reset: clk active_low async");
        assert!(load_design(&text).is_err());
    }

    #[test]
    fn expression_precedence_and_widths() {
        let text = "design e\nports:\n  clk: input\n  a: input 4\n  b: input 4\n  y: output 4\n  z: output 1\nclock: clk\nout:\n  y = a + b & 0x7\n  z = a == b ? 1 : 0\n";
        let d = load_design(text).unwrap();
        let mut env = vec![0u64; d.signals().len()];
        env[1] = 9;
        env[2] = 9;
        // + binds tighter than &: (9 + 9) & 7 = 18 & 7 = 2
        assert_eq!(d.outputs[0].expr.eval(&env), 2);
        assert_eq!(d.outputs[1].expr.eval(&env), 1);
        assert_eq!(d.describe_assignment(&d.outputs[0]), "out y = a + b & 7");
    }

    #[test]
    fn async_reset_holds_state_during_reset_cycles() {
        let d = load_design(HANDSHAKE).unwrap();
        let t = d.simulate(&[vec![1, 0], vec![1, 0], vec![1, 0]], &[false, true, false]);
        // cycle 1 is in reset: ack forced to the reset value
        assert_eq!(t.value("ack", 1), Some(0));
        assert_eq!(t.value("ack", 2), Some(1));
    }
}
