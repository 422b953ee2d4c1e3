use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Posedge,
    Negedge,
}

impl Edge {
    pub fn as_str(self) -> &'static str {
        match self {
            Edge::Posedge => "posedge",
            Edge::Negedge => "negedge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClockSpec {
    pub edge: Edge,
    pub signal: String,
}

impl fmt::Display for ClockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.edge.as_str(), self.signal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Implication {
    /// `|->`
    Overlapped,
    /// `|=>`
    NonOverlapped,
}

impl Implication {
    pub fn symbol(self) -> &'static str {
        match self {
            Implication::Overlapped => "|->",
            Implication::NonOverlapped => "|=>",
        }
    }

    /// Cycles between antecedent end and consequent start.
    pub fn shift(self) -> usize {
        match self {
            Implication::Overlapped => 0,
            Implication::NonOverlapped => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolExpr {
    Sig(String),
    Const(u64),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Eq(Box<BoolExpr>, Box<BoolExpr>),
    Ne(Box<BoolExpr>, Box<BoolExpr>),
    /// `$past(x, n)`
    Past(Box<BoolExpr>, u32),
    Rose(Box<BoolExpr>),
    Fell(Box<BoolExpr>),
    Stable(Box<BoolExpr>),
}

impl BoolExpr {
    pub fn sig(name: &str) -> Self {
        BoolExpr::Sig(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    pub fn and(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::Or(Box::new(a), Box::new(b))
    }

    fn precedence(&self) -> u8 {
        match self {
            BoolExpr::Or(..) => 1,
            BoolExpr::And(..) => 2,
            BoolExpr::Eq(..) | BoolExpr::Ne(..) => 3,
            BoolExpr::Not(..) => 4,
            _ => 5,
        }
    }

    pub fn is_compound(&self) -> bool {
        self.precedence() < 4
    }

    /// How many cycles back this expression looks (`$past(x, 2)` -> 2, `$rose` -> 1).
    pub fn lookback(&self) -> usize {
        match self {
            BoolExpr::Sig(_) | BoolExpr::Const(_) => 0,
            BoolExpr::Not(a) => a.lookback(),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Eq(a, b) | BoolExpr::Ne(a, b) => {
                a.lookback().max(b.lookback())
            }
            BoolExpr::Past(a, n) => a.lookback() + *n as usize,
            BoolExpr::Rose(a) | BoolExpr::Fell(a) | BoolExpr::Stable(a) => a.lookback() + 1,
        }
    }

    pub fn signals(&self, out: &mut Vec<String>) {
        match self {
            BoolExpr::Sig(s) => {
                if !out.contains(s) {
                    out.push(s.clone())
                }
            }
            BoolExpr::Const(_) => {}
            BoolExpr::Not(a) | BoolExpr::Past(a, _) | BoolExpr::Rose(a) | BoolExpr::Fell(a) | BoolExpr::Stable(a) => {
                a.signals(out)
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Eq(a, b) | BoolExpr::Ne(a, b) => {
                a.signals(out);
                b.signals(out);
            }
        }
    }

    pub fn rename(&mut self, from: &str, to: &str) {
        match self {
            BoolExpr::Sig(s) => {
                if s == from {
                    *s = to.to_string()
                }
            }
            BoolExpr::Const(_) => {}
            BoolExpr::Not(a) | BoolExpr::Past(a, _) | BoolExpr::Rose(a) | BoolExpr::Fell(a) | BoolExpr::Stable(a) => {
                a.rename(from, to)
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Eq(a, b) | BoolExpr::Ne(a, b) => {
                a.rename(from, to);
                b.rename(from, to);
            }
        }
    }

    fn render_into(&self, parent: u8, out: &mut String) {
        let prec = self.precedence();
        let paren = prec < parent;
        if paren {
            out.push('(');
        }
        match self {
            BoolExpr::Sig(s) => out.push_str(s),
            BoolExpr::Const(v) => out.push_str(&v.to_string()),
            BoolExpr::Not(a) => {
                out.push('!');
                a.render_into(4, out);
            }
            BoolExpr::And(a, b) => bin(a, "&&", b, prec, out),
            BoolExpr::Or(a, b) => bin(a, "||", b, prec, out),
            BoolExpr::Eq(a, b) => bin(a, "==", b, prec, out),
            BoolExpr::Ne(a, b) => bin(a, "!=", b, prec, out),
            BoolExpr::Past(a, n) => {
                out.push_str("$past(");
                a.render_into(0, out);
                if *n != 1 {
                    out.push_str(&format!(", {n}"));
                }
                out.push(')');
            }
            BoolExpr::Rose(a) => call("$rose", a, out),
            BoolExpr::Fell(a) => call("$fell", a, out),
            BoolExpr::Stable(a) => call("$stable", a, out),
        }
        if paren {
            out.push(')');
        }
    }
}

fn bin(a: &BoolExpr, op: &str, b: &BoolExpr, prec: u8, out: &mut String) {
    a.render_into(prec, out);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    b.render_into(prec + 1, out);
}

fn call(name: &str, a: &BoolExpr, out: &mut String) {
    out.push_str(name);
    out.push('(');
    a.render_into(0, out);
    out.push(')');
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render_into(0, &mut s);
        f.write_str(&s)
    }
}

/// Sequence expression of the supported subset. Every sequence has a bounded
/// length: there are no repetitions or unbounded ranges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeqExpr {
    Bool(BoolExpr),
    /// `head ##[lo:hi] tail`, or a leading `##[lo:hi] tail` when `head` is `None`.
    Concat {
        head: Option<Box<SeqExpr>>,
        lo: u32,
        hi: u32,
        tail: Box<SeqExpr>,
    },
    Or(Box<SeqExpr>, Box<SeqExpr>),
}

impl SeqExpr {
    pub fn delay(head: Option<SeqExpr>, lo: u32, hi: u32, tail: SeqExpr) -> Self {
        SeqExpr::Concat { head: head.map(Box::new), lo, hi, tail: Box::new(tail) }
    }

    pub fn is_compound(&self) -> bool {
        match self {
            SeqExpr::Bool(b) => b.is_compound(),
            _ => true,
        }
    }

    /// Latest cycle offset (relative to start) at which a match can end.
    pub fn max_end(&self) -> usize {
        match self {
            SeqExpr::Bool(_) => 0,
            SeqExpr::Concat { head, hi, tail, .. } => {
                head.as_ref().map_or(0, |h| h.max_end()) + *hi as usize + tail.max_end()
            }
            SeqExpr::Or(a, b) => a.max_end().max(b.max_end()),
        }
    }

    pub fn lookback(&self) -> usize {
        match self {
            SeqExpr::Bool(b) => b.lookback(),
            SeqExpr::Concat { head, tail, .. } => head.as_ref().map_or(0, |h| h.lookback()).max(tail.lookback()),
            SeqExpr::Or(a, b) => a.lookback().max(b.lookback()),
        }
    }

    pub fn signals(&self, out: &mut Vec<String>) {
        match self {
            SeqExpr::Bool(b) => b.signals(out),
            SeqExpr::Concat { head, tail, .. } => {
                if let Some(h) = head {
                    h.signals(out);
                }
                tail.signals(out);
            }
            SeqExpr::Or(a, b) => {
                a.signals(out);
                b.signals(out);
            }
        }
    }

    pub fn rename(&mut self, from: &str, to: &str) {
        match self {
            SeqExpr::Bool(b) => b.rename(from, to),
            SeqExpr::Concat { head, tail, .. } => {
                if let Some(h) = head {
                    h.rename(from, to);
                }
                tail.rename(from, to);
            }
            SeqExpr::Or(a, b) => {
                a.rename(from, to);
                b.rename(from, to);
            }
        }
    }

    /// Every `(lo, hi)` delay range, outermost first.
    pub fn delays(&self, out: &mut Vec<(u32, u32)>) {
        match self {
            SeqExpr::Bool(_) => {}
            SeqExpr::Concat { head, lo, hi, tail } => {
                out.push((*lo, *hi));
                if let Some(h) = head {
                    h.delays(out);
                }
                tail.delays(out);
            }
            SeqExpr::Or(a, b) => {
                a.delays(out);
                b.delays(out);
            }
        }
    }

    /// Apply `f` to every delay range.
    pub fn map_delays(&mut self, f: &mut impl FnMut(u32, u32) -> (u32, u32)) {
        match self {
            SeqExpr::Bool(_) => {}
            SeqExpr::Concat { head, lo, hi, tail } => {
                (*lo, *hi) = f(*lo, *hi);
                if let Some(h) = head {
                    h.map_delays(f);
                }
                tail.map_delays(f);
            }
            SeqExpr::Or(a, b) => {
                a.map_delays(f);
                b.map_delays(f);
            }
        }
    }

    // precedence: or = 1, concat = 2, bool = 3
    fn level(&self) -> u8 {
        match self {
            SeqExpr::Or(..) => 1,
            SeqExpr::Concat { .. } => 2,
            SeqExpr::Bool(_) => 3,
        }
    }

    fn render_into(&self, parent: u8, out: &mut String) {
        let paren = self.level() < parent;
        if paren {
            out.push('(');
        }
        match self {
            SeqExpr::Bool(b) => b.render_into(0, out),
            SeqExpr::Concat { head, lo, hi, tail } => {
                if let Some(h) = head {
                    h.render_into(2, out);
                    out.push(' ');
                }
                if lo == hi {
                    out.push_str(&format!("##{lo} "));
                } else {
                    out.push_str(&format!("##[{lo}:{hi}] "));
                }
                tail.render_into(3, out);
            }
            SeqExpr::Or(a, b) => {
                a.render_into(1, out);
                out.push_str(" or ");
                b.render_into(2, out);
            }
        }
        if paren {
            out.push(')');
        }
    }

    /// Render as an implication operand: `or` sequences and compound
    /// booleans are parenthesized, plain concatenations are not.
    pub fn render_operand(&self) -> String {
        let mut s = String::new();
        self.render_into(0, &mut s);
        let paren = match self {
            SeqExpr::Concat { .. } => false,
            other => other.is_compound(),
        };
        if paren {
            format!("({s})")
        } else {
            s
        }
    }
}

impl fmt::Display for SeqExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render_into(0, &mut s);
        f.write_str(&s)
    }
}

/// One concurrent property: `@(edge clk) [disable iff (e)] ante |->/|=> cons`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PropertyAst {
    pub name: String,
    pub clock: ClockSpec,
    pub disable: Option<BoolExpr>,
    pub antecedent: SeqExpr,
    pub implication: Implication,
    pub consequent: SeqExpr,
    /// Marked `(* post_reset *)`: intentionally checks state right after reset,
    /// so the reset-disable rule does not apply.
    #[serde(default)]
    pub post_reset: bool,
}

impl PropertyAst {
    /// Body line, e.g. `@(posedge clk) disable iff (!rst_n) req |-> ##1 ack`.
    pub fn render_body(&self) -> String {
        let mut s = format!("@({})", self.clock);
        if let Some(d) = &self.disable {
            s.push_str(&format!(" disable iff ({d})"));
        }
        s.push(' ');
        s.push_str(&self.antecedent.render_operand());
        s.push(' ');
        s.push_str(self.implication.symbol());
        s.push(' ');
        s.push_str(&self.consequent.render_operand());
        s
    }

    /// Canonical property block followed by its assert statement.
    pub fn render(&self) -> String {
        let mut s = String::new();
        if self.post_reset {
            s.push_str("(* post_reset *)\n");
        }
        s.push_str(&format!("property {};\n", self.name));
        s.push_str(&self.render_body());
        s.push_str(";\nendproperty\n");
        s.push_str(&format!("assert property ({});\n", self.name));
        s
    }

    /// Every signal name referenced, clock first, in order of appearance.
    pub fn signals(&self) -> Vec<String> {
        let mut out = vec![self.clock.signal.clone()];
        if let Some(d) = &self.disable {
            d.signals(&mut out);
        }
        self.antecedent.signals(&mut out);
        self.consequent.signals(&mut out);
        out
    }

    /// Signals of antecedent and consequent only.
    pub fn body_signals(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.antecedent.signals(&mut out);
        self.consequent.signals(&mut out);
        out
    }

    pub fn consequent_signals(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.consequent.signals(&mut out);
        out
    }

    /// Cycles from an attempt's start to the latest cycle its outcome can depend on.
    pub fn span(&self) -> usize {
        self.antecedent.max_end() + self.implication.shift() + self.consequent.max_end()
    }

    /// Largest delay the property needs the engine to look ahead.
    pub fn max_delay(&self) -> usize {
        self.span()
    }

    pub fn lookback(&self) -> usize {
        let d = self.disable.as_ref().map_or(0, |d| d.lookback());
        d.max(self.antecedent.lookback()).max(self.consequent.lookback())
    }

    pub fn rename_signal(&mut self, from: &str, to: &str) {
        if self.clock.signal == from {
            self.clock.signal = to.to_string();
        }
        if let Some(d) = &mut self.disable {
            d.rename(from, to);
        }
        self.antecedent.rename(from, to);
        self.consequent.rename(from, to);
    }
}

impl fmt::Display for PropertyAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Convert an identifier to lower_snake_case (`DoneSignal-Validity` -> `done_signal_validity`).
pub fn to_snake_case(name: &str) -> String {
    let mut out = String::new();
    let chars: Vec<char> = name.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_ascii_alphanumeric() {
            if c.is_ascii_uppercase() {
                let prev_lower = i > 0 && (chars[i - 1].is_ascii_lowercase() || chars[i - 1].is_ascii_digit());
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase());
                let prev_upper = i > 0 && chars[i - 1].is_ascii_uppercase();
                if (prev_lower || (prev_upper && next_lower)) && !out.ends_with('_') {
                    out.push('_');
                }
            }
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() {
        return "unnamed_property".to_string();
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "p_");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snake_case_conversion() {
        assert_eq!(to_snake_case("req_ack_unless_error"), "req_ack_unless_error");
        assert_eq!(to_snake_case("DoneSignalValidity"), "done_signal_validity");
        assert_eq!(to_snake_case("AXIBurst-Len"), "axi_burst_len");
        assert_eq!(to_snake_case("3cycles"), "p_3cycles");
        assert_eq!(to_snake_case("__"), "unnamed_property");
    }

    #[test]
    fn operand_parenthesization() {
        let cons = SeqExpr::Or(
            Box::new(SeqExpr::Bool(BoolExpr::sig("error"))),
            Box::new(SeqExpr::delay(None, 1, 2, SeqExpr::Bool(BoolExpr::sig("ack")))),
        );
        assert_eq!(cons.render_operand(), "(error or ##[1:2] ack)");
        let neg = SeqExpr::Bool(BoolExpr::not(BoolExpr::sig("o_done")));
        assert_eq!(neg.render_operand(), "!o_done");
        let conj = SeqExpr::Bool(BoolExpr::and(BoolExpr::sig("i_start"), BoolExpr::not(BoolExpr::sig("enc_done"))));
        assert_eq!(conj.render_operand(), "(i_start && !enc_done)");
        assert_eq!(cons.max_end(), 2);
    }
}
