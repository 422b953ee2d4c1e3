//! Recursive-descent parser for property blocks of the supported SVA subset.

use super::ast::{BoolExpr, ClockSpec, Edge, Implication, PropertyAst, SeqExpr};
use super::lexer::{lex, Span, Token};
use super::SvaError;

type BinCtor = fn(Box<BoolExpr>, Box<BoolExpr>) -> BoolExpr;

/// Keywords of full SVA that the subset deliberately rejects.
pub const UNSUPPORTED_BINARY: &[&str] = &[
    "unless",
    "until",
    "s_until",
    "until_with",
    "s_until_with",
    "throughout",
    "within",
    "intersect",
    "and",
    "implies",
    "iff",
];
pub const UNSUPPORTED_PREFIX: &[&str] = &[
    "not",
    "first_match",
    "strong",
    "weak",
    "always",
    "s_always",
    "eventually",
    "s_eventually",
    "nexttime",
    "s_nexttime",
    "accept_on",
    "reject_on",
];
const SUPPORTED_SYSTEM: &[&str] = &["past", "rose", "fell", "stable"];

/// A construct skipped while parsing in recovery mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unsupported {
    pub token: String,
    pub span: Span,
    /// Signals of the operand dropped along with the construct.
    pub dropped: Vec<String>,
}

/// Result of parsing one property document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedProperty {
    pub ast: PropertyAst,
    /// Informational notes (e.g. discarded `$error` action blocks).
    pub notes: Vec<String>,
    /// Only populated in recovery mode.
    pub unsupported: Vec<Unsupported>,
    /// Where the property name was declared, if anywhere.
    pub name_span: Option<Span>,
}

pub(crate) struct Parser {
    toks: Vec<(Token, Span)>,
    pos: usize,
    recover: bool,
    unsupported: Vec<Unsupported>,
    notes: Vec<String>,
}

impl Parser {
    pub(crate) fn new(text: &str, recover: bool) -> Result<Self, SvaError> {
        Ok(Parser { toks: lex(text)?, pos: 0, recover, unsupported: Vec::new(), notes: Vec::new() })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Token::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Token::Ident(s) if s == kw)
    }

    fn unexpected(&self, what: &str) -> SvaError {
        SvaError::parse(format!("expected {what}, found {}", self.peek().describe()), self.span())
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SvaError> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{p}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SvaError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{kw}'")))
        }
    }

    fn ident(&mut self) -> Result<String, SvaError> {
        match self.peek().clone() {
            Token::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            Token::Ident(s) if UNSUPPORTED_BINARY.contains(&s.as_str()) || UNSUPPORTED_PREFIX.contains(&s.as_str()) => {
                Err(SvaError::unsupported(&s, self.span()))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn number(&mut self) -> Result<u64, SvaError> {
        match self.peek() {
            Token::Number(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn note_unsupported(&mut self, token: &str, span: Span) -> Result<(), SvaError> {
        if self.recover {
            self.unsupported.push(Unsupported { token: token.to_string(), span, dropped: Vec::new() });
            Ok(())
        } else {
            Err(SvaError::unsupported(token, span))
        }
    }

    pub(crate) fn document(mut self) -> Result<ParsedProperty, SvaError> {
        if matches!(self.peek(), Token::Eof) {
            return Err(SvaError::parse("empty property text", self.span()));
        }
        let mut post_reset = false;
        if self.is_punct("(*") {
            self.bump();
            loop {
                match self.bump() {
                    Token::Punct("*)") => break,
                    Token::Ident(a) if a == "post_reset" => post_reset = true,
                    Token::Ident(_) | Token::Punct(",") | Token::Number(_) => {}
                    Token::Eof => return Err(SvaError::parse("unterminated attribute", self.span())),
                    t => return Err(SvaError::parse(format!("unexpected {} in attribute", t.describe()), self.span())),
                }
            }
        }

        let mut name = None;
        let mut name_span = None;
        let block = self.is_kw("property");
        if block {
            self.bump();
            name_span = Some(self.span());
            name = Some(self.ident()?);
            self.expect_punct(";")?;
        }
        let (clock, disable, antecedent, implication, consequent) = self.body()?;
        if self.is_punct(";") {
            self.bump();
        }
        if block {
            self.expect_kw("endproperty")?;
            if self.is_punct(":") {
                self.bump();
                let end_name = self.ident()?;
                if Some(&end_name) != name.as_ref() {
                    return Err(SvaError::parse(format!("endproperty label '{end_name}' does not match"), self.span()));
                }
            }
        }
        if self.is_kw("assert") {
            let at = self.span();
            self.bump();
            self.expect_kw("property")?;
            self.expect_punct("(")?;
            let target = self.ident()?;
            self.expect_punct(")")?;
            match &name {
                Some(n) if *n != target => {
                    return Err(SvaError::parse(format!("assert references '{target}' but the property is '{n}'"), at))
                }
                None => name = Some(target),
                _ => {}
            }
            if self.is_kw("else") {
                self.bump();
                match self.bump() {
                    Token::System(s) if matches!(s.as_str(), "error" | "fatal" | "warning" | "info" | "display") => {
                        self.expect_punct("(")?;
                        let mut depth = 1;
                        while depth > 0 {
                            match self.bump() {
                                Token::Punct("(") => depth += 1,
                                Token::Punct(")") => depth -= 1,
                                Token::Eof => return Err(SvaError::parse("unterminated action block", self.span())),
                                _ => {}
                            }
                        }
                        self.notes.push(format!("discarded ${s} action block"));
                    }
                    t => {
                        return Err(SvaError::parse(
                            format!("expected action block, found {}", t.describe()),
                            self.span(),
                        ))
                    }
                }
            }
            self.expect_punct(";")?;
        }
        if !matches!(self.peek(), Token::Eof) {
            return Err(self.unexpected("end of input"));
        }
        let ast = PropertyAst {
            name: name.unwrap_or_else(|| "unnamed_property".to_string()),
            clock,
            disable,
            antecedent,
            implication,
            consequent,
            post_reset,
        };
        Ok(ParsedProperty { ast, notes: self.notes, unsupported: self.unsupported, name_span })
    }

    #[allow(clippy::type_complexity)]
    fn body(&mut self) -> Result<(ClockSpec, Option<BoolExpr>, SeqExpr, Implication, SeqExpr), SvaError> {
        self.expect_punct("@")?;
        self.expect_punct("(")?;
        let edge = if self.is_kw("posedge") {
            Edge::Posedge
        } else if self.is_kw("negedge") {
            Edge::Negedge
        } else {
            return Err(self.unexpected("'posedge' or 'negedge'"));
        };
        self.bump();
        let signal = self.ident()?;
        self.expect_punct(")")?;
        let mut disable = None;
        if self.is_kw("disable") {
            self.bump();
            self.expect_kw("iff")?;
            self.expect_punct("(")?;
            disable = Some(self.bool_expr(0)?);
            self.expect_punct(")")?;
        }
        let antecedent = self.seq_or()?;
        let implication = match self.peek() {
            Token::Punct("|->") => Implication::Overlapped,
            Token::Punct("|=>") => Implication::NonOverlapped,
            _ => return Err(self.unexpected("'|->' or '|=>'")),
        };
        self.bump();
        let consequent = self.seq_or()?;
        if matches!(self.peek(), Token::Punct("|->") | Token::Punct("|=>")) {
            return Err(SvaError::parse("only one implication operator is allowed per property", self.span()));
        }
        Ok((ClockSpec { edge, signal }, disable, antecedent, implication, consequent))
    }

    fn seq_or(&mut self) -> Result<SeqExpr, SvaError> {
        let mut lhs = self.seq_concat()?;
        loop {
            if self.is_kw("or") {
                self.bump();
                let rhs = self.seq_concat()?;
                lhs = SeqExpr::Or(Box::new(lhs), Box::new(rhs));
                continue;
            }
            if let Token::Ident(kw) = self.peek().clone() {
                if UNSUPPORTED_BINARY.contains(&kw.as_str()) {
                    let span = self.span();
                    self.note_unsupported(&kw, span)?;
                    self.bump();
                    // recovery: parse and drop the right operand
                    let dropped = self.seq_concat()?;
                    if let Some(u) = self.unsupported.last_mut() {
                        dropped.signals(&mut u.dropped);
                    }
                    continue;
                }
            }
            return Ok(lhs);
        }
    }

    fn delay(&mut self) -> Result<(u32, u32), SvaError> {
        self.expect_punct("##")?;
        if self.is_punct("[") {
            let at = self.span();
            self.bump();
            let lo = self.number()?;
            self.expect_punct(":")?;
            if self.is_punct("$") {
                let span = self.span();
                return Err(SvaError::unsupported("$", span));
            }
            let hi = self.number()?;
            self.expect_punct("]")?;
            if lo > hi {
                return Err(SvaError::parse(format!("m ≤ n violated in ##[{lo}:{hi}]"), at));
            }
            Ok((to_u32(lo, at)?, to_u32(hi, at)?))
        } else {
            let at = self.span();
            let n = self.number()?;
            let n = to_u32(n, at)?;
            Ok((n, n))
        }
    }

    fn seq_concat(&mut self) -> Result<SeqExpr, SvaError> {
        let mut seq = if self.is_punct("##") {
            let (lo, hi) = self.delay()?;
            let tail = self.seq_primary()?;
            SeqExpr::delay(None, lo, hi, tail)
        } else {
            self.seq_primary()?
        };
        while self.is_punct("##") {
            let (lo, hi) = self.delay()?;
            let tail = self.seq_primary()?;
            seq = SeqExpr::delay(Some(seq), lo, hi, tail);
        }
        Ok(seq)
    }

    fn seq_primary(&mut self) -> Result<SeqExpr, SvaError> {
        if let Token::Ident(kw) = self.peek().clone() {
            if UNSUPPORTED_PREFIX.contains(&kw.as_str()) {
                let span = self.span();
                self.note_unsupported(&kw, span)?;
                self.bump();
                return self.seq_primary();
            }
        }
        if self.is_punct("(") {
            self.bump();
            let inner = self.seq_or()?;
            self.expect_punct(")")?;
            if let SeqExpr::Bool(b) = inner {
                // `(a || b) && c`: the parenthesized part was a boolean operand
                return Ok(SeqExpr::Bool(self.bool_continue(b, 0)?));
            }
            return Ok(inner);
        }
        Ok(SeqExpr::Bool(self.bool_expr(0)?))
    }

    fn binop(&self) -> Option<(u8, BinCtor)> {
        match self.peek() {
            Token::Punct("||") => Some((1, BoolExpr::Or)),
            Token::Punct("&&") => Some((2, BoolExpr::And)),
            Token::Punct("==") => Some((3, BoolExpr::Eq)),
            Token::Punct("!=") => Some((3, BoolExpr::Ne)),
            _ => None,
        }
    }

    fn bool_expr(&mut self, min_prec: u8) -> Result<BoolExpr, SvaError> {
        let lhs = self.bool_unary()?;
        self.bool_continue(lhs, min_prec)
    }

    fn bool_continue(&mut self, mut lhs: BoolExpr, min_prec: u8) -> Result<BoolExpr, SvaError> {
        while let Some((prec, ctor)) = self.binop() {
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.bool_expr(prec + 1)?;
            lhs = ctor(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_unary(&mut self) -> Result<BoolExpr, SvaError> {
        let span = self.span();
        match self.peek().clone() {
            Token::Punct("!") => {
                self.bump();
                Ok(BoolExpr::Not(Box::new(self.bool_unary()?)))
            }
            Token::Punct("(") => {
                self.bump();
                let e = self.bool_expr(0)?;
                if self.is_punct("##") || self.is_kw("or") {
                    return Err(SvaError::parse("sequence operator inside a boolean expression", self.span()));
                }
                self.expect_punct(")")?;
                Ok(e)
            }
            Token::Number(n) => {
                self.bump();
                Ok(BoolExpr::Const(n))
            }
            Token::System(name) => {
                if !SUPPORTED_SYSTEM.contains(&name.as_str()) {
                    let tok = format!("${name}");
                    self.note_unsupported(&tok, span)?;
                    // recovery: skip the call, treat it as true
                    self.bump();
                    if self.is_punct("(") {
                        let mut depth = 0;
                        loop {
                            match self.bump() {
                                Token::Punct("(") => depth += 1,
                                Token::Punct(")") => {
                                    depth -= 1;
                                    if depth == 0 {
                                        break;
                                    }
                                }
                                Token::Eof => return Err(SvaError::parse("unterminated call", span)),
                                _ => {}
                            }
                        }
                    }
                    return Ok(BoolExpr::Const(1));
                }
                self.bump();
                self.expect_punct("(")?;
                let arg = self.bool_expr(0)?;
                let e = match name.as_str() {
                    "past" => {
                        let mut n = 1;
                        if self.is_punct(",") {
                            self.bump();
                            let at = self.span();
                            n = to_u32(self.number()?, at)?;
                            if n == 0 {
                                return Err(SvaError::parse("$past depth must be at least 1", at));
                            }
                        }
                        BoolExpr::Past(Box::new(arg), n)
                    }
                    "rose" => BoolExpr::Rose(Box::new(arg)),
                    "fell" => BoolExpr::Fell(Box::new(arg)),
                    _ => BoolExpr::Stable(Box::new(arg)),
                };
                self.expect_punct(")")?;
                Ok(e)
            }
            Token::Ident(s) if UNSUPPORTED_PREFIX.contains(&s.as_str()) || UNSUPPORTED_BINARY.contains(&s.as_str()) => {
                Err(SvaError::unsupported(&s, span))
            }
            Token::Ident(_) => {
                let id = self.ident()?;
                // hierarchical or indexed references are outside the subset
                if self.is_punct("[") {
                    return Err(SvaError::unsupported("[", self.span()));
                }
                Ok(BoolExpr::Sig(id))
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn to_u32(n: u64, at: Span) -> Result<u32, SvaError> {
    u32::try_from(n).map_err(|_| SvaError::parse(format!("delay {n} too large"), at))
}

fn is_reserved(s: &str) -> bool {
    matches!(s, "property" | "endproperty" | "assert" | "posedge" | "negedge" | "disable" | "or" | "else")
        || UNSUPPORTED_BINARY.contains(&s)
        || UNSUPPORTED_PREFIX.contains(&s)
}

/// Strict parse: any construct outside the subset is an error.
pub fn parse_property(text: &str) -> Result<PropertyAst, SvaError> {
    Ok(Parser::new(text, false)?.document()?.ast)
}

/// Strict parse that also returns informational notes.
pub fn parse_document(text: &str) -> Result<ParsedProperty, SvaError> {
    Parser::new(text, false)?.document()
}

/// Lenient parse: unsupported operators are recorded and their operands dropped,
/// so the remaining structure can still be linted.
pub fn parse_recovering(text: &str) -> Result<ParsedProperty, SvaError> {
    Parser::new(text, true)?.document()
}
