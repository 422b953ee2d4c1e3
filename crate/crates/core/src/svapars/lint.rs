//! Analyzer: binds a parsed property to a design and spec and reports defects.

use serde::{Deserialize, Serialize, Serializer};

use super::ast::{BoolExpr, ClockSpec, PropertyAst};
use super::fix::apply_fix;
use super::lexer::Span;
use super::parser::{parse_recovering, Unsupported};
use super::SvaError;
use crate::domain::{ActiveLevel, DesignModel};
use crate::specgram::{RuleSet, RuleTrigger, SpecGrammar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LintCode {
    ParseFailure,
    UnknownSignal,
    ClockEdgeMismatch,
    DelayWindowMismatch,
    MissingResetDisable,
    UnsupportedConstruct,
    SemanticMismatch,
}

impl LintCode {
    pub fn as_str(self) -> &'static str {
        match self {
            LintCode::ParseFailure => "ParseFailure",
            LintCode::UnknownSignal => "UnknownSignal",
            LintCode::ClockEdgeMismatch => "ClockEdgeMismatch",
            LintCode::DelayWindowMismatch => "DelayWindowMismatch",
            LintCode::MissingResetDisable => "MissingResetDisable",
            LintCode::UnsupportedConstruct => "UnsupportedConstruct",
            LintCode::SemanticMismatch => "SemanticMismatch",
        }
    }

    /// Lowercase words, the building block of error signatures.
    pub fn words(self) -> &'static str {
        match self {
            LintCode::ParseFailure => "parse failure",
            LintCode::UnknownSignal => "unknown signal",
            LintCode::ClockEdgeMismatch => "clock edge mismatch",
            LintCode::DelayWindowMismatch => "delay window mismatch",
            LintCode::MissingResetDisable => "missing reset disable",
            LintCode::UnsupportedConstruct => "unsupported construct",
            LintCode::SemanticMismatch => "semantic mismatch",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            LintCode::ParseFailure => "parse-failure",
            LintCode::UnknownSignal => "misbinding",
            LintCode::ClockEdgeMismatch => "clock-edge",
            LintCode::DelayWindowMismatch => "delay-window",
            LintCode::MissingResetDisable => "reset-handling",
            LintCode::UnsupportedConstruct => "unsupported-construct",
            LintCode::SemanticMismatch => "semantic",
        }
    }

    pub fn parse(s: &str) -> Option<LintCode> {
        ALL_CODES.iter().copied().find(|c| c.as_str() == s)
    }
}

pub const ALL_CODES: [LintCode; 7] = [
    LintCode::ParseFailure,
    LintCode::UnknownSignal,
    LintCode::ClockEdgeMismatch,
    LintCode::DelayWindowMismatch,
    LintCode::MissingResetDisable,
    LintCode::UnsupportedConstruct,
    LintCode::SemanticMismatch,
];

/// A mechanical rewrite attached to a diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fix", rename_all = "snake_case")]
pub enum Fix {
    SetClock {
        clock: ClockSpec,
    },
    /// Widen or narrow every consequent window to end at `cycles`.
    SetWindow {
        cycles: u32,
    },
    AddDisable {
        expr: BoolExpr,
    },
    RenameSignal {
        from: String,
        to: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintDiagnostic {
    pub code: LintCode,
    pub message: String,
    pub span: Span,
    /// Full property text with this diagnostic's fix applied.
    pub suggested_rewrite: Option<String>,
    pub fix: Option<Fix>,
}

#[derive(Serialize)]
struct WireDiagnostic<'a> {
    code: &'static str,
    message: &'a str,
    line: usize,
    col: usize,
    rewrite: Option<&'a str>,
}

impl Serialize for LintDiagnostic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireDiagnostic {
            code: self.code.as_str(),
            message: &self.message,
            line: self.span.line,
            col: self.span.col,
            rewrite: self.suggested_rewrite.as_deref(),
        }
        .serialize(s)
    }
}

impl LintDiagnostic {
    fn new(code: LintCode, message: String, span: Span) -> Self {
        LintDiagnostic { code, message, span, suggested_rewrite: None, fix: None }
    }

    fn with_fix(mut self, ast: &PropertyAst, fix: Fix) -> Self {
        let mut fixed = ast.clone();
        apply_fix(&mut fixed, &fix);
        self.suggested_rewrite = Some(fixed.render());
        self.fix = Some(fix);
        self
    }

    pub fn from_error(err: &SvaError) -> Self {
        match err {
            SvaError::ParseFailure { message, span } => {
                LintDiagnostic::new(LintCode::ParseFailure, message.clone(), *span)
            }
            SvaError::UnsupportedConstruct { token, span } => {
                LintDiagnostic::new(LintCode::UnsupportedConstruct, format!("unsupported construct '{token}'"), *span)
            }
        }
    }
}

/// Distinct code words in first-seen order, joined by `"; "`.
pub fn diagnostics_signature(diags: &[LintDiagnostic]) -> String {
    let mut codes: Vec<LintCode> = Vec::new();
    for d in diags {
        if !codes.contains(&d.code) {
            codes.push(d.code);
        }
    }
    codes.iter().map(|c| c.words()).collect::<Vec<_>>().join("; ")
}

pub fn diagnostic_tags(diags: &[LintDiagnostic]) -> Vec<String> {
    let mut tags: Vec<String> = Vec::new();
    for d in diags {
        let t = d.code.tag().to_string();
        if !tags.contains(&t) {
            tags.push(t);
        }
    }
    tags
}

/// Locates the source positions diagnostics point at.
struct Locator<'a> {
    text: &'a str,
    body_start: usize,
}

impl<'a> Locator<'a> {
    fn new(text: Option<&'a str>) -> Self {
        let text = text.unwrap_or("");
        Locator { text, body_start: text.find('@').unwrap_or(0) }
    }

    fn at(&self, byte: usize) -> Span {
        if self.text.is_empty() {
            return Span { line: 1, col: 1 };
        }
        let before = &self.text[..byte];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
        Span { line, col }
    }

    fn body(&self) -> Span {
        self.at(self.body_start)
    }

    fn literal(&self, needle: &str) -> Span {
        match self.text[self.body_start..].find(needle) {
            Some(i) => self.at(self.body_start + i),
            None => self.body(),
        }
    }

    /// First whole-identifier occurrence of `word` in the property body.
    fn word(&self, word: &str) -> Span {
        let hay = &self.text[self.body_start..];
        let is_id = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '$';
        let mut from = 0;
        while let Some(i) = hay[from..].find(word) {
            let s = from + i;
            let e = s + word.len();
            let ok_before = hay[..s].chars().next_back().is_none_or(|c| !is_id(c));
            let ok_after = hay[e..].chars().next().is_none_or(|c| !is_id(c));
            if ok_before && ok_after {
                return self.at(self.body_start + s);
            }
            from = e;
        }
        self.body()
    }
}

fn reset_disable_expr(design: &DesignModel) -> Option<BoolExpr> {
    let r = design.reset.as_ref()?;
    let sig = BoolExpr::sig(&r.port);
    Some(match r.active {
        ActiveLevel::Low => BoolExpr::not(sig),
        ActiveLevel::High => sig,
    })
}

fn nearest_signal(design: &DesignModel, name: &str) -> Option<String> {
    design
        .signal_names()
        .into_iter()
        .map(|s| (strsim::levenshtein(&s, name), s))
        .filter(|(d, _)| *d <= 2)
        .min()
        .map(|(_, s)| s)
}

fn window_text(lo: u32, hi: u32) -> String {
    if lo == hi {
        format!("##{lo}")
    } else {
        format!("##[{lo}:{hi}]")
    }
}

/// Lint a parsed property. Returns an empty list on clean input.
pub fn lint(
    ast: &PropertyAst,
    design: &DesignModel,
    spec: Option<&SpecGrammar>,
    rules: &RuleSet,
) -> Vec<LintDiagnostic> {
    lint_parsed(ast, &[], design, spec, rules, None)
}

pub(crate) fn lint_parsed(
    ast: &PropertyAst,
    unsupported: &[Unsupported],
    design: &DesignModel,
    spec: Option<&SpecGrammar>,
    rules: &RuleSet,
    text: Option<&str>,
) -> Vec<LintDiagnostic> {
    let loc = Locator::new(text);
    let mut out = Vec::new();

    // clock
    let mut clock_handled = false;
    if let Some(spec) = spec {
        let want = spec.edge();
        if ast.clock != want {
            let msg = format!("uses {} instead of {}", ast.clock, want);
            out.push(
                LintDiagnostic::new(LintCode::ClockEdgeMismatch, msg, loc.literal(ast.clock.edge.as_str()))
                    .with_fix(ast, Fix::SetClock { clock: want }),
            );
            clock_handled = true;
        }
    } else if let Some(rule) = rules.get(&RuleTrigger::ForeignClock) {
        if rule.trigger.fires(ast, design) {
            let want = ClockSpec { edge: ast.clock.edge, signal: design.clock.clone() };
            let msg = format!("samples {} but {}", ast.clock.signal, rule.render_action(design));
            out.push(
                LintDiagnostic::new(LintCode::ClockEdgeMismatch, msg, loc.word(&ast.clock.signal))
                    .with_fix(ast, Fix::SetClock { clock: want }),
            );
            clock_handled = true;
        }
    }

    // delay window
    if let Some(n) = spec.and_then(|s| s.window_cycles()) {
        let mut delays = Vec::new();
        ast.consequent.delays(&mut delays);
        if let Some(&(lo, hi)) = delays.iter().find(|(lo, hi)| lo < hi && *hi != n) {
            let msg = format!(
                "specifies {hi}-cycle window {} instead of {n}-cycle {}",
                window_text(lo, hi),
                window_text(lo.min(n), n)
            );
            out.push(
                LintDiagnostic::new(LintCode::DelayWindowMismatch, msg, loc.literal("##"))
                    .with_fix(ast, Fix::SetWindow { cycles: n }),
            );
        }
    }

    // names and unsupported constructs
    let exempt: Vec<String> = {
        let mut v = vec![ast.clock.signal.clone()];
        if let Some(d) = &ast.disable {
            d.signals(&mut v);
        }
        v
    };
    let mut unknown = Vec::new();
    match spec {
        Some(spec) => {
            let mut body = ast.body_signals();
            for u in unsupported {
                for s in &u.dropped {
                    if !body.contains(s) {
                        body.push(s.clone());
                    }
                }
            }
            let extraneous: Vec<&String> = body
                .iter()
                .filter(|s| !spec.signals.contains(s) && !design.has_signal(s) && !exempt.contains(s))
                .collect();
            if !extraneous.is_empty() || !unsupported.is_empty() {
                let mut parts = Vec::new();
                if !extraneous.is_empty() {
                    let names: Vec<&str> = extraneous.iter().map(|s| s.as_str()).collect();
                    parts.push(format!("{} not among the specified signals", names.join(", ")));
                }
                for u in unsupported {
                    parts.push(format!("'{}' is not supported", u.token));
                }
                let wanted = spec.condition_signals();
                let msg = format!("misinterprets the condition over {}: {}", wanted.join(", "), parts.join("; "));
                let span = match (unsupported.first(), extraneous.first()) {
                    (_, Some(s)) => loc.word(s),
                    (Some(u), None) => u.span,
                    _ => loc.body(),
                };
                out.push(LintDiagnostic::new(LintCode::SemanticMismatch, msg, span));
            }
            for s in ast.signals() {
                if spec.signals.contains(&s) && !design.has_signal(&s) && !(clock_handled && s == ast.clock.signal) {
                    unknown.push(s);
                }
            }
            for s in &exempt {
                if !design.has_signal(s) && !unknown.contains(s) && !(clock_handled && *s == ast.clock.signal) {
                    unknown.push(s.clone());
                }
            }
        }
        None => {
            for u in unsupported {
                out.push(LintDiagnostic::new(
                    LintCode::UnsupportedConstruct,
                    format!("unsupported construct '{}'", u.token),
                    u.span,
                ));
            }
            for s in ast.signals() {
                if !design.has_signal(&s) && !(clock_handled && s == ast.clock.signal) {
                    unknown.push(s);
                }
            }
        }
    }
    for s in unknown {
        let mut msg = format!("signal '{s}' is not declared in design {}", design.name);
        let near = nearest_signal(design, &s);
        if let Some(n) = &near {
            msg.push_str(&format!("; did you mean '{n}'?"));
        }
        let d = LintDiagnostic::new(LintCode::UnknownSignal, msg, loc.word(&s));
        out.push(match near {
            Some(to) => d.with_fix(ast, Fix::RenameSignal { from: s, to }),
            None => d,
        });
    }

    // reset rule
    if let Some(rule) = rules.get(&RuleTrigger::ResetWithoutDisable) {
        if rule.trigger.fires(ast, design) {
            let expr = reset_disable_expr(design).expect("rule fires only with a reset");
            let msg = format!("no disable iff clause: {}", rule.render_action(design));
            out.push(
                LintDiagnostic::new(LintCode::MissingResetDisable, msg, loc.body())
                    .with_fix(ast, Fix::AddDisable { expr }),
            );
        }
    }
    out
}

/// Outcome of parse → bind → lint on one property text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    /// Present whenever the text parsed (possibly with recovered constructs).
    pub ast: Option<PropertyAst>,
    pub diagnostics: Vec<LintDiagnostic>,
    pub notes: Vec<String>,
}

impl Analysis {
    pub fn is_clean(&self) -> bool {
        self.ast.is_some() && self.diagnostics.is_empty()
    }
}

pub fn analyze(text: &str, design: &DesignModel, spec: Option<&SpecGrammar>, rules: &RuleSet) -> Analysis {
    match parse_recovering(text) {
        Ok(p) => {
            let diagnostics = lint_parsed(&p.ast, &p.unsupported, design, spec, rules, Some(text));
            Analysis { ast: Some(p.ast), diagnostics, notes: p.notes }
        }
        Err(e) => Analysis { ast: None, diagnostics: vec![LintDiagnostic::from_error(&e)], notes: vec![] },
    }
}

/// Parse, bind and lint with the shipped rulebook and no spec.
pub fn validate(text: &str, design: &DesignModel) -> Result<PropertyAst, Vec<LintDiagnostic>> {
    validate_with(text, design, None, &RuleSet::seeded())
}

pub fn validate_with(
    text: &str,
    design: &DesignModel,
    spec: Option<&SpecGrammar>,
    rules: &RuleSet,
) -> Result<PropertyAst, Vec<LintDiagnostic>> {
    let a = analyze(text, design, spec, rules);
    match a.ast {
        Some(ast) if a.diagnostics.is_empty() => Ok(ast),
        _ => Err(a.diagnostics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::load_design;
    use crate::specgram::parse_structured_spec;

    fn handshake() -> DesignModel {
        load_design(include_str!("../../fixtures/handshake.dsn")).unwrap()
    }

    fn encoder() -> DesignModel {
        load_design(include_str!("../../fixtures/encoder.dsn")).unwrap()
    }

    fn fig1_spec() -> SpecGrammar {
        parse_structured_spec("Signals: [clk, req, ack, error]\nProperty: [assert, concurrent, positive edge of clk]\nCondition: [if req is high, then ack must be high within 2 cycles unless error is high]").unwrap()
    }

    fn codes(d: &[LintDiagnostic]) -> Vec<LintCode> {
        d.iter().map(|d| d.code).collect()
    }

    #[test]
    fn edge_and_window_mismatch() {
        let ast = crate::svapars::parse_property("@(negedge clk) req |-> ##[1:3] ack").unwrap();
        let d = lint(&ast, &handshake(), Some(&fig1_spec()), &RuleSet::empty());
        assert_eq!(codes(&d), [LintCode::ClockEdgeMismatch, LintCode::DelayWindowMismatch]);
        assert_eq!(d[0].message, "uses negedge clk instead of posedge clk");
        assert_eq!(d[1].message, "specifies 3-cycle window ##[1:3] instead of 2-cycle ##[1:2]");
    }

    #[test]
    fn missing_reset_disable_with_rewrite() {
        let ast = crate::svapars::parse_property(
            "property done_signal_validity;\n@(posedge clk) (i_start && !enc_done) |=> !o_done;\nendproperty",
        )
        .unwrap();
        let d = lint(&ast, &encoder(), None, &RuleSet::seeded());
        assert_eq!(codes(&d), [LintCode::MissingResetDisable]);
        assert!(d[0].suggested_rewrite.as_ref().unwrap().contains("disable iff (!rst_async_n)"));
        // post-reset properties are exempt
        let mut marked = ast.clone();
        marked.post_reset = true;
        assert!(lint(&marked, &encoder(), None, &RuleSet::seeded()).is_empty());
    }

    #[test]
    fn unknown_signal_suggests_nearest() {
        let e = validate("@(posedge clk) disable iff (!rst_async_n) i_start |=> o_donee", &encoder()).unwrap_err();
        assert_eq!(codes(&e), [LintCode::UnknownSignal]);
        assert_eq!(e[0].fix, Some(Fix::RenameSignal { from: "o_donee".into(), to: "o_done".into() }));
        assert_eq!((e[0].span.line, e[0].span.col), (1, 55));
    }

    #[test]
    fn corrected_figure_property_is_clean() {
        let text = "property req_ack_unless_error;\n@(posedge clk) req |-> (error or ##[1:2] ack);\nendproperty\nassert property (req_ack_unless_error);\n";
        let a = analyze(text, &handshake(), Some(&fig1_spec()), &RuleSet::empty());
        assert!(a.is_clean(), "{:?}", a.diagnostics);
    }

    #[test]
    fn window_in_spec_but_not_in_property_is_fine() {
        let ast = crate::svapars::parse_property("@(posedge clk) req |-> ##1 ack").unwrap();
        assert!(lint(&ast, &handshake(), Some(&fig1_spec()), &RuleSet::empty()).is_empty());
    }

    #[test]
    fn parse_failure_diagnostic() {
        let e = validate("@(posedge clk) a |-> ##[3:1] b", &handshake()).unwrap_err();
        assert_eq!(codes(&e), [LintCode::ParseFailure]);
        assert!(e[0].message.contains("m ≤ n violated"));
    }

    #[test]
    fn foreign_clock_without_spec() {
        let e = validate("@(posedge clk2) disable iff (!rst_n) req |-> ack", &handshake()).unwrap_err();
        assert_eq!(codes(&e), [LintCode::ClockEdgeMismatch]);
    }

    #[test]
    fn json_shape() {
        let e = validate("@(posedge clk) disable iff (!rst_n) req |-> donee", &handshake()).unwrap_err();
        let v = serde_json::to_value(&e[0]).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 5);
        assert_eq!(v["code"], "UnknownSignal");
        assert!(v["rewrite"].is_null());
    }

    #[test]
    fn signature_and_tags() {
        let ast = crate::svapars::parse_property("@(negedge clk) req |-> ##[1:3] ack").unwrap();
        let d = lint(&ast, &handshake(), Some(&fig1_spec()), &RuleSet::empty());
        assert_eq!(diagnostics_signature(&d), "clock edge mismatch; delay window mismatch");
        assert_eq!(diagnostic_tags(&d), ["clock-edge", "delay-window"]);
    }
}
