//! Counterexample triage: evidence extraction, spec/assertion review, design
//! cone-of-influence and patch verification, in that order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vcd::{extract_window, parse_vcd, EvidenceError, EvidenceTable, VcdError};
use crate::domain::{ActiveLevel, DesignModel, Verdict, VerdictStatus, MAX_RCA_ROUNDS};
use crate::engine::{check, emit_vcd, evaluate_on_trace, BoundProperty, CheckOptions};
use crate::specgram::{LearningCache, RuleSet, SpecGrammar};
use crate::svapars::{
    analyze as analyze_text, apply_canonical_rewrites, apply_fix, diagnostic_tags, diagnostics_signature, lint,
    BoolExpr, Fix, FixError, LintCode, PropertyAst, SeqExpr,
};

#[derive(Debug, Error)]
pub enum RcaError {
    #[error("RCA round {0} is outside 1..=3; escalate to human review")]
    BoundViolation(u32),
    #[error("verdict for `{0}` carries no counterexample")]
    NotFailed(String),
    #[error(transparent)]
    Vcd(#[from] VcdError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootCauseClass {
    SpecMisread,
    AssertionDefect,
    DesignDefect,
    BindingDefect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertionVerdict {
    AssertionWrong,
    AssertionOk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecAssertFinding {
    pub verdict: AssertionVerdict,
    pub codes: Vec<LintCode>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtlFinding {
    /// Assignments in the cone of influence whose inputs changed in the window.
    pub implicated: Vec<String>,
    /// Signals in the cone of influence, nearest first.
    pub cone: Vec<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcaReport {
    pub cex_id: String,
    pub round: u32,
    pub violated_at: usize,
    pub evidence: EvidenceTable,
    pub spec_assert_finding: SpecAssertFinding,
    pub rtl_finding: Option<RtlFinding>,
    pub root_cause_class: RootCauseClass,
    pub proposed_patch: Option<String>,
    pub consistency: bool,
    pub verification_note: String,
}

impl RcaReport {
    /// A round resolves when the verification analyst found the report consistent.
    pub fn resolved(&self) -> bool {
        self.consistency
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Which analyst a rationale belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analyst {
    SpecAssertion,
    Design,
    Verification,
}

/// Optional rewording of analyst rationales; structured findings are fixed.
pub trait RationaleHook {
    fn rationale(&self, analyst: Analyst, draft: &str) -> Option<String>;
}

pub struct RcaContext<'a> {
    pub rules: &'a RuleSet,
    pub cache: Option<&'a LearningCache>,
    pub depth: usize,
    pub hook: Option<&'a dyn RationaleHook>,
}

impl<'a> RcaContext<'a> {
    pub fn new(rules: &'a RuleSet, depth: usize) -> Self {
        RcaContext { rules, cache: None, depth, hook: None }
    }

    pub fn with_cache(mut self, cache: &'a LearningCache) -> Self {
        self.cache = Some(cache);
        self
    }

    fn say(&self, analyst: Analyst, draft: String) -> String {
        self.hook.and_then(|h| h.rationale(analyst, &draft)).unwrap_or(draft)
    }
}

fn reset_disable(design: &DesignModel) -> Option<BoolExpr> {
    let r = design.reset.as_ref()?;
    let sig = BoolExpr::sig(&r.port);
    Some(match r.active {
        ActiveLevel::Low => BoolExpr::not(sig),
        ActiveLevel::High => sig,
    })
}

/// Earliest offset at which a sequence can start constraining signals.
fn min_start(seq: &SeqExpr) -> usize {
    match seq {
        SeqExpr::Bool(_) => 0,
        SeqExpr::Or(a, b) => min_start(a).min(min_start(b)),
        SeqExpr::Concat { head: Some(h), .. } => min_start(h),
        SeqExpr::Concat { head: None, lo, tail, .. } => *lo as usize + min_start(tail),
    }
}

/// Transitive fan-in of `roots`, at most `depth` assignment levels deep.
/// Returns (signal indices nearest first, assignment target indices).
fn cone_of_influence(design: &DesignModel, roots: &[usize], depth: usize) -> (Vec<usize>, Vec<usize>) {
    let mut seen: Vec<usize> = Vec::new();
    let mut assigns = Vec::new();
    let mut frontier: Vec<usize> = roots.to_vec();
    for level in 0..=depth {
        let mut next = Vec::new();
        for s in frontier {
            if seen.contains(&s) {
                continue;
            }
            seen.push(s);
            if level == depth {
                continue;
            }
            if let Some(a) = design.driver_of(s) {
                assigns.push(s);
                let mut sup = Vec::new();
                a.expr.support(&mut sup);
                next.extend(sup);
            }
        }
        frontier = next;
    }
    (seen, assigns)
}

/// Re-prove a patch on the design; `Err` explains why it is not Proven.
fn verify_patch(text: &str, design: &DesignModel, depth: usize) -> Result<(), String> {
    let ast = crate::svapars::parse_property(text).map_err(|e| e.to_string())?;
    let bound = BoundProperty::bind(&ast, design).map_err(|e| e.to_string())?;
    let depth = depth.max(ast.span()).max(1);
    match check(&bound, CheckOptions::depth(depth)) {
        Ok(v) if v.status == VerdictStatus::Proven => Ok(()),
        Ok(v) => Err(format!("patch is {} at depth {depth}", v.status.as_str())),
        Err(e) => Err(e.to_string()),
    }
}

/// Run the analyst pipeline on one failed verdict.
pub fn analyze(
    verdict: &Verdict,
    property: &PropertyAst,
    spec: Option<&SpecGrammar>,
    design: &DesignModel,
    round: u32,
    ctx: &RcaContext,
) -> Result<RcaReport, RcaError> {
    if round == 0 || round > MAX_RCA_ROUNDS {
        return Err(RcaError::BoundViolation(round));
    }
    let cex = verdict.cex.as_ref().ok_or_else(|| RcaError::NotFailed(verdict.property_id.clone()))?;
    let at = cex.violated_at;

    // 1. evidence from the dumped trace
    let doc = parse_vcd(&emit_vcd(&cex.trace))?;
    let signals: Vec<String> = {
        let mut v = Vec::new();
        for s in property.signals() {
            if !v.contains(&s) && doc.index_of(&s).is_some() {
                v.push(s);
            }
        }
        v
    };
    let window = property.span() + property.lookback();
    let t0 = at.saturating_sub(window) as u64;
    let names: Vec<&str> = signals.iter().map(String::as_str).collect();
    let evidence = extract_window(&doc, &names, t0, at as u64)?;

    // 2. spec / assertion analyst
    let diags = lint(property, design, spec, ctx.rules);
    let assertion_codes: Vec<LintCode> = diags
        .iter()
        .map(|d| d.code)
        .filter(|c| {
            matches!(c, LintCode::ClockEdgeMismatch | LintCode::DelayWindowMismatch | LintCode::SemanticMismatch)
        })
        .collect();

    let mut class = None;
    let mut patch_candidates: Vec<String> = Vec::new();
    let mut rationale = String::new();

    // binding: the reset is not bound as a disable, and binding it removes every violation
    if let (Some(expr), None) = (reset_disable(design), &property.disable) {
        let mut p = property.clone();
        apply_fix(&mut p, &Fix::AddDisable { expr });
        if evaluate_on_trace(&p, &cex.trace).violated_at.is_none()
            && verify_patch(&p.render(), design, ctx.depth).is_ok()
        {
            class = Some(RootCauseClass::BindingDefect);
            rationale = format!(
                "violation at cycle {at} overlaps reset; the property is not disabled by {}",
                design.reset.as_ref().unwrap().port
            );
            patch_candidates.push(p.render());
        }
    }
    // binding: a design signal outside the spec stands in for an unreferenced spec signal
    if class.is_none() {
        if let Some(spec) = spec {
            let body = property.body_signals();
            let missing: Vec<String> =
                spec.condition_signals().into_iter().filter(|s| !body.contains(s) && design.has_signal(s)).collect();
            let strays: Vec<&String> =
                body.iter().filter(|s| !spec.signals.contains(s) && design.has_signal(s)).collect();
            if let (Some(stray), false) = (strays.first(), missing.is_empty()) {
                let to = missing.iter().min_by_key(|m| (strsim::levenshtein(m, stray), m.to_string())).unwrap().clone();
                let mut p = property.clone();
                p.rename_signal(stray, &to);
                class = Some(RootCauseClass::BindingDefect);
                rationale = format!("'{stray}' is not a specified signal; the condition refers to '{to}'");
                patch_candidates.push(p.render());
            }
        }
    }
    if class.is_none() && !assertion_codes.is_empty() {
        class = Some(RootCauseClass::AssertionDefect);
        let words: Vec<&str> = assertion_codes.iter().map(|c| c.words()).collect();
        rationale = format!("property disagrees with the specification: {}", words.join(", "));
        match apply_canonical_rewrites(property, &diags) {
            Ok(p) => patch_candidates.push(p.render()),
            Err(FixError::Unfixable { .. }) => {}
        }
        if let Some(cache) = ctx.cache {
            for e in cache.lookup(&diagnostics_signature(&diags), &diagnostic_tags(&diags)) {
                // rulebook style findings do not disqualify a cached correction
                let a = analyze_text(&e.corrected_snippet, design, spec, ctx.rules);
                if a.ast.is_some() && a.diagnostics.iter().all(|d| d.code == LintCode::MissingResetDisable) {
                    patch_candidates.push(e.corrected_snippet);
                }
            }
        }
    }
    if class.is_none() {
        if let Some(spec) = spec {
            let body = property.body_signals();
            let omitted: Vec<String> = spec.condition_signals().into_iter().filter(|s| !body.contains(s)).collect();
            let same_cycle = property.implication.shift() + min_start(&property.consequent) == 0;
            if spec.mentions_next_cycle() && same_cycle {
                class = Some(RootCauseClass::SpecMisread);
                rationale =
                    "the condition asks for the next cycle but the consequent is checked in the same cycle".to_string();
            } else if !omitted.is_empty() {
                class = Some(RootCauseClass::SpecMisread);
                rationale = format!("the condition mentions {} but the property ignores it", omitted.join(", "));
            }
        }
    }
    let assertion_ok = matches!(class, None | Some(RootCauseClass::DesignDefect));
    if assertion_ok {
        rationale = "property agrees with the specification".to_string();
    }
    let spec_assert_finding = SpecAssertFinding {
        verdict: if assertion_ok { AssertionVerdict::AssertionOk } else { AssertionVerdict::AssertionWrong },
        codes: diags.iter().map(|d| d.code).collect(),
        rationale: ctx.say(Analyst::SpecAssertion, rationale),
    };

    // 3. design analyst
    let rtl_finding = assertion_ok.then(|| {
        let roots: Vec<usize> = property.consequent_signals().iter().filter_map(|s| design.signal_index(s)).collect();
        let (cone, assigns) = cone_of_influence(design, &roots, window + 1);
        let trace = &cex.trace;
        let changed = |i: usize| {
            let lo = (t0 as usize).max(1);
            (lo..=at).any(|t| trace.values[i][t] != trace.values[i][t - 1])
        };
        let mut implicated = Vec::new();
        for target in assigns {
            let a = design.driver_of(target).unwrap();
            let mut sup = Vec::new();
            a.expr.support(&mut sup);
            let sup: BTreeSet<usize> = sup.into_iter().collect();
            if sup.into_iter().any(changed) {
                implicated.push(design.describe_assignment(a));
            }
        }
        let names = design.signal_names();
        let draft = if implicated.is_empty() {
            format!("no assignment feeding {} changed in cycles {t0}..={at}", names_of(&names, &roots))
        } else {
            format!("{} feed {} and changed before cycle {at}", implicated.join(", "), names_of(&names, &roots))
        };
        RtlFinding {
            implicated,
            cone: cone.iter().map(|&i| names[i].clone()).collect(),
            rationale: ctx.say(Analyst::Design, draft),
        }
    });
    let class = class.unwrap_or(RootCauseClass::DesignDefect);

    // 4. verification analyst
    let replay = evaluate_on_trace(property, &cex.trace).violated_at == Some(at);
    let (proposed_patch, consistency, note) = match class {
        RootCauseClass::AssertionDefect | RootCauseClass::BindingDefect => {
            let mut failures = Vec::new();
            let mut chosen = None;
            for c in &patch_candidates {
                match verify_patch(c, design, ctx.depth) {
                    Ok(()) => {
                        chosen = Some(c.clone());
                        break;
                    }
                    Err(e) => failures.push(e),
                }
            }
            match chosen {
                Some(p) => (Some(p), replay, format!("patch proven at depth {}", ctx.depth)),
                None => {
                    let first = patch_candidates.first().cloned().unwrap_or_else(|| property.render());
                    let why = if failures.is_empty() { "no candidate patch".to_string() } else { failures.join("; ") };
                    (Some(first), false, why)
                }
            }
        }
        RootCauseClass::DesignDefect => {
            let ok = replay && rtl_finding.as_ref().is_some_and(|f| !f.implicated.is_empty());
            let note = if ok {
                format!("counterexample replays to cycle {at}; implicated logic changed inside the window")
            } else {
                "implicated logic does not explain the replayed violation".to_string()
            };
            (None, ok, note)
        }
        RootCauseClass::SpecMisread => {
            (None, false, "no mechanical patch; the property must be regenerated from the specification".into())
        }
    };

    Ok(RcaReport {
        cex_id: format!("{}@{}", verdict.property_id, at),
        round,
        violated_at: at,
        evidence,
        spec_assert_finding,
        rtl_finding,
        root_cause_class: class,
        proposed_patch,
        consistency,
        verification_note: ctx.say(Analyst::Verification, note),
    })
}

fn names_of(names: &[String], idx: &[usize]) -> String {
    let mut v: Vec<&str> = idx.iter().map(|&i| names[i].as_str()).collect();
    v.dedup();
    v.join(", ")
}
