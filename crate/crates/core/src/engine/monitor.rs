//! Property monitor used by the proof engine.
//!
//! Sequences are expanded into finite sets of alternatives; each alternative
//! is a list of `(offset, boolean)` constraints relative to its start cycle.
//! Booleans are compiled against a property-local signal table.

use std::collections::HashMap;

use crate::svapars::{BoolExpr, PropertyAst, SeqExpr};

/// Expansion cap; properties beyond it are reported as inconclusive.
pub const MAX_ALTERNATIVES: usize = 4096;

#[derive(Debug, Clone)]
pub(crate) enum CBool {
    Sig(usize),
    Const(u64),
    Not(Box<CBool>),
    And(Box<CBool>, Box<CBool>),
    Or(Box<CBool>, Box<CBool>),
    Eq(Box<CBool>, Box<CBool>),
    Ne(Box<CBool>, Box<CBool>),
    Past(Box<CBool>, u32),
    Rose(Box<CBool>),
    Fell(Box<CBool>),
    Stable(Box<CBool>),
}

impl CBool {
    fn compile(e: &BoolExpr, locals: &HashMap<String, usize>) -> CBool {
        let c = |x: &BoolExpr| Box::new(CBool::compile(x, locals));
        match e {
            BoolExpr::Sig(s) => CBool::Sig(locals[s]),
            BoolExpr::Const(v) => CBool::Const(*v),
            BoolExpr::Not(a) => CBool::Not(c(a)),
            BoolExpr::And(a, b) => CBool::And(c(a), c(b)),
            BoolExpr::Or(a, b) => CBool::Or(c(a), c(b)),
            BoolExpr::Eq(a, b) => CBool::Eq(c(a), c(b)),
            BoolExpr::Ne(a, b) => CBool::Ne(c(a), c(b)),
            BoolExpr::Past(a, n) => CBool::Past(c(a), *n),
            BoolExpr::Rose(a) => CBool::Rose(c(a)),
            BoolExpr::Fell(a) => CBool::Fell(c(a)),
            BoolExpr::Stable(a) => CBool::Stable(c(a)),
        }
    }

    /// Value at absolute cycle `at`; `get` must return 0 for negative cycles.
    pub(crate) fn value(&self, at: i64, get: &impl Fn(usize, i64) -> u64) -> u64 {
        match self {
            CBool::Sig(i) => get(*i, at),
            CBool::Const(v) => *v,
            CBool::Not(a) => (a.value(at, get) == 0) as u64,
            CBool::And(a, b) => (a.value(at, get) != 0 && b.value(at, get) != 0) as u64,
            CBool::Or(a, b) => (a.value(at, get) != 0 || b.value(at, get) != 0) as u64,
            CBool::Eq(a, b) => (a.value(at, get) == b.value(at, get)) as u64,
            CBool::Ne(a, b) => (a.value(at, get) != b.value(at, get)) as u64,
            CBool::Past(a, n) => a.value(at - *n as i64, get),
            CBool::Rose(a) => (a.value(at, get) & 1 == 1 && a.value(at - 1, get) & 1 == 0) as u64,
            CBool::Fell(a) => (a.value(at, get) & 1 == 0 && a.value(at - 1, get) & 1 == 1) as u64,
            CBool::Stable(a) => (a.value(at, get) == a.value(at - 1, get)) as u64,
        }
    }

    pub(crate) fn holds(&self, at: i64, get: &impl Fn(usize, i64) -> u64) -> bool {
        self.value(at, get) != 0
    }
}

/// One way a sequence can match: constraints `(offset, bool id)` and the end offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Alt {
    pub cons: Vec<(usize, usize)>,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Monitor {
    pub bools: Vec<CBool>,
    pub ante: Vec<Alt>,
    pub cons: Vec<Alt>,
    pub disable: Option<CBool>,
    pub shift: usize,
    pub span: usize,
    /// Samples the monitor must remember: span + lookback + 1.
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TooComplex;

fn expand(seq: &SeqExpr, locals: &HashMap<String, usize>, bools: &mut Vec<CBool>) -> Result<Vec<Alt>, TooComplex> {
    let alts = match seq {
        SeqExpr::Bool(b) => {
            bools.push(CBool::compile(b, locals));
            vec![Alt { cons: vec![(0, bools.len() - 1)], end: 0 }]
        }
        SeqExpr::Or(a, b) => {
            let mut out = expand(a, locals, bools)?;
            out.extend(expand(b, locals, bools)?);
            out
        }
        SeqExpr::Concat { head, lo, hi, tail } => {
            let heads = match head {
                Some(h) => expand(h, locals, bools)?,
                None => vec![Alt { cons: vec![], end: 0 }],
            };
            let tails = expand(tail, locals, bools)?;
            let mut out = Vec::new();
            for h in &heads {
                for d in *lo..=*hi {
                    let base = h.end + d as usize;
                    for t in &tails {
                        let mut cons = h.cons.clone();
                        cons.extend(t.cons.iter().map(|(o, b)| (base + o, *b)));
                        out.push(Alt { cons, end: base + t.end });
                        if out.len() > MAX_ALTERNATIVES {
                            return Err(TooComplex);
                        }
                    }
                }
            }
            out
        }
    };
    if alts.len() > MAX_ALTERNATIVES {
        return Err(TooComplex);
    }
    Ok(alts)
}

/// Outcome of examining the attempts that can still change at cycle `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct StepCheck {
    /// Cycle at which a violation became definite, if any.
    pub violation: Option<usize>,
    /// Some antecedent match completed at `t`.
    pub hit: bool,
}

impl Monitor {
    pub(crate) fn new(ast: &PropertyAst, locals: &HashMap<String, usize>) -> Result<Self, TooComplex> {
        let mut bools = Vec::new();
        let ante = expand(&ast.antecedent, locals, &mut bools)?;
        let cons = expand(&ast.consequent, locals, &mut bools)?;
        if ante.len().saturating_mul(cons.len()) > MAX_ALTERNATIVES * 4 {
            return Err(TooComplex);
        }
        let span = ast.span();
        Ok(Monitor {
            bools,
            ante,
            cons,
            disable: ast.disable.as_ref().map(|d| CBool::compile(d, locals)),
            shift: ast.implication.shift(),
            span,
            horizon: span + ast.lookback() + 1,
        })
    }

    /// Examine cycle `t` given samples for cycles `t - horizon + 1 ..= t`
    /// (fewer near the start of the trace). Only attempts whose outcome can
    /// depend on cycle `t` are inspected; earlier ones were settled before.
    pub(crate) fn check_at(&self, t: usize, get: &impl Fn(usize, i64) -> u64) -> StepCheck {
        let mut out = StepCheck::default();
        let first = t.saturating_sub(self.span);
        for s in first..=t {
            for a in &self.ante {
                let end = s + a.end;
                if end > t || !a.cons.iter().all(|(o, b)| self.bools[*b].holds((s + o) as i64, get)) {
                    continue;
                }
                if end == t {
                    out.hit = true;
                }
                let start = end + self.shift;
                let mut settled = end;
                let mut refuted_all = true;
                for c in &self.cons {
                    let refuted = c
                        .cons
                        .iter()
                        .filter(|(o, _)| start + o <= t)
                        .filter(|(o, b)| !self.bools[*b].holds((start + o) as i64, get))
                        .map(|(o, _)| start + o)
                        .min();
                    match refuted {
                        Some(r) => settled = settled.max(r),
                        None => {
                            refuted_all = false;
                            break;
                        }
                    }
                }
                if !refuted_all {
                    continue;
                }
                let disabled = self.disable.as_ref().is_some_and(|d| (s..=settled).any(|c| d.holds(c as i64, get)));
                if !disabled {
                    out.violation = Some(out.violation.map_or(settled, |v: usize| v.min(settled)));
                }
            }
        }
        out
    }
}
