//! Direct evaluation of a property on one finite trace.
//!
//! This is deliberately written without the monitor's alternative expansion:
//! sequences are matched recursively against the trace, and it serves as the
//! independent reference the engine is tested against.

use serde::{Deserialize, Serialize};

use crate::domain::Trace;
use crate::svapars::{BoolExpr, PropertyAst, SeqExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub holds: bool,
    /// Earliest cycle at which some attempt is definitely violated.
    pub violated_at: Option<usize>,
    /// Antecedent matches completed within the trace, over all attempts.
    pub antecedent_hits: usize,
}

/// Outcome of one path through a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Path {
    Match(usize),
    Fail(usize),
    /// Needs cycles past the end of the trace.
    Open,
}

struct View<'a> {
    trace: &'a Trace,
}

impl View<'_> {
    fn sig(&self, name: &str, cycle: i64) -> u64 {
        if cycle < 0 {
            return 0;
        }
        self.trace.value(name, cycle as usize).unwrap_or(0)
    }

    fn val(&self, e: &BoolExpr, c: i64) -> u64 {
        match e {
            BoolExpr::Sig(s) => self.sig(s, c),
            BoolExpr::Const(v) => *v,
            BoolExpr::Not(a) => u64::from(self.val(a, c) == 0),
            BoolExpr::And(a, b) => u64::from(self.val(a, c) != 0 && self.val(b, c) != 0),
            BoolExpr::Or(a, b) => u64::from(self.val(a, c) != 0 || self.val(b, c) != 0),
            BoolExpr::Eq(a, b) => u64::from(self.val(a, c) == self.val(b, c)),
            BoolExpr::Ne(a, b) => u64::from(self.val(a, c) != self.val(b, c)),
            BoolExpr::Past(a, n) => self.val(a, c - i64::from(*n)),
            BoolExpr::Rose(a) => u64::from(self.val(a, c) % 2 == 1 && self.val(a, c - 1).is_multiple_of(2)),
            BoolExpr::Fell(a) => u64::from(self.val(a, c).is_multiple_of(2) && self.val(a, c - 1) % 2 == 1),
            BoolExpr::Stable(a) => u64::from(self.val(a, c) == self.val(a, c - 1)),
        }
    }

    fn truth(&self, e: &BoolExpr, c: usize) -> bool {
        self.val(e, c as i64) != 0
    }

    fn paths(&self, seq: &SeqExpr, start: usize) -> Vec<Path> {
        match seq {
            SeqExpr::Bool(b) => {
                if start >= self.trace.length {
                    vec![Path::Open]
                } else if self.truth(b, start) {
                    vec![Path::Match(start)]
                } else {
                    vec![Path::Fail(start)]
                }
            }
            SeqExpr::Or(a, b) => {
                let mut v = self.paths(a, start);
                v.extend(self.paths(b, start));
                v
            }
            SeqExpr::Concat { head, lo, hi, tail } => {
                let heads = match head {
                    Some(h) => self.paths(h, start),
                    None => vec![Path::Match(start)],
                };
                let mut out = Vec::new();
                for h in heads {
                    match h {
                        Path::Match(e) => {
                            for d in *lo..=*hi {
                                out.extend(self.paths(tail, e + d as usize));
                            }
                        }
                        other => out.push(other),
                    }
                }
                out
            }
        }
    }
}

/// Evaluate every attempt of `p` on `trace` with weak finite-trace semantics:
/// an obligation that would need cycles past the end is not a violation.
pub fn evaluate_on_trace(p: &PropertyAst, trace: &Trace) -> Evaluation {
    let view = View { trace };
    let mut hits = 0;
    let mut first: Option<usize> = None;
    for s in 0..trace.length {
        for a in view.paths(&p.antecedent, s) {
            let Path::Match(end) = a else { continue };
            hits += 1;
            let cons = view.paths(&p.consequent, end + p.implication.shift());
            if cons.iter().any(|c| !matches!(c, Path::Fail(_))) {
                continue;
            }
            let at = cons
                .iter()
                .map(|c| match c {
                    Path::Fail(t) => *t,
                    _ => unreachable!(),
                })
                .fold(end, usize::max);
            let disabled = p.disable.as_ref().is_some_and(|d| (s..=at).any(|c| view.truth(d, c)));
            if !disabled {
                first = Some(first.map_or(at, |f| f.min(at)));
            }
        }
    }
    Evaluation { holds: first.is_none(), violated_at: first, antecedent_hits: hits }
}
