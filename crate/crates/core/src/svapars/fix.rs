//! Canonical fixer: applies the mechanical rewrite attached to each diagnostic.

use thiserror::Error;

use super::ast::{to_snake_case, PropertyAst};
use super::lint::{Fix, LintCode, LintDiagnostic};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixError {
    /// Some diagnostics have no mechanical rewrite; `partial` carries every fix that did apply.
    #[error("no mechanical rewrite for {}", codes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    Unfixable { codes: Vec<LintCode>, partial: Box<PropertyAst> },
}

pub fn apply_fix(ast: &mut PropertyAst, fix: &Fix) {
    match fix {
        Fix::SetClock { clock } => ast.clock = clock.clone(),
        Fix::SetWindow { cycles } => {
            let n = *cycles;
            ast.consequent.map_delays(&mut |lo, hi| {
                if lo < hi && hi != n {
                    (lo.min(n), n)
                } else {
                    (lo, hi)
                }
            });
        }
        Fix::AddDisable { expr } => {
            if ast.disable.is_none() {
                ast.disable = Some(expr.clone());
            }
        }
        Fix::RenameSignal { from, to } => ast.rename_signal(from, to),
    }
}

/// Apply every attached fix in diagnostic order and normalize the name to
/// lower_snake_case. Diagnostics without a fix are reported as unfixable.
pub fn apply_canonical_rewrites(ast: &PropertyAst, diagnostics: &[LintDiagnostic]) -> Result<PropertyAst, FixError> {
    let mut out = ast.clone();
    let mut unfixable = Vec::new();
    for d in diagnostics {
        match &d.fix {
            Some(f) => apply_fix(&mut out, f),
            None => {
                if !unfixable.contains(&d.code) {
                    unfixable.push(d.code);
                }
            }
        }
    }
    out.name = to_snake_case(&out.name);
    if unfixable.is_empty() {
        Ok(out)
    } else {
        Err(FixError::Unfixable { codes: unfixable, partial: Box::new(out) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::load_design;
    use crate::specgram::RuleSet;
    use crate::svapars::{lint, parse_property};

    #[test]
    fn adds_reset_disable() {
        let d = load_design(include_str!("../../fixtures/encoder.dsn")).unwrap();
        let ast = parse_property(
            "property done_signal_validity; @(posedge clk) (i_start && !enc_done) |=> !o_done; endproperty",
        )
        .unwrap();
        let diags = lint(&ast, &d, None, &RuleSet::seeded());
        let fixed = apply_canonical_rewrites(&ast, &diags).unwrap();
        assert_eq!(fixed.disable.as_ref().unwrap().to_string(), "!rst_async_n");
        assert!(lint(&fixed, &d, None, &RuleSet::seeded()).is_empty());
    }

    #[test]
    fn no_diagnostics_is_identity() {
        let ast = parse_property("property p; @(posedge clk) a |-> b; endproperty").unwrap();
        assert_eq!(apply_canonical_rewrites(&ast, &[]).unwrap(), ast);
    }

    #[test]
    fn semantic_mismatch_is_unfixable() {
        let ast = parse_property("property BadName; @(posedge clk) a |-> b; endproperty").unwrap();
        let diag = LintDiagnostic {
            code: LintCode::SemanticMismatch,
            message: "x".into(),
            span: Default::default(),
            suggested_rewrite: None,
            fix: None,
        };
        match apply_canonical_rewrites(&ast, &[diag]) {
            Err(FixError::Unfixable { codes, partial }) => {
                assert_eq!(codes, [LintCode::SemanticMismatch]);
                assert_eq!(partial.name, "bad_name");
            }
            other => panic!("{other:?}"),
        }
    }
}
