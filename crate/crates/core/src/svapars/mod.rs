//! SVA subset: lexer, parser, pretty-printer, linter and canonical fixer.
//!
//! The syntax pipeline is analyze (parse + bind + lint), fix
//! ([`apply_canonical_rewrites`]) and validate ([`validate`]).

mod ast;
mod fix;
mod lexer;
mod lint;
mod parser;

use thiserror::Error;

pub use ast::{to_snake_case, BoolExpr, ClockSpec, Edge, Implication, PropertyAst, SeqExpr};
pub use fix::{apply_canonical_rewrites, apply_fix, FixError};
pub use lexer::Span;
pub use lint::{
    analyze, diagnostic_tags, diagnostics_signature, lint, validate, validate_with, Analysis, Fix, LintCode,
    LintDiagnostic,
};
pub use parser::{
    parse_document, parse_property, parse_recovering, ParsedProperty, Unsupported, UNSUPPORTED_BINARY,
    UNSUPPORTED_PREFIX,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SvaError {
    #[error("parse error at line {}, col {}: {message}", span.line, span.col)]
    ParseFailure { message: String, span: Span },
    #[error("unsupported construct '{token}' at line {}, col {}", span.line, span.col)]
    UnsupportedConstruct { token: String, span: Span },
}

impl SvaError {
    pub(crate) fn parse(message: impl Into<String>, span: Span) -> Self {
        SvaError::ParseFailure { message: message.into(), span }
    }

    pub(crate) fn unsupported(token: &str, span: Span) -> Self {
        SvaError::UnsupportedConstruct { token: token.to_string(), span }
    }

    pub fn span(&self) -> Span {
        match self {
            SvaError::ParseFailure { span, .. } | SvaError::UnsupportedConstruct { span, .. } => *span,
        }
    }
}
