//! Rulebook spec grammar, error signatures, rules, the learning cache and
//! prompt-context rendering.

mod cache;
mod grammar;
mod prompt;
mod rules;
mod signature;

pub use cache::{seed_entries, CacheEntry, CacheError, LearningCache, NewEntry, Origin};
pub use grammar::{parse_structured_spec, validate_against_design, SourceSpan, SpecDiagnostic, SpecError, SpecGrammar};
pub use prompt::{render_prompt_context, PromptContext, PromptOptions, DEFAULT_BUDGET, DEFAULT_TOP_K};
pub use rules::{Rule, RuleScope, RuleSet, RuleTrigger};
pub use signature::normalize_error_signature;
