//! Grounded prompt context handed to agent backends.

use serde::{Deserialize, Serialize};

use super::cache::CacheEntry;
use super::grammar::SpecGrammar;
use super::rules::RuleSet;
use crate::domain::DesignModel;

pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_BUDGET: usize = 8192;

#[derive(Debug, Clone, Copy)]
pub struct PromptOptions<'a> {
    pub top_k: usize,
    /// Maximum context size in bytes.
    pub budget: usize,
    /// Used to fill rule templates; raw templates are rendered without it.
    pub design: Option<&'a DesignModel>,
}

impl Default for PromptOptions<'_> {
    fn default() -> Self {
        PromptOptions { top_k: DEFAULT_TOP_K, budget: DEFAULT_BUDGET, design: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub text: String,
    /// Cache entry ids that made it into the text.
    pub cache_ids: Vec<u64>,
    /// Set when entries were dropped or the text was cut to fit the budget.
    pub truncated: bool,
}

impl PromptContext {
    /// Append a titled task section, keeping the budget.
    pub fn with_section(mut self, title: &str, body: &str, budget: usize) -> Self {
        self.text.push_str(&format!("\n## {title}\n{body}"));
        if !body.ends_with('\n') {
            self.text.push('\n');
        }
        if self.text.len() > budget {
            cut(&mut self.text, budget);
            self.truncated = true;
        }
        self
    }
}

fn cut(text: &mut String, budget: usize) {
    let mut end = budget.min(text.len());
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    text.truncate(end);
}

fn render_entry(e: &CacheEntry) -> String {
    let mut s = format!(
        "### cache entry {} ({})\nsignature: {}\nincorrect:\n{}",
        e.id,
        e.tags.join(", "),
        e.error_signature,
        e.incorrect_snippet
    );
    if !e.incorrect_snippet.ends_with('\n') {
        s.push('\n');
    }
    s.push_str("explanation:\n");
    for (i, line) in e.explanation.iter().enumerate() {
        s.push_str(&format!("{}. {line}\n", i + 1));
    }
    s.push_str("corrected:\n");
    s.push_str(&e.corrected_snippet);
    if !e.corrected_snippet.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Spec keywords, then rules, then the first `top_k` entries (already ranked by the caller).
///
/// When the result would exceed the budget, trailing cache entries are
/// dropped first; if spec and rules alone are too long the text is cut.
pub fn render_prompt_context(
    spec: &SpecGrammar,
    entries: &[CacheEntry],
    rules: &RuleSet,
    opts: &PromptOptions,
) -> PromptContext {
    let mut head = String::from("## specification\n");
    head.push_str(&spec.render());
    head.push_str("\n## rules\n");
    for r in &rules.rules {
        let action = match opts.design {
            Some(d) => r.render_action(d),
            None => r.action.clone(),
        };
        head.push_str(&format!("- {}: {action}\n", r.id));
    }

    let mut truncated = false;
    if head.len() > opts.budget {
        cut(&mut head, opts.budget);
        return PromptContext { text: head, cache_ids: vec![], truncated: true };
    }

    let chosen: Vec<&CacheEntry> = entries.iter().take(opts.top_k).collect();
    let mut text = head;
    let mut ids = Vec::new();
    if !chosen.is_empty() {
        let title = "\n## learning cache\n";
        let mut body = String::new();
        for e in chosen {
            let block = render_entry(e);
            if text.len() + title.len() + body.len() + block.len() > opts.budget {
                truncated = true;
                break;
            }
            body.push_str(&block);
            ids.push(e.id);
        }
        if !body.is_empty() {
            text.push_str(title);
            text.push_str(&body);
        }
    }
    PromptContext { text, cache_ids: ids, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specgram::{parse_structured_spec, LearningCache};

    fn spec() -> SpecGrammar {
        parse_structured_spec("Signals: [clk, req, ack, error]\nProperty: [assert, concurrent, positive edge of clk]\nCondition: [if req is high, then ack must be high within 2 cycles unless error is high]\n").unwrap()
    }

    #[test]
    fn zero_entries_gives_spec_and_rules_only() {
        let ctx = render_prompt_context(&spec(), &[], &RuleSet::seeded(), &PromptOptions::default());
        assert!(ctx.text.starts_with("## specification\nSignals: [clk, req, ack, error]"));
        assert!(ctx.text.contains("## rules\n- R1:"));
        assert!(!ctx.text.contains("learning cache"));
        assert!(!ctx.truncated);
    }

    #[test]
    fn sections_are_ordered_and_deterministic() {
        let entries = LearningCache::seeded().entries();
        let opts = PromptOptions::default();
        let a = render_prompt_context(&spec(), &entries, &RuleSet::seeded(), &opts);
        let b = render_prompt_context(&spec(), &entries, &RuleSet::seeded(), &opts);
        assert_eq!(a, b);
        let (s, r, c) =
            (a.text.find("## spec").unwrap(), a.text.find("## rules").unwrap(), a.text.find("## learning").unwrap());
        assert!(s < r && r < c);
        assert!(a.text.contains("1. Uses negedge clk instead of posedge clk\n"));
        assert_eq!(a.cache_ids, vec![1, 2]);
    }

    #[test]
    fn budget_drops_entries_then_cuts() {
        let entries = LearningCache::seeded().entries();
        let full = render_prompt_context(&spec(), &entries, &RuleSet::seeded(), &PromptOptions::default());
        let first_only = full.text.find("### cache entry 2").unwrap();
        let opts = PromptOptions { budget: first_only, ..Default::default() };
        let ctx = render_prompt_context(&spec(), &entries, &RuleSet::seeded(), &opts);
        assert!(ctx.truncated);
        assert_eq!(ctx.cache_ids, vec![1]);
        assert!(ctx.text.len() <= first_only);

        let tiny = render_prompt_context(
            &spec(),
            &entries,
            &RuleSet::seeded(),
            &PromptOptions { budget: 10, ..Default::default() },
        );
        assert_eq!(tiny.text.len(), 10);
        assert!(tiny.truncated);
    }

    #[test]
    fn top_k_limits_entries() {
        let entries = LearningCache::seeded().entries();
        let ctx = render_prompt_context(
            &spec(),
            &entries,
            &RuleSet::seeded(),
            &PromptOptions { top_k: 1, ..Default::default() },
        );
        assert_eq!(ctx.cache_ids, vec![1]);
        assert!(!ctx.truncated);
    }
}
