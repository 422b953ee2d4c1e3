//! Error-signature normalization: strips positions and identifiers so the same
//! class of mistake maps to the same cache key across designs.

use std::sync::OnceLock;

use regex::{Captures, Regex};

/// Words kept verbatim inside quotes; anything else quoted is treated as an identifier.
const KEYWORDS: &[&str] = &[
    "unless",
    "until",
    "s_until",
    "throughout",
    "within",
    "intersect",
    "and",
    "or",
    "not",
    "implies",
    "iff",
    "disable",
    "property",
    "endproperty",
    "assert",
    "posedge",
    "negedge",
    "|->",
    "|=>",
    "##",
    "$past",
    "$rose",
    "$fell",
    "$stable",
    "$error",
    "first_match",
];

struct Patterns {
    position: Vec<Regex>,
    quoted: Regex,
    space: Regex,
    before_colon: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        position: vec![
            Regex::new(r"\s*\bat line \d+(?:,?\s*col(?:umn)? \d+)?").unwrap(),
            Regex::new(r"\s*\bat \d+:\d+\b").unwrap(),
            Regex::new(r"\s*\bline \d+(?::\d+)?").unwrap(),
            Regex::new(r"\s*\bcol(?:umn)? \d+").unwrap(),
        ],
        quoted: Regex::new(r"(`|')([^`'\s]+)(`|')").unwrap(),
        space: Regex::new(r"\s+").unwrap(),
        before_colon: Regex::new(r"\s+:").unwrap(),
    })
}

fn normalize_once(raw: &str) -> String {
    let p = patterns();
    let mut s = raw.to_lowercase();
    for re in &p.position {
        s = re.replace_all(&s, "").into_owned();
    }
    s = p
        .quoted
        .replace_all(&s, |c: &Captures| {
            let (open, word, close) = (&c[1], &c[2], &c[3]);
            if open != close || KEYWORDS.contains(&word) || word == "<id>" || !looks_like_identifier(word) {
                c[0].to_string()
            } else {
                format!("{open}<id>{close}")
            }
        })
        .into_owned();
    s = p.space.replace_all(&s, " ").into_owned();
    s = p.before_colon.replace_all(&s, ":").into_owned();
    s.trim().to_string()
}

fn looks_like_identifier(w: &str) -> bool {
    let mut c = w.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '.')
}

/// Lowercase, drop line/column positions, replace quoted identifiers by `<id>`.
/// Applied to a fixpoint, so the result is idempotent.
pub fn normalize_error_signature(raw: &str) -> String {
    let mut cur = normalize_once(raw);
    loop {
        let next = normalize_once(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_positions_keeps_keywords() {
        assert_eq!(
            normalize_error_signature("Parse error at line 12: unexpected 'unless'"),
            "parse error: unexpected 'unless'"
        );
        assert_eq!(normalize_error_signature(""), "");
        assert_eq!(normalize_error_signature("Unknown signal `ackk` at 3:14"), "unknown signal `<id>`");
        assert_eq!(normalize_error_signature("UnknownSignal :  `donee` line 4"), "unknownsignal: `<id>`");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,60}") {
            let once = normalize_error_signature(&s);
            prop_assert_eq!(normalize_error_signature(&once), once.clone());
        }

        #[test]
        fn idempotent_on_diagnostic_shaped_text(
            word in "[A-Za-z_]{1,8}",
            line in 0u32..999,
            col in 0u32..99,
        ) {
            let s = format!("Error at line {line}, col {col}: unexpected '{word}' near `{word}`");
            let once = normalize_error_signature(&s);
            prop_assert!(!once.contains(&line.to_string()) || word.contains(&line.to_string()));
            prop_assert_eq!(normalize_error_signature(&once), once.clone());
        }
    }
}
