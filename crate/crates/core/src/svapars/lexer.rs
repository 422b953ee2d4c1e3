use serde::{Deserialize, Serialize};

use super::SvaError;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    Number(u64),
    /// `$name`
    System(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("'{s}'"),
            Token::Number(n) => format!("'{n}'"),
            Token::System(s) => format!("'${s}'"),
            Token::Str(_) => "string literal".into(),
            Token::Punct(p) => format!("'{p}'"),
            Token::Eof => "end of input".into(),
        }
    }
}

const PUNCTS: &[&str] =
    &["|->", "|=>", "##", "&&", "||", "==", "!=", "(*", "*)", "(", ")", ";", ",", "@", "[", "]", ":", "!", "$"];

pub fn lex(text: &str) -> Result<Vec<(Token, Span)>, SvaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, '/');
            advance(&mut i, &mut line, &mut col, '*');
            loop {
                if i >= chars.len() {
                    return Err(SvaError::parse("unterminated block comment", span));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(&mut i, &mut line, &mut col, '*');
                    advance(&mut i, &mut line, &mut col, '/');
                    break;
                }
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), span));
            continue;
        }
        if c == '$' && chars.get(i + 1).is_some_and(|n| n.is_ascii_alphabetic()) {
            advance(&mut i, &mut line, &mut col, c);
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            out.push((Token::System(chars[start..i].iter().collect()), span));
            continue;
        }
        if c.is_ascii_digit() || (c == '\'' && chars.get(i + 1).is_some_and(|n| "bBdDhH".contains(*n))) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let v = parse_number(&lit).ok_or_else(|| SvaError::parse(format!("bad number '{lit}'"), span))?;
            out.push((Token::Number(v), span));
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let start = i;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\\' {
                    {
                        let ch = chars[i];
                        advance(&mut i, &mut line, &mut col, ch);
                    }
                }
                if i < chars.len() {
                    {
                        let ch = chars[i];
                        advance(&mut i, &mut line, &mut col, ch);
                    }
                }
            }
            if i >= chars.len() {
                return Err(SvaError::parse("unterminated string", span));
            }
            let s: String = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col, '"');
            out.push((Token::Str(s), span));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for ch in p.chars() {
                    advance(&mut i, &mut line, &mut col, ch);
                }
                out.push((Token::Punct(p), span));
            }
            None => return Err(SvaError::parse(format!("unexpected character '{c}'"), span)),
        }
    }
    out.push((Token::Eof, Span { line, col }));
    Ok(out)
}

/// Plain decimal or Verilog based literal (`1'b1`, `4'hA`, `'d3`).
fn parse_number(lit: &str) -> Option<u64> {
    let lit = lit.replace('_', "");
    match lit.split_once('\'') {
        None => lit.parse().ok(),
        Some((size, rest)) => {
            if !size.is_empty() {
                size.parse::<u32>().ok()?;
            }
            let mut chars = rest.chars();
            let radix = match chars.next()?.to_ascii_lowercase() {
                'b' => 2,
                'd' => 10,
                'h' => 16,
                'o' => 8,
                _ => return None,
            };
            u64::from_str_radix(chars.as_str(), radix).ok()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_operators_and_literals() {
        let toks: Vec<Token> = lex("a |-> ##[1:2] b |=> 1'b1 $past(x, 2)").unwrap().into_iter().map(|t| t.0).collect();
        assert_eq!(
            toks,
            vec![
                Token::Ident("a".into()),
                Token::Punct("|->"),
                Token::Punct("##"),
                Token::Punct("["),
                Token::Number(1),
                Token::Punct(":"),
                Token::Number(2),
                Token::Punct("]"),
                Token::Ident("b".into()),
                Token::Punct("|=>"),
                Token::Number(1),
                Token::System("past".into()),
                Token::Punct("("),
                Token::Ident("x".into()),
                Token::Punct(","),
                Token::Number(2),
                Token::Punct(")"),
                Token::Eof,
            ]
        );
    }

    #[test]
    fn tracks_positions() {
        let toks = lex("a\n  b").unwrap();
        assert_eq!(toks[1].1, Span { line: 2, col: 3 });
    }
}
