//! Tokens of the SQL subset.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    /// Identifier; `quoted` identifiers never match keywords.
    Ident { text: String, quoted: bool },
    Number(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const SYMBOLS: [&str; 17] = ["<>", "!=", "<=", ">=", "=", "<", ">", "(", ")", ",", ".", ";", "+", "-", "*", "/", "%"];

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, column, message: String| Error::SqlSyntax { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident { text: chars[start..i].iter().collect(), quoted: false }
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if c == '\'' || c == '"' {
            let mut text = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err(start_line, start_col, "unterminated literal".into())),
                    Some(&q) if q == c && chars.get(i + 1) == Some(&c) => {
                        text.push(c);
                        i += 2;
                    }
                    Some(&q) if q == c => {
                        i += 1;
                        break;
                    }
                    Some(&'\n') => return Err(err(start_line, start_col, "line break inside a literal".into())),
                    Some(&q) => {
                        text.push(q);
                        i += 1;
                    }
                }
            }
            if c == '\'' {
                Tok::Str(text)
            } else {
                Tok::Ident { text, quoted: true }
            }
        } else if let Some(s) = SYMBOLS.iter().find(|s| chars[i..].iter().take(s.len()).copied().eq(s.chars())) {
            i += s.len();
            Tok::Sym(s)
        } else {
            return Err(err(line, col, format!("unexpected character `{c}`")));
        };
        col += i - start;
        out.push(Token { tok, line: start_line, column: start_col });
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let t = tokenize("SELECT R.A\n  FROM \"my t\" WHERE x <> 'it''s' -- note\n AND y >= 0.5").unwrap();
        let toks: Vec<_> = t.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(toks[1], Tok::Ident { text: "R".into(), quoted: false });
        assert_eq!(toks[2], Tok::Sym("."));
        assert_eq!(toks[5], Tok::Ident { text: "my t".into(), quoted: true });
        assert_eq!(toks[8], Tok::Sym("<>"));
        assert_eq!(toks[9], Tok::Str("it's".into()));
        assert_eq!(toks[13], Tok::Number("0.5".into()));
        assert_eq!((t[4].line, t[4].column), (2, 3));
    }

    #[test]
    fn bad_character() {
        let e = tokenize("SELECT #").unwrap_err();
        assert!(e.to_string().contains("column 8"), "{e}");
    }
}
