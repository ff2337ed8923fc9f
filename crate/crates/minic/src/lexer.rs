//! Hand-rolled lexer.
//!
//! Comments use `/* */` only. A comment that starts and ends on the same line
//! is kept as a token so the parser can preserve it when it sits in statement
//! or top-level position; a comment spanning several lines is trivia and is
//! dropped here.

use crate::errors::SyntaxError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    CharLit(u8),
    /// Unescaped bytes without the terminating NUL.
    StrLit(Vec<u8>),
    /// Single-line comment body (text between the delimiters).
    Comment(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Amp,
    Bang,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
}

impl Tok {
    /// Short human form for diagnostics.
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::CharLit(_) => "character literal".into(),
            Tok::StrLit(_) => "string literal".into(),
            Tok::Comment(_) => "comment".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Semi => "';'".into(),
            Tok::Comma => "','".into(),
            Tok::Assign => "'='".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Percent => "'%'".into(),
            Tok::Amp => "'&'".into(),
            Tok::Bang => "'!'".into(),
            Tok::EqEq => "'=='".into(),
            Tok::NotEq => "'!='".into(),
            Tok::Lt => "'<'".into(),
            Tok::Le => "'<='".into(),
            Tok::Gt => "'>'".into(),
            Tok::Ge => "'>='".into(),
            Tok::AndAnd => "'&&'".into(),
            Tok::OrOr => "'||'".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

struct Lexer<'a> {
    b: &'a [u8],
    i: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.b.get(self.i).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.b.get(self.i + 1).copied()
    }

    fn advance(&mut self) -> Option<u8> {
        let c = self.b.get(self.i).copied()?;
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: u32, col: u32, expected: &str) -> SyntaxError {
        SyntaxError::new(line, col, expected)
    }

    /// Decode one escape after a backslash has been consumed.
    fn escape(&mut self, line: u32, col: u32) -> Result<u8, SyntaxError> {
        let c = self.advance().ok_or_else(|| self.err(line, col, "escape character"))?;
        Ok(match c {
            b'n' => b'\n',
            b't' => b'\t',
            b'r' => b'\r',
            b'0' => 0,
            b'\\' => b'\\',
            b'"' => b'"',
            b'\'' => b'\'',
            _ => return Err(self.err(line, col, "valid escape (n, t, r, 0, \\, \", ')")),
        })
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_cont(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

pub fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lx = Lexer { b: src.as_bytes(), i: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        // Skip whitespace.
        while matches!(lx.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            lx.advance();
        }
        let (line, col) = (lx.line, lx.col);
        let c = match lx.peek() {
            Some(c) => c,
            None => return Ok(out),
        };
        let tok = match c {
            b'/' if lx.peek2() == Some(b'*') => {
                lx.advance();
                lx.advance();
                let start_line = line;
                let mut text = String::new();
                loop {
                    match lx.peek() {
                        Some(b'*') if lx.peek2() == Some(b'/') => {
                            lx.advance();
                            lx.advance();
                            break;
                        }
                        Some(_) => {
                            let at = lx.i;
                            lx.advance();
                            // Copy raw bytes; source is valid UTF-8 so any
                            // multi-byte char arrives intact byte by byte.
                            text.push_str(std::str::from_utf8(&lx.b[at..lx.i]).unwrap_or("?"));
                        }
                        None => return Err(lx.err(line, col, "closing */")),
                    }
                }
                if lx.line == start_line {
                    out.push(Token { tok: Tok::Comment(text), line, col });
                }
                continue;
            }
            b'"' => {
                lx.advance();
                let mut bytes = Vec::new();
                loop {
                    match lx.peek() {
                        Some(b'"') => {
                            lx.advance();
                            break;
                        }
                        Some(b'\n') | None => return Err(lx.err(line, col, "closing '\"'")),
                        Some(b'\\') => {
                            lx.advance();
                            bytes.push(lx.escape(line, col)?);
                        }
                        Some(c) => {
                            bytes.push(c);
                            lx.advance();
                        }
                    }
                }
                Tok::StrLit(bytes)
            }
            b'\'' => {
                lx.advance();
                let v = match lx.peek() {
                    Some(b'\\') => {
                        lx.advance();
                        lx.escape(line, col)?
                    }
                    Some(b'\'') | Some(b'\n') | None => {
                        return Err(lx.err(line, col, "character"))
                    }
                    Some(c) => {
                        if !c.is_ascii() {
                            return Err(lx.err(line, col, "ASCII character"));
                        }
                        lx.advance();
                        c
                    }
                };
                if lx.peek() != Some(b'\'') {
                    return Err(lx.err(line, col, "closing '''"));
                }
                lx.advance();
                Tok::CharLit(v)
            }
            b'0'..=b'9' => {
                let mut v: u64 = 0;
                while let Some(d @ b'0'..=b'9') = lx.peek() {
                    v = v
                        .checked_mul(10)
                        .and_then(|v| v.checked_add((d - b'0') as u64))
                        .filter(|&v| v <= i64::MAX as u64)
                        .ok_or_else(|| lx.err(line, col, "integer literal in range"))?;
                    lx.advance();
                }
                Tok::Int(v as i64)
            }
            c if is_ident_start(c) => {
                let start = lx.i;
                while lx.peek().is_some_and(is_ident_cont) {
                    lx.advance();
                }
                Tok::Ident(String::from_utf8_lossy(&lx.b[start..lx.i]).into_owned())
            }
            _ => {
                lx.advance();
                match c {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b';' => Tok::Semi,
                    b',' => Tok::Comma,
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'*' => Tok::Star,
                    b'/' => Tok::Slash,
                    b'%' => Tok::Percent,
                    b'=' => {
                        if lx.peek() == Some(b'=') {
                            lx.advance();
                            Tok::EqEq
                        } else {
                            Tok::Assign
                        }
                    }
                    b'!' => {
                        if lx.peek() == Some(b'=') {
                            lx.advance();
                            Tok::NotEq
                        } else {
                            Tok::Bang
                        }
                    }
                    b'<' => {
                        if lx.peek() == Some(b'=') {
                            lx.advance();
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                    b'>' => {
                        if lx.peek() == Some(b'=') {
                            lx.advance();
                            Tok::Ge
                        } else {
                            Tok::Gt
                        }
                    }
                    b'&' => {
                        if lx.peek() == Some(b'&') {
                            lx.advance();
                            Tok::AndAnd
                        } else {
                            Tok::Amp
                        }
                    }
                    b'|' => {
                        if lx.peek() == Some(b'|') {
                            lx.advance();
                            Tok::OrOr
                        } else {
                            return Err(lx.err(line, col, "'||'"));
                        }
                    }
                    _ => return Err(lx.err(line, col, "token")),
                }
            }
        };
        out.push(Token { tok, line, col });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn punctuation_and_idents() {
        assert_eq!(
            kinds("a <= b && c != *p"),
            vec![
                Tok::Ident("a".into()),
                Tok::Le,
                Tok::Ident("b".into()),
                Tok::AndAnd,
                Tok::Ident("c".into()),
                Tok::NotEq,
                Tok::Star,
                Tok::Ident("p".into()),
            ]
        );
    }

    #[test]
    fn literals() {
        assert_eq!(
            kinds(r#"42 'x' '\n' "hi\t""#),
            vec![
                Tok::Int(42),
                Tok::CharLit(b'x'),
                Tok::CharLit(b'\n'),
                Tok::StrLit(b"hi\t".to_vec()),
            ]
        );
    }

    #[test]
    fn single_line_comment_kept_multiline_dropped() {
        assert_eq!(kinds("/* keep me */"), vec![Tok::Comment(" keep me ".into())]);
        assert_eq!(kinds("/* a\nb */ x"), vec![Tok::Ident("x".into())]);
    }

    #[test]
    fn positions_are_one_based() {
        let toks = lex("ab\n  cd").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
        assert_eq!((toks[1].line, toks[1].col), (2, 3));
    }

    #[test]
    fn errors_carry_position() {
        let e = lex("x @").unwrap_err();
        assert_eq!((e.line, e.column), (1, 3));
        let e = lex("\"abc").unwrap_err();
        assert_eq!(e.expected, "closing '\"'");
        let e = lex("/* never ends").unwrap_err();
        assert_eq!(e.expected, "closing */");
        assert!(lex("99999999999999999999").is_err());
    }
}
