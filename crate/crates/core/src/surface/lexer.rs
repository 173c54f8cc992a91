use std::fmt;

use super::ast::Nat;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Nat(Nat),
    Slash,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Colon,
    Eq,
    Dot,
    Amp,
    Arrow,
    At,
    Plus,
    Prime,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::At => f.write_str("`@`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Prime => f.write_str("`'`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: l, column: col });
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '0'..='9' => {
                let mut value: Nat = 0;
                while let Some(&d) = chars.peek() {
                    let Some(digit) = d.to_digit(10) else { break };
                    value = value
                        .checked_mul(10)
                        .and_then(|v| v.checked_add(Nat::from(digit)))
                        .ok_or_else(|| ParseError {
                            line: l,
                            column: col,
                            expected: vec!["natural number that fits in 64 bits".into()],
                            found: "oversized literal".into(),
                        })?;
                    bump!();
                }
                push(&mut out, Tok::Nat(value));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                push(&mut out, Tok::Ident(s));
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    push(&mut out, Tok::Arrow);
                } else {
                    return Err(ParseError {
                        line: l,
                        column: col,
                        expected: vec!["`->`".into()],
                        found: "`-`".into(),
                    });
                }
            }
            _ => {
                let tok = match c {
                    '/' => Tok::Slash,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '=' => Tok::Eq,
                    '.' => Tok::Dot,
                    '&' => Tok::Amp,
                    '@' => Tok::At,
                    '+' => Tok::Plus,
                    '\'' => Tok::Prime,
                    other => {
                        return Err(ParseError {
                            line: l,
                            column: col,
                            expected: vec!["a token".into()],
                            found: format!("`{other}`"),
                        })
                    }
                };
                bump!();
                push(&mut out, tok);
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}
