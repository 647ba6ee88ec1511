//! Tokenizer and precedence-climbing parser for policy text.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/' | 'mod' | '%') unary)*
//! unary   := '-' unary | atom
//! atom    := INT | keyword | 'dspace' '(' STRING ')' | '(' expr ')'
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use super::ast::{BinOp, PolicyExpr, TERMINALS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(u64),
    Ident(String),
    Str(String),
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let ch = chars.next();
            if ch == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            ch
        };
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '%' => Some(Tok::Percent),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            bump(&mut chars);
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_whitespace() {
            bump(&mut chars);
        } else if c == '#' {
            while let Some(&n) = chars.peek() {
                if n == '\n' {
                    break;
                }
                bump(&mut chars);
            }
        } else if c.is_ascii_digit() {
            let mut digits = String::new();
            while let Some(&d) = chars.peek() {
                if !d.is_ascii_digit() {
                    break;
                }
                digits.push(d);
                bump(&mut chars);
            }
            let value = digits
                .parse::<u64>()
                .map_err(|_| syntax(tl, tc, format!("integer literal `{digits}` is too large")))?;
            out.push(Token {
                tok: Tok::Int(value),
                line: tl,
                column: tc,
            });
        } else if c.is_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(&d) = chars.peek() {
                if !(d.is_alphanumeric() || d == '_') {
                    break;
                }
                ident.push(d);
                bump(&mut chars);
            }
            out.push(Token {
                tok: Tok::Ident(ident),
                line: tl,
                column: tc,
            });
        } else if c == '"' {
            bump(&mut chars);
            let mut s = String::new();
            loop {
                match bump(&mut chars) {
                    Some('"') => break,
                    Some('\\') => match bump(&mut chars) {
                        Some(e @ ('"' | '\\')) => s.push(e),
                        Some(e) => {
                            return Err(syntax(tl, tc, format!("unsupported escape `\\{e}`")))
                        }
                        None => return Err(syntax(tl, tc, "unterminated string literal")),
                    },
                    Some('\n') | None => return Err(syntax(tl, tc, "unterminated string literal")),
                    Some(other) => s.push(other),
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                column: tc,
            });
        } else {
            return Err(syntax(tl, tc, format!("unexpected character `{c}`")));
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(syntax(
                t.line,
                t.column,
                format!("expected {what}, found {}", describe(&t.tok)),
            ))
        }
    }

    fn binary_op(&self) -> Option<BinOp> {
        match &self.peek().tok {
            Tok::Plus => Some(BinOp::Add),
            Tok::Minus => Some(BinOp::Sub),
            Tok::Star => Some(BinOp::Mul),
            Tok::Slash => Some(BinOp::Div),
            Tok::Percent => Some(BinOp::Mod),
            Tok::Ident(s) if s == "mod" => Some(BinOp::Mod),
            _ => None,
        }
    }

    fn expr(&mut self, min_prec: u8) -> Result<PolicyExpr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            if op.precedence() < min_prec {
                break;
            }
            self.next();
            let rhs = self.expr(op.precedence() + 1)?;
            lhs = op.build(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PolicyExpr> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(PolicyExpr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<PolicyExpr> {
        let t = self.next();
        match t.tok {
            Tok::Int(v) => Ok(PolicyExpr::IntLit(v)),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "dspace" => {
                self.expect(Tok::LParen, "`(` after dspace")?;
                let s = self.next();
                let name = match s.tok {
                    Tok::Str(n) if !n.is_empty() => n,
                    Tok::Str(_) => return Err(syntax(s.line, s.column, "empty dspace name")),
                    other => {
                        return Err(syntax(
                            s.line,
                            s.column,
                            format!("expected string literal, found {}", describe(&other)),
                        ))
                    }
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(PolicyExpr::DSpace(name))
            }
            Tok::Ident(name) => {
                // `id` is accepted as an alias of `ID`.
                let lookup = if name == "id" { "ID" } else { name.as_str() };
                TERMINALS
                    .iter()
                    .find(|(kw, _)| *kw == lookup)
                    .map(|(_, e)| e.clone())
                    .ok_or(Error::UnknownIdentifier {
                        name,
                        line: t.line,
                        column: t.column,
                    })
            }
            other => Err(syntax(
                t.line,
                t.column,
                format!("expected an expression, found {}", describe(&other)),
            )),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Int(v) => format!("integer `{v}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Percent => "`%`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses policy text into an expression tree.
pub fn parse_policy(text: &str) -> Result<PolicyExpr> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let expr = parser.expr(0)?;
    let t = parser.peek();
    if t.tok != Tok::Eof {
        return Err(syntax(
            t.line,
            t.column,
            format!("unexpected {} after expression", describe(&t.tok)),
        ));
    }
    Ok(expr)
}
