//! Recursive-descent parser for the metric expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          (right associative)
//! primary := number | variable | 'pi' | func '(' expr ')' | '(' expr ')'
//! variable:= 'x'k | 'y'k | 't' | 'u'k | 's'
//! func    := sqrt | sin | cos | sinh | cosh | exp | ln | abs
//! ```

use super::expr::{BinOp, Expr, Func, Var};
use crate::error::{FinslerError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Token, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next_token()?;
            let done = tok == Token::End;
            out.push((tok, at));
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next_token(&mut self) -> Result<(Token, usize)> {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Token::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            return Ok((Token::Ident(self.src[start..self.pos].to_string()), start));
        }
        self.pos += c.len_utf8();
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Token::Op(c),
            '(' => Token::LParen,
            ')' => Token::RParen,
            other => {
                return Err(FinslerError::Parse {
                    offset: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Token, usize)> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
        };
        let mut pos = self.pos;
        digits(&mut pos);
        if pos < bytes.len() && bytes[pos] == b'.' {
            pos += 1;
            digits(&mut pos);
        }
        if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
            let mut p = pos + 1;
            if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                p += 1;
            }
            if p < bytes.len() && bytes[p].is_ascii_digit() {
                digits(&mut p);
                pos = p;
            }
        }
        self.pos = pos;
        let text = &self.src[start..pos];
        text.parse::<f64>()
            .map(|v| (Token::Num(v), start))
            .map_err(|_| FinslerError::Parse {
                offset: start,
                message: format!("malformed number '{text}'"),
            })
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    idx: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.idx].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.idx].1
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.idx].clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn error<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(FinslerError::Parse {
            offset,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Token::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Token::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Token::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Token::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let (tok, at) = self.bump();
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_close(at)?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let Some(func) = Func::from_name(&name) else {
                        return self.error(at, format!("unknown function '{name}'"));
                    };
                    let (_, open) = self.bump();
                    let arg = self.expr()?;
                    self.expect_close(open)?;
                    return Ok(Expr::call(func, arg));
                }
                if Func::from_name(&name).is_some() {
                    return self.error(at, format!("function '{name}' needs an argument"));
                }
                self.variable(&name, at)
            }
            Token::End => self.error(at, "unexpected end of input"),
            Token::RParen => self.error(at, "unexpected ')'"),
            Token::Op(c) => self.error(at, format!("unexpected operator '{c}'")),
        }
    }

    fn expect_close(&mut self, open: usize) -> Result<()> {
        if *self.peek() == Token::RParen {
            self.bump();
            Ok(())
        } else {
            self.error(self.offset(), format!("expected ')' to close '(' at byte {open}"))
        }
    }

    fn variable(&self, name: &str, at: usize) -> Result<Expr> {
        match name {
            "t" if self.n >= 1 => return Ok(Expr::Var(Var::T)),
            "s" => return Ok(Expr::Var(Var::S)),
            "pi" => return Ok(Expr::Pi),
            _ => {}
        }
        let (head, digits) = name.split_at(1);
        let index: Option<usize> = if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            digits.parse().ok()
        } else {
            None
        };
        let (Some(k), Some(kind)) = (index, head.chars().next()) else {
            return self.error(at, format!("unknown identifier '{name}'"));
        };
        let var = match kind {
            'x' => Var::X(k),
            'y' => Var::Y(k),
            'u' => Var::U(k),
            _ => return self.error(at, format!("unknown identifier '{name}'")),
        };
        let min = if kind == 'u' { 2 } else { 1 };
        if k < min {
            return self.error(at, format!("index of '{name}' must be at least {min}"));
        }
        if k > self.n {
            return self.error(at, format!("'{name}' exceeds the declared dimension {}", self.n));
        }
        Ok(Expr::Var(var))
    }
}

/// Parse `text` as an expression over a chart of dimension `n`.
pub fn parse(text: &str, n: usize) -> Result<Expr> {
    let tokens = Lexer::tokenize(text)?;
    let mut p = Parser { tokens, idx: 0, n };
    let e = p.expr()?;
    if *p.peek() != Token::End {
        return p.error(p.offset(), "unexpected trailing input");
    }
    Ok(e)
}

/// Parse a profile expression, a function of `s` only.
pub fn parse_profile(text: &str) -> Result<Expr> {
    let e = parse(text, 0)?;
    Ok(e)
}
