//! Closed-form expressions in the variables `t` and `x`.
//!
//! Right-hand sides, periodic parts, and remainders are supplied as text and
//! parsed into small ASTs. The grammar has the usual precedence: `^` binds
//! tightest and is right-associative, then unary minus, then `*` `/`, then
//! `+` `-`. Whitespace is ignored. There is no implicit multiplication:
//! `2t` is a syntax error.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sqrt,
    Exp,
    Log,
    Abs,
    Floor,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Floor => "floor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("at byte {position}: {message} (expected {expected})")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
    pub expected: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{message} at node {path} (operand {operand})")]
pub struct EvalError {
    /// Slash-separated child indices from the root to the offending node.
    pub path: String,
    pub message: String,
    pub operand: f64,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => return self.lex_number(start),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => return self.lex_ident(start),
            _ => {
                return Err(ParseError {
                    position: start,
                    message: format!("unexpected character `{}`", c as char),
                    expected: "number, identifier, operator, or parenthesis".into(),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let mut saw_digit = false;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
            saw_digit = true;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
                saw_digit = true;
            }
        }
        if !saw_digit {
            return Err(ParseError {
                position: start,
                message: "malformed number".into(),
                expected: "digit".into(),
            });
        }
        // Optional exponent: 4e5, 1.2e-3. A bare `e` after the digits only
        // counts as an exponent when followed by digits (possibly signed);
        // otherwise it is left for the next token (e.g. `2*e`).
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mut probe = self.pos + 1;
            if probe < self.src.len() && (self.src[probe] == b'+' || self.src[probe] == b'-') {
                probe += 1;
            }
            if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError {
            position: start,
            message: format!("cannot parse number `{text}`"),
            expected: "floating-point literal".into(),
        })?;
        Ok((Tok::Num(value), start))
    }

    fn lex_ident(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok((Tok::Ident(text.to_string()), start))
    }
}

// ---------------------------------------------------------------------------
// Parser (recursive descent with precedence climbing)
// ---------------------------------------------------------------------------

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (tok, tok_pos) = lexer.next()?;
        Ok(Parser {
            lexer,
            tok,
            tok_pos,
        })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, pos) = self.lexer.next()?;
        self.tok = tok;
        self.tok_pos = pos;
        Ok(())
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance()?;
            let rhs = self.parse_term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance()?;
            let rhs = self.parse_unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Minus {
            self.advance()?;
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_atom()?;
        if self.tok == Tok::Caret {
            self.advance()?;
            // Right-associative; the exponent may carry a unary minus.
            let exponent = self.parse_unary_in_exponent()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_unary_in_exponent(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Minus {
            self.advance()?;
            let inner = self.parse_unary_in_exponent()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                let pos = self.tok_pos;
                self.advance()?;
                match name.as_str() {
                    "t" => Ok(Expr::Var(Var::T)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "pi" => Ok(Expr::Const(Constant::Pi)),
                    "e" => Ok(Expr::Const(Constant::E)),
                    "sin" | "cos" | "tan" | "sqrt" | "exp" | "log" | "abs" | "floor" => {
                        let func = match name.as_str() {
                            "sin" => Func::Sin,
                            "cos" => Func::Cos,
                            "tan" => Func::Tan,
                            "sqrt" => Func::Sqrt,
                            "exp" => Func::Exp,
                            "log" => Func::Log,
                            "abs" => Func::Abs,
                            _ => Func::Floor,
                        };
                        if self.tok != Tok::LParen {
                            return Err(ParseError {
                                position: self.tok_pos,
                                message: format!("function `{name}` requires an argument list"),
                                expected: "`(`".into(),
                            });
                        }
                        self.advance()?;
                        let arg = self.parse_expr()?;
                        if self.tok != Tok::RParen {
                            return Err(ParseError {
                                position: self.tok_pos,
                                message: "unclosed function argument".into(),
                                expected: "`)`".into(),
                            });
                        }
                        self.advance()?;
                        Ok(Expr::Call(func, Box::new(arg)))
                    }
                    _ => Err(ParseError {
                        position: pos,
                        message: format!("unknown identifier `{name}`"),
                        expected: "t, x, pi, e, or a builtin function".into(),
                    }),
                }
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.parse_expr()?;
                if self.tok != Tok::RParen {
                    return Err(ParseError {
                        position: self.tok_pos,
                        message: "unclosed parenthesis".into(),
                        expected: "`)`".into(),
                    });
                }
                self.advance()?;
                Ok(inner)
            }
            _ => Err(ParseError {
                position: self.tok_pos,
                message: format!("unexpected token {:?}", self.tok),
                expected: "number, identifier, `-`, or `(`".into(),
            }),
        }
    }
}

/// Parses an expression in the variables `t` and `x`.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError {
            position: 0,
            message: "empty expression".into(),
            expected: "expression".into(),
        });
    }
    let mut parser = Parser::new(src)?;
    let expr = parser.parse_expr()?;
    if parser.tok != Tok::Eof {
        return Err(ParseError {
            position: parser.tok_pos,
            message: format!("trailing input {:?}", parser.tok),
            expected: "end of input".into(),
        });
    }
    Ok(expr)
}

impl Expr {
    /// IEEE double evaluation. Domain violations (log of a non-positive
    /// value, sqrt of a negative value, division by zero, non-finite
    /// results) raise errors instead of silently producing NaN.
    pub fn eval(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        self.eval_at(t, x, &mut String::new())
    }

    fn eval_at(&self, t: f64, x: f64, path: &mut String) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Num(v) => *v,
            Expr::Const(Constant::Pi) => std::f64::consts::PI,
            Expr::Const(Constant::E) => std::f64::consts::E,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X) => x,
            Expr::Neg(inner) => {
                path.push_str("/0");
                let v = inner.eval_at(t, x, path)?;
                path.truncate(path.len() - 2);
                -v
            }
            Expr::Bin(op, lhs, rhs) => {
                path.push_str("/0");
                let a = lhs.eval_at(t, x, path)?;
                path.truncate(path.len() - 2);
                path.push_str("/1");
                let b = rhs.eval_at(t, x, path)?;
                path.truncate(path.len() - 2);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(err_here(path, "division by zero", a));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        // Integer exponents use powi so that e.g. pi^2
                        // evaluates as pi*pi, matching hand-coded forms.
                        if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                            a.powi(b as i32)
                        } else {
                            a.powf(b)
                        }
                    }
                }
            }
            Expr::Call(func, arg) => {
                path.push_str("/0");
                let v = arg.eval_at(t, x, path)?;
                path.truncate(path.len() - 2);
                match func {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.tan(),
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(err_here(path, "sqrt of negative value", v));
                        }
                        v.sqrt()
                    }
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(err_here(path, "log of non-positive value", v));
                        }
                        v.ln()
                    }
                    Func::Abs => v.abs(),
                    Func::Floor => v.floor(),
                }
            }
        };
        if !value.is_finite() {
            return Err(err_here(path, "non-finite result", value));
        }
        Ok(value)
    }

    /// Canonical fully parenthesized form; `parse(format_expr(e))` is
    /// structurally equal to `e`.
    pub fn format(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        match self {
            Expr::Num(v) => {
                use fmt::Write;
                write!(out, "{v}").unwrap();
            }
            Expr::Const(Constant::Pi) => out.push_str("pi"),
            Expr::Const(Constant::E) => out.push('e'),
            Expr::Var(Var::T) => out.push('t'),
            Expr::Var(Var::X) => out.push('x'),
            Expr::Neg(inner) => {
                out.push_str("(-");
                inner.write(out);
                out.push(')');
            }
            Expr::Bin(op, lhs, rhs) => {
                out.push('(');
                lhs.write(out);
                out.push(match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                });
                rhs.write(out);
                out.push(')');
            }
            Expr::Call(func, arg) => {
                out.push_str(func.name());
                out.push('(');
                arg.write(out);
                out.push(')');
            }
        }
    }

    /// Rewrites every occurrence of `t` as `t + h`, so the result evaluates
    /// the original expression at shifted time.
    pub fn shift_time(&self, h: f64) -> Expr {
        if h == 0.0 {
            return self.clone();
        }
        self.replace_time(&Expr::Bin(
            BinOp::Add,
            Box::new(Expr::Var(Var::T)),
            Box::new(Expr::Num(h)),
        ))
    }

    /// Substitutes `replacement` for every occurrence of `t`.
    pub fn replace_time(&self, replacement: &Expr) -> Expr {
        match self {
            Expr::Var(Var::T) => replacement.clone(),
            Expr::Num(_) | Expr::Const(_) | Expr::Var(Var::X) => self.clone(),
            Expr::Neg(inner) => Expr::Neg(Box::new(inner.replace_time(replacement))),
            Expr::Bin(op, lhs, rhs) => Expr::Bin(
                *op,
                Box::new(lhs.replace_time(replacement)),
                Box::new(rhs.replace_time(replacement)),
            ),
            Expr::Call(func, arg) => Expr::Call(*func, Box::new(arg.replace_time(replacement))),
        }
    }
}

fn err_here(path: &str, message: &str, operand: f64) -> EvalError {
    EvalError {
        path: if path.is_empty() {
            "/".to_string()
        } else {
            path.to_string()
        },
        message: message.to_string(),
        operand,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}
