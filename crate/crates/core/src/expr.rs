//! Expression micro-grammar, version 1.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'i' | variable | func '(' expr ')' | '(' expr ')'
//! func   := 'conj' | 'abs2' | 're' | 'im'
//! ```
//!
//! Variables are `w` (alias of `w1`), `w1`..`w9` for affine direction
//! coordinates and `z1`..`z9` for ambient coordinates. `abs2(e)` expands to
//! `e * conj(e)`, `re(e)` to `(e + conj(e)) / 2` and `im(e)` to
//! `(e - conj(e)) / 2i`. Derivatives are taken symbolically in the Wirtinger
//! sense, treating a variable and its conjugate as independent.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const GRAMMAR_VERSION: u32 = 1;

/// Which variable family an expression is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarFamily {
    /// `w1..wk` (and `w` when k = 1).
    Affine(usize),
    /// `z1..zk`.
    Ambient(usize),
}

impl VarFamily {
    pub fn count(&self) -> usize {
        match *self {
            VarFamily::Affine(k) | VarFamily::Ambient(k) => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Var(usize),
    Conj(Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

fn c(re: f64, im: f64) -> Expr {
    Expr::Const(Complex64::new(re, im))
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == Complex64::new(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == Complex64::new(1.0, 0.0))
    }

    fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => Expr::neg(b),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (a, _) if a.is_zero() => c(0.0, 0.0),
            (_, b) if b.is_zero() => c(0.0, 0.0),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    fn conj(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(x.conj()),
            Expr::Conj(inner) => *inner,
            a => Expr::Conj(Box::new(a)),
        }
    }

    fn pow(a: Expr, p: u32) -> Expr {
        match (a, p) {
            (_, 0) => c(1.0, 0.0),
            (a, 1) => a,
            (Expr::Const(x), p) => Expr::Const(x.powu(p)),
            (a, p) => Expr::Pow(Box::new(a), p),
        }
    }

    pub fn eval(&self, vars: &[Complex64]) -> Complex64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(k) => vars[*k],
            Expr::Conj(e) => e.eval(vars).conj(),
            Expr::Neg(e) => -e.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Pow(e, p) => e.eval(vars).powu(*p),
        }
    }

    /// Wirtinger derivative with respect to variable `k` (`anti = false`) or
    /// its conjugate (`anti = true`).
    pub fn diff(&self, k: usize, anti: bool) -> Expr {
        match self {
            Expr::Const(_) => c(0.0, 0.0),
            Expr::Var(j) => {
                if *j == k && !anti {
                    c(1.0, 0.0)
                } else {
                    c(0.0, 0.0)
                }
            }
            Expr::Conj(e) => Expr::conj(e.diff(k, !anti)),
            Expr::Neg(e) => Expr::neg(e.diff(k, anti)),
            Expr::Add(a, b) => Expr::add(a.diff(k, anti), b.diff(k, anti)),
            Expr::Sub(a, b) => Expr::sub(a.diff(k, anti), b.diff(k, anti)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(k, anti), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(k, anti)),
            ),
            Expr::Pow(e, p) => Expr::mul(
                Expr::mul(c(*p as f64, 0.0), Expr::pow((**e).clone(), p - 1)),
                e.diff(k, anti),
            ),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "({}+{}*i)", v.re, v.im),
            Expr::Var(k) => write!(f, "v{}", k + 1),
            Expr::Conj(e) => write!(f, "conj({e})"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Pow(e, p) => write!(f, "({e})^{p}"),
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug)]
pub struct Formula {
    source: String,
    family: VarFamily,
    expr: Expr,
}

impl Formula {
    pub fn parse(source: &str, family: VarFamily) -> Result<Formula> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, family };
        let expr = p.expr()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(Error::Expr { pos: t.pos, msg: format!("unexpected token {:?}", t.kind) });
        }
        Ok(Formula { source: source.to_string(), family, expr })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn family(&self) -> VarFamily {
        self.family
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, vars: &[Complex64]) -> Complex64 {
        debug_assert_eq!(vars.len(), self.family.count());
        self.expr.eval(vars)
    }

    /// Symbolic Wirtinger derivative, returned as a bare expression.
    pub fn diff(&self, k: usize, anti: bool) -> Expr {
        self.expr.diff(k, anti)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match ch {
            '+' => TokKind::Plus,
            '-' => TokKind::Minus,
            '*' => TokKind::Star,
            '^' => TokKind::Caret,
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len() && ((bytes[j] as char).is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && (bytes[k] as char).is_ascii_digit() {
                        while k < bytes.len() && (bytes[k] as char).is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr { pos: start, msg: format!("bad number {text:?}") })?;
                i = j - 1;
                TokKind::Num(v)
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < bytes.len() && (bytes[j] as char).is_ascii_alphanumeric() {
                    j += 1;
                }
                let text = src[i..j].to_string();
                i = j - 1;
                TokKind::Ident(text)
            }
            other => {
                return Err(Error::Expr { pos: start, msg: format!("unexpected character {other:?}") })
            }
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    family: VarFamily,
}

impl Parser {
    fn peek(&self) -> Option<&TokKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.pos).unwrap_or(usize::MAX)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expr { pos: self.here(), msg: msg.into() })
    }

    fn expect(&mut self, k: TokKind) -> Result<()> {
        if self.peek() == Some(&k) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {k:?}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(TokKind::Plus) => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(TokKind::Minus) => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&TokKind::Star) {
            self.pos += 1;
            lhs = Expr::mul(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&TokKind::Minus) {
            self.pos += 1;
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&TokKind::Caret) {
            self.pos += 1;
            match self.peek() {
                Some(TokKind::Num(v)) if *v >= 0.0 && v.fract() == 0.0 && *v <= 64.0 => {
                    let p = *v as u32;
                    self.pos += 1;
                    return Ok(Expr::pow(base, p));
                }
                _ => return self.err("exponent must be an integer literal in 0..=64"),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = match self.tokens.get(self.pos) {
            Some(t) => t.clone(),
            None => return self.err("unexpected end of expression"),
        };
        self.pos += 1;
        match tok.kind {
            TokKind::Num(v) => Ok(c(v, 0.0)),
            TokKind::LParen => {
                let e = self.expr()?;
                self.expect(TokKind::RParen)?;
                Ok(e)
            }
            TokKind::Ident(name) => match name.as_str() {
                "i" => Ok(c(0.0, 1.0)),
                "conj" | "abs2" | "re" | "im" => {
                    self.expect(TokKind::LParen)?;
                    let e = self.expr()?;
                    self.expect(TokKind::RParen)?;
                    Ok(match name.as_str() {
                        "conj" => Expr::conj(e),
                        "abs2" => Expr::mul(e.clone(), Expr::conj(e)),
                        "re" => Expr::mul(c(0.5, 0.0), Expr::add(e.clone(), Expr::conj(e))),
                        _ => Expr::mul(c(0.0, -0.5), Expr::sub(e.clone(), Expr::conj(e))),
                    })
                }
                _ => self.variable(&name, tok.pos).map(Expr::Var),
            },
            other => {
                self.pos -= 1;
                self.err(format!("unexpected token {other:?}"))
            }
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<usize> {
        let (prefix, count) = match self.family {
            VarFamily::Affine(k) => ('w', k),
            VarFamily::Ambient(k) => ('z', k),
        };
        let bad = || Error::Expr {
            pos,
            msg: format!("unknown variable {name:?} (expected {prefix}1..{prefix}{count})"),
        };
        let mut chars = name.chars();
        if chars.next() != Some(prefix) {
            return Err(bad());
        }
        let rest: String = chars.collect();
        let idx = if rest.is_empty() {
            1
        } else {
            rest.parse::<usize>().map_err(|_| bad())?
        };
        if idx == 0 || idx > count || (rest.is_empty() && count != 1) {
            return Err(bad());
        }
        Ok(idx - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_and_evaluates_abs2() {
        let f = Formula::parse("abs2(w)", VarFamily::Affine(1)).unwrap();
        assert!((f.eval(&[z(0.3, 0.4)]) - z(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn wirtinger_derivatives_of_abs2() {
        let f = Formula::parse("abs2(w)", VarFamily::Affine(1)).unwrap();
        let w = z(0.3, -0.2);
        assert!((f.diff(0, true).eval(&[w]) - w).norm() < 1e-15);
        assert!((f.diff(0, false).eval(&[w]) - w.conj()).norm() < 1e-15);
    }

    #[test]
    fn holomorphic_expression_has_zero_antiderivative() {
        let f = Formula::parse("w^3 + 2*w - i", VarFamily::Affine(1)).unwrap();
        assert!(f.diff(0, true).is_zero());
    }

    #[test]
    fn precedence_and_unary_minus() {
        let f = Formula::parse("-2*z1^2 + 3 - z2", VarFamily::Ambient(2)).unwrap();
        let v = f.eval(&[z(1.0, 1.0), z(0.5, 0.0)]);
        assert!((v - (z(-2.0, 0.0) * z(1.0, 1.0).powu(2) + 2.5)).norm() < 1e-14);
    }

    #[test]
    fn re_and_im_helpers() {
        let f = Formula::parse("re(z1^2) + im(z2)", VarFamily::Ambient(2)).unwrap();
        let a = z(0.3, 0.7);
        let v = f.eval(&[a, z(0.1, -0.4)]);
        assert!((v - z((a * a).re - 0.4, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rejects_unknown_variables_and_garbage() {
        assert!(Formula::parse("w", VarFamily::Affine(2)).is_err());
        assert!(Formula::parse("z3", VarFamily::Ambient(2)).is_err());
        assert!(Formula::parse("w +", VarFamily::Affine(1)).is_err());
        assert!(Formula::parse("w $ 2", VarFamily::Affine(1)).is_err());
        assert!(Formula::parse("w^0.5", VarFamily::Affine(1)).is_err());
    }
}
