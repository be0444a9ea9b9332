//! Macroscopic profiles γ:[0,1]→ℝ written in a tiny expression language.
//!
//! ```text
//! expr := const(c) | affine(a,b) | cos(a,b,k) | clamp01(expr) | sum(expr,expr)
//! ```
//!
//! `affine(a,b)` is a+bu and `cos(a,b,k)` is a+b·cos(πku). Whitespace is ignored
//! and reals may use scientific notation. Parse errors carry a 1-based column.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ModelKind, Regime};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Affine(f64, f64),
    Cos(f64, f64, f64),
    Clamp01(Box<Expr>),
    Sum(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Affine(a, b) => a + b * u,
            Expr::Cos(a, b, k) => a + b * (PI * k * u).cos(),
            Expr::Clamp01(e) => e.eval(u).clamp(0.0, 1.0),
            Expr::Sum(l, r) => l.eval(u) + r.eval(u),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "const({c:?})"),
            Expr::Affine(a, b) => write!(f, "affine({a:?},{b:?})"),
            Expr::Cos(a, b, k) => write!(f, "cos({a:?},{b:?},{k:?})"),
            Expr::Clamp01(e) => write!(f, "clamp01({e})"),
            Expr::Sum(l, r) => write!(f, "sum({l},{r})"),
        }
    }
}

/// A parsed profile. Test functions H use the same type without density validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    expr: Expr,
}

/// Grid used to check pointwise constraints on a profile.
const CHECK_POINTS: usize = 4096;

impl Profile {
    pub fn parse(text: &str) -> Result<Profile> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Profile { expr })
    }

    pub fn from_expr(expr: Expr) -> Profile {
        Profile { expr }
    }

    pub fn constant(c: f64) -> Profile {
        Profile { expr: Expr::Const(c) }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.expr.eval(u)
    }

    /// Values at the bulk grid x/N, x = 1..N.
    pub fn on_bulk_grid(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|x| self.eval(x as f64 / n as f64)).collect()
    }

    fn extremes(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=CHECK_POINTS {
            let v = self.eval(i as f64 / CHECK_POINTS as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Enforces the range constraints of an initial density for `kind` at exponent `theta`.
    pub fn validate_density(&self, kind: ModelKind, theta: f64) -> Result<()> {
        let (lo, hi) = self.extremes();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::input(format!("profile {self} is not finite on [0,1]")));
        }
        if lo < 0.0 {
            return Err(Error::input(format!("profile {self} is negative somewhere on [0,1] (min {lo})")));
        }
        if kind == ModelKind::Sep {
            if hi > 1.0 {
                return Err(Error::input(format!("SEP profile {self} exceeds 1 (max {hi})")));
            }
            let g0 = self.eval(0.0);
            if Regime::of(theta) == Regime::Critical && !(g0 > 0.0 && g0 < 1.0) {
                return Err(Error::input(format!("SEP at theta=1 needs 0 < gamma(0) < 1, got {g0}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Profile> {
        Profile::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { pos: self.pos + 1, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    fn ident(&mut self) -> Result<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a profile form such as const(...)"));
        }
        Ok((start, String::from_utf8_lossy(&self.src[start..self.pos]).to_ascii_lowercase()))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos > s
        };
        if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
            self.pos += 1;
        }
        let mut any = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            any |= digits(self);
        }
        if !any {
            self.pos = start;
            return Err(self.error("expected a number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if !digits(self) {
                self.pos = mark;
                return Err(self.error("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| Error::Parse { pos: start + 1, msg: format!("bad number '{text}'") })?;
        if !v.is_finite() {
            return Err(Error::Parse { pos: start + 1, msg: format!("number '{text}' is not finite") });
        }
        Ok(v)
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>> {
        self.expect(b'(')?;
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            if i > 0 {
                self.expect(b',')?;
            }
            out.push(self.number()?);
        }
        self.expect(b')')?;
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr> {
        let (start, name) = self.ident()?;
        match name.as_str() {
            "const" => {
                let v = self.numbers(1)?;
                Ok(Expr::Const(v[0]))
            }
            "affine" => {
                let v = self.numbers(2)?;
                Ok(Expr::Affine(v[0], v[1]))
            }
            "cos" => {
                let v = self.numbers(3)?;
                Ok(Expr::Cos(v[0], v[1], v[2]))
            }
            "clamp01" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Clamp01(Box::new(e)))
            }
            "sum" => {
                self.expect(b'(')?;
                let l = self.expr()?;
                self.expect(b',')?;
                let r = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Sum(Box::new(l), Box::new(r)))
            }
            _ => Err(Error::Parse { pos: start + 1, msg: format!("unknown profile form '{name}'") }),
        }
    }
}
