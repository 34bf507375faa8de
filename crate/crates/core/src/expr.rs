//! Compiles library term names such as `x1^3`, `sin(x2)` or `x1*x2` into
//! evaluators over a state vector and a scalar control input.
//!
//! Grammar (usual precedence, `^` binds tightest and is right associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'u' | 'x' index | 'pi' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! State variables are 1-based (`x1` is the first component).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot parse term `{input}` at offset {offset}: {message}")]
pub struct ParseError {
    pub input: String,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Atan,
    Tanh,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "atan" | "arctan" => Func::Atan,
            "tanh" => Func::Tanh,
            "sign" | "sgn" => Func::Sign,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Atan => v.atan(),
            Func::Tanh => v.tanh(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Expr {
    Const(f64),
    State(usize),
    Input,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluates the expression. Out-of-range state indices yield NaN, which
    /// the library reports as a non-finite result.
    pub(crate) fn eval(&self, x: &[f64], u: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::State(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Input => u,
            Expr::Neg(a) => -a.eval(x, u),
            Expr::Add(a, b) => a.eval(x, u) + b.eval(x, u),
            Expr::Sub(a, b) => a.eval(x, u) - b.eval(x, u),
            Expr::Mul(a, b) => a.eval(x, u) * b.eval(x, u),
            Expr::Div(a, b) => a.eval(x, u) / b.eval(x, u),
            Expr::Pow(a, b) => {
                let base = a.eval(x, u);
                match **b {
                    Expr::Const(e) if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 => base.powi(e as i32),
                    _ => base.powf(b.eval(x, u)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, u)),
        }
    }

    /// Largest 0-based state index referenced, if any.
    pub(crate) fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Input => None,
            Expr::State(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_state_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                match (a.max_state_index(), b.max_state_index()) {
                    (Some(p), Some(q)) => Some(p.max(q)),
                    (p, q) => p.or(q),
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { input: self.src.to_string(), offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        // optional exponent
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError { input: self.src.to_string(), offset: start, message: "invalid number".into() })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let ident = &self.src[start..self.pos];
        if ident == "u" {
            return Ok(Expr::Input);
        }
        if ident == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Some(idx) = ident.strip_prefix('x') {
            if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) {
                let i: usize = idx.parse().map_err(|_| self.error("state index out of range"))?;
                if i == 0 {
                    return Err(ParseError {
                        input: self.src.to_string(),
                        offset: start,
                        message: "state indices start at x1".into(),
                    });
                }
                return Ok(Expr::State(i - 1));
            }
        }
        let func = Func::from_name(ident).ok_or_else(|| ParseError {
            input: self.src.to_string(),
            offset: start,
            message: format!("unknown identifier `{ident}`"),
        })?;
        if !self.eat(b'(') {
            return Err(self.error(format!("expected `(` after `{ident}`")));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.error("expected `)`"));
        }
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

pub(crate) fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src, bytes: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64], u: f64) -> f64 {
        parse(s).unwrap().eval(x, u)
    }

    #[test]
    fn evaluates_library_style_terms() {
        let x = [2.0, 3.0];
        assert_eq!(ev("1", &x, 0.0), 1.0);
        assert_eq!(ev("x1^3", &x, 0.0), 8.0);
        assert_eq!(ev("x1*x2", &x, 0.0), 6.0);
        assert_eq!(ev("sin(x2)", &x, 0.0), 3.0_f64.sin());
        assert_eq!(ev("u", &x, 0.7), 0.7);
        assert_eq!(ev("-x1^2", &x, 0.0), -4.0);
        assert_eq!(ev("2^3^2", &x, 0.0), 512.0);
        assert_eq!(ev("x2 - x1 - 1", &x, 0.0), 0.0);
        assert_eq!(ev("atan(1e3*x2)*abs(x1)", &x, 0.0), 3000.0_f64.atan() * 2.0);
        assert_eq!(ev("sign(x1 - 5)", &x, 0.0), -1.0);
    }

    #[test]
    fn tracks_state_indices() {
        assert_eq!(parse("cos(x1)*x3").unwrap().max_state_index(), Some(2));
        assert_eq!(parse("u + 1").unwrap().max_state_index(), None);
    }

    #[test]
    fn rejects_malformed_terms() {
        for bad in ["", "x0", "foo(x1)", "sin x1", "(x1", "x1 +", "x1 $ 2", "1.2.3"] {
            assert!(parse(bad).is_err(), "{bad} should not parse");
        }
    }
}
