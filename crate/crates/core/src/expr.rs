//! Arithmetic expressions over the spatial variables `x1..xN` and time `t`.
//!
//! Grammar: `+ - * / ^` with the usual precedence (`^` binds tightest and
//! is right-associative), unary minus, parentheses, decimal literals with
//! optional exponent, and the functions `sin`, `cos`, `exp`, `abs`,
//! `sqrt` (unary) and `min`, `max` (binary). Expressions are parsed once
//! into a tree and evaluated many times inside solver loops.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Parse failure with a byte offset into the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: {}", self.offset, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

/// Evaluation failure; the offending operation is named.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    DivisionByZero,
    NegativeSqrt,
    /// Overflow or an indeterminate power produced a non-finite value.
    NonFinite,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DivisionByZero => write!(f, "division by zero"),
            EvalError::NegativeSqrt => write!(f, "square root of a negative number"),
            EvalError::NonFinite => write!(f, "expression evaluated to a non-finite value"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinaryFn {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    /// Spatial coordinate, zero-based index.
    Var(usize),
    Time,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Unary(UnaryFn, Box<Node>),
    Binary(BinaryFn, Box<Node>, Box<Node>),
}

/// A parsed expression, bound to a fixed spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    dim: usize,
    source: String,
}

impl Expr {
    /// Parses `src` for a problem of spatial dimension `dim` (so that the
    /// variables `x1..x{dim}` and `t` are in scope).
    pub fn parse(src: &str, dim: usize) -> Result<Expr, ParseError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            dim,
        };
        p.skip_ws();
        let root = p.parse_sum()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr {
            root,
            dim,
            source: src.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates at spatial point `x` (length >= `dim`) and time `t`.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64, EvalError> {
        debug_assert!(x.len() >= self.dim);
        let v = eval_node(&self.root, x, t)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

fn eval_node(n: &Node, x: &[f64], t: f64) -> Result<f64, EvalError> {
    Ok(match n {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::Time => t,
        Node::Neg(a) => -eval_node(a, x, t)?,
        Node::Add(a, b) => eval_node(a, x, t)? + eval_node(b, x, t)?,
        Node::Sub(a, b) => eval_node(a, x, t)? - eval_node(b, x, t)?,
        Node::Mul(a, b) => eval_node(a, x, t)? * eval_node(b, x, t)?,
        Node::Div(a, b) => {
            let den = eval_node(b, x, t)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            eval_node(a, x, t)? / den
        }
        Node::Pow(a, b) => {
            let base = eval_node(a, x, t)?;
            let exp = eval_node(b, x, t)?;
            let v = base.powf(exp);
            if !v.is_finite() {
                return Err(EvalError::NonFinite);
            }
            v
        }
        Node::Unary(f, a) => {
            let v = eval_node(a, x, t)?;
            match f {
                UnaryFn::Sin => v.sin(),
                UnaryFn::Cos => v.cos(),
                UnaryFn::Exp => v.exp(),
                UnaryFn::Abs => v.abs(),
                UnaryFn::Sqrt => {
                    if v < 0.0 {
                        return Err(EvalError::NegativeSqrt);
                    }
                    v.sqrt()
                }
            }
        }
        Node::Binary(f, a, b) => {
            let va = eval_node(a, x, t)?;
            let vb = eval_node(b, x, t)?;
            match f {
                BinaryFn::Min => va.min(vb),
                BinaryFn::Max => va.max(vb),
            }
        }
    })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn parse_sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_product()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.parse_product()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.parse_product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.parse_unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.parse_unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Node, ParseError> {
        if self.eat(b'-') {
            Ok(Node::Neg(Box::new(self.parse_unary()?)))
        } else if self.eat(b'+') {
            self.parse_unary()
        } else {
            self.parse_power()
        }
    }

    fn parse_power(&mut self) -> Result<Node, ParseError> {
        let base = self.parse_atom()?;
        if self.eat(b'^') {
            // Right-associative; the exponent may itself carry a sign.
            let exp = self.parse_unary()?;
            Ok(Node::Pow(Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn parse_atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let inner = self.parse_sum()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            _ => Err(self.err("expected a number, variable, function, or '('")),
        }
    }

    fn parse_number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // Not an exponent suffix; treat `e` as a following token.
                self.pos = mark;
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            message: format!("invalid number literal '{text}'"),
        })?;
        self.skip_ws();
        Ok(Node::Const(value))
    }

    fn parse_ident(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        self.skip_ws();
        if name == "t" {
            return Ok(Node::Time);
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(idx) = rest.parse::<usize>() {
                if idx >= 1 && idx <= self.dim {
                    return Ok(Node::Var(idx - 1));
                }
                return Err(ParseError {
                    offset: start,
                    message: format!(
                        "variable '{name}' out of range for dimension {}",
                        self.dim
                    ),
                });
            }
        }
        let unary = match name {
            "sin" => Some(UnaryFn::Sin),
            "cos" => Some(UnaryFn::Cos),
            "exp" => Some(UnaryFn::Exp),
            "abs" => Some(UnaryFn::Abs),
            "sqrt" => Some(UnaryFn::Sqrt),
            _ => None,
        };
        let binary = match name {
            "min" => Some(BinaryFn::Min),
            "max" => Some(BinaryFn::Max),
            _ => None,
        };
        if unary.is_none() && binary.is_none() {
            return Err(ParseError {
                offset: start,
                message: format!("unknown identifier '{name}'"),
            });
        }
        if !self.eat(b'(') {
            return Err(self.err("expected '(' after function name"));
        }
        let first = self.parse_sum()?;
        let node = if let Some(f) = unary {
            Node::Unary(f, Box::new(first))
        } else {
            if !self.eat(b',') {
                return Err(self.err("expected ',' between function arguments"));
            }
            let second = self.parse_sum()?;
            Node::Binary(binary.unwrap(), Box::new(first), Box::new(second))
        };
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        Ok(node)
    }
}

/// Evaluates the same grammar by a second, structurally different route
/// (shunting-yard to RPN, then a stack machine). Used by tests to
/// cross-check [`Expr::eval`]; not part of the public solver path.
#[doc(hidden)]
pub fn eval_reference(src: &str, dim: usize, x: &[f64], t: f64) -> Result<f64, String> {
    rpn::eval(src, dim, x, t)
}

mod rpn {
    use alloc::format;
    use alloc::string::{String, ToString};
    use alloc::vec::Vec;

    #[cfg(not(feature = "std"))]
    use num_traits::Float;

    #[derive(Debug, Clone, PartialEq)]
    enum Tok {
        Num(f64),
        Var(usize),
        Time,
        Op(u8),
        Neg,
        Func(String),
        LParen,
        Comma,
    }

    fn lex(src: &str, dim: usize) -> Result<Vec<Tok>, String> {
        let b = src.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        let mut prev_value = false;
        while i < b.len() {
            let c = b[i];
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == b'.' {
                let s = i;
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mark = i;
                    i += 1;
                    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                        i += 1;
                    }
                    if i < b.len() && b[i].is_ascii_digit() {
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = mark;
                    }
                }
                let text = &src[s..i];
                out.push(Tok::Num(text.parse().map_err(|_| format!("bad number {text}"))?));
                prev_value = true;
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let s = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                let name = &src[s..i];
                if name == "t" {
                    out.push(Tok::Time);
                    prev_value = true;
                } else if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k < 1 || k > dim {
                            return Err(format!("variable {name} out of range"));
                        }
                        out.push(Tok::Var(k - 1));
                        prev_value = true;
                    } else {
                        out.push(Tok::Func(name.to_string()));
                        prev_value = false;
                    }
                } else {
                    out.push(Tok::Func(name.to_string()));
                    prev_value = false;
                }
            } else if b"+-*/^(),".contains(&c) {
                match c {
                    b'(' => {
                        out.push(Tok::LParen);
                        prev_value = false;
                    }
                    b')' => {
                        out.push(Tok::Op(b')'));
                        prev_value = true;
                    }
                    b',' => {
                        out.push(Tok::Comma);
                        prev_value = false;
                    }
                    b'-' if !prev_value => {
                        out.push(Tok::Neg);
                    }
                    b'+' if !prev_value => {}
                    _ => {
                        out.push(Tok::Op(c));
                        prev_value = false;
                    }
                }
                i += 1;
            } else {
                return Err(format!("unexpected byte '{}'", c as char));
            }
        }
        Ok(out)
    }

    fn prec(op: u8) -> u8 {
        match op {
            b'+' | b'-' => 1,
            b'*' | b'/' => 2,
            b'^' => 3,
            _ => 0,
        }
    }

    pub fn eval(src: &str, dim: usize, x: &[f64], t: f64) -> Result<f64, String> {
        let toks = lex(src, dim)?;
        // Shunting-yard: NEG is treated as a right-associative prefix op
        // above '^'.
        let mut output: Vec<Tok> = Vec::new();
        let mut stack: Vec<Tok> = Vec::new();
        for tok in toks {
            match tok {
                Tok::Num(_) | Tok::Var(_) | Tok::Time => output.push(tok),
                Tok::Func(_) | Tok::LParen => stack.push(tok),
                Tok::Comma => {
                    while let Some(top) = stack.last() {
                        if matches!(top, Tok::LParen) {
                            break;
                        }
                        output.push(stack.pop().unwrap());
                    }
                }
                Tok::Neg => stack.push(Tok::Neg),
                Tok::Op(b')') => {
                    loop {
                        match stack.pop() {
                            Some(Tok::LParen) => break,
                            Some(other) => output.push(other),
                            None => return Err("unbalanced parentheses".to_string()),
                        }
                    }
                    if matches!(stack.last(), Some(Tok::Func(_))) {
                        output.push(stack.pop().unwrap());
                    }
                }
                Tok::Op(op) => {
                    while let Some(top) = stack.last() {
                        let keep = match top {
                            Tok::Op(o2) => {
                                prec(*o2) > prec(op)
                                    || (prec(*o2) == prec(op) && op != b'^')
                            }
                            Tok::Neg => op != b'^',
                            _ => false,
                        };
                        if keep {
                            output.push(stack.pop().unwrap());
                        } else {
                            break;
                        }
                    }
                    stack.push(Tok::Op(op));
                }
            }
        }
        while let Some(tok) = stack.pop() {
            if matches!(tok, Tok::LParen) {
                return Err("unbalanced parentheses".to_string());
            }
            output.push(tok);
        }

        let mut vals: Vec<f64> = Vec::new();
        for tok in output {
            match tok {
                Tok::Num(v) => vals.push(v),
                Tok::Var(i) => vals.push(x[i]),
                Tok::Time => vals.push(t),
                Tok::Neg => {
                    let v = vals.pop().ok_or("stack underflow")?;
                    vals.push(-v);
                }
                Tok::Op(op) => {
                    let b2 = vals.pop().ok_or("stack underflow")?;
                    let a = vals.pop().ok_or("stack underflow")?;
                    vals.push(match op {
                        b'+' => a + b2,
                        b'-' => a - b2,
                        b'*' => a * b2,
                        b'/' => {
                            if b2 == 0.0 {
                                return Err("division by zero".to_string());
                            }
                            a / b2
                        }
                        b'^' => a.powf(b2),
                        _ => return Err("bad operator".to_string()),
                    });
                }
                Tok::Func(name) => match name.as_str() {
                    "min" | "max" => {
                        let b2 = vals.pop().ok_or("stack underflow")?;
                        let a = vals.pop().ok_or("stack underflow")?;
                        vals.push(if name == "min" { a.min(b2) } else { a.max(b2) });
                    }
                    _ => {
                        let a = vals.pop().ok_or("stack underflow")?;
                        let v = match name.as_str() {
                            "sin" => a.sin(),
                            "cos" => a.cos(),
                            "exp" => a.exp(),
                            "abs" => a.abs(),
                            "sqrt" => {
                                if a < 0.0 {
                                    return Err("sqrt of negative".to_string());
                                }
                                a.sqrt()
                            }
                            _ => return Err(format!("unknown function {name}")),
                        };
                        vals.push(v);
                    }
                },
                _ => return Err("unexpected token".to_string()),
            }
        }
        if vals.len() != 1 {
            return Err("malformed expression".to_string());
        }
        Ok(vals[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ev(src: &str, x: &[f64], t: f64) -> f64 {
        Expr::parse(src, x.len()).unwrap().eval(x, t).unwrap()
    }

    #[test]
    fn literals_and_precedence() {
        assert_eq!(ev("1+2*3", &[0.0], 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", &[0.0], 0.0), 9.0);
        assert_eq!(ev("2^3^2", &[0.0], 0.0), 512.0); // right-assoc
        assert_eq!(ev("-2^2", &[0.0], 0.0), -4.0); // unary minus below '^'
        assert_eq!(ev("6/3/2", &[0.0], 0.0), 1.0); // left-assoc
        assert_eq!(ev("1.5e2", &[0.0], 0.0), 150.0);
        assert_eq!(ev("2e-1", &[0.0], 0.0), 0.2);
    }

    #[test]
    fn variables_and_time() {
        assert_eq!(ev("x1", &[3.0], 0.0), 3.0);
        assert_eq!(ev("x1*x2", &[3.0, 4.0], 0.0), 12.0);
        assert_eq!(ev("t", &[0.0], 2.5), 2.5);
        assert_eq!(ev("x1 + 2*t", &[1.0], 0.25), 1.5);
    }

    #[test]
    fn functions() {
        assert!((ev("sin(x1)", &[1.0], 0.0) - 1.0f64.sin()).abs() < 1e-15);
        assert!((ev("cos(0)", &[0.0], 0.0) - 1.0).abs() < 1e-15);
        assert!((ev("exp(1)", &[0.0], 0.0) - core::f64::consts::E).abs() < 1e-15);
        assert_eq!(ev("abs(-3)", &[0.0], 0.0), 3.0);
        assert_eq!(ev("sqrt(9)", &[0.0], 0.0), 3.0);
        assert_eq!(ev("min(2, 5)", &[0.0], 0.0), 2.0);
        assert_eq!(ev("max(2, -5)", &[0.0], 0.0), 2.0);
        assert_eq!(ev("min(1+1, 2*3)", &[0.0], 0.0), 2.0);
    }

    #[test]
    fn syntax_errors() {
        assert!(Expr::parse("1+", 1).is_err());
        assert!(Expr::parse("(1", 1).is_err());
        assert!(Expr::parse("sin", 1).is_err());
        assert!(Expr::parse("min(1)", 1).is_err());
        assert!(Expr::parse("1 2", 1).is_err());
        assert!(Expr::parse("", 1).is_err());
    }

    #[test]
    fn unknown_and_out_of_range_identifiers() {
        assert!(Expr::parse("y", 1).is_err());
        assert!(Expr::parse("x2", 1).is_err());
        assert!(Expr::parse("x0", 2).is_err());
        assert!(Expr::parse("tan(x1)", 1).is_err());
        assert!(Expr::parse("x2", 2).is_ok());
    }

    #[test]
    fn eval_errors() {
        let e = Expr::parse("1/x1", 1).unwrap();
        assert_eq!(e.eval(&[0.0], 0.0), Err(EvalError::DivisionByZero));
        let e = Expr::parse("sqrt(x1)", 1).unwrap();
        assert_eq!(e.eval(&[-1.0], 0.0), Err(EvalError::NegativeSqrt));
        let e = Expr::parse("exp(x1)", 1).unwrap();
        assert_eq!(e.eval(&[1e4], 0.0), Err(EvalError::NonFinite));
    }

    #[test]
    fn reference_evaluator_agrees() {
        let cases = [
            "0.5 + 0.4*sin(x1 + 0.3*t)",
            "cos(x1)*sin(x2) - 0.25*x1^2",
            "max(abs(x1), sqrt(abs(x2)+1))",
            "2^-x1 + min(t, x2/3)",
            "-x1^2 + (x2 - 1)*(x2 + 1) / (t + 1)",
            "exp(-(x1^2 + x2^2))",
        ];
        let pts = [
            ([0.3, -1.2], 0.0),
            ([-2.0, 0.7], 0.5),
            ([1.0, 1.0], 1.0),
            ([0.0, 0.0], 0.25),
        ];
        for src in cases {
            let e = Expr::parse(src, 2).unwrap();
            for (x, t) in pts {
                let a = e.eval(&x, t).unwrap();
                let b = eval_reference(src, 2, &x, t).unwrap();
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                    "mismatch on {src} at {x:?}: {a} vs {b}"
                );
            }
        }
        let _ = vec![0u8]; // keep alloc linked in no_std test builds
    }
}
