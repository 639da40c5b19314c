//! Scalar expressions in one free variable.
//!
//! Weights are written in `x`, nonlinearities in `s`. The grammar is small on
//! purpose: numbers, `pi`, the variable, `+ - * / ^`, unary minus, the
//! one-argument functions `sin cos exp log atan sqrt abs pos neg` and the
//! two-argument functions `max min`. Piecewise definitions are expressed by the
//! interval partition of a [`crate::problem::Problem`], not by the grammar.
//!
//! Precedence, from loosest to tightest: `+ -`, `* /`, unary `-`, `^`.
//! `^` is right-associative, so `2^3^2 = 2^9` and `-2^2 = -4`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{found}` at byte {offset}, expected `{expected}`")]
    WrongVariable {
        found: String,
        expected: String,
        offset: usize,
    },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{op}` at argument {arg}")]
pub struct DomainError {
    pub op: &'static str,
    pub arg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Sin,
    Cos,
    Exp,
    Log,
    Atan,
    Sqrt,
    Abs,
    Pos,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Max,
    Min,
}

impl Func1 {
    const ALL: [Func1; 9] = [
        Func1::Sin,
        Func1::Cos,
        Func1::Exp,
        Func1::Log,
        Func1::Atan,
        Func1::Sqrt,
        Func1::Abs,
        Func1::Pos,
        Func1::Neg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Exp => "exp",
            Func1::Log => "log",
            Func1::Atan => "atan",
            Func1::Sqrt => "sqrt",
            Func1::Abs => "abs",
            Func1::Pos => "pos",
            Func1::Neg => "neg",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn apply(self, v: f64) -> Result<f64, DomainError> {
        let out = match self {
            Func1::Sin => v.sin(),
            Func1::Cos => v.cos(),
            Func1::Exp => v.exp(),
            Func1::Log => {
                if v <= 0.0 {
                    return Err(DomainError { op: "log", arg: v });
                }
                v.ln()
            }
            Func1::Atan => v.atan(),
            Func1::Sqrt => {
                if v < 0.0 {
                    return Err(DomainError { op: "sqrt", arg: v });
                }
                v.sqrt()
            }
            Func1::Abs => v.abs(),
            Func1::Pos => v.max(0.0),
            Func1::Neg => (-v).max(0.0),
        };
        Ok(out)
    }
}

impl Func2 {
    pub fn name(self) -> &'static str {
        match self {
            Func2::Max => "max",
            Func2::Min => "min",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "max" => Some(Func2::Max),
            "min" => Some(Func2::Min),
            _ => None,
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    Var,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call1(Func1, Box<Node>),
    Call2(Func2, Box<Node>, Box<Node>),
}

/// A parsed expression together with the name of its free variable.
///
/// Immutable after construction; evaluation is a pure function of one real
/// argument, so an `Expr` can be shared across threads freely.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    var: String,
}

impl Expr {
    pub fn new(root: Node, var: impl Into<String>) -> Self {
        Self {
            root,
            var: var.into(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variable(&self) -> &str {
        &self.var
    }

    /// Evaluates at `v`. NaN results are reported as domain errors.
    pub fn eval(&self, v: f64) -> Result<f64, DomainError> {
        let out = eval_node(&self.root, v)?;
        if out.is_nan() {
            return Err(DomainError { op: "nan", arg: v });
        }
        Ok(out)
    }

    /// Evaluation for hot loops: domain errors become NaN.
    #[inline]
    pub fn eval_or_nan(&self, v: f64) -> f64 {
        eval_node(&self.root, v).unwrap_or(f64::NAN)
    }

    /// Same tree, but with the free variable renamed (e.g. `r` to `t`).
    pub fn with_variable(&self, var: impl Into<String>) -> Self {
        Self {
            root: self.root.clone(),
            var: var.into(),
        }
    }

    /// Replaces every occurrence of the variable by `inner` (function
    /// composition `self ∘ inner`). The result uses `inner`'s variable.
    pub fn compose(&self, inner: &Expr) -> Expr {
        fn go(n: &Node, inner: &Node) -> Node {
            match n {
                Node::Var => inner.clone(),
                Node::Num(v) => Node::Num(*v),
                Node::Pi => Node::Pi,
                Node::Neg(a) => Node::Neg(Box::new(go(a, inner))),
                Node::Binary(op, a, b) => {
                    Node::Binary(*op, Box::new(go(a, inner)), Box::new(go(b, inner)))
                }
                Node::Call1(f, a) => Node::Call1(*f, Box::new(go(a, inner))),
                Node::Call2(f, a, b) => {
                    Node::Call2(*f, Box::new(go(a, inner)), Box::new(go(b, inner)))
                }
            }
        }
        Expr {
            root: go(&self.root, &inner.root),
            var: inner.var.clone(),
        }
    }

    /// Product `self * other`; both must share the variable name.
    pub fn mul(&self, other: &Expr) -> Expr {
        Expr {
            root: Node::Binary(
                BinOp::Mul,
                Box::new(self.root.clone()),
                Box::new(other.root.clone()),
            ),
            var: self.var.clone(),
        }
    }

    pub fn is_constant(&self) -> bool {
        fn go(n: &Node) -> bool {
            match n {
                Node::Var => false,
                Node::Num(_) | Node::Pi => true,
                Node::Neg(a) | Node::Call1(_, a) => go(a),
                Node::Binary(_, a, b) | Node::Call2(_, a, b) => go(a) && go(b),
            }
        }
        go(&self.root)
    }
}

fn eval_node(n: &Node, v: f64) -> Result<f64, DomainError> {
    Ok(match n {
        Node::Num(c) => *c,
        Node::Pi => std::f64::consts::PI,
        Node::Var => v,
        Node::Neg(a) => -eval_node(a, v)?,
        Node::Binary(op, a, b) => {
            let x = eval_node(a, v)?;
            let y = eval_node(b, v)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(DomainError { op: "/", arg: v });
                    }
                    x / y
                }
                BinOp::Pow => pow(x, y).ok_or(DomainError { op: "^", arg: v })?,
            }
        }
        Node::Call1(f, a) => f.apply(eval_node(a, v)?)?,
        Node::Call2(f, a, b) => {
            let x = eval_node(a, v)?;
            let y = eval_node(b, v)?;
            match f {
                Func2::Max => x.max(y),
                Func2::Min => x.min(y),
            }
        }
    })
}

fn pow(base: f64, exp: f64) -> Option<f64> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        if base == 0.0 && exp < 0.0 {
            return None;
        }
        return Some(base.powi(exp as i32));
    }
    if base < 0.0 {
        return None;
    }
    if base == 0.0 && exp < 0.0 {
        return None;
    }
    Some(base.powf(exp))
}

/// Parses `text` with free variable `variable`.
pub fn parse(text: &str, variable: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        var: variable,
    };
    p.skip_ws();
    if p.pos >= text.len() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let root = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(Expr::new(root, variable))
}

/// Parses a constant expression such as `3*pi` or `1/2`.
pub fn parse_constant(text: &str) -> Result<f64, String> {
    let e = parse(text, "_").map_err(|e| e.to_string())?;
    if !e.is_constant() {
        return Err(format!("`{text}` is not a constant expression"));
    }
    e.eval(0.0).map_err(|e| e.to_string())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    var: &'a str,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                self.identifier(name, start)
            }
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn identifier(&mut self, name: &str, offset: usize) -> Result<Node, ParseError> {
        if let Some(f) = Func1::from_name(name) {
            let args = self.call_args(name, offset)?;
            return match <[Node; 1]>::try_from(args) {
                Ok([a]) => Ok(Node::Call1(f, Box::new(a))),
                Err(args) => Err(ParseError::Arity {
                    name: name.into(),
                    expected: 1,
                    found: args.len(),
                    offset,
                }),
            };
        }
        if let Some(f) = Func2::from_name(name) {
            let args = self.call_args(name, offset)?;
            return match <[Node; 2]>::try_from(args) {
                Ok([a, b]) => Ok(Node::Call2(f, Box::new(a), Box::new(b))),
                Err(args) => Err(ParseError::Arity {
                    name: name.into(),
                    expected: 2,
                    found: args.len(),
                    offset,
                }),
            };
        }
        if name == "pi" {
            return Ok(Node::Pi);
        }
        if name == self.var {
            return Ok(Node::Var);
        }
        if matches!(name, "x" | "s" | "r" | "t") {
            return Err(ParseError::WrongVariable {
                found: name.into(),
                expected: self.var.into(),
                offset,
            });
        }
        Err(ParseError::UnknownIdentifier {
            name: name.into(),
            offset,
        })
    }

    fn call_args(&mut self, name: &str, offset: usize) -> Result<Vec<Node>, ParseError> {
        if !self.eat(b'(') {
            return Err(ParseError::Syntax {
                offset: self.pos,
                message: format!("expected `(` after function `{name}` at byte {offset}"),
            });
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        self.expect(b')')?;
        Ok(args)
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - s
        };
        let mut p = self.pos;
        let mut n = digits(&mut p);
        if p < bytes.len() && bytes[p] == b'.' {
            p += 1;
            n += digits(&mut p);
        }
        if n == 0 {
            return Err(self.syntax("malformed number"));
        }
        if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
            let mut q = p + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) == 0 {
                self.pos = q;
                return Err(self.syntax("malformed exponent"));
            }
            p = q;
        }
        self.pos = p;
        let v: f64 = self.src[start..p].parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "malformed number".into(),
        })?;
        if !v.is_finite() {
            return Err(ParseError::Syntax {
                offset: start,
                message: "number out of range".into(),
            });
        }
        Ok(Node::Num(v))
    }
}

// Binding strength used by the printer: higher binds tighter.
fn prec(n: &Node) -> u8 {
    match n {
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Binary(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn write_node(n: &Node, var: &str, out: &mut String) {
    let wrap = |child: &Node, need: bool, out: &mut String| {
        if need {
            out.push('(');
            write_node(child, var, out);
            out.push(')');
        } else {
            write_node(child, var, out);
        }
    };
    match n {
        Node::Num(v) => out.push_str(&format!("{v:?}")),
        Node::Pi => out.push_str("pi"),
        Node::Var => out.push_str(var),
        Node::Neg(a) => {
            out.push('-');
            wrap(a, prec(a) < 3, out);
        }
        Node::Binary(op, a, b) => {
            let (sym, p) = match op {
                BinOp::Add => ("+", 1),
                BinOp::Sub => ("-", 1),
                BinOp::Mul => ("*", 2),
                BinOp::Div => ("/", 2),
                BinOp::Pow => ("^", 4),
            };
            if *op == BinOp::Pow {
                // base must be an atom; exponent is parsed as a unary
                wrap(a, prec(a) <= 4, out);
                out.push('^');
                wrap(b, prec(b) < 3, out);
            } else {
                wrap(a, prec(a) < p, out);
                out.push_str(sym);
                wrap(b, prec(b) <= p, out);
            }
        }
        Node::Call1(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_node(a, var, out);
            out.push(')');
        }
        Node::Call2(f, a, b) => {
            out.push_str(f.name());
            out.push('(');
            write_node(a, var, out);
            out.push(',');
            write_node(b, var, out);
            out.push(')');
        }
    }
}

/// Renders `e` back to text that reparses to the same tree.
pub fn print(e: &Expr) -> String {
    let mut out = String::new();
    write_node(&e.root, &e.var, &mut out);
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(text: &str, var: &str, v: f64) -> f64 {
        parse(text, var).unwrap().eval(v).unwrap()
    }

    #[test]
    fn precedence_and_identities() {
        assert_eq!(ev("2+3*4", "x", 0.7), 14.0);
        assert!((ev("sin(x)", "x", PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((ev("s*atan(s)", "s", 1.0) - PI / 4.0).abs() < 1e-15);
        assert_eq!(ev("pos(sin(x))", "x", 1.5 * PI), 0.0);
        assert_eq!(ev("s^2", "s", 2.0), 4.0);
        assert_eq!(ev("s/(1+s^2)", "s", 1.0), 0.5);
    }

    #[test]
    fn associativity() {
        assert_eq!(ev("8-4-2", "x", 0.0), 2.0);
        assert_eq!(ev("8/4/2", "x", 0.0), 1.0);
        assert_eq!(ev("2^3^2", "x", 0.0), 512.0);
        assert_eq!(ev("-2^2", "x", 0.0), -4.0);
        assert_eq!(ev("2^-1", "x", 0.0), 0.5);
        assert_eq!(ev("--x", "x", 3.0), 3.0);
        assert_eq!(ev("2*(3+4)", "x", 0.0), 14.0);
    }

    #[test]
    fn functions_and_constants() {
        assert_eq!(ev("max(x, 1)", "x", 0.5), 1.0);
        assert_eq!(ev("min(x, 1)", "x", 0.5), 0.5);
        assert_eq!(ev("neg(x)", "x", -2.0), 2.0);
        assert_eq!(ev("abs(x)", "x", -2.0), 2.0);
        assert!((ev("exp(log(x))", "x", 3.0) - 3.0).abs() < 1e-15);
        assert_eq!(ev("1.5e2", "x", 0.0), 150.0);
        assert_eq!(ev(".5E-1", "x", 0.0), 0.05);
        assert!((parse_constant("3*pi").unwrap() - 3.0 * PI).abs() < 1e-15);
        assert!(parse_constant("3*x").is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse("2+", "x"),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(parse("", "x"), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse("foo(x)", "x"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("s+1", "x"),
            Err(ParseError::WrongVariable { offset: 0, .. })
        ));
        assert!(matches!(
            parse("max(x)", "x"),
            Err(ParseError::Arity {
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert!(matches!(
            parse("sin(x, 2)", "x"),
            Err(ParseError::Arity {
                expected: 1,
                found: 2,
                ..
            })
        ));
        assert!(matches!(
            parse("1e999", "x"),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(parse("(x", "x"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x y", "x"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn domain_errors() {
        let dom = |t: &str, v: f64| parse(t, "x").unwrap().eval(v).is_err();
        assert!(dom("log(x)", 0.0));
        assert!(dom("log(x)", -1.0));
        assert!(dom("sqrt(x)", -1e-3));
        assert!(dom("1/x", 0.0));
        assert!(dom("x^0.5", -4.0));
        assert!(!dom("x^2", -4.0));
        assert!(dom("0^-1 + x", 1.0));
        assert!(parse("x", "x").unwrap().eval_or_nan(2.0) == 2.0);
        assert!(parse("log(x)", "x").unwrap().eval_or_nan(-2.0).is_nan());
    }

    #[test]
    fn printer_round_trips() {
        for t in [
            "2+3*4",
            "pos(sin(x))",
            "2*(3+4)",
            "-(x+1)",
            "(-x)^2",
            "-x^2",
            "(2^3)^2",
            "2^3^2",
            "x-(x-1)",
            "x/(x/2)",
            "max(x,-x)*min(1,x)",
            "2^-x",
            "2^(-x+1)",
            "-(-x)",
            "1e-7*x",
        ] {
            let e = parse(t, "x").unwrap();
            let printed = print(&e);
            assert_eq!(parse(&printed, "x").unwrap(), e, "{t} -> {printed}");
        }
        let e = parse("2*(3+4)", "x").unwrap();
        assert_eq!(parse(&print(&e), "x").unwrap().eval(9.0).unwrap(), 14.0);
    }

    #[test]
    fn composition() {
        let a = parse("pos(sin(r))", "r").unwrap();
        let inner = parse("2*exp(t)", "t").unwrap();
        let c = a.compose(&inner);
        assert_eq!(c.variable(), "t");
        let t = 0.3;
        assert_eq!(c.eval(t).unwrap(), (2.0 * t.exp()).sin().max(0.0));
    }
}
