//! Nonlinearity expressions `a(u)`: parsing, evaluation, differentiation.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    ::= term  { ("+" | "-") term }
//! term    ::= unary { ("*" | "/") unary }
//! unary   ::= "-" unary | power
//! power   ::= atom [ "^" unary ]              (right-associative)
//! atom    ::= number | "u" | name | func "(" expr ")" | "(" expr ")"
//! func    ::= "sqrt" | "exp" | "ln" | "abs" | "sin" | "cos"
//! number  ::= digits ["." digits] [("e"|"E") ["+"|"-"] digits]
//! name    ::= letter { letter | digit | "_" }   (a free parameter)
//! ```
//!
//! Precedence is `^` > unary minus > `*`,`/` > `+`,`-`. Any identifier other
//! than `u` and the function names is a late-bound parameter; values are
//! supplied at evaluation time through [`ParamBindings`], so one parsed tree
//! serves parameter sweeps. Trees are immutable and evaluation is reentrant.

use std::collections::BTreeMap;
use std::fmt;

use crate::dual::{Dual1, Scalar};

const FUNCTIONS: [(&str, UnaryFn); 6] = [
    ("sqrt", UnaryFn::Sqrt),
    ("exp", UnaryFn::Exp),
    ("ln", UnaryFn::Ln),
    ("abs", UnaryFn::Abs),
    ("sin", UnaryFn::Sin),
    ("cos", UnaryFn::Cos),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sqrt,
    Exp,
    Ln,
    Abs,
    Sin,
    Cos,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// The variable `u`.
    Var,
    /// A named free parameter.
    Param(String),
    Unary(UnaryFn, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
}

/// A parsed nonlinearity `a(u)` with its free-parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityExpr {
    root: Node,
    source: String,
    free_params: Vec<String>,
}

/// Parameter name → value map covering an expression's free parameters.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ParamBindings(BTreeMap<String, f64>);

impl ParamBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Parse a `name=value` pair as passed on the command line.
    pub fn parse_assignment(&mut self, s: &str) -> Result<(), ParseError> {
        let (name, value) = s.split_once('=').ok_or_else(|| ParseError {
            offset: s.len(),
            message: "expected name=value".into(),
        })?;
        let name = name.trim();
        let value: f64 = value.trim().parse().map_err(|_| ParseError {
            offset: name.len() + 1,
            message: format!("invalid number '{}'", value.trim()),
        })?;
        self.0.insert(name.to_string(), value);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound parameter '{0}'")]
    UnboundParam(String),
    #[error("square root of a negative value ({0})")]
    SqrtNegative(f64),
    #[error("square root derivative at zero")]
    SqrtDerivAtZero,
    #[error("logarithm of a non-positive value ({0})")]
    LnNonPositive(f64),
    #[error("derivative of abs at zero")]
    AbsDerivAtZero,
    #[error("division by zero")]
    DivByZero,
    #[error("power with non-positive base ({0}) and non-integer exponent")]
    PowNonPositiveBase(f64),
    #[error("evaluation overflowed to a non-finite value")]
    NonFinite,
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

    fn next_token(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let b = self.src[self.pos];
        let tok = match b {
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
                    offset: start,
                    message: format!("unexpected character '{}'", b as char),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let mut end = self.pos;
        while end < self.src.len() && self.src[end].is_ascii_digit() {
            end += 1;
        }
        if end < self.src.len() && self.src[end] == b'.' {
            end += 1;
            while end < self.src.len() && self.src[end].is_ascii_digit() {
                end += 1;
            }
        }
        if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
            let mut exp_end = end + 1;
            if exp_end < self.src.len() && (self.src[exp_end] == b'+' || self.src[exp_end] == b'-')
            {
                exp_end += 1;
            }
            if exp_end < self.src.len() && self.src[exp_end].is_ascii_digit() {
                end = exp_end;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..end]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            message: format!("invalid number '{text}'"),
        })?;
        self.pos = end;
        Ok((Tok::Num(value), start))
    }

    fn lex_ident(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let mut end = self.pos;
        while end < self.src.len()
            && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
        {
            end += 1;
        }
        let text = std::str::from_utf8(&self.src[start..end]).unwrap().to_string();
        self.pos = end;
        Ok((Tok::Ident(text), start))
    }
}

// ---------------------------------------------------------------------------
// Parser (recursive descent over a token buffer)
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.idx]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().0 {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if matches!(self.peek().0, Tok::Minus) {
            self.bump();
            let inner = self.unary()?;
            return Ok(Node::Unary(UnaryFn::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek().0, Tok::Caret) {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::Ident(name) => {
                if name == "u" {
                    return Ok(Node::Var);
                }
                if let Some(&(_, f)) = FUNCTIONS.iter().find(|(n, _)| *n == name) {
                    if !matches!(self.peek().0, Tok::LParen) {
                        return Err(ParseError {
                            offset: self.peek().1,
                            message: format!("function '{name}' requires parentheses"),
                        });
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Unary(f, Box::new(arg)));
                }
                if matches!(self.peek().0, Tok::LParen) {
                    return Err(ParseError {
                        offset,
                        message: format!("unknown function '{name}'"),
                    });
                }
                Ok(Node::Param(name))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Eof => Err(ParseError {
                offset,
                message: "unexpected end of input, operand expected".into(),
            }),
            other => Err(ParseError {
                offset,
                message: format!("unexpected token {other:?}, operand expected"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.bump();
        if tok == Tok::RParen {
            Ok(())
        } else {
            Err(ParseError {
                offset,
                message: "expected ')'".into(),
            })
        }
    }
}

/// Parse a nonlinearity expression.
pub fn parse(source: &str) -> Result<NonlinearityExpr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    if !source.is_ascii() {
        return Err(ParseError {
            offset: source
                .char_indices()
                .find(|(_, c)| !c.is_ascii())
                .map(|(i, _)| i)
                .unwrap_or(0),
            message: "non-ASCII input".into(),
        });
    }
    let mut lexer = Lexer::new(source);
    let mut toks = Vec::new();
    loop {
        let t = lexer.next_token()?;
        let eof = t.0 == Tok::Eof;
        toks.push(t);
        if eof {
            break;
        }
    }
    let mut parser = Parser { toks, idx: 0 };
    let root = parser.expr()?;
    let (tok, offset) = parser.peek().clone();
    if tok != Tok::Eof {
        return Err(ParseError {
            offset,
            message: format!("trailing input {tok:?}"),
        });
    }
    let mut free_params = Vec::new();
    collect_params(&root, &mut free_params);
    free_params.sort();
    free_params.dedup();
    Ok(NonlinearityExpr {
        root,
        source: source.to_string(),
        free_params,
    })
}

fn collect_params(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::Param(name) => out.push(name.clone()),
        Node::Unary(_, a) => collect_params(a, out),
        Node::Binary(_, a, b) => {
            collect_params(a, out);
            collect_params(b, out);
        }
        _ => {}
    }
}

impl NonlinearityExpr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Names of parameters that must be bound before evaluation, sorted.
    pub fn free_params(&self) -> &[String] {
        &self.free_params
    }

    /// IEEE double evaluation at `u`.
    pub fn eval(&self, u: f64, params: &ParamBindings) -> Result<f64, EvalError> {
        self.eval_scalar(u, params)
    }

    /// Dual-number evaluation; the derivative slot carries d/du.
    pub fn eval_dual(&self, u: Dual1, params: &ParamBindings) -> Result<Dual1, EvalError> {
        self.eval_scalar(u, params)
    }

    /// Evaluation generic over the scalar type (f64 or nested duals).
    pub fn eval_scalar<S: Scalar>(&self, u: S, params: &ParamBindings) -> Result<S, EvalError> {
        let v = eval_node(&self.root, u, params)?;
        if !v.primal().is_finite() {
            return Err(EvalError::NonFinite);
        }
        Ok(v)
    }
}

fn eval_node<S: Scalar>(node: &Node, u: S, params: &ParamBindings) -> Result<S, EvalError> {
    match node {
        Node::Const(v) => Ok(S::from_f64(*v)),
        Node::Var => Ok(u),
        Node::Param(name) => params
            .get(name)
            .map(S::from_f64)
            .ok_or_else(|| EvalError::UnboundParam(name.clone())),
        Node::Unary(f, a) => {
            let a = eval_node(a, u, params)?;
            apply_unary(*f, a)
        }
        Node::Binary(op, l, r) => {
            let l = eval_node(l, u, params)?;
            let r = eval_node(r, u, params)?;
            apply_binary(*op, l, r)
        }
    }
}

fn apply_unary<S: Scalar>(f: UnaryFn, a: S) -> Result<S, EvalError> {
    match f {
        UnaryFn::Sqrt => {
            if a.primal() < 0.0 {
                Err(EvalError::SqrtNegative(a.primal()))
            } else if a.primal() == 0.0 && !a.deriv_is_zero() {
                Err(EvalError::SqrtDerivAtZero)
            } else {
                Ok(a.sqrt())
            }
        }
        UnaryFn::Exp => Ok(a.exp()),
        UnaryFn::Ln => {
            if a.primal() <= 0.0 {
                Err(EvalError::LnNonPositive(a.primal()))
            } else {
                Ok(a.ln())
            }
        }
        UnaryFn::Abs => {
            if a.primal() == 0.0 && !a.deriv_is_zero() {
                Err(EvalError::AbsDerivAtZero)
            } else {
                Ok(a.abs())
            }
        }
        UnaryFn::Sin => Ok(a.sin()),
        UnaryFn::Cos => Ok(a.cos()),
        UnaryFn::Neg => Ok(-a),
    }
}

fn apply_binary<S: Scalar>(op: BinOp, l: S, r: S) -> Result<S, EvalError> {
    match op {
        BinOp::Add => Ok(l + r),
        BinOp::Sub => Ok(l - r),
        BinOp::Mul => Ok(l * r),
        BinOp::Div => {
            if r.primal() == 0.0 {
                Err(EvalError::DivByZero)
            } else {
                Ok(l / r)
            }
        }
        BinOp::Pow => {
            let e = r.primal();
            if r.deriv_is_zero() && e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                if e < 0.0 && l.primal() == 0.0 {
                    return Err(EvalError::DivByZero);
                }
                Ok(l.powi(e as i32))
            } else if l.primal() <= 0.0 {
                Err(EvalError::PowNonPositiveBase(l.primal()))
            } else {
                Ok((r * l.ln()).exp())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pretty printing (minimal parentheses; reparsing yields the same tree)
// ---------------------------------------------------------------------------

fn prec(node: &Node) -> u8 {
    match node {
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Unary(UnaryFn::Neg, _) => 3,
        Node::Binary(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, min_prec: u8) -> fmt::Result {
    let p = prec(node);
    if p < min_prec {
        write!(f, "(")?;
        write_node(f, node, 0)?;
        return write!(f, ")");
    }
    match node {
        Node::Const(v) => write!(f, "{v}"),
        Node::Var => write!(f, "u"),
        Node::Param(name) => write!(f, "{name}"),
        Node::Unary(UnaryFn::Neg, a) => {
            write!(f, "-")?;
            write_node(f, a, 3)
        }
        Node::Unary(func, a) => {
            let name = FUNCTIONS
                .iter()
                .find(|(_, g)| g == func)
                .map(|(n, _)| *n)
                .unwrap();
            write!(f, "{name}(")?;
            write_node(f, a, 0)?;
            write!(f, ")")
        }
        Node::Binary(op, l, r) => {
            let (sym, lp, rp) = match op {
                BinOp::Add => ("+", 1, 2),
                BinOp::Sub => ("-", 1, 2),
                BinOp::Mul => ("*", 2, 3),
                BinOp::Div => ("/", 2, 3),
                BinOp::Pow => ("^", 5, 3),
            };
            write_node(f, l, lp)?;
            write!(f, "{sym}")?;
            write_node(f, r, rp)
        }
    }
}

impl fmt::Display for NonlinearityExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> NonlinearityExpr {
        parse(s).unwrap()
    }

    #[test]
    fn parses_kdv_nonlinearity() {
        let e = p("6*u");
        assert_eq!(
            *e.root(),
            Node::Binary(BinOp::Mul, Box::new(Node::Const(6.0)), Box::new(Node::Var))
        );
        assert!(e.free_params().is_empty());
    }

    #[test]
    fn parses_schamel_with_params() {
        let e = p("alpha*sqrt(u)+beta*u");
        assert_eq!(e.free_params(), ["alpha", "beta"]);
        let expected = Node::Binary(
            BinOp::Add,
            Box::new(Node::Binary(
                BinOp::Mul,
                Box::new(Node::Param("alpha".into())),
                Box::new(Node::Unary(UnaryFn::Sqrt, Box::new(Node::Var))),
            )),
            Box::new(Node::Binary(
                BinOp::Mul,
                Box::new(Node::Param("beta".into())),
                Box::new(Node::Var),
            )),
        );
        assert_eq!(*e.root(), expected);
    }

    #[test]
    fn gardner_params_found() {
        let e = p("2*alpha*u - beta*u^2");
        assert_eq!(e.free_params(), ["alpha", "beta"]);
    }

    #[test]
    fn syntax_error_carries_offset() {
        let err = parse("6*").unwrap_err();
        assert_eq!(err.offset, 2);
        let err = parse("6**u").unwrap_err();
        assert_eq!(err.offset, 2);
        let err = parse("").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn unknown_function_rejected() {
        let err = parse("sinh(u)").unwrap_err();
        assert!(err.message.contains("unknown function"));
    }

    #[test]
    fn eval_matches_hand_values() {
        let b = ParamBindings::new();
        assert_eq!(p("6*u").eval(2.0, &b).unwrap(), 12.0);
        assert_eq!(p("u^2").eval(3.0, &b).unwrap(), 9.0);
        let b = ParamBindings::new().set("alpha", 2.0).set("beta", 1.0);
        assert_eq!(p("alpha*sqrt(u)+beta*u").eval(4.0, &b).unwrap(), 8.0);
    }

    #[test]
    fn eval_domain_errors() {
        let b = ParamBindings::new();
        assert!(matches!(
            p("sqrt(u)").eval(-1.0, &b),
            Err(EvalError::SqrtNegative(_))
        ));
        assert!(matches!(
            p("ln(u)").eval(0.0, &b),
            Err(EvalError::LnNonPositive(_))
        ));
        assert!(matches!(p("1/u").eval(0.0, &b), Err(EvalError::DivByZero)));
        assert!(matches!(
            p("alpha*u").eval(1.0, &b),
            Err(EvalError::UnboundParam(_))
        ));
    }

    #[test]
    fn dual_eval_square_and_sqrt() {
        let b = ParamBindings::new();
        let d = p("u^2").eval_dual(Dual::new(3.0, 1.0), &b).unwrap();
        assert_eq!((d.value(), d.derivative()), (9.0, 6.0));
        let d = p("sqrt(u)").eval_dual(Dual::new(4.0, 1.0), &b).unwrap();
        assert_eq!((d.value(), d.derivative()), (2.0, 0.25));
    }

    #[test]
    fn log_kdv_derivative_matches_finite_difference() {
        let e = p("u*ln(abs(u))");
        let b = ParamBindings::new();
        let u = -2.0;
        let d = e.eval_dual(Dual::new(u, 1.0), &b).unwrap();
        let h = 1e-6;
        let fd = (e.eval(u + h, &b).unwrap() - e.eval(u - h, &b).unwrap()) / (2.0 * h);
        assert_relative_eq!(d.derivative(), fd, epsilon = 1e-8);
    }

    #[test]
    fn abs_derivative_at_zero_is_domain_error() {
        let e = p("abs(u)");
        let b = ParamBindings::new();
        assert!(matches!(
            e.eval_dual(Dual::new(0.0, 1.0), &b),
            Err(EvalError::AbsDerivAtZero)
        ));
        // plain evaluation at zero is fine
        assert_eq!(e.eval(0.0, &b).unwrap(), 0.0);
    }

    #[test]
    fn negative_base_integer_power_ok() {
        let b = ParamBindings::new();
        assert_eq!(p("u^3").eval(-2.0, &b).unwrap(), -8.0);
        assert_eq!(p("u^-2").eval(2.0, &b).unwrap(), 0.25);
        assert!(matches!(
            p("u^0.5").eval(-2.0, &b),
            Err(EvalError::PowNonPositiveBase(_))
        ));
    }

    const CATALOG_SOURCES: [&str; 7] = [
        "6*u",
        "u^2",
        "u^n/n",
        "alpha*sqrt(u)",
        "alpha*sqrt(u)+beta*u",
        "2*alpha*u-beta*u^2",
        "u*ln(abs(u))",
    ];

    #[test]
    fn pretty_print_round_trips_catalog() {
        for src in CATALOG_SOURCES {
            let e = p(src);
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            assert_eq!(*e.root(), *reparsed.root(), "source {src} printed {printed}");
        }
    }

    // Random-expression generator for the derivative/finite-difference check.
    fn random_node(rng: &mut ChaCha8Rng, depth: u32) -> Node {
        if depth == 0 {
            return match rng.gen_range(0..3) {
                0 => Node::Const(rng.gen_range(0.5..3.0)),
                1 => Node::Var,
                _ => Node::Param("alpha".into()),
            };
        }
        match rng.gen_range(0..9) {
            0 => Node::Binary(
                BinOp::Add,
                Box::new(random_node(rng, depth - 1)),
                Box::new(random_node(rng, depth - 1)),
            ),
            1 => Node::Binary(
                BinOp::Sub,
                Box::new(random_node(rng, depth - 1)),
                Box::new(random_node(rng, depth - 1)),
            ),
            2 => Node::Binary(
                BinOp::Mul,
                Box::new(random_node(rng, depth - 1)),
                Box::new(random_node(rng, depth - 1)),
            ),
            3 => Node::Binary(
                BinOp::Div,
                Box::new(random_node(rng, depth - 1)),
                Box::new(random_node(rng, depth - 1)),
            ),
            4 => Node::Binary(
                BinOp::Pow,
                Box::new(random_node(rng, depth - 1)),
                Box::new(Node::Const(rng.gen_range(1..4) as f64)),
            ),
            5 => Node::Unary(UnaryFn::Sqrt, Box::new(random_node(rng, depth - 1))),
            6 => Node::Unary(UnaryFn::Sin, Box::new(random_node(rng, depth - 1))),
            7 => Node::Unary(UnaryFn::Ln, Box::new(random_node(rng, depth - 1))),
            _ => Node::Unary(UnaryFn::Neg, Box::new(random_node(rng, depth - 1))),
        }
    }

    #[test]
    fn dual_derivative_agrees_with_finite_difference_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let bindings = ParamBindings::new().set("alpha", 1.25);
        let mut checked = 0;
        while checked < 100 {
            let root = random_node(&mut rng, 3);
            let expr = NonlinearityExpr {
                root,
                source: String::new(),
                free_params: vec!["alpha".into()],
            };
            let u = rng.gen_range(0.5..2.5);
            let h = 1e-6;
            let (Ok(fm), Ok(fp), Ok(d)) = (
                expr.eval(u - h, &bindings),
                expr.eval(u + h, &bindings),
                expr.eval_dual(Dual::new(u, 1.0), &bindings),
            ) else {
                continue; // outside the tree's natural domain; draw another
            };
            let fd = (fp - fm) / (2.0 * h);
            if fd.abs() > 1e6 {
                continue; // ill-conditioned draw, the FD oracle itself is unreliable
            }
            assert_relative_eq!(d.derivative(), fd, epsilon = 1e-6, max_relative = 1e-6);
            checked += 1;
        }
    }
}
