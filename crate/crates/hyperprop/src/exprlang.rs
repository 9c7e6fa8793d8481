//! A small arithmetic expression language for model coefficients.
//!
//! Speeds `a_j(x,t)`, dampings `b_j(x,t)`, boundary maps `h_j(t, xi1..xin)`
//! and initial data are written as expression strings against a declared
//! variable environment. The grammar (EBNF, also in `docs/expressions.md`):
//!
//! ```text
//! expr       = sum ;
//! sum        = term , { ("+" | "-") , term } ;
//! term       = unary , { ("*" | "/") , unary } ;
//! unary      = "-" , unary | power ;
//! power      = atom , [ "^" , unary ] ;
//! atom       = number | variable | call | "(" , expr , ")" ;
//! call       = func1 , "(" , expr , ")"
//!            | ("min" | "max") , "(" , expr , "," , expr , ")"
//!            | "if" , "(" , comparison , "," , expr , "," , expr , ")"
//!            | "bump" , "(" , expr , "," , expr , "," , expr , ")" ;
//! comparison = sum , ("<" | "<=" | ">" | ">=" | "==" | "!=") , sum ;
//! func1      = "sin" | "cos" | "exp" | "log" | "abs" | "sqrt" ;
//! ```
//!
//! Precedence is `^` > unary minus > `*` `/` > `+` `-`; binary operators of
//! equal precedence associate left, `^` associates right. Comparisons exist
//! only as the first argument of `if`; the language has no boolean type.
//!
//! Evaluation is IEEE double precision. Out-of-domain input (`log` of a
//! non-positive value, `sqrt` of a negative value, division by zero, a power
//! producing NaN) is reported as an error, never as a silent NaN. The branches
//! of `if` evaluate lazily, so `if(x > 0, log(x), 0)` is total.
//!
//! `bump(c, rho, v)` is the built-in compactly supported bump
//! `v * exp(1 - 1/(1 - d^2))` with `d = |v - c| / rho`, zero for `d >= 1`.
//! It equals `v` at the center `v = c`, vanishes outside radius `rho`, and is
//! continuously differentiable across the support boundary.

use std::collections::HashMap;
use std::fmt;

use crate::{Error, Result};

/// The smooth profile behind `bump`: `exp(1 - 1/(1 - d^2))` for `|d| < 1`,
/// zero otherwise. Value 1 at `d = 0`, C^1 (in fact C-infinity) at `|d| = 1`.
pub fn bump_profile(d: f64) -> f64 {
    let d2 = d * d;
    if d2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - d2)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func1 {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func1 {
    fn name(self) -> &'static str {
        match self {
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Exp => "exp",
            Func1::Log => "log",
            Func1::Abs => "abs",
            Func1::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func2 {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn holds(self, l: f64, r: f64) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call1(Func1, Box<Node>),
    Call2(Func2, Box<Node>, Box<Node>),
    If {
        op: CmpOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
        then: Box<Node>,
        els: Box<Node>,
    },
    Bump {
        center: Box<Node>,
        radius: Box<Node>,
        arg: Box<Node>,
    },
}

/// A parsed expression together with its declared variable environment.
///
/// Immutable after [`parse`]; evaluation is pure and reentrant.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    env: Vec<String>,
    root: Node,
}

/// Parse `source` against the declared variable names.
pub fn parse(source: &str, env: &[&str]) -> Result<Expr> {
    let env: Vec<String> = env.iter().map(|s| s.to_string()).collect();
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        env: &env,
        src_len: source.len(),
    };
    let root = p.parse_expr()?;
    if p.pos < p.tokens.len() {
        let (tok, off) = &p.tokens[p.pos];
        return Err(Error::Syntax {
            offset: *off,
            message: format!("unexpected trailing token `{}`", tok.describe()),
        });
    }
    Ok(Expr { env, root })
}

impl Expr {
    /// The declared variable names, in binding order.
    pub fn env(&self) -> &[String] {
        &self.env
    }

    /// Evaluate with a name-to-value map covering the whole environment.
    pub fn eval(&self, bindings: &HashMap<String, f64>) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.env.len());
        for name in &self.env {
            match bindings.get(name) {
                Some(v) => vals.push(*v),
                None => {
                    return Err(Error::MissingBinding { name: name.clone() });
                }
            }
        }
        self.eval_slice(&vals)
    }

    /// Evaluate with values given in environment order. This is the hot path;
    /// `vals.len()` must equal the environment length.
    pub fn eval_slice(&self, vals: &[f64]) -> Result<f64> {
        debug_assert_eq!(vals.len(), self.env.len());
        eval_node(&self.root, vals)
    }

    /// If the expression contains no variables, its (checked) value.
    pub fn constant_value(&self) -> Option<f64> {
        if node_has_var(&self.root) {
            None
        } else {
            eval_node(&self.root, &[]).ok()
        }
    }

    /// Whether the expression mentions the variable at `index`.
    pub fn depends_on(&self, index: usize) -> bool {
        node_uses(&self.root, index)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.env)
    }
}

fn node_has_var(n: &Node) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(_) => true,
        Node::Neg(a) | Node::Call1(_, a) => node_has_var(a),
        Node::Bin(_, a, b) | Node::Call2(_, a, b) => node_has_var(a) || node_has_var(b),
        Node::If {
            lhs,
            rhs,
            then,
            els,
            ..
        } => node_has_var(lhs) || node_has_var(rhs) || node_has_var(then) || node_has_var(els),
        Node::Bump {
            center,
            radius,
            arg,
        } => node_has_var(center) || node_has_var(radius) || node_has_var(arg),
    }
}

fn node_uses(n: &Node, index: usize) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(i) => *i == index,
        Node::Neg(a) | Node::Call1(_, a) => node_uses(a, index),
        Node::Bin(_, a, b) | Node::Call2(_, a, b) => node_uses(a, index) || node_uses(b, index),
        Node::If {
            lhs,
            rhs,
            then,
            els,
            ..
        } => {
            node_uses(lhs, index)
                || node_uses(rhs, index)
                || node_uses(then, index)
                || node_uses(els, index)
        }
        Node::Bump {
            center,
            radius,
            arg,
        } => node_uses(center, index) || node_uses(radius, index) || node_uses(arg, index),
    }
}

fn domain_err(op: &str, message: String) -> Error {
    Error::Domain {
        op: op.to_string(),
        message,
    }
}

fn eval_node(n: &Node, vals: &[f64]) -> Result<f64> {
    match n {
        Node::Num(v) => Ok(*v),
        Node::Var(i) => Ok(vals[*i]),
        Node::Neg(a) => Ok(-eval_node(a, vals)?),
        Node::Bin(op, a, b) => {
            let l = eval_node(a, vals)?;
            let r = eval_node(b, vals)?;
            match op {
                BinOp::Add => Ok(l + r),
                BinOp::Sub => Ok(l - r),
                BinOp::Mul => Ok(l * r),
                BinOp::Div => {
                    if r == 0.0 {
                        Err(domain_err("/", format!("division of {l} by zero")))
                    } else {
                        Ok(l / r)
                    }
                }
                BinOp::Pow => {
                    let v = l.powf(r);
                    if v.is_nan() {
                        Err(domain_err("^", format!("{l}^{r} is undefined")))
                    } else {
                        Ok(v)
                    }
                }
            }
        }
        Node::Call1(f, a) => {
            let x = eval_node(a, vals)?;
            match f {
                Func1::Sin => Ok(x.sin()),
                Func1::Cos => Ok(x.cos()),
                Func1::Exp => Ok(x.exp()),
                Func1::Log => {
                    if x <= 0.0 {
                        Err(domain_err("log", format!("log({x}) is undefined")))
                    } else {
                        Ok(x.ln())
                    }
                }
                Func1::Abs => Ok(x.abs()),
                Func1::Sqrt => {
                    if x < 0.0 {
                        Err(domain_err("sqrt", format!("sqrt({x}) is undefined")))
                    } else {
                        Ok(x.sqrt())
                    }
                }
            }
        }
        Node::Call2(f, a, b) => {
            let l = eval_node(a, vals)?;
            let r = eval_node(b, vals)?;
            match f {
                Func2::Min => Ok(l.min(r)),
                Func2::Max => Ok(l.max(r)),
            }
        }
        Node::If {
            op,
            lhs,
            rhs,
            then,
            els,
        } => {
            let l = eval_node(lhs, vals)?;
            let r = eval_node(rhs, vals)?;
            // Lazy branches keep expressions like if(x > 0, log(x), 0) total.
            if op.holds(l, r) {
                eval_node(then, vals)
            } else {
                eval_node(els, vals)
            }
        }
        Node::Bump {
            center,
            radius,
            arg,
        } => {
            let c = eval_node(center, vals)?;
            let rho = eval_node(radius, vals)?;
            let v = eval_node(arg, vals)?;
            if rho <= 0.0 {
                return Err(domain_err("bump", format!("radius {rho} must be positive")));
            }
            Ok(v * bump_profile((v - c).abs() / rho))
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Cmp(CmpOp),
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("{v}"),
            Token::Ident(s) => s.clone(),
            Token::Plus => "+".into(),
            Token::Minus => "-".into(),
            Token::Star => "*".into(),
            Token::Slash => "/".into(),
            Token::Caret => "^".into(),
            Token::LParen => "(".into(),
            Token::RParen => ")".into(),
            Token::Comma => ",".into(),
            Token::Cmp(op) => op.symbol().into(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' => {
                out.push((Token::Plus, i));
                i += 1;
            }
            b'-' => {
                out.push((Token::Minus, i));
                i += 1;
            }
            b'*' => {
                out.push((Token::Star, i));
                i += 1;
            }
            b'/' => {
                out.push((Token::Slash, i));
                i += 1;
            }
            b'^' => {
                out.push((Token::Caret, i));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Token::Comma, i));
                i += 1;
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Token::Cmp(CmpOp::Le), i));
                    i += 2;
                } else {
                    out.push((Token::Cmp(CmpOp::Lt), i));
                    i += 1;
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Token::Cmp(CmpOp::Ge), i));
                    i += 2;
                } else {
                    out.push((Token::Cmp(CmpOp::Gt), i));
                    i += 1;
                }
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Token::Cmp(CmpOp::Eq), i));
                    i += 2;
                } else {
                    return Err(Error::Syntax {
                        offset: i,
                        message: "single `=` is not an operator (use `==`)".into(),
                    });
                }
            }
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Token::Cmp(CmpOp::Ne), i));
                    i += 2;
                } else {
                    return Err(Error::Syntax {
                        offset: i,
                        message: "expected `!=`".into(),
                    });
                }
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &source[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Token::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(source[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!(
                        "unexpected character `{}`",
                        source[i..].chars().next().unwrap()
                    ),
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    env: &'a [String],
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, o)| *o)
            .unwrap_or(self.src_len)
    }

    fn bump_token(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Token, what: &str) -> Result<()> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expected {what}, got `{}`", t.describe()),
            }),
            None => Err(Error::Syntax {
                offset: self.src_len,
                message: format!("expected {what}, got end of input"),
            }),
        }
    }

    fn parse_expr(&mut self) -> Result<Node> {
        let node = self.parse_sum()?;
        if let Some(Token::Cmp(op)) = self.peek() {
            let op = *op;
            return Err(Error::Syntax {
                offset: self.offset(),
                message: format!(
                    "comparison `{}` is only allowed inside `if(cond, a, b)`",
                    op.symbol()
                ),
            });
        }
        Ok(node)
    }

    fn parse_sum(&mut self) -> Result<Node> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Node::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Node::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Node> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Node::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Node::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Node> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node> {
        let base = self.parse_atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            // `^` binds tighter than unary minus but admits a signed exponent,
            // and associates right: 2^-3, 2^3^2 == 2^(3^2).
            let exp = self.parse_unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Node> {
        let offset = self.offset();
        match self.bump_token() {
            Some(Token::Num(v)) => Ok(Node::Num(*v)),
            Some(Token::LParen) => {
                let inner = self.parse_expr()?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                if let Some(Token::LParen) = self.peek() {
                    self.pos += 1;
                    self.parse_call(name, offset)
                } else if let Some(i) = self.env.iter().position(|v| v == name) {
                    Ok(Node::Var(i))
                } else {
                    Err(Error::UnknownIdentifier {
                        name: name.clone(),
                        offset,
                    })
                }
            }
            Some(t) => Err(Error::Syntax {
                offset,
                message: format!("expected a value, got `{}`", t.describe()),
            }),
            None => Err(Error::Syntax {
                offset,
                message: "expected a value, got end of input".into(),
            }),
        }
    }

    fn parse_args(&mut self) -> Result<Vec<Node>> {
        let mut args = vec![self.parse_expr()?];
        while let Some(Token::Comma) = self.peek() {
            self.pos += 1;
            args.push(self.parse_expr()?);
        }
        self.expect(&Token::RParen, "`)`")?;
        Ok(args)
    }

    fn parse_call(&mut self, name: &str, offset: usize) -> Result<Node> {
        let func1 = match name {
            "sin" => Some(Func1::Sin),
            "cos" => Some(Func1::Cos),
            "exp" => Some(Func1::Exp),
            "log" => Some(Func1::Log),
            "abs" => Some(Func1::Abs),
            "sqrt" => Some(Func1::Sqrt),
            _ => None,
        };
        if let Some(f) = func1 {
            let args = self.parse_args()?;
            if args.len() != 1 {
                return Err(Error::ArityMismatch {
                    name: name.into(),
                    expected: 1,
                    got: args.len(),
                    offset,
                });
            }
            let mut it = args.into_iter();
            return Ok(Node::Call1(f, Box::new(it.next().unwrap())));
        }
        match name {
            "min" | "max" => {
                let f = if name == "min" {
                    Func2::Min
                } else {
                    Func2::Max
                };
                let args = self.parse_args()?;
                if args.len() != 2 {
                    return Err(Error::ArityMismatch {
                        name: name.into(),
                        expected: 2,
                        got: args.len(),
                        offset,
                    });
                }
                let mut it = args.into_iter();
                Ok(Node::Call2(
                    f,
                    Box::new(it.next().unwrap()),
                    Box::new(it.next().unwrap()),
                ))
            }
            "if" => {
                // First argument must be a comparison of two sums.
                let lhs = self.parse_sum()?;
                let op = match self.peek() {
                    Some(Token::Cmp(op)) => {
                        let op = *op;
                        self.pos += 1;
                        op
                    }
                    _ => {
                        return Err(Error::Syntax {
                            offset: self.offset(),
                            message: "first argument of `if` must be a comparison".into(),
                        });
                    }
                };
                let rhs = self.parse_sum()?;
                self.expect(&Token::Comma, "`,`")?;
                let then = self.parse_expr()?;
                self.expect(&Token::Comma, "`,`")?;
                let els = self.parse_expr()?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(Node::If {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                    then: Box::new(then),
                    els: Box::new(els),
                })
            }
            "bump" => {
                let args = self.parse_args()?;
                if args.len() != 3 {
                    return Err(Error::ArityMismatch {
                        name: name.into(),
                        expected: 3,
                        got: args.len(),
                        offset,
                    });
                }
                let mut it = args.into_iter();
                Ok(Node::Bump {
                    center: Box::new(it.next().unwrap()),
                    radius: Box::new(it.next().unwrap()),
                    arg: Box::new(it.next().unwrap()),
                })
            }
            _ => Err(Error::UnknownIdentifier {
                name: name.into(),
                offset,
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Pretty printer
// ---------------------------------------------------------------------------

fn prec(n: &Node) -> u8 {
    match n {
        Node::Bin(BinOp::Add, ..) | Node::Bin(BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul, ..) | Node::Bin(BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn write_child(
    f: &mut fmt::Formatter<'_>,
    child: &Node,
    env: &[String],
    parens: bool,
) -> fmt::Result {
    if parens {
        write!(f, "(")?;
        write_node(f, child, env)?;
        write!(f, ")")
    } else {
        write_node(f, child, env)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, n: &Node, env: &[String]) -> fmt::Result {
    match n {
        Node::Num(v) => write!(f, "{v}"),
        Node::Var(i) => write!(f, "{}", env[*i]),
        Node::Neg(a) => {
            write!(f, "-")?;
            write_child(f, a, env, prec(a) <= 3)
        }
        Node::Bin(op, a, b) => {
            let me = prec(n);
            let (sym, spaced) = match op {
                BinOp::Add => ("+", true),
                BinOp::Sub => ("-", true),
                BinOp::Mul => ("*", false),
                BinOp::Div => ("/", false),
                BinOp::Pow => ("^", false),
            };
            if *op == BinOp::Pow {
                write_child(f, a, env, prec(a) <= me)?;
                write!(f, "{sym}")?;
                write_child(f, b, env, prec(b) < me)
            } else {
                write_child(f, a, env, prec(a) < me)?;
                if spaced {
                    write!(f, " {sym} ")?;
                } else {
                    write!(f, "{sym}")?;
                }
                write_child(f, b, env, prec(b) <= me)
            }
        }
        Node::Call1(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, env)?;
            write!(f, ")")
        }
        Node::Call2(func, a, b) => {
            let name = match func {
                Func2::Min => "min",
                Func2::Max => "max",
            };
            write!(f, "{name}(")?;
            write_node(f, a, env)?;
            write!(f, ", ")?;
            write_node(f, b, env)?;
            write!(f, ")")
        }
        Node::If {
            op,
            lhs,
            rhs,
            then,
            els,
        } => {
            write!(f, "if(")?;
            write_node(f, lhs, env)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, rhs, env)?;
            write!(f, ", ")?;
            write_node(f, then, env)?;
            write!(f, ", ")?;
            write_node(f, els, env)?;
            write!(f, ")")
        }
        Node::Bump {
            center,
            radius,
            arg,
        } => {
            write!(f, "bump(")?;
            write_node(f, center, env)?;
            write!(f, ", ")?;
            write_node(f, radius, env)?;
            write!(f, ", ")?;
            write_node(f, arg, env)?;
            write!(f, ")")
        }
    }
}
