//! Math expression language: parsing, evaluation, symbolic differentiation.
//!
//! Expressions are written in the variables `x1`, `x2`, `y1`, `y2` with the
//! usual infix grammar (`^` binds tighter than unary minus, then `*` `/`,
//! then `+` `-`), parentheses, the constant `pi` and the functions
//! `sin`, `cos`, `exp`, `sqrt`, `abs`, `sign`. Exponents are restricted to
//! integer literals so that differentiation stays closed-form.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Variable catalog. `x1` is the slow longitudinal variable, `x2` the
/// transverse one; `y1`, `y2` are the fast (cell) variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    Y1,
    Y2,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X1, Var::X2, Var::Y1, Var::Y2];

    pub fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::Y1 => "y1",
            Var::Y2 => "y2",
        }
    }

    pub fn from_name(s: &str) -> Option<Var> {
        match s {
            "x1" => Some(Var::X1),
            "x2" => Some(Var::X2),
            "y1" => Some(Var::Y1),
            "y2" => Some(Var::Y2),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            Var::X1 => 0,
            Var::X2 => 1,
            Var::Y1 => 2,
            Var::Y2 => 3,
        }
    }
}

/// A binding of variable names to values. Each variable is bound at most
/// once; `bind` replaces any previous value.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bindings {
    vals: [Option<f64>; 4],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, var: Var, value: f64) -> Self {
        self.vals[var.index()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.vals[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.vals[var.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fun {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Sign,
}

impl Fun {
    fn name(self) -> &'static str {
        match self {
            Fun::Sin => "sin",
            Fun::Cos => "cos",
            Fun::Exp => "exp",
            Fun::Sqrt => "sqrt",
            Fun::Abs => "abs",
            Fun::Sign => "sign",
        }
    }

    fn from_name(s: &str) -> Option<Fun> {
        match s {
            "sin" => Some(Fun::Sin),
            "cos" => Some(Fun::Cos),
            "exp" => Some(Fun::Exp),
            "sqrt" => Some(Fun::Sqrt),
            "abs" => Some(Fun::Abs),
            "sign" => Some(Fun::Sign),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Immutable expression tree. Values are safe to share across threads.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Fun(Fun, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Power with a constant integer exponent.
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        parse(text)
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Var(v) => b.get(*v).ok_or(Error::UnboundVariable(v.name())),
            Expr::Neg(e) => Ok(-e.eval(b)?),
            Expr::Fun(f, e) => {
                let x = e.eval(b)?;
                match f {
                    Fun::Sin => Ok(x.sin()),
                    Fun::Cos => Ok(x.cos()),
                    Fun::Exp => Ok(x.exp()),
                    Fun::Sqrt => {
                        if x < 0.0 {
                            Err(Error::Domain(format!("sqrt of negative value {x}")))
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    Fun::Abs => Ok(x.abs()),
                    Fun::Sign => {
                        if x == 0.0 {
                            Err(Error::Domain("sign evaluated at 0".into()))
                        } else {
                            Ok(x.signum())
                        }
                    }
                }
            }
            Expr::Bin(op, l, r) => {
                let a = l.eval(b)?;
                let c = r.eval(b)?;
                match op {
                    BinOp::Add => Ok(a + c),
                    BinOp::Sub => Ok(a - c),
                    BinOp::Mul => Ok(a * c),
                    BinOp::Div => {
                        if c == 0.0 {
                            Err(Error::Domain("division by zero".into()))
                        } else {
                            Ok(a / c)
                        }
                    }
                }
            }
            Expr::Pow(e, n) => {
                let x = e.eval(b)?;
                if *n < 0 && x == 0.0 {
                    return Err(Error::Domain("zero raised to a negative power".into()));
                }
                Ok(x.powi(*n))
            }
        }
    }

    /// Exact symbolic derivative with respect to `var`. The derivative of
    /// `abs(u)` is emitted as `sign(u)*u'`, which errors when evaluated at
    /// a zero of `u`.
    pub fn differentiate(&self, var: Var) -> Result<Expr> {
        Ok(match self {
            Expr::Const(_) | Expr::Pi => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => neg(e.differentiate(var)?),
            Expr::Fun(f, e) => {
                let de = e.differentiate(var)?;
                let inner = (**e).clone();
                match f {
                    Fun::Sin => mul(Expr::Fun(Fun::Cos, Box::new(inner)), de),
                    Fun::Cos => neg(mul(Expr::Fun(Fun::Sin, Box::new(inner)), de)),
                    Fun::Exp => mul(Expr::Fun(Fun::Exp, Box::new(inner)), de),
                    Fun::Sqrt => div(
                        de,
                        mul(Expr::Const(2.0), Expr::Fun(Fun::Sqrt, Box::new(inner))),
                    ),
                    Fun::Abs => mul(Expr::Fun(Fun::Sign, Box::new(inner)), de),
                    Fun::Sign => {
                        return Err(Error::NonDifferentiable(
                            "derivative of sign is not defined".into(),
                        ))
                    }
                }
            }
            Expr::Bin(op, l, r) => {
                let dl = l.differentiate(var)?;
                let dr = r.differentiate(var)?;
                match op {
                    BinOp::Add => add(dl, dr),
                    BinOp::Sub => sub(dl, dr),
                    BinOp::Mul => add(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                    BinOp::Div => div(
                        sub(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                        Expr::Pow(Box::new((**r).clone()), 2),
                    ),
                }
            }
            Expr::Pow(e, n) => {
                let de = e.differentiate(var)?;
                match n {
                    0 => Expr::Const(0.0),
                    1 => de,
                    2 => mul(mul(Expr::Const(2.0), (**e).clone()), de),
                    _ => mul(
                        mul(Expr::Const(*n as f64), Expr::Pow(Box::new((**e).clone()), n - 1)),
                        de,
                    ),
                }
            }
        })
    }

    /// Set of variables appearing in the tree.
    pub fn free_vars(&self) -> Vec<Var> {
        let mut mask = [false; 4];
        self.collect_vars(&mut mask);
        Var::ALL.iter().copied().filter(|v| mask[v.index()]).collect()
    }

    fn collect_vars(&self, mask: &mut [bool; 4]) {
        match self {
            Expr::Const(_) | Expr::Pi => {}
            Expr::Var(v) => mask[v.index()] = true,
            Expr::Neg(e) | Expr::Fun(_, e) | Expr::Pow(e, _) => e.collect_vars(mask),
            Expr::Bin(_, l, r) => {
                l.collect_vars(mask);
                r.collect_vars(mask);
            }
        }
    }

    pub fn contains_abs(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Pi | Expr::Var(_) => false,
            Expr::Fun(Fun::Abs, _) => true,
            Expr::Neg(e) | Expr::Fun(_, e) | Expr::Pow(e, _) => e.contains_abs(),
            Expr::Bin(_, l, r) => l.contains_abs() || r.contains_abs(),
        }
    }
}

// Smart constructors with constant folding, used to keep derivatives small.
fn is_const(e: &Expr, c: f64) -> bool {
    matches!(e, Expr::Const(v) if *v == c)
}

fn add(l: Expr, r: Expr) -> Expr {
    if is_const(&l, 0.0) {
        r
    } else if is_const(&r, 0.0) {
        l
    } else {
        Expr::Bin(BinOp::Add, Box::new(l), Box::new(r))
    }
}

fn sub(l: Expr, r: Expr) -> Expr {
    if is_const(&r, 0.0) {
        l
    } else if is_const(&l, 0.0) {
        neg(r)
    } else {
        Expr::Bin(BinOp::Sub, Box::new(l), Box::new(r))
    }
}

fn mul(l: Expr, r: Expr) -> Expr {
    if is_const(&l, 0.0) || is_const(&r, 0.0) {
        Expr::Const(0.0)
    } else if is_const(&l, 1.0) {
        r
    } else if is_const(&r, 1.0) {
        l
    } else {
        Expr::Bin(BinOp::Mul, Box::new(l), Box::new(r))
    }
}

fn div(l: Expr, r: Expr) -> Expr {
    if is_const(&l, 0.0) {
        Expr::Const(0.0)
    } else if is_const(&r, 1.0) {
        l
    } else {
        Expr::Bin(BinOp::Div, Box::new(l), Box::new(r))
    }
}

fn neg(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

/// Parse an expression from text.
pub fn parse(text: &str) -> Result<Expr> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.parse_expr()?;
    match p.peek() {
        Token::End => Ok(e),
        t => Err(Error::Syntax {
            pos: p.current_pos(),
            msg: format!("unexpected token `{}`", t.describe()),
        }),
    }
}

/// Evaluate at a binding of all free variables.
pub fn eval(e: &Expr, b: &Bindings) -> Result<f64> {
    e.eval(b)
}

/// Exact symbolic derivative.
pub fn differentiate(e: &Expr, var: Var) -> Result<Expr> {
    e.differentiate(var)
}

/// Numerically verify 1-periodicity in `var`: compares values at `t` and
/// `t + 1` for `n_samples` random bindings, tolerance `1e-10 * (1 + |value|)`.
pub fn check_periodicity(e: &Expr, var: Var, n_samples: usize, seed: u64) -> Result<bool> {
    assert!(n_samples >= 8, "n_samples must be at least 8");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others: Vec<Var> = e.free_vars().into_iter().filter(|v| *v != var).collect();
    for _ in 0..n_samples {
        let mut b = Bindings::new();
        for v in &others {
            b.set(*v, rng.gen_range(-2.0..2.0));
        }
        for _ in 0..n_samples {
            let t: f64 = rng.gen_range(0.0..1.0);
            b.set(var, t);
            let v0 = e.eval(&b)?;
            b.set(var, t + 1.0);
            let v1 = e.eval(&b)?;
            if (v0 - v1).abs() > 1e-10 * (1.0 + v0.abs()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

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
    End,
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
            Token::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Token::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Token::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Token::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Token::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Token::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit() || bytes[i] == b'.' || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: format!("malformed number `{s}`"),
                })?;
                out.push((start, Token::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((start, Token::Ident(text[start..i].to_string())));
            }
            other => {
                return Err(Error::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push((text.len(), Token::End));
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].1
    }

    fn current_pos(&self) -> usize {
        self.tokens[self.pos].0
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].1.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Token) -> Result<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(Error::Syntax {
                pos: self.current_pos(),
                msg: format!("expected `{}`, found `{}`", tok.describe(), self.peek().describe()),
            })
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if *self.peek() == Token::Minus {
            self.advance();
            Ok(Expr::Neg(Box::new(self.parse_unary()?)))
        } else {
            self.parse_power()
        }
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if *self.peek() == Token::Caret {
            self.advance();
            let n = self.parse_int_exponent()?;
            Ok(Expr::Pow(Box::new(base), n))
        } else {
            Ok(base)
        }
    }

    fn parse_int_exponent(&mut self) -> Result<i32> {
        let pos = self.current_pos();
        let mut negate = false;
        let mut parens = false;
        if *self.peek() == Token::LParen {
            parens = true;
            self.advance();
        }
        if *self.peek() == Token::Minus {
            negate = true;
            self.advance();
        }
        let n = match self.advance() {
            Token::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            t => {
                return Err(Error::Syntax {
                    pos,
                    msg: format!("exponent must be an integer constant, found `{}`", t.describe()),
                })
            }
        };
        if parens {
            self.expect(Token::RParen)?;
        }
        Ok(if negate { -n } else { n })
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        let pos = self.current_pos();
        match self.advance() {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let e = self.parse_expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let f = Fun::from_name(&name).ok_or_else(|| Error::UnknownIdentifier {
                        name: name.clone(),
                        pos,
                    })?;
                    self.advance();
                    let arg = self.parse_expr()?;
                    self.expect(Token::RParen)?;
                    Ok(Expr::Fun(f, Box::new(arg)))
                } else if name == "pi" {
                    Ok(Expr::Pi)
                } else if let Some(v) = Var::from_name(&name) {
                    Ok(Expr::Var(v))
                } else {
                    Err(Error::UnknownIdentifier { name, pos })
                }
            }
            t => Err(Error::Syntax {
                pos,
                msg: format!("expected an operand, found `{}`", t.describe()),
            }),
        }
    }
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            // a negative literal prints with a leading minus, so it binds
            // exactly like a negation
            Expr::Neg(_) => 3,
            Expr::Const(v) if *v < 0.0 => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn fmt_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => {
                write!(f, "-")?;
                fmt_child(f, e, 4)
            }
            Expr::Fun(fun, e) => write!(f, "{}({})", fun.name(), e),
            Expr::Bin(op, l, r) => {
                let (sym, prec, right_extra) = match op {
                    BinOp::Add => ("+", 1, 0),
                    BinOp::Sub => ("-", 1, 1),
                    BinOp::Mul => ("*", 2, 0),
                    BinOp::Div => ("/", 2, 1),
                };
                fmt_child(f, l, prec)?;
                write!(f, " {sym} ")?;
                fmt_child(f, r, prec + right_extra)
            }
            Expr::Pow(e, n) => {
                fmt_child(f, e, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
        }
    }
}
