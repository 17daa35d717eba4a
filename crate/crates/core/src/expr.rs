//! Arithmetic expression language used for scene and field entries.
//!
//! Expressions are functions of the disk coordinates `x`, `y` and may use the
//! imaginary unit `i`. They are parsed into an [`Expr`] tree, differentiated
//! symbolically, and compiled into a flat stack [`Program`] for evaluation in
//! the integrators' inner loops.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    #[inline]
    fn apply(self, z: Complex64) -> Complex64 {
        if z.im == 0.0 {
            let r = z.re;
            match self {
                Func::Sin => return Complex64::new(r.sin(), 0.0),
                Func::Cos => return Complex64::new(r.cos(), 0.0),
                Func::Exp => return Complex64::new(r.exp(), 0.0),
                Func::Tanh => return Complex64::new(r.tanh(), 0.0),
                Func::Log if r > 0.0 => return Complex64::new(r.ln(), 0.0),
                Func::Sqrt if r >= 0.0 => return Complex64::new(r.sqrt(), 0.0),
                _ => {}
            }
        }
        match self {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Exp => z.exp(),
            Func::Log => z.ln(),
            Func::Sqrt => z.sqrt(),
            Func::Tanh => z.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

/// Expression tree. Literals produced by the parser are non-negative; negation
/// is always an explicit [`Expr::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// The imaginary unit.
    I,
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

// ---------------------------------------------------------------------------
// Lexing

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
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let mut end = pos;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                // exponent part
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut e = end + 1;
                    if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                        e += 1;
                    }
                    if e < bytes.len() && bytes[e].is_ascii_digit() {
                        while e < bytes.len() && bytes[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text = &src[pos..end];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    expected: vec!["number".into()],
                    found: format!("`{text}`"),
                })?;
                pos = end;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = pos;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                out.push((Tok::Ident(src[pos..end].to_string()), start));
                pos = end;
                continue;
            }
            _ => {
                let ch = src[pos..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: vec!["operator".into(), "operand".into()],
                    found: format!("character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        pos += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parsing (recursive descent)
//
//   expr  = term { ("+" | "-") term }
//   term  = unary { ("*" | "/") unary }
//   unary = "-" unary | power
//   power = atom [ "^" unary ]
//   atom  = number | "x" | "y" | "i" | func "(" expr ")" | "(" expr ")"

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.fail(&["`)`", "operator"]);
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "i" => Ok(Expr::I),
                    _ => match Func::from_name(&name) {
                        Some(f) => {
                            if *self.peek() != Tok::LParen {
                                return self.fail(&["`(`"]);
                            }
                            self.bump();
                            let arg = self.expr()?;
                            if *self.peek() != Tok::RParen {
                                return self.fail(&["`)`", "operator"]);
                            }
                            self.bump();
                            Ok(Expr::Call(f, Box::new(arg)))
                        }
                        None => Err(ExprError::UnknownIdentifier { name, offset }),
                    },
                }
            }
            _ => self.fail(&["number", "identifier", "`(`", "`-`"]),
        }
    }
}

/// Parses a DSL expression. See the README for the grammar.
pub fn parse_expression(src: &str) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printing

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "-{:?}", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::I => write!(f, "i"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_wrapped(f, a, prec(a) < 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let op = if matches!(self, Expr::Add(..)) {
                    "+"
                } else {
                    "-"
                };
                write_wrapped(f, a, prec(a) < 1)?;
                write!(f, " {op} ")?;
                // left-associative: right operand of equal precedence needs parens
                write_wrapped(f, b, prec(b) <= 1)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = if matches!(self, Expr::Mul(..)) {
                    "*"
                } else {
                    "/"
                };
                write_wrapped(f, a, prec(a) < 2)?;
                write!(f, "{op}")?;
                write_wrapped(f, b, prec(b) <= 2)
            }
            Expr::Pow(a, b) => {
                // base must be an atom; exponent may be unary or power (right assoc)
                write_wrapped(f, a, prec(a) < 5)?;
                write!(f, "^")?;
                write_wrapped(f, b, prec(b) < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[inline]
fn pow_c(base: Complex64, exp: Complex64) -> Complex64 {
    if exp.im == 0.0 {
        let e = exp.re;
        if e.fract() == 0.0 && e.abs() <= 64.0 {
            return base.powi(e as i32);
        }
        if base.im == 0.0 && base.re >= 0.0 {
            return Complex64::new(base.re.powf(e), 0.0);
        }
        return base.powf(e);
    }
    base.powc(exp)
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match self {
            Expr::Num(v) => Complex64::new(*v, 0.0),
            Expr::I => Complex64::i(),
            Expr::Var(Var::X) => Complex64::new(x, 0.0),
            Expr::Var(Var::Y) => Complex64::new(y, 0.0),
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Pow(a, b) => pow_c(a.eval(x, y), b.eval(x, y)),
            Expr::Call(f, a) => f.apply(a.eval(x, y)),
        }
    }

    /// Constant value when the tree contains no variables.
    pub fn constant_value(&self) -> Option<Complex64> {
        if self.depends_on_vars() {
            None
        } else {
            Some(self.eval(0.0, 0.0))
        }
    }

    pub fn depends_on_vars(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::I => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on_vars(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.depends_on_vars() || b.depends_on_vars(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    // simplifying constructors ----------------------------------------------

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            (Expr::Num(p), Expr::Num(q)) => Expr::Num(p + q),
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            (Expr::Num(p), Expr::Num(q)) => Expr::Num(p - q),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            _ if a.is_zero() || b.is_zero() => Expr::Num(0.0),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            (Expr::Num(p), Expr::Num(q)) => Expr::Num(p * q),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            _ if a.is_zero() => Expr::Num(0.0),
            _ if b.is_one() => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(v) => Expr::Num(-v),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return Expr::Num(1.0);
        }
        if b.is_one() {
            return a;
        }
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Literal a + b·i, without zero parts.
    pub fn complex(z: Complex64) -> Expr {
        Expr::add(Expr::Num(z.re), Expr::mul(Expr::Num(z.im), Expr::I))
    }

    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::Var(Var::Y)
    }

    pub fn imag(a: Expr) -> Expr {
        Expr::mul(Expr::I, a)
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Num(_) | Expr::I => Expr::Num(0.0),
            Expr::Var(w) => Expr::Num(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(v)),
            Expr::Add(a, b) => Expr::add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => Expr::sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(v), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(v)),
            ),
            Expr::Div(a, b) => {
                // (a' b - a b') / b^2
                let num = Expr::sub(
                    Expr::mul(a.diff(v), (**b).clone()),
                    Expr::mul((**a).clone(), b.diff(v)),
                );
                if num.is_zero() {
                    return Expr::Num(0.0);
                }
                Expr::div(num, Expr::pow((**b).clone(), Expr::Num(2.0)))
            }
            Expr::Pow(a, b) => {
                let da = a.diff(v);
                if !b.depends_on_vars() {
                    // b a^(b-1) a'
                    if da.is_zero() {
                        return Expr::Num(0.0);
                    }
                    let bm1 = match **b {
                        Expr::Num(q) => Expr::Num(q - 1.0),
                        _ => Expr::sub((**b).clone(), Expr::Num(1.0)),
                    };
                    return Expr::mul(Expr::mul((**b).clone(), Expr::pow((**a).clone(), bm1)), da);
                }
                // a^b (b' log a + b a'/a)
                let db = b.diff(v);
                let inner = Expr::add(
                    Expr::mul(db, Expr::call(Func::Log, (**a).clone())),
                    Expr::div(Expr::mul((**b).clone(), da), (**a).clone()),
                );
                Expr::mul(self.clone(), inner)
            }
            Expr::Call(f, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::Num(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, a)),
                    Func::Exp => Expr::call(Func::Exp, a),
                    Func::Log => Expr::div(Expr::Num(1.0), a),
                    Func::Sqrt => Expr::div(Expr::Num(0.5), Expr::call(Func::Sqrt, a)),
                    Func::Tanh => Expr::sub(
                        Expr::Num(1.0),
                        Expr::pow(Expr::call(Func::Tanh, a), Expr::Num(2.0)),
                    ),
                };
                Expr::mul(outer, da)
            }
        }
    }

    pub fn compile(&self) -> Program {
        let mut ops = Vec::new();
        emit(self, &mut ops);
        Program::from_ops(ops)
    }
}

// ---------------------------------------------------------------------------
// Compiled stack programs

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(Complex64),
    X,
    Y,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    PowI(i32),
    Pow,
    Call(Func),
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    if let Some(c) = e.constant_value() {
        ops.push(Op::Const(c));
        return;
    }
    match e {
        Expr::Num(v) => ops.push(Op::Const(Complex64::new(*v, 0.0))),
        Expr::I => ops.push(Op::Const(Complex64::i())),
        Expr::Var(Var::X) => ops.push(Op::X),
        Expr::Var(Var::Y) => ops.push(Op::Y),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Add(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Add);
        }
        Expr::Sub(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Sub);
        }
        Expr::Mul(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Mul);
        }
        Expr::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Div);
        }
        Expr::Pow(a, b) => {
            emit(a, ops);
            match b.constant_value() {
                Some(c) if c.im == 0.0 && c.re.fract() == 0.0 && c.re.abs() <= 64.0 => {
                    ops.push(Op::PowI(c.re as i32))
                }
                _ => {
                    emit(b, ops);
                    ops.push(Op::Pow);
                }
            }
        }
        Expr::Call(f, a) => {
            emit(a, ops);
            ops.push(Op::Call(*f));
        }
    }
}

/// Flat postfix form of an [`Expr`].
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
    constant: Option<Complex64>,
}

const STACK: usize = 64;

impl Program {
    fn from_ops(ops: Vec<Op>) -> Program {
        let mut d: isize = 0;
        let mut depth = 0usize;
        for op in &ops {
            d += match op {
                Op::Const(_) | Op::X | Op::Y => 1,
                Op::Neg | Op::PowI(_) | Op::Call(_) => 0,
                _ => -1,
            };
            depth = depth.max(d as usize);
        }
        let constant = match ops.as_slice() {
            [Op::Const(c)] => Some(*c),
            _ => None,
        };
        Program {
            ops,
            depth,
            constant,
        }
    }

    pub fn constant(&self) -> Option<Complex64> {
        self.constant
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        if let Some(c) = self.constant {
            return c;
        }
        if self.depth > STACK {
            return self.eval_heap(x, y);
        }
        let mut st = [Complex64::new(0.0, 0.0); STACK];
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    st[sp] = c;
                    sp += 1;
                }
                Op::X => {
                    st[sp] = Complex64::new(x, 0.0);
                    sp += 1;
                }
                Op::Y => {
                    st[sp] = Complex64::new(y, 0.0);
                    sp += 1;
                }
                Op::Neg => st[sp - 1] = -st[sp - 1],
                Op::PowI(k) => st[sp - 1] = st[sp - 1].powi(k),
                Op::Call(f) => st[sp - 1] = f.apply(st[sp - 1]),
                binary => {
                    let b = st[sp - 1];
                    let a = st[sp - 2];
                    sp -= 1;
                    st[sp - 1] = match binary {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        Op::Pow => pow_c(a, b),
                        _ => unreachable!(),
                    };
                }
            }
        }
        st[0]
    }

    fn eval_heap(&self, x: f64, y: f64) -> Complex64 {
        let mut st: Vec<Complex64> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => st.push(c),
                Op::X => st.push(Complex64::new(x, 0.0)),
                Op::Y => st.push(Complex64::new(y, 0.0)),
                Op::Neg => {
                    let a = st.pop().unwrap();
                    st.push(-a)
                }
                Op::PowI(k) => {
                    let a = st.pop().unwrap();
                    st.push(a.powi(k))
                }
                Op::Call(f) => {
                    let a = st.pop().unwrap();
                    st.push(f.apply(a))
                }
                binary => {
                    let b = st.pop().unwrap();
                    let a = st.pop().unwrap();
                    st.push(match binary {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        Op::Pow => pow_c(a, b),
                        _ => unreachable!(),
                    });
                }
            }
        }
        st[0]
    }

    #[inline]
    pub fn eval_re(&self, x: f64, y: f64) -> f64 {
        self.eval(x, y).re
    }
}

/// Expression together with its compiled program and first partials.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    pub expr: Expr,
    pub value: Program,
    pub dx: Program,
    pub dy: Program,
}

impl CompiledExpr {
    pub fn new(expr: Expr) -> Self {
        let dx = expr.diff(Var::X).compile();
        let dy = expr.diff(Var::Y).compile();
        CompiledExpr {
            value: expr.compile(),
            dx,
            dy,
            expr,
        }
    }

    pub fn parse(src: &str) -> Result<Self, ExprError> {
        Ok(Self::new(parse_expression(src)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64, y: f64) -> Complex64 {
        parse_expression(s).unwrap().eval(x, y)
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(ev("2*x + sin(y)", 0.0, 0.0), Complex64::new(0.0, 0.0));
        assert_eq!(ev("exp(0)", 0.3, -0.2), Complex64::new(1.0, 0.0));
        assert!((ev("x^2+y^2", 0.6, 0.8).re - 1.0).abs() < 1e-15);
        assert_eq!(ev("i*i", 0.0, 0.0), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn precedence() {
        // ^ binds tighter than unary minus
        assert_eq!(ev("-2^2", 0.0, 0.0).re, -4.0);
        assert_eq!(ev("2^-1", 0.0, 0.0).re, 0.5);
        assert_eq!(ev("2^3^2", 0.0, 0.0).re, 512.0);
        assert_eq!(ev("8/2/2", 0.0, 0.0).re, 2.0);
        assert_eq!(ev("1-2-3", 0.0, 0.0).re, -4.0);
        assert_eq!(ev("1.5e1 + 2E-1", 0.0, 0.0).re, 15.2);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse_expression("2*(x+1") {
            Err(ExprError::Syntax {
                offset, expected, ..
            }) => {
                assert_eq!(offset, 6);
                assert!(expected.iter().any(|e| e.contains(')')));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_expression("x + + ") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expression("x $ y"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse_expression(""),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn unknown_identifier() {
        assert_eq!(
            parse_expression("2*z"),
            Err(ExprError::UnknownIdentifier {
                name: "z".into(),
                offset: 2
            })
        );
        assert!(matches!(
            parse_expression("pi"),
            Err(ExprError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let cases = [
            "x^2*y + sin(x*y)",
            "exp(0.3*x)*cos(2*y) - tanh(x - y)",
            "sqrt(2 + x) / (1 + y^2)",
            "log(3 + x*y) + (1+x)^(0.5+y)",
            "i*x*y^3",
        ];
        let h = 1e-5;
        for src in cases {
            let e = parse_expression(src).unwrap();
            let dx = e.diff(Var::X);
            let dy = e.diff(Var::Y);
            for &(x, y) in &[(0.1, 0.2), (-0.4, 0.5), (0.7, -0.3)] {
                let fdx = (e.eval(x + h, y) - e.eval(x - h, y)) / (2.0 * h);
                let fdy = (e.eval(x, y + h) - e.eval(x, y - h)) / (2.0 * h);
                assert!((dx.eval(x, y) - fdx).norm() < 1e-8, "{src} d/dx");
                assert!((dy.eval(x, y) - fdy).norm() < 1e-8, "{src} d/dy");
            }
        }
    }

    #[test]
    fn compiled_agrees_with_tree() {
        let e = parse_expression("x^3 - 2*y*x + exp(-x^2-y^2)*cos(3*x) + i*y").unwrap();
        let p = e.compile();
        for k in 0..20 {
            let x = -0.9 + 0.09 * k as f64;
            let y = 0.3 - 0.05 * k as f64;
            assert!((p.eval(x, y) - e.eval(x, y)).norm() < 1e-14);
        }
        assert_eq!(
            parse_expression("2*3+i").unwrap().compile().constant(),
            Some(Complex64::new(6.0, 1.0))
        );
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|v| Expr::Num(v as f64 / 8.0)),
            Just(Expr::I),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::Y)),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Pow(Box::new(a), Box::new(b))),
                (0usize..6, inner).prop_map(|(k, a)| Expr::Call(Func::ALL[k], Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse_expression(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e);
            let again = parse_expression(&reparsed.to_string()).unwrap();
            prop_assert_eq!(again, reparsed);
        }

        #[test]
        fn evaluation_is_deterministic(e in arb_expr(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let a = e.eval(x, y);
            let b = e.eval(x, y);
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
