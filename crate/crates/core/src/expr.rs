//! Curve-definition language.
//!
//! ```text
//! x1 = cos(t); x2 = sin(t); x3 = t; t in [0, 10]
//! ```
//!
//! Components `x1..xn` (2 ≤ n ≤ 8) are expressions in the free variable,
//! built from decimal literals, `pi`, `e`, the operators `+ - * /` (and unary
//! minus) and the functions `sin cos exp sqrt pow`. The exponent of `pow` must
//! not depend on the free variable. The `t in [a, b]` clause is mandatory; an
//! optional `label = "text"` statement names the curve.
//!
//! The same expression grammar (with free variable `s`) is used for
//! closed-form curvature functions in profiles.

use std::fmt;

use thiserror::Error;

use crate::jet::{Jet5, JetError, JetPoint};

pub const MAX_DIM: usize = 8;
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown identifier {name}")]
    UnknownIdentifier { line: usize, col: usize, name: String },
    #[error("invalid dimension {0}: a curve needs between 2 and 8 components")]
    Dimension(usize),
    #[error("invalid parameter interval [{0}, {1}]")]
    Interval(f64, f64),
    #[error("input is not valid UTF-8")]
    Utf8,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("component x{component}: {source}")]
pub struct EvalError {
    pub component: usize,
    #[source]
    pub source: JetError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(NamedConst),
    Var,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn depends_on_var(&self) -> bool {
        match self {
            Expr::Var => true,
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(a) => a.depends_on_var(),
            Expr::Binary(_, a, b) => a.depends_on_var() || b.depends_on_var(),
            Expr::Call(_, args) => args.iter().any(Expr::depends_on_var),
        }
    }

    pub fn eval_jet(&self, x: Jet5) -> Result<Jet5, JetError> {
        Ok(match self {
            Expr::Num(v) => Jet5::constant(*v),
            Expr::Const(c) => Jet5::constant(c.value()),
            Expr::Var => x,
            Expr::Neg(a) => -a.eval_jet(x)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_jet(x)?, b.eval_jet(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.try_div(&b)?,
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval_jet(x)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt()?,
                    Func::Pow => a.powf(args[1].eval_jet(x)?.value())?,
                }
            }
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64, JetError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Const(c) => c.value(),
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(JetError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(x)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if !(a > 0.0) {
                            return Err(JetError::Domain { func: "sqrt", value: a });
                        }
                        a.sqrt()
                    }
                    Func::Pow => {
                        let p = args[1].eval(x)?;
                        if p.fract() != 0.0 && !(a > 0.0) {
                            return Err(JetError::Domain { func: "pow", value: a });
                        }
                        if p < 0.0 && a == 0.0 {
                            return Err(JetError::DivisionByZero);
                        }
                        a.powf(p)
                    }
                }
            }
        })
    }

    /// Replaces the free variable by `inner`.
    pub fn substitute(&self, inner: &Expr) -> Expr {
        match self {
            Expr::Var => inner.clone(),
            Expr::Num(_) | Expr::Const(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(inner))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(inner)),
                Box::new(b.substitute(inner)),
            ),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(inner)).collect()),
        }
    }

    /// Pretty-prints with `var` as the free variable name.
    pub fn display<'a>(&'a self, var: &'a str) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, var }
    }
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    var: &'a str,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.var)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, var: &str) -> fmt::Result {
    match e {
        Expr::Num(v) => write!(f, "{v:?}"),
        Expr::Const(NamedConst::Pi) => f.write_str("pi"),
        Expr::Const(NamedConst::E) => f.write_str("e"),
        Expr::Var => f.write_str(var),
        Expr::Neg(a) => {
            f.write_str("-")?;
            if matches!(**a, Expr::Binary(..)) {
                f.write_str("(")?;
                write_expr(f, a, var)?;
                f.write_str(")")
            } else {
                write_expr(f, a, var)
            }
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let wrap_left = matches!(**a, Expr::Binary(o, ..) if o.precedence() < p);
            let wrap_right = matches!(**b, Expr::Binary(o, ..) if o.precedence() <= p);
            write_wrapped(f, a, var, wrap_left)?;
            write!(f, " {} ", op.symbol())?;
            write_wrapped(f, b, var, wrap_right)
        }
        Expr::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_expr(f, a, var)?;
            }
            f.write_str(")")
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, var: &str, wrap: bool) -> fmt::Result {
    if wrap {
        f.write_str("(")?;
        write_expr(f, e, var)?;
        f.write_str(")")
    } else {
        write_expr(f, e, var)
    }
}

/// A parsed curve `t ↦ (x1(t), ..., xn(t))` on `[t_lo, t_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveDef {
    pub components: Vec<Expr>,
    pub t_lo: f64,
    pub t_hi: f64,
    pub label: Option<String>,
}

impl CurveDef {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Curve `c·γ`; its curvatures are those of `γ` divided by `c`.
    pub fn scaled(&self, c: f64) -> CurveDef {
        CurveDef {
            components: self
                .components
                .iter()
                .map(|e| Expr::Binary(BinOp::Mul, Box::new(Expr::Num(c)), Box::new(e.clone())))
                .collect(),
            ..self.clone()
        }
    }

    pub fn eval_jet(&self, t: f64) -> Result<JetPoint, EvalError> {
        let x = Jet5::variable(t);
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.eval_jet(x)
                    .map_err(|source| EvalError { component: i + 1, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(JetPoint::new(t, components))
    }

    pub fn eval_point(&self, t: f64) -> Result<Vec<f64>, EvalError> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, e)| e.eval(t).map_err(|source| EvalError { component: i + 1, source }))
            .collect()
    }
}

impl fmt::Display for CurveDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(label) = &self.label {
            write!(f, "label = {label:?}; ")?;
        }
        for (i, e) in self.components.iter().enumerate() {
            write!(f, "x{} = {}; ", i + 1, e.display("t"))?;
        }
        write!(f, "t in [{:?}, {:?}]", self.t_lo, self.t_hi)
    }
}

pub fn eval_jet(def: &CurveDef, t: f64) -> Result<JetPoint, EvalError> {
    def.eval_jet(t)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Str(String),
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let syntax = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(tl, tc, format!("malformed number '{s}'")))?;
            col += i - start;
            out.push(Token { tok: Tok::Num(v), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(syntax(tl, tc, "unterminated string".into()));
            }
            let s: String = chars[start..i].iter().collect();
            i += 1;
            col += s.chars().count() + 2;
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            continue;
        }
        if "+-*/()[],;=".contains(c) {
            out.push(Token { tok: Tok::Sym(c), line: tl, col: tc });
            i += 1;
            col += 1;
            continue;
        }
        return Err(syntax(tl, tc, format!("unexpected character '{c}'")));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    var: &'a str,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &str, var: &'a str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0, var, depth: 0 })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, tok: &Token, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: tok.line, col: tok.col, msg: msg.into() }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == Tok::Sym(c) {
            Ok(())
        } else {
            Err(self.err_at(&t, format!("expected '{c}', found {}", describe(&t.tok))))
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let t = self.peek().clone();
            return Err(self.err_at(&t, "expression nested too deeply"));
        }
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => break,
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => break,
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym('-') {
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                let t = self.peek().clone();
                return Err(self.err_at(&t, "expression nested too deeply"));
            }
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Num(*v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == self.var {
                    return Ok(Expr::Var);
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(NamedConst::Pi)),
                    "e" => return Ok(Expr::Const(NamedConst::E)),
                    _ => {}
                }
                let Some(func) = Func::from_name(name) else {
                    return Err(ParseError::UnknownIdentifier {
                        line: t.line,
                        col: t.col,
                        name: name.clone(),
                    });
                };
                self.expect_sym('(')?;
                let mut args = vec![self.expr()?];
                while self.eat_sym(',') {
                    args.push(self.expr()?);
                }
                self.expect_sym(')')?;
                if args.len() != func.arity() {
                    return Err(self.err_at(
                        &t,
                        format!("{} takes {} argument(s), got {}", func.name(), func.arity(), args.len()),
                    ));
                }
                if func == Func::Pow && args[1].depends_on_var() {
                    return Err(self.err_at(
                        &t,
                        format!("pow exponent must not depend on {}", self.var),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            other => Err(self.err_at(&t, format!("expected an expression, found {}", describe(other)))),
        }
    }

    fn constant_expr(&mut self) -> Result<f64, ParseError> {
        let t = self.peek().clone();
        let e = self.expr()?;
        if e.depends_on_var() {
            return Err(self.err_at(&t, format!("interval bound must not depend on {}", self.var)));
        }
        e.eval(0.0)
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err_at(&t, "interval bound is not a finite number"))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a single expression in the free variable `var`.
pub fn parse_expr(text: &str, var: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text, var)?;
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return Err(p.err_at(&t, format!("unexpected {} after expression", describe(&t.tok))));
    }
    Ok(e)
}

/// Parses `x1 = <expr>; ...; t in [a, b]`.
pub fn parse_curve(text: &str) -> Result<CurveDef, ParseError> {
    let mut p = Parser::new(text, "t")?;
    let mut components: Vec<Expr> = Vec::new();
    let mut label = None;
    let mut interval = None;
    loop {
        let t = p.peek().clone();
        match &t.tok {
            Tok::Eof => break,
            Tok::Sym(';') => {
                p.next();
                continue;
            }
            Tok::Ident(name) if name == "t" => {
                if interval.is_some() {
                    return Err(p.err_at(&t, "duplicate interval clause"));
                }
                p.next();
                let kw = p.next();
                if kw.tok != Tok::Ident("in".into()) {
                    return Err(p.err_at(&kw, format!("expected 'in', found {}", describe(&kw.tok))));
                }
                p.expect_sym('[')?;
                let lo = p.constant_expr()?;
                p.expect_sym(',')?;
                let hi = p.constant_expr()?;
                p.expect_sym(']')?;
                interval = Some((lo, hi));
            }
            Tok::Ident(name) if name == "label" => {
                p.next();
                p.expect_sym('=')?;
                let s = p.next();
                match &s.tok {
                    Tok::Str(text) => label = Some(text.clone()),
                    other => {
                        return Err(p.err_at(&s, format!("expected a string, found {}", describe(other))))
                    }
                }
            }
            Tok::Ident(name) if is_component_name(name) => {
                let index: usize = name[1..].parse().unwrap_or(0);
                if index != components.len() + 1 {
                    if index > MAX_DIM {
                        return Err(ParseError::Dimension(index));
                    }
                    return Err(p.err_at(
                        &t,
                        format!("expected component x{}, found {name}", components.len() + 1),
                    ));
                }
                if interval.is_some() {
                    return Err(p.err_at(&t, "components must precede the interval clause"));
                }
                p.next();
                p.expect_sym('=')?;
                components.push(p.expr()?);
                if components.len() > MAX_DIM {
                    return Err(ParseError::Dimension(components.len()));
                }
            }
            Tok::Ident(name) => {
                return Err(ParseError::UnknownIdentifier {
                    line: t.line,
                    col: t.col,
                    name: name.clone(),
                })
            }
            other => return Err(p.err_at(&t, format!("expected a statement, found {}", describe(other)))),
        }
        let t = p.peek().clone();
        match t.tok {
            Tok::Sym(';') | Tok::Eof => {}
            ref other => return Err(p.err_at(&t, format!("expected ';', found {}", describe(other)))),
        }
    }
    if components.len() < 2 {
        return Err(ParseError::Dimension(components.len()));
    }
    let Some((t_lo, t_hi)) = interval else {
        let t = p.peek().clone();
        return Err(p.err_at(&t, "missing 't in [a, b]' clause"));
    };
    if !(t_lo < t_hi) {
        return Err(ParseError::Interval(t_lo, t_hi));
    }
    Ok(CurveDef { components, t_lo, t_hi, label })
}

/// Byte-level entry point: rejects non-UTF-8 input instead of panicking.
pub fn parse_curve_bytes(bytes: &[u8]) -> Result<CurveDef, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ParseError::Utf8)?;
    parse_curve(text)
}

fn is_component_name(name: &str) -> bool {
    name.len() >= 2 && name.starts_with('x') && name[1..].chars().all(|c| c.is_ascii_digit())
}
