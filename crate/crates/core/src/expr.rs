//! The expression mini-language in which equations, frames, and coordinate
//! changes are written.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term  (('+' | '-') term)*          left-associative
//! term   := factor (('*' | '/') factor)*       left-associative
//! factor := '-' factor | power
//! power  := atom ('^' factor)?                 right-associative
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers are the time variable `t`, the fibre coordinates `q1..qm`, the
//! velocity coordinates `v1..vm`, the function names `sin cos exp log sqrt`,
//! and named constants bound at parse time. Precedence is `^` above unary
//! minus above `*` `/` above `+` `-`.

use std::collections::BTreeMap;
use std::fmt;

use crate::ad::{Scalar, Taylor2Scalar};
use crate::bundle::JetPoint1;
use crate::error::{EvalError, ParseError};

/// A variable slot of the first jet space: time, a position, or a velocity.
/// Position and velocity indices are zero-based internally; the surface
/// syntax is one-based (`q1`, `v1`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    Time,
    Pos(usize),
    Vel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Num(f64),
    /// A named constant with its bound value.
    Const(String, f64),
    Var(VarRef),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
}

impl Ast {
    /// Binding strength used by the printer; keep in sync with the parser.
    fn prec(&self) -> u8 {
        match self {
            Ast::Add(..) | Ast::Sub(..) => 1,
            Ast::Mul(..) | Ast::Div(..) => 2,
            Ast::Neg(_) => 3,
            Ast::Pow(..) => 4,
            Ast::Num(_) | Ast::Const(..) | Ast::Var(_) | Ast::Call(..) => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.prec() < min_prec {
            write!(f, "(")?;
            self.write(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Ast::Num(x) => write!(f, "{x}"),
            Ast::Const(name, _) => write!(f, "{name}"),
            Ast::Var(VarRef::Time) => write!(f, "t"),
            Ast::Var(VarRef::Pos(i)) => write!(f, "q{}", i + 1),
            Ast::Var(VarRef::Vel(i)) => write!(f, "v{}", i + 1),
            Ast::Neg(x) => {
                write!(f, "-")?;
                x.write(f, 3)
            }
            Ast::Add(l, r) => {
                l.write(f, 1)?;
                write!(f, " + ")?;
                r.write(f, 2)
            }
            Ast::Sub(l, r) => {
                l.write(f, 1)?;
                write!(f, " - ")?;
                r.write(f, 2)
            }
            Ast::Mul(l, r) => {
                l.write(f, 2)?;
                write!(f, "*")?;
                r.write(f, 3)
            }
            Ast::Div(l, r) => {
                l.write(f, 2)?;
                write!(f, "/")?;
                r.write(f, 3)
            }
            Ast::Pow(l, r) => {
                l.write(f, 5)?;
                write!(f, "^")?;
                r.write(f, 3)
            }
            Ast::Call(func, arg) => {
                write!(f, "{}(", func.name())?;
                arg.write(f, 0)?;
                write!(f, ")")
            }
        }
    }

    /// Replaces variable leaves: `q_i` by `q_subs[i]` and, when given, `t` by
    /// `t_sub`. Used to compose coordinate changes symbolically.
    pub fn substitute(&self, t_sub: Option<&Ast>, q_subs: &[Ast]) -> Ast {
        match self {
            Ast::Num(_) | Ast::Const(..) => self.clone(),
            Ast::Var(VarRef::Time) => t_sub.cloned().unwrap_or_else(|| self.clone()),
            Ast::Var(VarRef::Pos(i)) => q_subs[*i].clone(),
            Ast::Var(VarRef::Vel(_)) => self.clone(),
            Ast::Neg(x) => Ast::Neg(Box::new(x.substitute(t_sub, q_subs))),
            Ast::Add(l, r) => Ast::Add(
                Box::new(l.substitute(t_sub, q_subs)),
                Box::new(r.substitute(t_sub, q_subs)),
            ),
            Ast::Sub(l, r) => Ast::Sub(
                Box::new(l.substitute(t_sub, q_subs)),
                Box::new(r.substitute(t_sub, q_subs)),
            ),
            Ast::Mul(l, r) => Ast::Mul(
                Box::new(l.substitute(t_sub, q_subs)),
                Box::new(r.substitute(t_sub, q_subs)),
            ),
            Ast::Div(l, r) => Ast::Div(
                Box::new(l.substitute(t_sub, q_subs)),
                Box::new(r.substitute(t_sub, q_subs)),
            ),
            Ast::Pow(l, r) => Ast::Pow(
                Box::new(l.substitute(t_sub, q_subs)),
                Box::new(r.substitute(t_sub, q_subs)),
            ),
            Ast::Call(func, arg) => Ast::Call(*func, Box::new(arg.substitute(t_sub, q_subs))),
        }
    }

    fn visit_vars(&self, f: &mut impl FnMut(VarRef)) {
        match self {
            Ast::Num(_) | Ast::Const(..) => {}
            Ast::Var(v) => f(*v),
            Ast::Neg(x) | Ast::Call(_, x) => x.visit_vars(f),
            Ast::Add(l, r) | Ast::Sub(l, r) | Ast::Mul(l, r) | Ast::Div(l, r) | Ast::Pow(l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
        }
    }
}

/// A parsed, immutable expression over the jet variables of a fixed fibre
/// dimension `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    m: usize,
    ast: Ast,
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.write(f, 0)
    }
}

fn print_ast(ast: &Ast) -> String {
    struct P<'a>(&'a Ast);
    impl fmt::Display for P<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            self.0.write(f, 0)
        }
    }
    P(ast).to_string()
}

impl Expression {
    pub fn parse(src: &str, m: usize) -> Result<Self, ParseError> {
        Self::parse_with_constants(src, m, &BTreeMap::new())
    }

    pub fn parse_with_constants(
        src: &str,
        m: usize,
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self, ParseError> {
        let tokens = lex(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            m,
            constants,
        };
        let ast = parser.expr()?;
        if parser.pos < parser.tokens.len() {
            let (_, line, col) = &parser.tokens[parser.pos];
            return Err(ParseError {
                line: *line,
                col: *col,
                message: "unexpected trailing input".into(),
            });
        }
        Ok(Expression { m, ast })
    }

    /// Builds an expression from an already-constructed tree. Variable
    /// indices are checked against `m`.
    pub fn from_ast(ast: Ast, m: usize) -> Result<Self, ParseError> {
        let mut bad = None;
        ast.visit_vars(&mut |v| match v {
            VarRef::Pos(i) | VarRef::Vel(i) if i >= m => bad = Some(i),
            _ => {}
        });
        if let Some(i) = bad {
            return Err(ParseError {
                line: 1,
                col: 1,
                message: format!("variable index {} out of range for dimension {m}", i + 1),
            });
        }
        Ok(Expression { m, ast })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    /// Whether any velocity variable occurs in the tree.
    pub fn uses_velocity(&self) -> bool {
        let mut used = false;
        self.ast.visit_vars(&mut |v| {
            if matches!(v, VarRef::Vel(_)) {
                used = true;
            }
        });
        used
    }

    /// Evaluates over any scalar algebra; this is what lets derived fields
    /// carry Taylor coefficients through expression leaves.
    pub fn eval_scalar<T: Scalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<T, EvalError> {
        eval_node(&self.ast, t, q, v)
    }

    /// Plain pointwise evaluation.
    pub fn eval(&self, t: f64, q: &[f64], v: &[f64]) -> Result<f64, EvalError> {
        self.eval_scalar(&t, q, v)
    }

    /// Evaluates at a jet point with derivatives taken with respect to
    /// exactly the seeded variables, in their given order. An empty seed set
    /// reduces to plain evaluation.
    pub fn eval_ad(&self, p: &JetPoint1, seeds: &[VarRef]) -> Result<Taylor2Scalar, EvalError> {
        if p.dim() != self.m {
            return Err(EvalError::DimensionMismatch {
                context: "eval_ad jet point".into(),
                expected: self.m,
                actual: p.dim(),
            });
        }
        let n = seeds.len();
        let seed_of = |var: VarRef| seeds.iter().position(|s| *s == var);
        let lift = |x: f64, var: VarRef| match seed_of(var) {
            Some(k) => Taylor2Scalar::variable(x, k, n),
            None => Taylor2Scalar::constant(x, n),
        };
        let t = lift(p.t, VarRef::Time);
        let q: Vec<_> = (0..self.m).map(|i| lift(p.q[i], VarRef::Pos(i))).collect();
        let v: Vec<_> = (0..self.m).map(|i| lift(p.v[i], VarRef::Vel(i))).collect();
        self.eval_scalar(&t, &q, &v)
    }
}

fn eval_node<T: Scalar>(ast: &Ast, t: &T, q: &[T], v: &[T]) -> Result<T, EvalError> {
    match ast {
        Ast::Num(x) => Ok(t.constant_like(*x)),
        Ast::Const(_, x) => Ok(t.constant_like(*x)),
        Ast::Var(VarRef::Time) => Ok(t.clone()),
        Ast::Var(VarRef::Pos(i)) => {
            q.get(*i)
                .cloned()
                .ok_or_else(|| EvalError::DimensionMismatch {
                    context: "position slot".into(),
                    expected: *i + 1,
                    actual: q.len(),
                })
        }
        Ast::Var(VarRef::Vel(i)) => {
            v.get(*i)
                .cloned()
                .ok_or_else(|| EvalError::DimensionMismatch {
                    context: "velocity slot".into(),
                    expected: *i + 1,
                    actual: v.len(),
                })
        }
        Ast::Neg(x) => Ok(-eval_node(x, t, q, v)?),
        Ast::Add(l, r) => Ok(eval_node(l, t, q, v)? + eval_node(r, t, q, v)?),
        Ast::Sub(l, r) => Ok(eval_node(l, t, q, v)? - eval_node(r, t, q, v)?),
        Ast::Mul(l, r) => Ok(eval_node(l, t, q, v)? * eval_node(r, t, q, v)?),
        Ast::Div(l, r) => {
            let num = eval_node(l, t, q, v)?;
            let den = eval_node(r, t, q, v)?;
            if den.primal() == 0.0 {
                return Err(EvalError::DivisionByZero {
                    expr: print_ast(ast),
                });
            }
            Ok(num / den)
        }
        Ast::Pow(base, exp) => {
            let b = eval_node(base, t, q, v)?;
            match const_exponent(exp) {
                Some(k) if k.fract() == 0.0 && k.abs() <= 2_147_483_647.0 => {
                    let ki = k as i32;
                    if ki < 0 && b.primal() == 0.0 {
                        return Err(EvalError::DivisionByZero {
                            expr: print_ast(ast),
                        });
                    }
                    Ok(b.powi(ki))
                }
                Some(k) => {
                    if b.primal() <= 0.0 {
                        return Err(EvalError::PowDomain {
                            expr: print_ast(ast),
                        });
                    }
                    Ok(b.powf(k))
                }
                None => {
                    // variable exponent: b^e = exp(e * ln b)
                    if b.primal() <= 0.0 {
                        return Err(EvalError::PowDomain {
                            expr: print_ast(ast),
                        });
                    }
                    let e = eval_node(exp, t, q, v)?;
                    Ok((e * b.ln()).exp())
                }
            }
        }
        Ast::Call(func, arg) => {
            let x = eval_node(arg, t, q, v)?;
            match func {
                Func::Sin => Ok(x.sin()),
                Func::Cos => Ok(x.cos()),
                Func::Exp => Ok(x.exp()),
                Func::Log => {
                    if x.primal() <= 0.0 {
                        return Err(EvalError::LogDomain {
                            expr: print_ast(ast),
                        });
                    }
                    Ok(x.ln())
                }
                Func::Sqrt => {
                    if x.primal() < 0.0 {
                        return Err(EvalError::SqrtDomain {
                            expr: print_ast(ast),
                        });
                    }
                    Ok(x.sqrt())
                }
            }
        }
    }
}

/// Syntactically constant exponents (`2`, `-3`, a named constant) take the
/// exact integer or real power path; anything else goes through exp/ln.
fn const_exponent(ast: &Ast) -> Option<f64> {
    match ast {
        Ast::Num(x) => Some(*x),
        Ast::Const(_, x) => Some(*x),
        Ast::Neg(inner) => const_exponent(inner).map(|x| -x),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Lexer and parser
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
}

type SpannedTok = (Tok, usize, usize);

fn lex(src: &str) -> Result<Vec<SpannedTok>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    if src.trim().is_empty() {
        return Err(ParseError {
            line: 1,
            col: 1,
            message: "empty expression".into(),
        });
    }
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {
                col += 1;
                i += 1;
                continue;
            }
            '+' => out.push((Tok::Plus, tline, tcol)),
            '-' => out.push((Tok::Minus, tline, tcol)),
            '*' => out.push((Tok::Star, tline, tcol)),
            '/' => out.push((Tok::Slash, tline, tcol)),
            '^' => out.push((Tok::Caret, tline, tcol)),
            '(' => out.push((Tok::LParen, tline, tcol)),
            ')' => out.push((Tok::RParen, tline, tcol)),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                    col += 1;
                }
                // exponent part, e.g. 1.5e-3
                if i < chars.len()
                    && (chars[i] == 'e' || chars[i] == 'E')
                    && i + 1 < chars.len()
                    && (chars[i + 1].is_ascii_digit()
                        || ((chars[i + 1] == '+' || chars[i + 1] == '-')
                            && i + 2 < chars.len()
                            && chars[i + 2].is_ascii_digit()))
                {
                    i += 1;
                    col += 1;
                    if chars[i] == '+' || chars[i] == '-' {
                        i += 1;
                        col += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                        col += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| ParseError {
                    line: tline,
                    col: tcol,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num(value), tline, tcol));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                    col += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push((Tok::Ident(text), tline, tcol));
                continue;
            }
            other => {
                return Err(ParseError {
                    line: tline,
                    col: tcol,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
        col += 1;
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<SpannedTok>,
    pos: usize,
    m: usize,
    constants: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _, _)| t)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or((1, 1))
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut node = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                node = Ast::Add(Box::new(node), Box::new(self.term()?));
            } else if self.eat(&Tok::Minus) {
                node = Ast::Sub(Box::new(node), Box::new(self.term()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut node = self.factor()?;
        loop {
            if self.eat(&Tok::Star) {
                node = Ast::Mul(Box::new(node), Box::new(self.factor()?));
            } else if self.eat(&Tok::Slash) {
                node = Ast::Div(Box::new(node), Box::new(self.factor()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn factor(&mut self) -> Result<Ast, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(Ast::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.eat(&Tok::Caret) {
            let exp = self.factor()?;
            return Ok(Ast::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(x)) => {
                self.pos += 1;
                Ok(Ast::Num(x))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if !self.eat(&Tok::LParen) {
                        return Err(self.err(format!("expected `(` after function `{name}`")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(&Tok::RParen) {
                        return Err(self.err("expected `)`"));
                    }
                    return Ok(Ast::Call(func, Box::new(arg)));
                }
                self.ident(name)
            }
            _ => Err(self.err("expected a number, variable, or `(`")),
        }
    }

    fn ident(&mut self, name: String) -> Result<Ast, ParseError> {
        if name == "t" {
            return Ok(Ast::Var(VarRef::Time));
        }
        if let Some(rest) = name.strip_prefix('q').filter(|r| !r.is_empty()) {
            if let Ok(index) = rest.parse::<usize>() {
                return self.indexed(VarRef::Pos, index, &name);
            }
        }
        if let Some(rest) = name.strip_prefix('v').filter(|r| !r.is_empty()) {
            if let Ok(index) = rest.parse::<usize>() {
                return self.indexed(VarRef::Vel, index, &name);
            }
        }
        if let Some(&value) = self.constants.get(&name) {
            return Ok(Ast::Const(name, value));
        }
        Err(self.err(format!("unknown identifier `{name}`")))
    }

    fn indexed(
        &self,
        make: fn(usize) -> VarRef,
        index: usize,
        name: &str,
    ) -> Result<Ast, ParseError> {
        if index == 0 || index > self.m {
            return Err(self.err(format!(
                "variable `{name}` out of range for dimension {}",
                self.m
            )));
        }
        Ok(Ast::Var(make(index - 1)))
    }
}
