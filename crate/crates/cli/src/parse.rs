//! Input documents: `key = value` lines with expressions over the
//! coordinates of a hypersurface, a map or a complete system.
//!
//! ```text
//! # Heisenberg hypersurface in ℂ²
//! kind = hypersurface
//! N = 2
//! rho = Im(w) - z1*conj(z1)
//! ```
//!
//! Lines starting with `#` are comments. Header keys (`kind`, `N`, `q`, `m`,
//! `k`, `order`, `box`) hold plain values; every other key holds an
//! expression. Expressions use `+ - * / ^`, parentheses, rational or
//! decimal literals, `i`, and for hypersurfaces `conj`, `Re`, `Im`.

use std::collections::BTreeMap;
use std::fmt;

use crjet_core::hypersurface::Hypersurface;
use crjet_core::jets::{CompleteSystem, Domain, JetLayout, JetVector};
use crjet_core::scalar::{fmt_rational, parse_rational, CScalar, Rational};
use crjet_core::{MultiIndex, Order, Pairing, TruncatedSeries};
use num_traits::{One, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{0}")]
    Document(String),
    #[error(transparent)]
    Core(#[from] crjet_core::Error),
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, col, msg: msg.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocKind {
    Hypersurface,
    Map,
    System,
    Jet,
}

impl DocKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hypersurface" => DocKind::Hypersurface,
            "map" => DocKind::Map,
            "system" => DocKind::System,
            "jet" => DocKind::Jet,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DocKind::Hypersurface => "hypersurface",
            DocKind::Map => "map",
            DocKind::System => "system",
            DocKind::Jet => "jet",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Conj,
    Re,
    Im,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Conj => "conj",
            Func::Re => "Re",
            Func::Im => "Im",
        }
    }
}

/// Expression syntax tree. Quotients of two literals are folded into one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Num(Rational),
    I,
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(r) if !r.is_integer() => 2,
            _ => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.prec();
        let bin = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr| {
            write_child(f, a, a.prec() < p)?;
            write!(f, "{op}")?;
            write_child(f, b, b.prec() <= p)
        };
        match self {
            Expr::Num(r) => write!(f, "{}", fmt_rational(r)),
            Expr::I => write!(f, "i"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, a.prec() < p)
            }
            Expr::Add(a, b) => bin(f, a, " + ", b),
            Expr::Sub(a, b) => bin(f, a, " - ", b),
            Expr::Mul(a, b) => bin(f, a, "*", b),
            Expr::Div(a, b) => bin(f, a, "/", b),
            Expr::Pow(a, e) => {
                write_child(f, a, a.prec() <= p)?;
                write!(f, "^{e}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let lit: String = chars[start..i].iter().collect();
            let r = parse_rational(&lit).ok_or_else(|| syntax(line, col, format!("bad number '{lit}'")))?;
            out.push((Tok::Num(r), col));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else {
            return Err(syntax(line, col, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

/// Recursive-descent parser; `allowed` decides which identifiers are variables.
struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
    vars: &'a dyn Fn(&str) -> bool,
    functions: bool,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        syntax(self.line, self.col(), msg)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.peek() == Some(&Tok::Op('/')) {
                let col = self.col();
                self.pos += 1;
                let rhs = self.unary()?;
                lhs = match (lhs, rhs) {
                    (Expr::Num(a), Expr::Num(b)) => {
                        if b.is_zero() {
                            return Err(syntax(self.line, col, "division by zero"));
                        }
                        Expr::Num(a / b)
                    }
                    (a, b) => Expr::Div(Box::new(a), Box::new(b)),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            match self.toks.get(self.pos).cloned() {
                Some((Tok::Num(r), col)) => {
                    self.pos += 1;
                    let e = if r.is_integer() { r.to_integer().to_u32() } else { None };
                    let e = e.ok_or_else(|| syntax(self.line, col, "exponent must be a non-negative integer"))?;
                    Ok(Expr::Pow(Box::new(base), e))
                }
                _ => Err(self.err("exponent must be a non-negative integer")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some((tok, col)) = self.toks.get(self.pos).cloned() else {
            return Err(self.err("unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(r) => Ok(Expr::Num(r)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Tok::Op(c) => Err(syntax(self.line, col, format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "conj" => Some(Func::Conj),
                    "Re" => Some(Func::Re),
                    "Im" => Some(Func::Im),
                    _ => None,
                };
                if let Some(func) = func {
                    if !self.functions {
                        return Err(syntax(self.line, col, format!("{name} is not allowed here")));
                    }
                    if !self.eat('(') {
                        return Err(self.err(format!("expected '(' after {name}")));
                    }
                    let e = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.err("expected ')'"));
                    }
                    return Ok(Expr::Call(func, Box::new(e)));
                }
                if name == "i" {
                    return Ok(Expr::I);
                }
                if (self.vars)(&name) {
                    Ok(Expr::Var(name))
                } else {
                    Err(syntax(self.line, col, format!("unknown identifier '{name}'")))
                }
            }
        }
    }
}

/// Parses one expression; `col0` is the 1-based column of its first character.
pub fn parse_expr(
    text: &str,
    line: usize,
    col0: usize,
    vars: &dyn Fn(&str) -> bool,
    functions: bool,
) -> Result<Expr, ParseError> {
    let toks = tokenize(text, line, col0)?;
    let end_col = col0 + text.chars().count();
    let mut p = Parser { toks, pos: 0, line, end_col, vars, functions };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

const HEADER_KEYS: [&str; 7] = ["kind", "N", "q", "m", "k", "order", "box"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputDocument {
    pub kind: DocKind,
    /// Header values other than `kind`, verbatim.
    pub declarations: BTreeMap<String, String>,
    /// Expression entries in file order.
    pub expressions: Vec<(String, Expr)>,
}

/// Names `f1`, `f1_x1`, `f2_x1x1x2` of jet coordinates `(i, β)`.
pub fn jet_name(i: usize, beta: &MultiIndex) -> String {
    let mut s = format!("f{}", i + 1);
    if beta.degree() > 0 {
        s.push('_');
        for v in 0..beta.len() {
            for _ in 0..beta.get(v) {
                s.push_str(&format!("x{}", v + 1));
            }
        }
    }
    s
}

/// Inverse of [`jet_name`].
pub fn parse_jet_name(name: &str, q: usize, m: usize) -> Option<(usize, MultiIndex)> {
    let rest = name.strip_prefix('f')?;
    let (idx, derivs) = match rest.split_once('_') {
        Some((a, b)) => (a, Some(b)),
        None => (rest, None),
    };
    let i: usize = idx.parse().ok()?;
    if i == 0 || i > m || idx.starts_with('0') {
        return None;
    }
    let mut beta = vec![0u32; q];
    if let Some(d) = derivs {
        let mut parts = d.split('x');
        if parts.next() != Some("") {
            return None;
        }
        let mut count = 0;
        for p in parts {
            let v: usize = p.parse().ok()?;
            if v == 0 || v > q || p.starts_with('0') {
                return None;
            }
            beta[v - 1] += 1;
            count += 1;
        }
        if count == 0 {
            return None;
        }
    }
    Some((i - 1, MultiIndex::from_slice(&beta)))
}

fn coordinate_names(big_n: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..big_n).map(|j| format!("z{j}")).collect();
    names.push("w".into());
    names
}

fn parse_usize(decls: &BTreeMap<String, (String, usize)>, key: &str) -> Result<Option<usize>, ParseError> {
    match decls.get(key) {
        None => Ok(None),
        Some((v, line)) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| syntax(*line, 1, format!("{key} must be a non-negative integer, got '{v}'"))),
    }
}

impl InputDocument {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut decls: BTreeMap<String, (String, usize)> = BTreeMap::new();
        let mut entries: Vec<(String, String, usize, usize)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let trimmed = raw.trim_start();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some(eq) = raw.find('=') else {
                return Err(syntax(line, raw.len() - trimmed.len() + 1, "expected 'key = value'"));
            };
            let key = raw[..eq].trim().to_string();
            if key.is_empty() {
                return Err(syntax(line, 1, "missing key before '='"));
            }
            let value = &raw[eq + 1..];
            let lead = value.len() - value.trim_start().len();
            let col = raw[..eq + 1 + lead].chars().count() + 1;
            if HEADER_KEYS.contains(&key.as_str()) {
                if decls.insert(key.clone(), (value.trim().to_string(), line)).is_some() {
                    return Err(syntax(line, 1, format!("duplicate declaration of {key}")));
                }
            } else {
                if entries.iter().any(|e| e.0 == key) {
                    return Err(syntax(line, 1, format!("duplicate entry for {key}")));
                }
                entries.push((key, value.trim().to_string(), line, col));
            }
        }
        let (kind_text, kind_line) =
            decls.get("kind").cloned().ok_or_else(|| ParseError::Document("missing 'kind' declaration".into()))?;
        let kind = DocKind::parse(&kind_text)
            .ok_or_else(|| syntax(kind_line, 1, format!("unknown kind '{kind_text}'")))?;

        let mut expressions = Vec::with_capacity(entries.len());
        match kind {
            DocKind::Hypersurface | DocKind::Map => {
                let big_n = parse_usize(&decls, "N")?
                    .ok_or_else(|| ParseError::Document(format!("{} documents need N", kind.name())))?;
                if big_n < 2 {
                    return Err(ParseError::Document(format!("N must be at least 2, got {big_n}")));
                }
                let names = coordinate_names(big_n);
                let is_var = |s: &str| names.iter().any(|n| n == s);
                for (key, value, line, col) in entries {
                    let allowed = match kind {
                        DocKind::Hypersurface => key == "rho",
                        _ => names.contains(&key),
                    };
                    if !allowed {
                        return Err(syntax(line, 1, format!("unknown key '{key}' in a {} document", kind.name())));
                    }
                    let e = parse_expr(&value, line, col, &is_var, kind == DocKind::Hypersurface)?;
                    expressions.push((key, e));
                }
            }
            DocKind::System | DocKind::Jet => {
                let get = |k: &str| {
                    parse_usize(&decls, k)?
                        .ok_or_else(|| ParseError::Document(format!("{} documents need {k}", kind.name())))
                };
                let (q, m, k) = (get("q")?, get("m")?, get("k")? as u32);
                let layout = JetLayout::new(q, m, k)?;
                let is_var = |s: &str| {
                    if let Some(v) = s.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        return v >= 1 && v <= q && !s[1..].starts_with('0');
                    }
                    matches!(parse_jet_name(s, q, m), Some((i, b)) if layout.index(i, &b).is_some())
                };
                for (key, value, line, col) in entries {
                    let Some((_, beta)) = parse_jet_name(&key, q, m) else {
                        return Err(syntax(line, 1, format!("'{key}' does not name a derivative f<i>_x<j>…")));
                    };
                    let want = if kind == DocKind::System { k + 1 } else { beta.degree().min(k) };
                    if beta.degree() != want || (kind == DocKind::Jet && beta.degree() > k) {
                        let what = if kind == DocKind::System { "of order k+1" } else { "of order ≤ k" };
                        return Err(syntax(line, 1, format!("'{key}' is not a derivative {what}")));
                    }
                    let e = if kind == DocKind::System {
                        parse_expr(&value, line, col, &is_var, false)?
                    } else {
                        parse_expr(&value, line, col, &|_| false, false)?
                    };
                    expressions.push((key, e));
                }
            }
        }
        let declarations = decls.into_iter().filter(|(k, _)| k != "kind").map(|(k, (v, _))| (k, v)).collect();
        Ok(InputDocument { kind, declarations, expressions })
    }

    /// Canonical text; parsing it again gives back the same document.
    pub fn serialize(&self) -> String {
        let mut out = format!("kind = {}\n", self.kind.name());
        for (k, v) in &self.declarations {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for (k, e) in &self.expressions {
            out.push_str(&format!("{k} = {e}\n"));
        }
        out
    }

    fn decl_usize(&self, key: &str) -> Result<Option<usize>, ParseError> {
        match self.declarations.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ParseError::Document(format!("{key} must be a non-negative integer"))),
        }
    }

    pub fn big_n(&self) -> Result<usize, ParseError> {
        self.decl_usize("N")?.ok_or_else(|| ParseError::Document("missing N".into()))
    }

    /// Truncation order declared in the document, if any.
    pub fn order(&self) -> Result<Option<u32>, ParseError> {
        Ok(self.decl_usize("order")?.map(|o| o as u32))
    }

    fn expression(&self, key: &str) -> Option<&Expr> {
        self.expressions.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    }

    fn expect_kind(&self, kind: DocKind) -> Result<(), ParseError> {
        if self.kind != kind {
            return Err(ParseError::Document(format!(
                "expected a {} document, got a {} document",
                kind.name(),
                self.kind.name()
            )));
        }
        Ok(())
    }

    /// Hypersurface `ρ = 0` at the given working order.
    pub fn hypersurface(&self, order: u32) -> Result<Hypersurface, ParseError> {
        self.expect_kind(DocKind::Hypersurface)?;
        let big_n = self.big_n()?;
        let rho = self.expression("rho").ok_or_else(|| ParseError::Document("missing rho".into()))?;
        let names = coordinate_names(big_n);
        let series = lower(rho, &Lowering::ambient(&names), None)?;
        Ok(Hypersurface::from_defining(&series, big_n, order)?)
    }

    /// Map components `(z', w')` in the ambient variables, in coordinate order.
    pub fn map_components(&self, big_n: usize, order: u32) -> Result<Vec<TruncatedSeries>, ParseError> {
        self.expect_kind(DocKind::Map)?;
        if self.big_n()? != big_n {
            return Err(ParseError::Document(format!("map is declared in ℂ^{}, hypersurfaces in ℂ^{big_n}", self.big_n()?)));
        }
        let names = coordinate_names(big_n);
        let ctx = Lowering::ambient(&names);
        names
            .iter()
            .map(|n| {
                let e = self.expression(n).ok_or_else(|| ParseError::Document(format!("map is missing component {n}")))?;
                lower(e, &ctx, Some(order))
            })
            .collect()
    }

    /// Complete system with polynomial right-hand sides.
    pub fn system(&self) -> Result<CompleteSystem, ParseError> {
        self.expect_kind(DocKind::System)?;
        let (q, m, k) = self.qmk()?;
        let layout = JetLayout::new(q, m, k)?;
        let mut names: Vec<String> = (1..=q).map(|v| format!("x{v}")).collect();
        names.extend((0..layout.len()).map(|idx| {
            let (i, b) = layout.entry(idx);
            jet_name(i, &b)
        }));
        let ctx = Lowering { names: &names, pairing: None };
        let mut rhs = BTreeMap::new();
        for (key, e) in &self.expressions {
            let (i, b) = parse_jet_name(key, q, m).expect("validated on parse");
            rhs.insert((i, b), lower(e, &ctx, None)?);
        }
        let mut s = CompleteSystem::polynomial(q, m, k, rhs)?;
        if let Some(b) = self.declarations.get("box") {
            let r = parse_rational(b).ok_or_else(|| ParseError::Document(format!("box must be a number, got '{b}'")))?;
            let r = crjet_core::scalar::rational_to_f64(&r);
            let nv = q + layout.len();
            s = s.with_domain(Domain { lower: vec![-r; nv], upper: vec![r; nv] })?;
        }
        Ok(s)
    }

    /// Jet values; every coordinate of order `≤ k` must be given.
    pub fn jet(&self) -> Result<JetVector, ParseError> {
        self.expect_kind(DocKind::Jet)?;
        let (q, m, k) = self.qmk()?;
        let mut jet = JetVector::zeros(q, m, k)?;
        let layout = jet.layout().clone();
        for idx in 0..layout.len() {
            let (i, b) = layout.entry(idx);
            let name = jet_name(i, &b);
            let e = self.expression(&name).ok_or_else(|| ParseError::Document(format!("jet is missing {name}")))?;
            let c = lower(e, &Lowering { names: &[], pairing: None }, None)?.constant_term();
            if !c.is_real() {
                return Err(ParseError::Document(format!("{name} must be real")));
            }
            jet.set(i, &b, c.re)?;
        }
        Ok(jet)
    }

    fn qmk(&self) -> Result<(usize, usize, u32), ParseError> {
        let get = |k: &str| self.decl_usize(k)?.ok_or_else(|| ParseError::Document(format!("missing {k}")));
        Ok((get("q")?, get("m")?, get("k")? as u32))
    }
}

/// Variable names in series order, plus the conjugation pairing when
/// conjugates exist (ambient variables come with their conjugates).
pub struct Lowering<'a> {
    names: &'a [String],
    pairing: Option<Pairing>,
}

impl<'a> Lowering<'a> {
    pub fn ambient(names: &'a [String]) -> Self {
        Lowering { names, pairing: Some(Pairing::ambient(names.len())) }
    }

    pub fn plain(names: &'a [String]) -> Self {
        Lowering { names, pairing: None }
    }

    fn nvars(&self) -> usize {
        match self.pairing {
            Some(_) => 2 * self.names.len(),
            None => self.names.len(),
        }
    }
}

/// Evaluates an expression to a series; division by a non-constant needs an order.
pub fn lower(e: &Expr, ctx: &Lowering<'_>, order: Option<u32>) -> Result<TruncatedSeries, ParseError> {
    let nv = ctx.nvars();
    let rec = |x: &Expr| lower(x, ctx, order);
    Ok(match e {
        Expr::Num(r) => TruncatedSeries::constant(nv, CScalar::real(r.clone()), Order::Exact),
        Expr::I => TruncatedSeries::constant(nv, CScalar::i(), Order::Exact),
        Expr::Var(v) => {
            let idx = ctx.names.iter().position(|n| n == v).expect("validated on parse");
            TruncatedSeries::var(nv, idx, Order::Exact)
        }
        Expr::Neg(a) => rec(a)?.neg(),
        Expr::Add(a, b) => rec(a)?.try_add(&rec(b)?)?,
        Expr::Sub(a, b) => rec(a)?.try_sub(&rec(b)?)?,
        Expr::Mul(a, b) => rec(a)?.try_mul(&rec(b)?)?,
        Expr::Div(a, b) => {
            let num = rec(a)?;
            let den = rec(b)?;
            if den.is_zero() {
                return Err(ParseError::Document(format!("division by zero in {e}")));
            }
            if den.num_terms() == 1 && den.max_degree() == Some(0) {
                num.scale(&den.constant_term().inv().expect("nonzero"))
            } else {
                let o = order.ok_or_else(|| {
                    ParseError::Document(format!("division by a non-constant needs a truncation order: {e}"))
                })?;
                num.try_mul(&den.truncate(Order::Finite(o)).invert_unit()?)?
            }
        }
        Expr::Pow(a, n) => rec(a)?.pow(*n),
        Expr::Call(f, a) => {
            let pairing = ctx.pairing.as_ref().ok_or_else(|| ParseError::Document(format!("{} is not allowed here", f.name())))?;
            let x = rec(a)?;
            let xc = x.conjugate(pairing)?;
            match f {
                Func::Conj => xc,
                Func::Re => x.try_add(&xc)?.scale(&CScalar::real(crjet_core::scalar::rat(1, 2))),
                Func::Im => x.try_sub(&xc)?.scale(&CScalar::from_ratios((0, 1), (-1, 2))),
            }
        }
    })
}

/// A constant expression such as `1/2`, `-0.25` or `1/3 + 2/5*i`.
pub fn parse_constant(text: &str) -> Result<CScalar, ParseError> {
    let e = parse_expr(text, 1, 1, &|_| false, false)?;
    Ok(lower(&e, &Lowering { names: &[], pairing: None }, None)?.constant_term())
}

/// Renders an exact scalar as `p/q`, `p/q*i` or `p/q + r/s*i`.
pub fn fmt_scalar(c: &CScalar) -> String {
    c.to_string()
}

fn scalar_expr(c: &CScalar) -> Expr {
    let imag = |im: &Rational| {
        if im.is_one() {
            Expr::I
        } else {
            Expr::Mul(Box::new(Expr::Num(im.clone())), Box::new(Expr::I))
        }
    };
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => Expr::Num(c.re.clone()),
        (true, false) => imag(&c.im),
        _ => Expr::Add(Box::new(Expr::Num(c.re.clone())), Box::new(imag(&c.im))),
    }
}

/// A polynomial as an expression; `factors[v]` stands for variable `v`.
pub fn series_expr(s: &TruncatedSeries, factors: &[Expr]) -> Expr {
    let mut out: Option<Expr> = None;
    for (mono, c) in s.terms() {
        let mut term = if c.is_one() && mono.degree() > 0 { None } else { Some(scalar_expr(c)) };
        for (v, f) in factors.iter().enumerate() {
            let e = mono.get(v);
            if e > 0 {
                let pow = if e == 1 { f.clone() } else { Expr::Pow(Box::new(f.clone()), e) };
                term = Some(match term {
                    None => pow,
                    Some(t) => Expr::Mul(Box::new(t), Box::new(pow)),
                });
            }
        }
        let term = term.expect("constant or variable part");
        out = Some(match out {
            None => term,
            Some(acc) => Expr::Add(Box::new(acc), Box::new(term)),
        });
    }
    out.unwrap_or(Expr::Num(Rational::zero()))
}

/// Names of the ambient variables `(z, w, z̄, w̄)` as expressions.
pub fn ambient_factors(big_n: usize) -> Vec<Expr> {
    let names = coordinate_names(big_n);
    let mut f: Vec<Expr> = names.iter().map(|n| Expr::Var(n.clone())).collect();
    f.extend(names.iter().map(|n| Expr::Call(Func::Conj, Box::new(Expr::Var(n.clone())))));
    f
}

/// Hypersurface document for `Im w = φ(z, z̄, Re w)` given the graph
/// function in the variables `(z₁…zₙ, z̄₁…z̄ₙ, s)`.
pub fn graph_document(phi: &TruncatedSeries, big_n: usize) -> Result<String, ParseError> {
    let n = big_n - 1;
    if phi.nvars() != 2 * n + 1 {
        return Err(ParseError::Document(format!("graph function must have {} variables", 2 * n + 1)));
    }
    let mut factors: Vec<Expr> = (1..=n).map(|j| Expr::Var(format!("z{j}"))).collect();
    factors.extend((1..=n).map(|j| Expr::Call(Func::Conj, Box::new(Expr::Var(format!("z{j}"))))));
    factors.push(Expr::Call(Func::Re, Box::new(Expr::Var("w".into()))));
    let im_w = Expr::Call(Func::Im, Box::new(Expr::Var("w".into())));
    let rho = Expr::Sub(Box::new(im_w), Box::new(series_expr(phi, &factors)));
    Ok(format!("kind = hypersurface\nN = {big_n}\nrho = {rho}\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEISENBERG: &str = "kind = hypersurface\nN = 2\nrho = Im(w) - z1*conj(z1)\n";

    #[test]
    fn heisenberg_document() {
        let doc = InputDocument::parse(HEISENBERG).unwrap();
        assert_eq!(doc.kind, DocKind::Hypersurface);
        let m = doc.hypersurface(6).unwrap();
        assert_eq!(m.phi(), crjet_core::models::heisenberg(2, 6).unwrap().phi());
    }

    #[test]
    fn m3_document() {
        let text = "kind = hypersurface\nN = 3\nrho = Im(w) - z1*conj(z1) - 1/2*(z1^2*conj(z2) + conj(z1)^2*z2)\n";
        let m = InputDocument::parse(text).unwrap().hypersurface(6).unwrap();
        assert_eq!(m.phi(), crjet_core::models::m3(6).unwrap().phi());
    }

    #[test]
    fn non_real_rho_is_rejected() {
        let doc = InputDocument::parse("kind = hypersurface\nN = 2\nrho = z1\n").unwrap();
        assert!(matches!(doc.hypersurface(6), Err(ParseError::Core(crjet_core::Error::NotReal))));
    }

    #[test]
    fn errors_carry_positions() {
        let e = InputDocument::parse("kind = hypersurface\nN = 2\nrho = Im(w) - z3\n").unwrap_err();
        assert_eq!(e, syntax(3, 15, "unknown identifier 'z3'"));
        let e = InputDocument::parse("kind = map\nN = 2\nz1 = conj(z1)\nw = w\n").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 3, col: 6, .. }), "{e}");
        let e = InputDocument::parse("kind = hypersurface\nN = 2\nrho = (w\n").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 3, col: 9, .. }), "{e}");
    }

    #[test]
    fn round_trip() {
        for text in [
            HEISENBERG,
            "kind = hypersurface\nN = 3\norder = 8\nrho = Im(w) - z1*conj(z1) - 1/2*(z1^2*conj(z2) + conj(z1)^2*z2)\n",
            "kind = map\nN = 2\nz1 = (3 + 4*i)/5*z1 - -z1\nw = w/(1 - w)^2 - (0.5)^3\n",
            "kind = system\nq = 2\nm = 1\nk = 1\nf1_x1x1 = 6 + (f1_x1 - 1 - x1)\nf1_x1x2 = x2*(f1 - 1)\nf1_x2x2 = -1\n",
            "kind = jet\nq = 1\nm = 1\nk = 1\nf1 = 1\nf1_x1 = -2.5\n",
        ] {
            let doc = InputDocument::parse(text).unwrap();
            let again = InputDocument::parse(&doc.serialize()).unwrap();
            assert_eq!(doc, again, "{}", doc.serialize());
        }
    }

    #[test]
    fn graph_documents_reproduce_random_models() {
        for seed in 0..5 {
            for big_n in [2, 3] {
                let m = crjet_core::models::random(seed, big_n, 6).unwrap();
                let text = graph_document(m.phi(), big_n).unwrap();
                let again = InputDocument::parse(&text).unwrap().hypersurface(6).unwrap();
                assert_eq!(again.phi(), m.phi(), "{text}");
            }
        }
    }

    #[test]
    fn jet_names() {
        let b = MultiIndex::from_slice(&[2, 1]);
        assert_eq!(jet_name(0, &b), "f1_x1x1x2");
        assert_eq!(parse_jet_name("f1_x1x1x2", 2, 1), Some((0, b)));
        assert_eq!(parse_jet_name("f2", 2, 1), None);
        assert_eq!(parse_jet_name("f1_", 2, 1), None);
    }

    #[test]
    fn system_and_jet_documents() {
        let s = InputDocument::parse("kind = system\nq = 1\nm = 1\nk = 1\nf1_x1x1 = 0\n").unwrap().system().unwrap();
        assert_eq!((s.q(), s.m(), s.k()), (1, 1, 1));
        let j = InputDocument::parse("kind = jet\nq = 1\nm = 1\nk = 1\nf1 = 1\nf1_x1 = 0.25\n").unwrap().jet().unwrap();
        assert_eq!(j.values()[1], crjet_core::scalar::rat(1, 4));
        assert!(InputDocument::parse("kind = jet\nq = 1\nm = 1\nk = 1\nf1 = 1\n").unwrap().jet().is_err());
        assert!(InputDocument::parse("kind = system\nq = 1\nm = 1\nk = 1\nf1_x1 = 0\n").is_err());
    }
}
