//! Formula syntax: actions, the core/negation/quantified ASTs, parsing and printing.
//!
//! Concrete grammar (whitespace insignificant):
//!
//! ```text
//! T            truth
//! F            falsity
//! <a>φ         modality
//! !{a,b}       tantum, !{} is the empty tantum
//! φ /\ ψ       conjunction, right-nested
//! ~φ           negation (neg dialect)
//! φ \/ ψ       disjunction (neg dialect)
//! exists X. φ  quantifiers (quantified dialect), X ranges over actions
//! ```
//!
//! Precedence from tightest: `~`, `<a>`, `/\`, `\/`, quantifiers.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An action name, `[a-z][A-Za-z0-9_]*`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(Arc<str>);

pub type ActionSet = BTreeSet<Action>;

impl Action {
    pub fn new(name: &str) -> Result<Self, ParseError> {
        if is_action_name(name) {
            Ok(Action(Arc::from(name)))
        } else {
            Err(ParseError::InvalidAction(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn is_action_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for Action {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::new(s)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Action::new(&name).map_err(serde::de::Error::custom)
    }
}

/// Builds an action set from names.
pub fn action_set<'a, I>(names: I) -> Result<ActionSet, ParseError>
where
    I: IntoIterator<Item = &'a str>,
{
    names.into_iter().map(Action::new).collect()
}

/// The ambient action alphabet Σ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Alphabet {
    /// Conceptually infinite.
    Open,
    /// A finite, non-empty set of actions.
    Closed(ActionSet),
}

/// Action used by char(⊥) when the alphabet is open.
pub const RESERVED_ACTION: &str = "a0";

impl Alphabet {
    pub fn closed(actions: ActionSet) -> Result<Self, ParseError> {
        if actions.is_empty() {
            Err(ParseError::EmptyAlphabet)
        } else {
            Ok(Alphabet::Closed(actions))
        }
    }

    /// Parses a comma-separated list such as `a,b,c`.
    pub fn parse_list(text: &str) -> Result<Self, ParseError> {
        let names = text.split(',').map(str::trim).filter(|s| !s.is_empty());
        Alphabet::closed(action_set(names)?)
    }

    pub fn actions(&self) -> Option<&ActionSet> {
        match self {
            Alphabet::Open => None,
            Alphabet::Closed(set) => Some(set),
        }
    }

    /// The fixed action used to spell out falsity.
    pub fn canonical_action(&self) -> Action {
        match self {
            Alphabet::Closed(set) => set.iter().next().cloned().expect("closed alphabet is non-empty"),
            Alphabet::Open => Action(Arc::from(RESERVED_ACTION)),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Top,
    Bottom,
    And(Box<Formula>, Box<Formula>),
    May(Action, Box<Formula>),
    Bang(ActionSet),
    Neg(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn may(a: Action, f: Formula) -> Formula {
        Formula::May(a, Box::new(f))
    }

    pub fn neg(f: Formula) -> Formula {
        Formula::Neg(Box::new(f))
    }

    pub fn bang<I: IntoIterator<Item = Action>>(actions: I) -> Formula {
        Formula::Bang(actions.into_iter().collect())
    }

    /// Right-nested conjunction; the empty conjunction is `T`.
    pub fn conj<I>(parts: I) -> Formula
    where
        I: IntoIterator<Item = Formula>,
        I::IntoIter: DoubleEndedIterator,
    {
        let mut it = parts.into_iter().rev();
        match it.next() {
            None => Formula::Top,
            Some(last) => it.fold(last, |acc, f| Formula::and(f, acc)),
        }
    }

    /// Right-nested disjunction; the empty disjunction is `F`.
    pub fn disj<I>(parts: I) -> Formula
    where
        I: IntoIterator<Item = Formula>,
        I::IntoIter: DoubleEndedIterator,
    {
        let mut it = parts.into_iter().rev();
        match it.next() {
            None => Formula::Bottom,
            Some(last) => it.fold(last, |acc, f| Formula::or(f, acc)),
        }
    }

    /// `⟨a1⟩…⟨an⟩ f`.
    pub fn path<I>(actions: I, f: Formula) -> Formula
    where
        I: IntoIterator<Item = Action>,
        I::IntoIter: DoubleEndedIterator,
    {
        actions.into_iter().rev().fold(f, |acc, a| Formula::may(a, acc))
    }

    /// True iff no `Neg` or `Or` occurs.
    pub fn is_core(&self) -> bool {
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                Formula::Top | Formula::Bottom | Formula::Bang(_) => {}
                Formula::May(_, g) => stack.push(g),
                Formula::And(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
                Formula::Neg(_) | Formula::Or(..) => return false,
            }
        }
        true
    }

    pub fn is_neg_free(&self) -> bool {
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                Formula::Top | Formula::Bottom | Formula::Bang(_) => {}
                Formula::May(_, g) => stack.push(g),
                Formula::And(l, r) | Formula::Or(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
                Formula::Neg(_) => return false,
            }
        }
        true
    }

    /// Actions occurring in modalities and tantum sets.
    pub fn actions(&self) -> ActionSet {
        let mut out = ActionSet::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                Formula::Top | Formula::Bottom => {}
                Formula::Bang(set) => out.extend(set.iter().cloned()),
                Formula::May(a, g) => {
                    out.insert(a.clone());
                    stack.push(g);
                }
                Formula::Neg(g) => stack.push(g),
                Formula::And(l, r) | Formula::Or(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        out
    }

    /// Nesting depth of modalities.
    pub fn modal_depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self, 0usize)];
        while let Some((f, d)) = stack.pop() {
            match f {
                Formula::Top | Formula::Bottom | Formula::Bang(_) => best = best.max(d),
                Formula::May(_, g) => stack.push((g, d + 1)),
                Formula::Neg(g) => stack.push((g, d)),
                Formula::And(l, r) | Formula::Or(l, r) => {
                    stack.push((l, d));
                    stack.push((r, d));
                }
            }
        }
        best
    }

    /// Number of AST nodes.
    pub fn length(&self) -> usize {
        let mut n = 0;
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            n += 1;
            match f {
                Formula::Top | Formula::Bottom | Formula::Bang(_) => {}
                Formula::May(_, g) | Formula::Neg(g) => stack.push(g),
                Formula::And(l, r) | Formula::Or(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        n
    }

    /// Replaces every `F` by the abbreviation `!{} /\ <a>T`.
    pub fn desugar_bottom(&self, a: &Action) -> Formula {
        match self {
            Formula::Bottom => Formula::and(Formula::Bang(ActionSet::new()), Formula::may(a.clone(), Formula::Top)),
            Formula::Top | Formula::Bang(_) => self.clone(),
            Formula::May(b, g) => Formula::may(b.clone(), g.desugar_bottom(a)),
            Formula::Neg(g) => Formula::neg(g.desugar_bottom(a)),
            Formula::And(l, r) => Formula::and(l.desugar_bottom(a), r.desugar_bottom(a)),
            Formula::Or(l, r) => Formula::or(l.desugar_bottom(a), r.desugar_bottom(a)),
        }
    }

    /// Flattens the right spine of a conjunction.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Formula::And(l, r) = cur {
            out.push(&**l);
            cur = r;
        }
        out.push(cur);
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_formula(&mut out, self, 0);
        f.write_str(&out)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub(crate) fn write_set<T: fmt::Display>(out: &mut String, items: impl IntoIterator<Item = T>) {
    out.push_str("!{");
    for (i, a) in items.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&a.to_string());
    }
    out.push('}');
}

// Precedence levels: 1 = \/, 2 = /\, 3 = prefix operators.
fn write_formula(out: &mut String, mut f: &Formula, mut ctx: u8) {
    loop {
        match f {
            Formula::Top => return out.push('T'),
            Formula::Bottom => return out.push('F'),
            Formula::Bang(set) => return write_set(out, set),
            Formula::May(a, g) => {
                out.push('<');
                out.push_str(a.as_str());
                out.push('>');
                f = g;
                ctx = 3;
            }
            Formula::Neg(g) => {
                out.push('~');
                f = g;
                ctx = 3;
            }
            Formula::And(..) | Formula::Or(..) => break,
        }
    }
    let (prec, sep) = match f {
        Formula::And(..) => (2, " /\\ "),
        _ => (1, " \\/ "),
    };
    if ctx > prec {
        out.push('(');
    }
    let mut cur = f;
    loop {
        match (cur, prec) {
            (Formula::And(l, r), 2) | (Formula::Or(l, r), 1) => {
                write_formula(out, l, prec + 1);
                out.push_str(sep);
                cur = r;
            }
            _ => {
                write_formula(out, cur, prec);
                break;
            }
        }
    }
    if ctx > prec {
        out.push(')');
    }
}

/// A quantified-dialect variable, `[A-Z][A-Za-z0-9_]*`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(Arc<str>);

impl Variable {
    pub fn new(name: &str) -> Result<Self, ParseError> {
        if is_variable_name(name) {
            Ok(Variable(Arc::from(name)))
        } else {
            Err(ParseError::InvalidVariable(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Action(Action),
    Var(Variable),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Action(a) => a.fmt(f),
            Term::Var(v) => v.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum QFormula {
    Top,
    And(Box<QFormula>, Box<QFormula>),
    May(Term, Box<QFormula>),
    Bang(BTreeSet<Term>),
    Exists(Variable, Box<QFormula>),
    Forall(Variable, Box<QFormula>),
}

impl QFormula {
    pub fn free_variables(&self) -> BTreeSet<Variable> {
        fn go(f: &QFormula, bound: &mut Vec<Variable>, out: &mut BTreeSet<Variable>) {
            let mut term = |t: &Term, bound: &Vec<Variable>| {
                if let Term::Var(v) = t {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            };
            match f {
                QFormula::Top => {}
                QFormula::Bang(ts) => ts.iter().for_each(|t| term(t, bound)),
                QFormula::May(t, g) => {
                    term(t, bound);
                    go(g, bound, out);
                }
                QFormula::And(l, r) => {
                    go(l, bound, out);
                    go(r, bound, out);
                }
                QFormula::Exists(v, g) | QFormula::Forall(v, g) => {
                    bound.push(v.clone());
                    go(g, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Checks that every variable is bound by exactly one enclosing quantifier.
    pub fn check_closed(&self) -> Result<(), ParseError> {
        fn go(f: &QFormula, bound: &mut Vec<Variable>) -> Result<(), ParseError> {
            let term = |t: &Term, bound: &Vec<Variable>| match t {
                Term::Var(v) if !bound.contains(v) => Err(ParseError::UnboundVariable(v.to_string())),
                _ => Ok(()),
            };
            match f {
                QFormula::Top => Ok(()),
                QFormula::Bang(ts) => ts.iter().try_for_each(|t| term(t, bound)),
                QFormula::May(t, g) => {
                    term(t, bound)?;
                    go(g, bound)
                }
                QFormula::And(l, r) => {
                    go(l, bound)?;
                    go(r, bound)
                }
                QFormula::Exists(v, g) | QFormula::Forall(v, g) => {
                    if bound.contains(v) {
                        return Err(ParseError::ShadowedVariable(v.to_string()));
                    }
                    bound.push(v.clone());
                    let res = go(g, bound);
                    bound.pop();
                    res
                }
            }
        }
        go(self, &mut Vec::new())
    }
}

impl fmt::Display for QFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_qformula(&mut out, self, 0);
        f.write_str(&out)
    }
}

// 0 = top level, 2 = conjunct, 3 = prefix operand.
fn write_qformula(out: &mut String, f: &QFormula, ctx: u8) {
    match f {
        QFormula::Top => out.push('T'),
        QFormula::Bang(ts) => write_set(out, ts),
        QFormula::May(t, g) => {
            out.push('<');
            out.push_str(&t.to_string());
            out.push('>');
            write_qformula(out, g, 3);
        }
        QFormula::And(l, r) => {
            if ctx > 2 {
                out.push('(');
            }
            write_qformula(out, l, 3);
            out.push_str(" /\\ ");
            write_qformula(out, r, 2);
            if ctx > 2 {
                out.push(')');
            }
        }
        QFormula::Exists(v, g) | QFormula::Forall(v, g) => {
            if ctx > 0 {
                out.push('(');
            }
            out.push_str(if matches!(f, QFormula::Exists(..)) { "exists " } else { "forall " });
            out.push_str(v.as_str());
            out.push_str(". ");
            write_qformula(out, g, 0);
            if ctx > 0 {
                out.push(')');
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    Core,
    Neg,
    Quantified,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Core => "core",
            Dialect::Neg => "neg",
            Dialect::Quantified => "quantified",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("`{construct}` at offset {position} is not allowed in the {dialect} dialect")]
    Dialect { position: usize, construct: &'static str, dialect: Dialect },
    #[error("invalid action name `{0}`")]
    InvalidAction(String),
    #[error("invalid variable name `{0}`")]
    InvalidVariable(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("variable `{0}` is bound twice")]
    ShadowedVariable(String),
    #[error("a closed alphabet must be non-empty")]
    EmptyAlphabet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParsedFormula {
    Plain(Formula),
    Quantified(QFormula),
}

pub fn parse_formula(text: &str, dialect: Dialect) -> Result<ParsedFormula, ParseError> {
    match dialect {
        Dialect::Quantified => parse_quantified(text).map(ParsedFormula::Quantified),
        _ => Parser::new(text, dialect).formula_eof().map(ParsedFormula::Plain),
    }
}

pub fn parse_core(text: &str) -> Result<Formula, ParseError> {
    Parser::new(text, Dialect::Core).formula_eof()
}

pub fn parse_neg(text: &str) -> Result<Formula, ParseError> {
    Parser::new(text, Dialect::Neg).formula_eof()
}

pub fn parse_quantified(text: &str) -> Result<QFormula, ParseError> {
    let mut p = Parser::new(text, Dialect::Quantified);
    let f = p.qformula()?;
    p.expect_eof()?;
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Lt,
    Gt,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Bang,
    Tilde,
    And,
    Or,
    Dot,
    Ident(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Lt => f.write_str("`<`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Tilde => f.write_str("`~`"),
            Tok::And => f.write_str("`/\\`"),
            Tok::Or => f.write_str("`\\/`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    peeked: Option<(usize, Tok, usize)>,
    dialect: Dialect,
}

enum Prefix {
    May(Action),
    Neg,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dialect: Dialect) -> Self {
        Parser { src, pos: 0, peeked: None, dialect }
    }

    fn error<T>(&self, position: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { position, message: message.into() })
    }

    fn lex(&self, mut pos: usize) -> Result<(usize, Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        if pos >= bytes.len() {
            return Ok((start, Tok::Eof, pos));
        }
        let single = |t| Ok((start, t, start + 1));
        match bytes[pos] {
            b'<' => single(Tok::Lt),
            b'>' => single(Tok::Gt),
            b'{' => single(Tok::LBrace),
            b'}' => single(Tok::RBrace),
            b'(' => single(Tok::LParen),
            b')' => single(Tok::RParen),
            b',' => single(Tok::Comma),
            b'!' => single(Tok::Bang),
            b'~' => single(Tok::Tilde),
            b'.' => single(Tok::Dot),
            b'/' if bytes.get(pos + 1) == Some(&b'\\') => Ok((start, Tok::And, start + 2)),
            b'\\' if bytes.get(pos + 1) == Some(&b'/') => Ok((start, Tok::Or, start + 2)),
            c if c.is_ascii_alphabetic() => {
                let mut end = pos;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                Ok((start, Tok::Ident(self.src[pos..end].to_string()), end))
            }
            _ => {
                let ch = self.src[pos..].chars().next().unwrap_or('?');
                self.error(start, format!("unexpected character `{ch}`"))
            }
        }
    }

    fn peek(&mut self) -> Result<(usize, Tok), ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex(self.pos)?);
        }
        let (start, tok, _) = self.peeked.clone().expect("peeked");
        Ok((start, tok))
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let (start, tok, end) = match self.peeked.take() {
            Some(p) => p,
            None => self.lex(self.pos)?,
        };
        self.pos = end;
        Ok((start, tok))
    }

    fn expect(&mut self, want: Tok) -> Result<usize, ParseError> {
        let (pos, tok) = self.next()?;
        if tok == want {
            Ok(pos)
        } else {
            self.error(pos, format!("expected {want}, found {tok}"))
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        let (pos, tok) = self.next()?;
        if tok == Tok::Eof {
            Ok(())
        } else {
            self.error(pos, format!("expected end of input, found {tok}"))
        }
    }

    fn dialect_error<T>(&self, position: usize, construct: &'static str) -> Result<T, ParseError> {
        Err(ParseError::Dialect { position, construct, dialect: self.dialect })
    }

    fn formula_eof(&mut self) -> Result<Formula, ParseError> {
        let f = self.disjunction()?;
        self.expect_eof()?;
        Ok(f)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.conjunction()?];
        loop {
            let (pos, tok) = self.peek()?;
            if tok != Tok::Or {
                break;
            }
            if self.dialect != Dialect::Neg {
                return self.dialect_error(pos, "\\/");
            }
            self.next()?;
            parts.push(self.conjunction()?);
        }
        Ok(Formula::disj(parts))
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.unary()?];
        while self.peek()?.1 == Tok::And {
            self.next()?;
            parts.push(self.unary()?);
        }
        Ok(Formula::conj(parts))
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        let (pos, tok) = self.next()?;
        match tok {
            Tok::Ident(name) if is_action_name(&name) => Action::new(&name),
            Tok::Ident(name) => self.error(pos, format!("`{name}` is not an action name")),
            other => self.error(pos, format!("expected an action, found {other}")),
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let mut prefixes = Vec::new();
        loop {
            let (pos, tok) = self.peek()?;
            match tok {
                Tok::Lt => {
                    self.next()?;
                    let a = self.action()?;
                    self.expect(Tok::Gt)?;
                    prefixes.push(Prefix::May(a));
                }
                Tok::Tilde => {
                    if self.dialect != Dialect::Neg {
                        return self.dialect_error(pos, "~");
                    }
                    self.next()?;
                    prefixes.push(Prefix::Neg);
                }
                _ => break,
            }
        }
        let atom = self.atom()?;
        Ok(prefixes.into_iter().rev().fold(atom, |acc, p| match p {
            Prefix::May(a) => Formula::may(a, acc),
            Prefix::Neg => Formula::neg(acc),
        }))
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let (pos, tok) = self.next()?;
        match tok {
            Tok::Ident(ref s) if s == "T" => Ok(Formula::Top),
            Tok::Ident(ref s) if s == "F" => Ok(Formula::Bottom),
            Tok::Ident(ref s) if s == "exists" || s == "forall" => self.dialect_error(pos, "quantifier"),
            Tok::Bang => {
                self.expect(Tok::LBrace)?;
                let mut set = ActionSet::new();
                if self.peek()?.1 == Tok::RBrace {
                    self.next()?;
                    return Ok(Formula::Bang(set));
                }
                loop {
                    set.insert(self.action()?);
                    let (pos, tok) = self.next()?;
                    match tok {
                        Tok::Comma => continue,
                        Tok::RBrace => break,
                        other => return self.error(pos, format!("expected `,` or `}}`, found {other}")),
                    }
                }
                Ok(Formula::Bang(set))
            }
            Tok::LParen => {
                let f = self.disjunction()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            other => self.error(pos, format!("expected a formula, found {other}")),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (pos, tok) = self.next()?;
        match tok {
            Tok::Ident(name) if is_action_name(&name) => Ok(Term::Action(Action::new(&name)?)),
            Tok::Ident(name) if is_variable_name(&name) => Ok(Term::Var(Variable::new(&name)?)),
            other => self.error(pos, format!("expected an action or variable, found {other}")),
        }
    }

    fn qformula(&mut self) -> Result<QFormula, ParseError> {
        let (pos, tok) = self.peek()?;
        match tok {
            Tok::Ident(ref kw) if kw == "exists" || kw == "forall" => {
                let exists = kw == "exists";
                self.next()?;
                let (vpos, vt) = self.next()?;
                let var = match vt {
                    Tok::Ident(name) if is_variable_name(&name) => Variable::new(&name)?,
                    other => return self.error(vpos, format!("expected a variable, found {other}")),
                };
                self.expect(Tok::Dot)?;
                let body = Box::new(self.qformula()?);
                Ok(if exists { QFormula::Exists(var, body) } else { QFormula::Forall(var, body) })
            }
            Tok::Or => self.dialect_error(pos, "\\/"),
            _ => {
                let first = self.qunary()?;
                if self.peek()?.1 == Tok::And {
                    self.next()?;
                    let rest = self.qformula_conj()?;
                    Ok(QFormula::And(Box::new(first), Box::new(rest)))
                } else {
                    Ok(first)
                }
            }
        }
    }

    // The right operand of /\ may itself start with a quantifier.
    fn qformula_conj(&mut self) -> Result<QFormula, ParseError> {
        self.qformula()
    }

    fn qunary(&mut self) -> Result<QFormula, ParseError> {
        let mut prefixes = Vec::new();
        while self.peek()?.1 == Tok::Lt {
            self.next()?;
            let t = self.term()?;
            self.expect(Tok::Gt)?;
            prefixes.push(t);
        }
        let (pos, tok) = self.next()?;
        let atom = match tok {
            Tok::Ident(ref s) if s == "T" => QFormula::Top,
            Tok::Ident(ref s) if s == "F" => return self.dialect_error(pos, "F"),
            Tok::Ident(ref s) if s == "exists" || s == "forall" => {
                self.peeked = None;
                self.pos = pos;
                self.qformula()?
            }
            Tok::Tilde => return self.dialect_error(pos, "~"),
            Tok::Bang => {
                self.expect(Tok::LBrace)?;
                let mut set = BTreeSet::new();
                if self.peek()?.1 == Tok::RBrace {
                    self.next()?;
                } else {
                    loop {
                        set.insert(self.term()?);
                        let (pos, tok) = self.next()?;
                        match tok {
                            Tok::Comma => continue,
                            Tok::RBrace => break,
                            other => return self.error(pos, format!("expected `,` or `}}`, found {other}")),
                        }
                    }
                }
                QFormula::Bang(set)
            }
            Tok::LParen => {
                let f = self.qformula()?;
                self.expect(Tok::RParen)?;
                f
            }
            other => return self.error(pos, format!("expected a formula, found {other}")),
        };
        Ok(prefixes.into_iter().rev().fold(atom, |acc, t| QFormula::May(t, Box::new(acc))))
    }
}
