//! Translations into first-order logic and Hennessy-Milner logic.
//!
//! Two first-order signatures are supported. The single-sorted one has binary
//! `Arrow_a` predicates and unary `Restrict_A` predicates. The two-sorted one has
//! states and actions, `Allowed(x, a)` and `Arrow(x, a, y)`. [`eval_fol`] is a
//! finite-model evaluator used to test both correspondence theorems.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{Model, ModelBuilder, StateId, StateLabel};
use crate::syntax::{Action, ActionSet, Alphabet, Formula};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FolError {
    #[error("F has no counterpart in the target fragment")]
    BottomUnsupported,
    #[error("formula uses negation or disjunction")]
    NotCore,
    #[error("the two-sorted translation needs a closed alphabet")]
    OpenAlphabet,
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("the model violates the admissibility or determinism guard")]
    GuardsViolated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sort {
    /// The single sort of the one-sorted signature (states).
    Single,
    State,
    Action,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(Action),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FolFormula {
    Top,
    /// Falsum; also the empty membership disjunction.
    Bottom,
    /// `Arrow_a(x, y)` of the one-sorted signature.
    ArrowA(Action, String, String),
    /// `Restrict_A(x)`: λ(x) ⊆ A.
    Restrict(ActionSet, String),
    /// `Allowed(x, a)` of the two-sorted signature.
    Allowed(String, Term),
    /// `Arrow(x, a, y)` of the two-sorted signature.
    Arrow(String, Term, String),
    Eq(Term, Term),
    And(Box<FolFormula>, Box<FolFormula>),
    Or(Box<FolFormula>, Box<FolFormula>),
    Implies(Box<FolFormula>, Box<FolFormula>),
    Neg(Box<FolFormula>),
    Exists(Sort, String, Box<FolFormula>),
    Forall(Sort, String, Box<FolFormula>),
}

impl FolFormula {
    pub fn and(l: FolFormula, r: FolFormula) -> Self {
        FolFormula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: FolFormula, r: FolFormula) -> Self {
        FolFormula::Or(Box::new(l), Box::new(r))
    }

    pub fn implies(l: FolFormula, r: FolFormula) -> Self {
        FolFormula::Implies(Box::new(l), Box::new(r))
    }

    pub fn exists(sort: Sort, v: &str, body: FolFormula) -> Self {
        FolFormula::Exists(sort, v.to_string(), Box::new(body))
    }

    pub fn forall(sort: Sort, v: &str, body: FolFormula) -> Self {
        FolFormula::Forall(sort, v.to_string(), Box::new(body))
    }

    /// Right-nested disjunction; falsum when empty.
    pub fn disj(parts: Vec<FolFormula>) -> Self {
        parts.into_iter().rev().reduce(|acc, p| FolFormula::or(p, acc)).unwrap_or(FolFormula::Bottom)
    }

    fn is_atomic(&self) -> bool {
        !matches!(self, FolFormula::And(..) | FolFormula::Or(..) | FolFormula::Implies(..))
    }
}

fn quantifier(sort: Sort) -> &'static str {
    match sort {
        Sort::Single => "",
        Sort::State => "st ",
        Sort::Action => "act ",
    }
}

impl fmt::Display for FolFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Binary operators chain to the right without parens; other compound children are parenthesised.
        let child = |f: &mut fmt::Formatter<'_>, c: &FolFormula, same: bool| {
            if c.is_atomic() || same {
                write!(f, "{c}")
            } else {
                write!(f, "({c})")
            }
        };
        match self {
            FolFormula::Top => f.write_str("T"),
            FolFormula::Bottom => f.write_str("F"),
            FolFormula::ArrowA(a, x, y) => write!(f, "Arrow_{a}({x},{y})"),
            FolFormula::Restrict(set, x) => {
                let items: Vec<String> = set.iter().map(|a| a.to_string()).collect();
                write!(f, "Restrict{{{}}}({x})", items.join(","))
            }
            FolFormula::Allowed(x, a) => write!(f, "Allowed({x},{a})"),
            FolFormula::Arrow(x, a, y) => write!(f, "Arrow({x},{a},{y})"),
            FolFormula::Eq(l, r) => write!(f, "{l}={r}"),
            FolFormula::And(l, r) => {
                child(f, l, false)?;
                f.write_str(" /\\ ")?;
                child(f, r, matches!(**r, FolFormula::And(..)))
            }
            FolFormula::Or(l, r) => {
                child(f, l, false)?;
                f.write_str(" \\/ ")?;
                child(f, r, matches!(**r, FolFormula::Or(..)))
            }
            FolFormula::Implies(l, r) => {
                child(f, l, false)?;
                f.write_str(" -> ")?;
                child(f, r, false)
            }
            FolFormula::Neg(g) => {
                f.write_str("~")?;
                child(f, g, false)
            }
            FolFormula::Exists(s, v, body) => write!(f, "exists {}{v}.({body})", quantifier(*s)),
            FolFormula::Forall(s, v, body) => write!(f, "forall {}{v}.({body})", quantifier(*s)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

impl Side {
    fn var(self) -> &'static str {
        match self {
            Side::X => "x",
            Side::Y => "y",
        }
    }

    fn other(self) -> Side {
        match self {
            Side::X => Side::Y,
            Side::Y => Side::X,
        }
    }
}

/// Bound action variable used by the two-sorted tantum clause.
const ACTION_VAR: &str = "A";

fn check_translatable(f: &Formula) -> Result<(), FolError> {
    if !f.is_core() {
        return Err(FolError::NotCore);
    }
    let mut stack = vec![f];
    while let Some(g) = stack.pop() {
        match g {
            Formula::Bottom => return Err(FolError::BottomUnsupported),
            Formula::And(l, r) => stack.extend([&**l, &**r]),
            Formula::May(_, h) => stack.push(h),
            _ => {}
        }
    }
    Ok(())
}

/// The single-sorted translation relative to `side`; variables alternate at each modality.
pub fn translate_fol1(f: &Formula, side: Side) -> Result<FolFormula, FolError> {
    check_translatable(f)?;
    Ok(fol1(f, side))
}

fn fol1(f: &Formula, side: Side) -> FolFormula {
    let (x, y) = (side.var(), side.other().var());
    match f {
        Formula::Top => FolFormula::Top,
        Formula::And(l, r) => FolFormula::and(fol1(l, side), fol1(r, side)),
        Formula::May(a, g) => {
            FolFormula::exists(Sort::Single, y, FolFormula::and(FolFormula::ArrowA(a.clone(), x.into(), y.into()), fol1(g, side.other())))
        }
        Formula::Bang(set) => FolFormula::Restrict(set.clone(), x.into()),
        Formula::Bottom | Formula::Neg(_) | Formula::Or(..) => unreachable!("checked"),
    }
}

/// The two-sorted translation, relative to `x`.
pub fn translate_fol2(f: &Formula) -> Result<FolFormula, FolError> {
    check_translatable(f)?;
    Ok(fol2(f, Side::X))
}

fn fol2(f: &Formula, side: Side) -> FolFormula {
    let (x, y) = (side.var(), side.other().var());
    match f {
        Formula::Top => FolFormula::Top,
        Formula::And(l, r) => FolFormula::and(fol2(l, side), fol2(r, side)),
        Formula::May(a, g) => FolFormula::exists(
            Sort::State,
            y,
            FolFormula::and(FolFormula::Arrow(x.into(), Term::Const(a.clone()), y.into()), fol2(g, side.other())),
        ),
        Formula::Bang(set) => {
            let var = || Term::Var(ACTION_VAR.into());
            let member = FolFormula::disj(set.iter().map(|a| FolFormula::Eq(var(), Term::Const(a.clone()))).collect());
            FolFormula::forall(Sort::Action, ACTION_VAR, FolFormula::implies(FolFormula::Allowed(x.into(), var()), member))
        }
        Formula::Bottom | Formula::Neg(_) | Formula::Or(..) => unreachable!("checked"),
    }
}

/// `(φ_admis, φ_det)`.
pub fn guards() -> (FolFormula, FolFormula) {
    let v = |s: &str| s.to_string();
    let act = || Term::Var(ACTION_VAR.into());
    let arrow = |t: &str| FolFormula::Arrow(v("s"), act(), v(t));
    let admis = FolFormula::forall(
        Sort::State,
        "s",
        FolFormula::forall(Sort::Action, ACTION_VAR, FolFormula::forall(Sort::State, "t", FolFormula::implies(arrow("t"), FolFormula::Allowed(v("s"), act())))),
    );
    let det = FolFormula::forall(
        Sort::State,
        "s",
        FolFormula::forall(
            Sort::Action,
            ACTION_VAR,
            FolFormula::forall(
                Sort::State,
                "t",
                FolFormula::forall(
                    Sort::State,
                    "u",
                    FolFormula::implies(FolFormula::and(arrow("t"), arrow("u")), FolFormula::Eq(Term::Var(v("t")), Term::Var(v("u")))),
                ),
            ),
        ),
    );
    (admis, det)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FolTarget {
    OneSorted,
    TwoSorted,
}

/// A finite first-order structure for either signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FolModel {
    pub target: FolTarget,
    pub states: Vec<String>,
    /// Action universe; empty for the one-sorted signature.
    pub actions: BTreeSet<Action>,
    pub arrows: BTreeSet<(StateId, Action, StateId)>,
    pub allowed: BTreeSet<(StateId, Action)>,
    /// State labels backing the intensional `Restrict_A`; one-sorted only.
    pub labels: Vec<StateLabel>,
}

impl FolModel {
    /// A two-sorted structure given directly by its tables.
    pub fn two_sorted(
        states: Vec<String>,
        actions: BTreeSet<Action>,
        arrows: BTreeSet<(StateId, Action, StateId)>,
        allowed: BTreeSet<(StateId, Action)>,
    ) -> Self {
        FolModel { target: FolTarget::TwoSorted, states, actions, arrows, allowed, labels: Vec::new() }
    }

    pub fn arrow_tuples(&self, a: &Action) -> Vec<(StateId, StateId)> {
        self.arrows.iter().filter(|(_, b, _)| b == a).map(|(s, _, t)| (*s, *t)).collect()
    }

    pub fn allowed_at(&self, s: StateId) -> ActionSet {
        self.allowed.iter().filter(|(t, _)| *t == s).map(|(_, a)| a.clone()).collect()
    }
}

/// `⟦L⟧` or `⟦L⟧²`. The two-sorted action universe is Σ plus any action the model mentions.
pub fn translate_model(m: &Model, target: FolTarget, alphabet: &Alphabet) -> Result<FolModel, FolError> {
    let states = (0..m.len()).map(|s| m.name(s).to_string()).collect();
    let arrows = m.transitions().map(|(s, a, t)| (s, a.clone(), t)).collect();
    match target {
        FolTarget::OneSorted => Ok(FolModel {
            target,
            states,
            actions: BTreeSet::new(),
            arrows,
            allowed: BTreeSet::new(),
            labels: (0..m.len()).map(|s| m.label(s).clone()).collect(),
        }),
        FolTarget::TwoSorted => {
            let sigma = alphabet.actions().ok_or(FolError::OpenAlphabet)?;
            let mut actions: BTreeSet<Action> = sigma.clone();
            actions.extend(m.actions());
            let mut allowed = BTreeSet::new();
            for s in 0..m.len() {
                for a in &actions {
                    if m.label(s).allows(a) {
                        allowed.insert((s, a.clone()));
                    }
                }
            }
            Ok(FolModel::two_sorted(states, actions, arrows, allowed))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Element {
    State(StateId),
    Action(Action),
}

pub type FolEnv = BTreeMap<String, Element>;

/// Tarskian evaluation with quantifiers enumerated over the finite universes.
pub fn eval_fol(m: &FolModel, f: &FolFormula, env: &FolEnv) -> Result<bool, FolError> {
    let mut env = env.clone();
    eval(m, f, &mut env)
}

fn state_of(env: &FolEnv, v: &str) -> Result<StateId, FolError> {
    match env.get(v) {
        Some(Element::State(s)) => Ok(*s),
        Some(Element::Action(a)) => Err(FolError::SortMismatch(format!("`{v}` denotes action {a}, expected a state"))),
        None => Err(FolError::UnboundVariable(v.to_string())),
    }
}

fn denote(env: &FolEnv, t: &Term) -> Result<Element, FolError> {
    match t {
        Term::Const(a) => Ok(Element::Action(a.clone())),
        Term::Var(v) => env.get(v).cloned().ok_or_else(|| FolError::UnboundVariable(v.clone())),
    }
}

fn action_of(env: &FolEnv, t: &Term) -> Result<Action, FolError> {
    match denote(env, t)? {
        Element::Action(a) => Ok(a),
        Element::State(_) => Err(FolError::SortMismatch(format!("`{t}` denotes a state, expected an action"))),
    }
}

fn eval(m: &FolModel, f: &FolFormula, env: &mut FolEnv) -> Result<bool, FolError> {
    Ok(match f {
        FolFormula::Top => true,
        FolFormula::Bottom => false,
        FolFormula::ArrowA(a, x, y) => {
            let (s, t) = (state_of(env, x)?, state_of(env, y)?);
            m.arrows.contains(&(s, a.clone(), t))
        }
        FolFormula::Restrict(set, x) => {
            let s = state_of(env, x)?;
            match m.labels.get(s) {
                Some(label) => label.within(set),
                None => return Err(FolError::SortMismatch("Restrict is not part of the two-sorted signature".into())),
            }
        }
        FolFormula::Allowed(x, a) => {
            let s = state_of(env, x)?;
            m.allowed.contains(&(s, action_of(env, a)?))
        }
        FolFormula::Arrow(x, a, y) => {
            let (s, t) = (state_of(env, x)?, state_of(env, y)?);
            m.arrows.contains(&(s, action_of(env, a)?, t))
        }
        FolFormula::Eq(l, r) => {
            let (l, r) = (denote(env, l)?, denote(env, r)?);
            if std::mem::discriminant(&l) != std::mem::discriminant(&r) {
                return Err(FolError::SortMismatch(format!("cannot compare {l:?} with {r:?}")));
            }
            l == r
        }
        FolFormula::And(l, r) => eval(m, l, env)? && eval(m, r, env)?,
        FolFormula::Or(l, r) => eval(m, l, env)? || eval(m, r, env)?,
        FolFormula::Implies(l, r) => !eval(m, l, env)? || eval(m, r, env)?,
        FolFormula::Neg(g) => !eval(m, g, env)?,
        FolFormula::Exists(sort, v, body) | FolFormula::Forall(sort, v, body) => {
            let exists = matches!(f, FolFormula::Exists(..));
            let domain: Vec<Element> = match sort {
                Sort::Single | Sort::State => (0..m.states.len()).map(Element::State).collect(),
                Sort::Action => m.actions.iter().cloned().map(Element::Action).collect(),
            };
            let saved = env.get(v).cloned();
            let mut result = Ok(!exists);
            for e in domain {
                env.insert(v.clone(), e);
                match eval(m, body, env) {
                    Ok(r) if r == exists => {
                        result = Ok(exists);
                        break;
                    }
                    Ok(_) => {}
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
            match saved {
                Some(e) => env.insert(v.clone(), e),
                None => env.remove(v),
            };
            result?
        }
    })
}

/// Reads a two-sorted structure back as a transition system restricted to `sigma`.
///
/// A state whose allowed set is the whole action universe gets the label Σ.
/// Transitions on actions outside `sigma` are dropped and removed from finite labels.
/// The result starts at the first state; use [`Model::with_start`] to pick another.
pub fn extract_model(m: &FolModel, sigma: &Alphabet) -> Result<Model, FolError> {
    let sigma = sigma.actions().ok_or(FolError::OpenAlphabet)?;
    if m.target != FolTarget::TwoSorted {
        return Err(FolError::SortMismatch("extraction needs a two-sorted structure".into()));
    }
    let (admis, det) = guards();
    if !eval_fol(m, &admis, &FolEnv::new())? || !eval_fol(m, &det, &FolEnv::new())? {
        return Err(FolError::GuardsViolated);
    }
    if m.states.is_empty() {
        return Err(FolError::SortMismatch("empty state universe".into()));
    }
    let mut b = ModelBuilder::new();
    for (s, name) in m.states.iter().enumerate() {
        let allowed = m.allowed_at(s);
        let label = if allowed == m.actions {
            StateLabel::All
        } else {
            StateLabel::Finite(allowed.intersection(sigma).cloned().collect())
        };
        b.named_state(name, label);
    }
    for (s, a, t) in &m.arrows {
        if sigma.contains(a) {
            b.edge(*s, a.clone(), *t);
        }
    }
    Ok(b.build(0))
}

/// The Hennessy-Milner translation over a closed alphabet, in the negation dialect.
pub fn translate_hml(f: &Formula, sigma: &Alphabet) -> Result<Formula, FolError> {
    let sigma = sigma.actions().ok_or(FolError::OpenAlphabet)?;
    if !f.is_core() {
        return Err(FolError::NotCore);
    }
    Ok(hml(f, sigma))
}

fn hml(f: &Formula, sigma: &ActionSet) -> Formula {
    match f {
        Formula::Top => Formula::Top,
        Formula::Bottom => Formula::Bottom,
        Formula::And(l, r) => Formula::and(hml(l, sigma), hml(r, sigma)),
        Formula::May(a, g) => Formula::may(a.clone(), hml(g, sigma)),
        Formula::Bang(set) => {
            Formula::conj(sigma.difference(set).map(|b| Formula::neg(Formula::may(b.clone(), Formula::Top))).collect::<Vec<_>>())
        }
        Formula::Neg(_) | Formula::Or(..) => unreachable!("checked"),
    }
}

/// `⟦f⟧` conjoined with the determinism constraint for the subformula closure of `gamma`.
pub fn translate_hml_deterministic(f: &Formula, sigma: &Alphabet, gamma: &[Formula]) -> Result<Formula, FolError> {
    let base = translate_hml(f, sigma)?;
    let set = sigma.actions().ok_or(FolError::OpenAlphabet)?;
    let mut closure = BTreeSet::new();
    let mut stack: Vec<&Formula> = gamma.iter().collect();
    while let Some(g) = stack.pop() {
        if !g.is_core() {
            return Err(FolError::NotCore);
        }
        if closure.insert(g.to_string()) {
            match g {
                Formula::And(l, r) => stack.extend([&**l, &**r]),
                Formula::May(_, h) => stack.push(h),
                _ => {}
            }
        }
    }
    let closure: Vec<Formula> = closure.iter().map(|t| crate::syntax::parse_core(t).expect("printed formula")).collect();
    let actions: ActionSet = closure.iter().flat_map(|g| g.actions()).collect();
    let mut parts = vec![base];
    for a in &actions {
        for p in &closure {
            for q in &closure {
                let (hp, hq) = (hml(p, set), hml(q, set));
                let joined = Formula::neg(Formula::may(a.clone(), Formula::and(hp.clone(), hq.clone())));
                let clash = Formula::and(Formula::may(a.clone(), hp), Formula::and(Formula::may(a.clone(), hq), joined));
                parts.push(Formula::neg(clash));
            }
        }
    }
    Ok(Formula::conj(parts))
}
