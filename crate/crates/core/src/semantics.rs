//! Satisfaction for labelled, pure and quantified models, and label forgetting/recovery.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Model, ModelBuilder, PureModel, StateId, StateLabel};
use crate::syntax::{Action, ActionSet, Alphabet, Formula, QFormula, Term, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("formula uses negation or disjunction; evaluate it with the extended semantics")]
    NotCore,
    #[error("quantified formulae need a closed alphabet")]
    OpenAlphabet,
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("state {state} has several {action}-transitions")]
    NondeterministicInput { state: String, action: String },
}

/// Variable environment for quantified formulae.
pub type QEnv = BTreeMap<Variable, Action>;

/// `m ⊨ f` for a core formula.
pub fn satisfies(m: &Model, f: &Formula) -> Result<bool, SemanticsError> {
    satisfies_at(m, m.start(), f)
}

/// `(m, s) ⊨ f` for a core formula, evaluated with an explicit worklist.
pub fn satisfies_at(m: &Model, s: StateId, f: &Formula) -> Result<bool, SemanticsError> {
    if !f.is_core() {
        return Err(SemanticsError::NotCore);
    }
    let mut work = vec![(s, f)];
    while let Some((s, f)) = work.pop() {
        match f {
            Formula::Top => {}
            Formula::Bottom => return Ok(false),
            Formula::And(l, r) => {
                work.push((s, r));
                work.push((s, l));
            }
            Formula::May(a, g) => match m.successor(s, a) {
                Some(t) => work.push((t, g)),
                None => return Ok(false),
            },
            Formula::Bang(set) => {
                if !m.label(s).within(set) {
                    return Ok(false);
                }
            }
            Formula::Neg(_) | Formula::Or(..) => unreachable!("checked core"),
        }
    }
    Ok(true)
}

/// Classical negation and disjunction layered over [`satisfies`].
pub fn eval_extended(m: &Model, f: &Formula) -> bool {
    eval_extended_at(m, m.start(), f)
}

pub fn eval_extended_at(m: &Model, s: StateId, f: &Formula) -> bool {
    match f {
        Formula::Top => true,
        Formula::Bottom => false,
        Formula::And(l, r) => eval_extended_at(m, s, l) && eval_extended_at(m, s, r),
        Formula::Or(l, r) => eval_extended_at(m, s, l) || eval_extended_at(m, s, r),
        Formula::Neg(g) => !eval_extended_at(m, s, g),
        Formula::May(a, g) => m.successor(s, a).is_some_and(|t| eval_extended_at(m, t, g)),
        Formula::Bang(set) => m.label(s).within(set),
    }
}

/// Satisfaction on a pure model: `!A` holds when every outgoing action lies in `A`.
pub fn satisfies_pure(p: &PureModel, f: &Formula) -> Result<bool, SemanticsError> {
    if !f.is_core() {
        return Err(SemanticsError::NotCore);
    }
    Ok(pure_at(p, p.start(), f))
}

pub(crate) fn pure_at(p: &PureModel, s: StateId, f: &Formula) -> bool {
    match f {
        Formula::Top => true,
        Formula::Bottom => false,
        Formula::And(l, r) => pure_at(p, s, l) && pure_at(p, s, r),
        Formula::May(a, g) => p.successors(s).iter().any(|(b, t)| b == a && pure_at(p, *t, g)),
        Formula::Bang(set) => p.successors(s).iter().all(|(b, _)| set.contains(b)),
        Formula::Neg(g) => !pure_at(p, s, g),
        Formula::Or(l, r) => pure_at(p, s, l) || pure_at(p, s, r),
    }
}

/// Quantified satisfaction; quantifiers range over a closed alphabet.
pub fn satisfies_quantified(m: &Model, f: &QFormula, env: &QEnv, alphabet: &Alphabet) -> Result<bool, SemanticsError> {
    let sigma = alphabet.actions().ok_or(SemanticsError::OpenAlphabet)?;
    let mut env = env.clone();
    quantified_at(m, m.start(), f, &mut env, sigma)
}

fn denote(t: &Term, env: &QEnv) -> Result<Action, SemanticsError> {
    match t {
        Term::Action(a) => Ok(a.clone()),
        Term::Var(v) => env.get(v).cloned().ok_or_else(|| SemanticsError::UnboundVariable(v.to_string())),
    }
}

fn quantified_at(m: &Model, s: StateId, f: &QFormula, env: &mut QEnv, sigma: &ActionSet) -> Result<bool, SemanticsError> {
    match f {
        QFormula::Top => Ok(true),
        QFormula::And(l, r) => Ok(quantified_at(m, s, l, env, sigma)? && quantified_at(m, s, r, env, sigma)?),
        QFormula::May(t, g) => {
            let a = denote(t, env)?;
            match m.successor(s, &a) {
                Some(next) => quantified_at(m, next, g, env, sigma),
                None => Ok(false),
            }
        }
        QFormula::Bang(ts) => {
            let set = ts.iter().map(|t| denote(t, env)).collect::<Result<ActionSet, _>>()?;
            Ok(m.label(s).within(&set))
        }
        QFormula::Exists(v, g) | QFormula::Forall(v, g) => {
            let exists = matches!(f, QFormula::Exists(..));
            let saved = env.get(v).cloned();
            let mut result = !exists;
            for a in sigma {
                env.insert(v.clone(), a.clone());
                let r = quantified_at(m, s, g, env, sigma);
                let r = match r {
                    Ok(r) => r,
                    Err(e) => {
                        restore(env, v, saved);
                        return Err(e);
                    }
                };
                if r == exists {
                    result = exists;
                    break;
                }
            }
            restore(env, v, saved);
            Ok(result)
        }
    }
}

fn restore(env: &mut QEnv, v: &Variable, saved: Option<Action>) {
    match saved {
        Some(a) => env.insert(v.clone(), a),
        None => env.remove(v),
    };
}

/// Forgets the state labels.
pub fn to_pure(m: &Model) -> PureModel {
    PureModel::from_model(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// Every state labelled Σ.
    Max,
    /// Every state labelled with its exact out-set.
    Min,
}

pub fn from_pure(p: &PureModel, mode: LabelMode) -> Result<Model, SemanticsError> {
    if let Some((s, a)) = p.nondeterminism() {
        return Err(SemanticsError::NondeterministicInput { state: p.name(s).to_string(), action: a.to_string() });
    }
    let mut b = ModelBuilder::new();
    for s in 0..p.len() {
        let label = match mode {
            LabelMode::Max => StateLabel::All,
            LabelMode::Min => StateLabel::Finite(p.out_actions(s)),
        };
        b.named_state(p.name(s), label);
    }
    for (s, a, t) in p.transitions() {
        b.edge(s, a.clone(), t);
    }
    Ok(b.build(p.start()))
}
