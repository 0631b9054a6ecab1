//! Simulation preorder, mutual simulation, bisimilarity and distinguishing formulae.

use std::collections::VecDeque;

use thiserror::Error;

use crate::lattice::LatticeModel;
use crate::model::{Model, PureModel, StateId};
use crate::semantics::pure_at;
use crate::syntax::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("the blocked formula holds in the given model")]
    BlockedIsSatisfied,
    #[error("no formula is incompatible with T")]
    TopCase,
    #[error("formula uses negation or disjunction")]
    NotCore,
}

/// A simulation relation as a set of (state-of-first, state-of-second) pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationWitness {
    pub pairs: Vec<(StateId, StateId)>,
}

impl SimulationWitness {
    pub fn contains(&self, x: StateId, y: StateId) -> bool {
        self.pairs.binary_search(&(x, y)).is_ok()
    }
}

/// The greatest simulation of `from` by `to`, if it relates the start states.
///
/// `(x, y)` survives when λ_from(x) ⊇ λ_to(y) and every `x -a-> x'` is matched
/// by some `y -a-> y'` with `(x', y')` surviving.
pub fn simulation_exists(from: &Model, to: &Model) -> Option<SimulationWitness> {
    let (n1, n2) = (from.len(), to.len());
    let idx = |x: StateId, y: StateId| x * n2 + y;
    let mut rel = vec![false; n1 * n2];
    let mut removed = Vec::new();
    for x in 0..n1 {
        for y in 0..n2 {
            let ok = to.label(y).is_subset_of(from.label(x)) && from.successors(x).all(|(a, _)| to.successor(y, a).is_some());
            rel[idx(x, y)] = ok;
            if !ok {
                removed.push((x, y));
            }
        }
    }
    let mut preds_from: Vec<Vec<(StateId, &crate::syntax::Action)>> = vec![Vec::new(); n1];
    for (x, a, t) in from.transitions() {
        preds_from[t].push((x, a));
    }
    let mut preds_to: Vec<Vec<(StateId, &crate::syntax::Action)>> = vec![Vec::new(); n2];
    for (y, a, t) in to.transitions() {
        preds_to[t].push((y, a));
    }
    while let Some((xt, yt)) = removed.pop() {
        for &(x, a) in &preds_from[xt] {
            for &(y, b) in &preds_to[yt] {
                // y's a-successor is unique, so (x, y) has lost its only witness.
                if a == b && rel[idx(x, y)] {
                    rel[idx(x, y)] = false;
                    removed.push((x, y));
                }
            }
        }
    }
    if !rel[idx(from.start(), to.start())] {
        return None;
    }
    let pairs = (0..n1).flat_map(|x| (0..n2).map(move |y| (x, y))).filter(|&(x, y)| rel[idx(x, y)]).collect();
    Some(SimulationWitness { pairs })
}

/// Lockstep check that `to` simulates `from` from the start states. Linear for deterministic models.
pub(crate) fn simulated_by(from: &Model, to: &Model) -> bool {
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::from([(from.start(), to.start())]);
    seen.insert((from.start(), to.start()));
    while let Some((x, y)) = queue.pop_front() {
        if !to.label(y).is_subset_of(from.label(x)) {
            return false;
        }
        for (a, xt) in from.successors(x) {
            match to.successor(y, a) {
                None => return false,
                Some(yt) => {
                    if seen.insert((xt, yt)) {
                        queue.push_back((xt, yt));
                    }
                }
            }
        }
    }
    true
}

/// `m1 ⪯ m2`: m1 is ⊥, or m1 simulates m2 (m1 satisfies at least the formulae of m2).
pub fn preceq(m1: &LatticeModel, m2: &LatticeModel) -> bool {
    match (m1, m2) {
        (LatticeModel::Bottom, _) => true,
        (LatticeModel::Model(_), LatticeModel::Bottom) => false,
        (LatticeModel::Model(a), LatticeModel::Model(b)) => simulated_by(b, a),
    }
}

/// Mutual simulation; the notion of model equality used throughout the crate.
pub fn equivalent(m1: &LatticeModel, m2: &LatticeModel) -> bool {
    preceq(m1, m2) && preceq(m2, m1)
}

/// Bisimilarity of pure models by fixpoint refinement over all state pairs.
pub fn bisimilar(p1: &PureModel, p2: &PureModel) -> bool {
    let (n1, n2) = (p1.len(), p2.len());
    let mut rel = vec![true; n1 * n2];
    let matched = |rel: &[bool], xs: &[(crate::syntax::Action, StateId)], ys: &[(crate::syntax::Action, StateId)], flip: bool| {
        xs.iter().all(|(a, xt)| {
            ys.iter().any(|(b, yt)| a == b && if flip { rel[yt * n2 + xt] } else { rel[xt * n2 + yt] })
        })
    };
    loop {
        let mut changed = false;
        for x in 0..n1 {
            for y in 0..n2 {
                if rel[x * n2 + y] && !(matched(&rel, p1.successors(x), p2.successors(y), false) && matched(&rel, p2.successors(y), p1.successors(x), true)) {
                    rel[x * n2 + y] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    rel[p1.start() * n2 + p2.start()]
}

/// A core formula true in `p_true` and jointly unsatisfiable with `blocked`.
pub fn distinguishing_formula(p_true: &PureModel, blocked: &Formula) -> Result<Formula, OrderError> {
    if !blocked.is_core() {
        return Err(OrderError::NotCore);
    }
    if pure_at(p_true, p_true.start(), blocked) {
        return Err(OrderError::BlockedIsSatisfied);
    }
    neg(p_true, p_true.start(), blocked)
}

fn neg(p: &PureModel, y: StateId, f: &Formula) -> Result<Formula, OrderError> {
    match f {
        Formula::Top => Err(OrderError::TopCase),
        Formula::Bottom => Ok(Formula::Top),
        Formula::And(l, r) => match (pure_at(p, y, l), pure_at(p, y, r)) {
            (false, true) => Ok(Formula::and(neg(p, y, l)?, (**r).clone())),
            (true, false) => Ok(Formula::and((**l).clone(), neg(p, y, r)?)),
            (false, false) => Ok(Formula::and(neg(p, y, l)?, neg(p, y, r)?)),
            (true, true) => Err(OrderError::BlockedIsSatisfied),
        },
        Formula::Bang(set) => {
            let a = p.successors(y).iter().map(|(a, _)| a).find(|a| !set.contains(*a)).ok_or(OrderError::BlockedIsSatisfied)?;
            Ok(Formula::may(a.clone(), Formula::Top))
        }
        Formula::May(a, g) => {
            let targets: Vec<StateId> = p.successors(y).iter().filter(|(b, _)| b == a).map(|(_, t)| *t).collect();
            if targets.is_empty() {
                return Ok(Formula::Bang(p.out_actions(y)));
            }
            let parts = targets.into_iter().map(|t| Ok(Formula::may(a.clone(), neg(p, t, g)?))).collect::<Result<Vec<_>, _>>()?;
            Ok(Formula::conj(parts))
        }
        Formula::Neg(_) | Formula::Or(..) => Err(OrderError::NotCore),
    }
}
