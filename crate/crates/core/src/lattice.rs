//! The bounded lattice of models: ⊥, glb, lub, simpl and characteristic formulae.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::model::{Model, ModelBuilder, StateId, StateLabel};
use crate::semantics::{self, SemanticsError};
use crate::syntax::{Action, Alphabet, Formula};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("model is not a tree")]
    NotATree,
    #[error("formula uses negation or disjunction")]
    NotCore,
}

/// A model, or the bottom element that satisfies every formula.
#[derive(Clone, Debug)]
pub enum LatticeModel {
    Bottom,
    Model(Model),
}

impl LatticeModel {
    pub fn is_bottom(&self) -> bool {
        matches!(self, LatticeModel::Bottom)
    }

    pub fn as_model(&self) -> Option<&Model> {
        match self {
            LatticeModel::Bottom => None,
            LatticeModel::Model(m) => Some(m),
        }
    }

    pub fn satisfies(&self, f: &Formula) -> Result<bool, SemanticsError> {
        match self {
            LatticeModel::Bottom if f.is_core() => Ok(true),
            LatticeModel::Bottom => Err(SemanticsError::NotCore),
            LatticeModel::Model(m) => semantics::satisfies(m, f),
        }
    }
}

impl From<Model> for LatticeModel {
    fn from(m: Model) -> Self {
        LatticeModel::Model(m)
    }
}

/// Growable tree store with union-find state identification.
#[derive(Default)]
struct Arena {
    labels: Vec<StateLabel>,
    edges: Vec<BTreeMap<Action, usize>>,
    parent: Vec<usize>,
}

impl Arena {
    fn node(&mut self, label: StateLabel) -> usize {
        let id = self.labels.len();
        self.labels.push(label);
        self.edges.push(BTreeMap::new());
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Copies the unfolding of `m` from `s`. The caller guarantees acyclicity.
    fn copy(&mut self, m: &Model, s: StateId) -> usize {
        let root = self.node(m.label(s).clone());
        let mut stack = vec![(s, root)];
        while let Some((orig, copy)) = stack.pop() {
            for (a, t) in m.successors(orig) {
                let c = self.node(m.label(t).clone());
                self.edges[copy].insert(a.clone(), c);
                stack.push((t, c));
            }
        }
        root
    }

    /// Identifies `x` and `y`, closing under determinism. Returns false on inconsistency.
    fn merge(&mut self, x: usize, y: usize) -> bool {
        let mut work = vec![(x, y)];
        while let Some((x, y)) = work.pop() {
            let (rx, ry) = (self.find(x), self.find(y));
            if rx == ry {
                continue;
            }
            let (keep, gone) = if self.edges[rx].len() >= self.edges[ry].len() { (rx, ry) } else { (ry, rx) };
            self.parent[gone] = keep;
            let label = self.labels[keep].intersect(&self.labels[gone]);
            for (a, child) in std::mem::take(&mut self.edges[gone]) {
                match self.edges[keep].get(&a) {
                    Some(&c) => work.push((c, child)),
                    None => {
                        self.edges[keep].insert(a, child);
                    }
                }
            }
            if !self.edges[keep].keys().all(|a| label.allows(a)) {
                return false;
            }
            self.labels[keep] = label;
        }
        true
    }

    /// Reads the quotient below `root` back as a model with BFS names `s0, s1, …`.
    fn extract(&mut self, root: usize) -> Model {
        let root = self.find(root);
        let mut b = ModelBuilder::new();
        let mut ids = HashMap::new();
        ids.insert(root, b.state(self.labels[root].clone()));
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            let edges: Vec<(Action, usize)> = self.edges[x].iter().map(|(a, &c)| (a.clone(), c)).collect();
            for (a, c) in edges {
                let c = self.find(c);
                let id = match ids.get(&c) {
                    Some(&id) => id,
                    None => {
                        let id = b.state(self.labels[c].clone());
                        ids.insert(c, id);
                        queue.push_back(c);
                        id
                    }
                };
                b.edge(ids[&x], a, id);
            }
        }
        b.build(0)
    }
}

enum Frame<'a> {
    Visit(&'a Formula),
    May(&'a Action),
    And,
}

/// The least upper bound of all models of `f`; ⊥ iff `f` is unsatisfiable.
pub fn simpl(f: &Formula) -> Result<LatticeModel, LatticeError> {
    if !f.is_core() {
        return Err(LatticeError::NotCore);
    }
    let mut arena = Arena::default();
    let mut todo = vec![Frame::Visit(f)];
    let mut vals: Vec<usize> = Vec::new();
    while let Some(frame) = todo.pop() {
        match frame {
            Frame::Visit(Formula::Top) => vals.push(arena.node(StateLabel::All)),
            Frame::Visit(Formula::Bang(set)) => vals.push(arena.node(StateLabel::Finite(set.clone()))),
            Frame::Visit(Formula::Bottom) => return Ok(LatticeModel::Bottom),
            Frame::Visit(Formula::May(a, g)) => {
                todo.push(Frame::May(a));
                todo.push(Frame::Visit(g));
            }
            Frame::Visit(Formula::And(l, r)) => {
                todo.push(Frame::And);
                todo.push(Frame::Visit(r));
                todo.push(Frame::Visit(l));
            }
            Frame::Visit(Formula::Neg(_) | Formula::Or(..)) => unreachable!("checked core"),
            Frame::May(a) => {
                let child = vals.pop().expect("operand");
                let root = arena.node(StateLabel::All);
                arena.edges[root].insert(a.clone(), child);
                vals.push(root);
            }
            Frame::And => {
                let y = vals.pop().expect("operand");
                let x = vals.pop().expect("operand");
                // Any inconsistency makes the whole formula unsatisfiable: there is no
                // disjunction or negation above to absorb it.
                if !arena.merge(x, y) {
                    return Ok(LatticeModel::Bottom);
                }
                vals.push(arena.find(x));
            }
        }
    }
    let root = vals.pop().expect("result");
    Ok(LatticeModel::Model(arena.extract(root)))
}

/// Greatest lower bound. Inputs must be acyclic; the result is a tree or ⊥.
pub fn glb(m1: &LatticeModel, m2: &LatticeModel) -> Result<LatticeModel, LatticeError> {
    let (a, b) = match (m1, m2) {
        (LatticeModel::Model(a), LatticeModel::Model(b)) => (a, b),
        _ => {
            for m in [m1, m2].into_iter().filter_map(LatticeModel::as_model) {
                if !m.is_acyclic() {
                    return Err(LatticeError::NotATree);
                }
            }
            return Ok(LatticeModel::Bottom);
        }
    };
    if !a.is_acyclic() || !b.is_acyclic() {
        return Err(LatticeError::NotATree);
    }
    let mut arena = Arena::default();
    let x = arena.copy(a, a.start());
    let y = arena.copy(b, b.start());
    if !arena.merge(x, y) {
        return Ok(LatticeModel::Bottom);
    }
    Ok(LatticeModel::Model(arena.extract(x)))
}

/// Least upper bound: shared transitions from paired states, labels united.
pub fn lub(m1: &LatticeModel, m2: &LatticeModel) -> LatticeModel {
    let (a, b) = match (m1, m2) {
        (LatticeModel::Bottom, other) | (other, LatticeModel::Bottom) => return other.clone(),
        (LatticeModel::Model(a), LatticeModel::Model(b)) => (a, b),
    };
    let mut builder = ModelBuilder::new();
    let mut ids: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let root = builder.state(a.label(a.start()).union(b.label(b.start())));
    ids.insert((a.start(), b.start()), root);
    let mut queue = VecDeque::from([(a.start(), b.start())]);
    while let Some((x, y)) = queue.pop_front() {
        let from = ids[&(x, y)];
        for (act, tx) in a.successors(x) {
            if let Some(ty) = b.successor(y, act) {
                let to = match ids.get(&(tx, ty)) {
                    Some(&id) => id,
                    None => {
                        let id = builder.state(a.label(tx).union(b.label(ty)));
                        ids.insert((tx, ty), id);
                        queue.push_back((tx, ty));
                        id
                    }
                };
                builder.edge(from, act.clone(), to);
            }
        }
    }
    LatticeModel::Model(builder.build(root))
}

fn bang_part(label: &StateLabel) -> Formula {
    match label {
        StateLabel::All => Formula::Top,
        StateLabel::Finite(set) => Formula::Bang(set.clone()),
    }
}

fn bottom_formula(alphabet: &Alphabet) -> Formula {
    Formula::and(Formula::may(alphabet.canonical_action(), Formula::Top), Formula::Bang(Default::default()))
}

/// Characteristic formula with trailing `T` conjuncts removed.
pub fn char_formula(m: &LatticeModel, alphabet: &Alphabet) -> Result<Formula, LatticeError> {
    let m = match m {
        LatticeModel::Bottom => return Ok(bottom_formula(alphabet)),
        LatticeModel::Model(m) => m,
    };
    if !m.is_acyclic() {
        return Err(LatticeError::NotATree);
    }
    fn go(m: &Model, s: StateId) -> Formula {
        let mut parts = Vec::new();
        if let StateLabel::Finite(set) = m.label(s) {
            parts.push(Formula::Bang(set.clone()));
        }
        parts.extend(m.successors(s).map(|(a, t)| Formula::may(a.clone(), go(m, t))));
        Formula::conj(parts)
    }
    Ok(go(m, m.start()))
}

/// Characteristic formula in the exact shape `bang(w) /\ rest(w)` used by proof synthesis.
pub fn char_raw(m: &LatticeModel, alphabet: &Alphabet) -> Result<Formula, LatticeError> {
    let m = match m {
        LatticeModel::Bottom => return Ok(bottom_formula(alphabet)),
        LatticeModel::Model(m) => m,
    };
    if !m.is_acyclic() {
        return Err(LatticeError::NotATree);
    }
    Ok(char_raw_at(m, m.start()))
}

pub(crate) fn char_raw_at(m: &Model, s: StateId) -> Formula {
    let rest = Formula::conj(m.successors(s).map(|(a, t)| Formula::may(a.clone(), char_raw_at(m, t))).collect::<Vec<_>>());
    Formula::and(bang_part(m.label(s)), rest)
}
