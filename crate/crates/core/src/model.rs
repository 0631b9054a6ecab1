//! Cathoristic transition systems, models, pure models and the JSON model format.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Action, ActionSet};

/// λ(s): either the whole alphabet or a finite set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StateLabel {
    All,
    Finite(ActionSet),
}

impl StateLabel {
    pub fn empty() -> Self {
        StateLabel::Finite(ActionSet::new())
    }

    pub fn finite<I: IntoIterator<Item = Action>>(actions: I) -> Self {
        StateLabel::Finite(actions.into_iter().collect())
    }

    pub fn is_all(&self) -> bool {
        matches!(self, StateLabel::All)
    }

    pub fn allows(&self, a: &Action) -> bool {
        match self {
            StateLabel::All => true,
            StateLabel::Finite(set) => set.contains(a),
        }
    }

    /// λ ⊆ A for a finite A. `All` is never contained in a finite set.
    pub fn within(&self, set: &ActionSet) -> bool {
        match self {
            StateLabel::All => false,
            StateLabel::Finite(own) => own.is_subset(set),
        }
    }

    pub fn is_subset_of(&self, other: &StateLabel) -> bool {
        match (self, other) {
            (_, StateLabel::All) => true,
            (StateLabel::All, StateLabel::Finite(_)) => false,
            (StateLabel::Finite(a), StateLabel::Finite(b)) => a.is_subset(b),
        }
    }

    pub fn intersect(&self, other: &StateLabel) -> StateLabel {
        match (self, other) {
            (StateLabel::All, x) | (x, StateLabel::All) => x.clone(),
            (StateLabel::Finite(a), StateLabel::Finite(b)) => StateLabel::Finite(a.intersection(b).cloned().collect()),
        }
    }

    pub fn union(&self, other: &StateLabel) -> StateLabel {
        match (self, other) {
            (StateLabel::All, _) | (_, StateLabel::All) => StateLabel::All,
            (StateLabel::Finite(a), StateLabel::Finite(b)) => StateLabel::Finite(a.union(b).cloned().collect()),
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::All => f.write_str("*"),
            StateLabel::Finite(set) => {
                f.write_str("{")?;
                for (i, a) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(a.as_str())?;
                }
                f.write_str("}")
            }
        }
    }
}

pub type StateId = usize;

/// A deterministic, labelled transition system with a start state.
///
/// States are dense indices; each carries a display name. Construction through
/// [`Model::from_raw`] checks determinism, admissibility and label totality.
#[derive(Clone, Debug)]
pub struct Model {
    names: Vec<String>,
    labels: Vec<StateLabel>,
    edges: Vec<BTreeMap<Action, StateId>>,
    start: StateId,
}

/// Serialized model, `{"states":[..],"start":..,"transitions":[[s,a,t],..],"labels":{..}}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawModel {
    pub states: Vec<String>,
    pub start: String,
    #[serde(default)]
    pub transitions: Vec<(String, String, String)>,
    #[serde(default)]
    pub labels: BTreeMap<String, RawLabel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawLabel {
    Star(String),
    Set(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("state {0} has two {1}-transitions")]
    Nondeterministic(String, String),
    #[error("transition {1} leaves state {0} but {1} is not in its label")]
    Inadmissible(String, String),
    #[error("state {0} has no label")]
    MissingLabel(String),
    #[error("start state {0} is not a state")]
    UnknownStart(String),
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("duplicate state {0}")]
    DuplicateState(String),
    #[error("invalid action {0}")]
    InvalidAction(String),
    #[error("invalid label {0}")]
    InvalidLabel(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model is not a tree")]
    NotATree,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

fn raw_label(label: &RawLabel) -> Result<StateLabel, Violation> {
    match label {
        RawLabel::Star(s) if s == "*" => Ok(StateLabel::All),
        RawLabel::Star(s) => Err(Violation::InvalidLabel(s.clone())),
        RawLabel::Set(names) => names
            .iter()
            .map(|n| Action::new(n).map_err(|_| Violation::InvalidAction(n.clone())))
            .collect::<Result<ActionSet, _>>()
            .map(StateLabel::Finite),
    }
}

/// Shared structural checks for labelled and pure models.
struct Skeleton {
    names: Vec<String>,
    index: HashMap<String, StateId>,
    transitions: Vec<(StateId, Action, StateId)>,
    start: Option<StateId>,
}

fn skeleton(raw: &RawModel, violations: &mut Vec<Violation>) -> Skeleton {
    let mut index = HashMap::new();
    let mut names = Vec::new();
    for s in &raw.states {
        if index.contains_key(s) {
            violations.push(Violation::DuplicateState(s.clone()));
        } else {
            index.insert(s.clone(), names.len());
            names.push(s.clone());
        }
    }
    let start = index.get(&raw.start).copied();
    if start.is_none() {
        violations.push(Violation::UnknownStart(raw.start.clone()));
    }
    let mut transitions = Vec::new();
    for (s, a, t) in &raw.transitions {
        let src = index.get(s).copied();
        let dst = index.get(t).copied();
        if src.is_none() {
            violations.push(Violation::UnknownState(s.clone()));
        }
        if dst.is_none() && s != t {
            violations.push(Violation::UnknownState(t.clone()));
        }
        let act = Action::new(a).map_err(|_| violations.push(Violation::InvalidAction(a.clone()))).ok();
        if let (Some(src), Some(act), Some(dst)) = (src, act, dst) {
            transitions.push((src, act, dst));
        }
    }
    Skeleton { names, index, transitions, start }
}

impl Model {
    /// Validates a raw model, reporting every violated condition.
    pub fn from_raw(raw: &RawModel) -> Result<Model, ModelError> {
        let mut violations = Vec::new();
        let sk = skeleton(raw, &mut violations);
        let mut labels = vec![None; sk.names.len()];
        for (name, label) in &raw.labels {
            match sk.index.get(name) {
                None => violations.push(Violation::UnknownState(name.clone())),
                Some(&i) => match raw_label(label) {
                    Ok(l) => labels[i] = Some(l),
                    Err(v) => violations.push(v),
                },
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_none() {
                violations.push(Violation::MissingLabel(sk.names[i].clone()));
            }
        }
        let mut edges = vec![BTreeMap::new(); sk.names.len()];
        for (s, a, t) in &sk.transitions {
            if let Some(l) = &labels[*s] {
                if !l.allows(a) {
                    violations.push(Violation::Inadmissible(sk.names[*s].clone(), a.to_string()));
                }
            }
            if edges[*s].insert(a.clone(), *t).is_some() {
                let v = Violation::Nondeterministic(sk.names[*s].clone(), a.to_string());
                if !violations.contains(&v) {
                    violations.push(v);
                }
            }
        }
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        Ok(Model {
            names: sk.names,
            labels: labels.into_iter().map(|l| l.expect("checked")).collect(),
            edges,
            start: sk.start.expect("checked"),
        })
    }

    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        let raw: RawModel = serde_json::from_str(text)?;
        Model::from_raw(&raw)
    }

    /// Convenience constructor from borrowed pieces; labels use `"*"` or comma lists.
    pub fn from_parts(states: &[(&str, StateLabel)], transitions: &[(&str, &str, &str)], start: &str) -> Result<Model, ModelError> {
        let raw = RawModel {
            states: states.iter().map(|(s, _)| s.to_string()).collect(),
            start: start.to_string(),
            transitions: transitions.iter().map(|(s, a, t)| (s.to_string(), a.to_string(), t.to_string())).collect(),
            labels: states.iter().map(|(s, l)| (s.to_string(), label_to_raw(l))).collect(),
        };
        Model::from_raw(&raw)
    }

    /// A one-state model with the given label.
    pub fn single(label: StateLabel) -> Model {
        Model { names: vec!["s0".into()], labels: vec![label], edges: vec![BTreeMap::new()], start: 0 }
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            states: self.names.clone(),
            start: self.names[self.start].clone(),
            transitions: self.transitions().map(|(s, a, t)| (self.names[s].clone(), a.to_string(), self.names[t].clone())).collect(),
            labels: self.names.iter().cloned().zip(self.labels.iter().map(label_to_raw)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("model serializes")
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_named(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn label(&self, s: StateId) -> &StateLabel {
        &self.labels[s]
    }

    pub fn successor(&self, s: StateId, a: &Action) -> Option<StateId> {
        self.edges[s].get(a).copied()
    }

    pub fn successors(&self, s: StateId) -> impl Iterator<Item = (&Action, StateId)> {
        self.edges[s].iter().map(|(a, &t)| (a, t))
    }

    pub fn out_actions(&self, s: StateId) -> ActionSet {
        self.edges[s].keys().cloned().collect()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (StateId, &Action, StateId)> {
        self.edges.iter().enumerate().flat_map(|(s, m)| m.iter().map(move |(a, &t)| (s, a, t)))
    }

    /// Every action mentioned by a transition or a finite label.
    pub fn actions(&self) -> ActionSet {
        let mut out: ActionSet = self.transitions().map(|(_, a, _)| a.clone()).collect();
        for l in &self.labels {
            if let StateLabel::Finite(set) = l {
                out.extend(set.iter().cloned());
            }
        }
        out
    }

    /// States reachable from the start, in BFS order.
    pub fn reachable(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.len()];
        let mut order = vec![self.start];
        seen[self.start] = true;
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            i += 1;
            for (_, t) in self.successors(s) {
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                }
            }
        }
        order
    }

    /// True iff no cycle is reachable from the start.
    pub fn is_acyclic(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut colour = vec![0u8; self.len()];
        let mut stack: Vec<(StateId, Vec<StateId>)> = vec![(self.start, self.edges[self.start].values().copied().collect())];
        colour[self.start] = 1;
        while let Some((s, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(t) => match colour[t] {
                    1 => return false,
                    0 => {
                        colour[t] = 1;
                        let next = self.edges[t].values().copied().collect();
                        stack.push((t, next));
                    }
                    _ => {}
                },
                None => {
                    colour[*s] = 2;
                    stack.pop();
                }
            }
        }
        true
    }

    /// True iff the reachable part is a tree rooted at the start.
    pub fn is_tree(&self) -> bool {
        let mut indegree = vec![0usize; self.len()];
        for s in self.reachable() {
            for (_, t) in self.successors(s) {
                indegree[t] += 1;
            }
        }
        indegree[self.start] == 0 && self.reachable().iter().all(|&s| s == self.start || indegree[s] == 1)
    }

    /// Height of the unfolding from the start; `None` if cyclic.
    pub fn height(&self) -> Option<usize> {
        if !self.is_acyclic() {
            return None;
        }
        let order = self.reachable();
        let mut h = vec![0usize; self.len()];
        // reverse topological order via repeated relaxation is unnecessary for trees; use DFS post-order
        let mut post = Vec::new();
        let mut visited = vec![false; self.len()];
        let mut stack = vec![(self.start, false)];
        while let Some((s, done)) = stack.pop() {
            if done {
                post.push(s);
                continue;
            }
            if visited[s] {
                continue;
            }
            visited[s] = true;
            stack.push((s, true));
            for (_, t) in self.successors(s) {
                if !visited[t] {
                    stack.push((t, false));
                }
            }
        }
        debug_assert_eq!(post.len(), order.len());
        for s in post {
            h[s] = self.successors(s).map(|(_, t)| h[t] + 1).max().unwrap_or(0);
        }
        Some(h[self.start])
    }

    /// Copy restricted to reachable states, renamed `s0, s1, …` in BFS order.
    pub fn compact(&self) -> Model {
        let order = self.reachable();
        let mut map = vec![usize::MAX; self.len()];
        for (i, &s) in order.iter().enumerate() {
            map[s] = i;
        }
        Model {
            names: (0..order.len()).map(|i| format!("s{i}")).collect(),
            labels: order.iter().map(|&s| self.labels[s].clone()).collect(),
            edges: order.iter().map(|&s| self.edges[s].iter().map(|(a, &t)| (a.clone(), map[t])).collect()).collect(),
            start: 0,
        }
    }

    /// Removes every transition whose action lies in `drop`.
    pub fn without_actions(&self, drop: &ActionSet) -> Model {
        let mut m = self.clone();
        for e in &mut m.edges {
            e.retain(|a, _| !drop.contains(a));
        }
        m
    }

    pub fn with_start(&self, start: StateId) -> Model {
        let mut m = self.clone();
        m.start = start;
        m
    }

    pub fn to_dot(&self) -> String {
        dot(&self.names, self.start, |s| Some(self.labels[s].to_string()), self.transitions().map(|(s, a, t)| (s, a.clone(), t)))
    }
}

pub(crate) fn label_to_raw(l: &StateLabel) -> RawLabel {
    match l {
        StateLabel::All => RawLabel::Star("*".into()),
        StateLabel::Finite(set) => RawLabel::Set(set.iter().map(|a| a.to_string()).collect()),
    }
}

/// Incremental constructor used by the lattice and decision modules.
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    names: Vec<String>,
    labels: Vec<StateLabel>,
    edges: Vec<BTreeMap<Action, StateId>>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a state named `s{index}`.
    pub fn state(&mut self, label: StateLabel) -> StateId {
        let id = self.names.len();
        self.names.push(format!("s{id}"));
        self.labels.push(label);
        self.edges.push(BTreeMap::new());
        id
    }

    pub fn named_state(&mut self, name: impl Into<String>, label: StateLabel) -> StateId {
        let id = self.state(label);
        self.names[id] = name.into();
        id
    }

    /// Adds `s -a-> t`. Panics on a determinism or admissibility violation.
    pub fn edge(&mut self, s: StateId, a: Action, t: StateId) {
        assert!(self.labels[s].allows(&a), "inadmissible transition");
        let prev = self.edges[s].insert(a, t);
        assert!(prev.is_none(), "nondeterministic transition");
    }

    pub fn label_mut(&mut self, s: StateId) -> &mut StateLabel {
        &mut self.labels[s]
    }

    pub fn build(self, start: StateId) -> Model {
        Model { names: self.names, labels: self.labels, edges: self.edges, start }
    }
}

/// Unfolds `m` into a tree of the paths of length ≤ `depth` from the start.
pub fn tree_unfold(m: &Model, depth: usize) -> Model {
    let mut b = ModelBuilder::new();
    let root = b.state(m.label(m.start()).clone());
    let mut queue = VecDeque::from([(m.start(), root, 0usize)]);
    while let Some((orig, copy, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for (a, t) in m.successors(orig) {
            let c = b.state(m.label(t).clone());
            b.edge(copy, a.clone(), c);
            queue.push_back((t, c, d + 1));
        }
    }
    b.build(root)
}

/// A label-free, possibly non-deterministic transition system with a start state.
#[derive(Clone, Debug)]
pub struct PureModel {
    names: Vec<String>,
    edges: Vec<Vec<(Action, StateId)>>,
    start: StateId,
}

impl PureModel {
    /// Labels in the raw document, if any, are ignored.
    pub fn from_raw(raw: &RawModel) -> Result<PureModel, ModelError> {
        let mut violations = Vec::new();
        let sk = skeleton(raw, &mut violations);
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let mut edges = vec![Vec::new(); sk.names.len()];
        for (s, a, t) in sk.transitions {
            if !edges[s].contains(&(a.clone(), t)) {
                edges[s].push((a, t));
            }
        }
        for e in &mut edges {
            e.sort();
        }
        Ok(PureModel { names: sk.names, edges, start: sk.start.expect("checked") })
    }

    pub fn from_json(text: &str) -> Result<PureModel, ModelError> {
        let raw: RawModel = serde_json::from_str(text)?;
        PureModel::from_raw(&raw)
    }

    pub fn from_parts(states: &[&str], transitions: &[(&str, &str, &str)], start: &str) -> Result<PureModel, ModelError> {
        let raw = RawModel {
            states: states.iter().map(|s| s.to_string()).collect(),
            start: start.to_string(),
            transitions: transitions.iter().map(|(s, a, t)| (s.to_string(), a.to_string(), t.to_string())).collect(),
            labels: BTreeMap::new(),
        };
        PureModel::from_raw(&raw)
    }

    /// Builds directly from dense state indices; names are `s{i}`.
    pub fn from_edges(n: usize, transitions: impl IntoIterator<Item = (StateId, Action, StateId)>, start: StateId) -> PureModel {
        let mut edges = vec![Vec::new(); n];
        for (s, a, t) in transitions {
            if !edges[s].contains(&(a.clone(), t)) {
                edges[s].push((a, t));
            }
        }
        for e in &mut edges {
            e.sort();
        }
        PureModel { names: (0..n).map(|i| format!("s{i}")).collect(), edges, start }
    }

    pub(crate) fn from_model(m: &Model) -> PureModel {
        PureModel {
            names: m.names.clone(),
            edges: m.edges.iter().map(|e| e.iter().map(|(a, &t)| (a.clone(), t)).collect()).collect(),
            start: m.start,
        }
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            states: self.names.clone(),
            start: self.names[self.start].clone(),
            transitions: self.transitions().map(|(s, a, t)| (self.names[s].clone(), a.to_string(), self.names[t].clone())).collect(),
            labels: BTreeMap::new(),
        }
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn with_start(&self, start: StateId) -> PureModel {
        let mut p = self.clone();
        p.start = start;
        p
    }

    /// Outgoing transitions sorted by (action, target).
    pub fn successors(&self, s: StateId) -> &[(Action, StateId)] {
        &self.edges[s]
    }

    pub fn out_actions(&self, s: StateId) -> ActionSet {
        self.edges[s].iter().map(|(a, _)| a.clone()).collect()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (StateId, &Action, StateId)> {
        self.edges.iter().enumerate().flat_map(|(s, v)| v.iter().map(move |(a, t)| (s, a, *t)))
    }

    /// The first (state, action) pair with two distinct successors, if any.
    pub fn nondeterminism(&self) -> Option<(StateId, Action)> {
        for (s, v) in self.edges.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for (a, _) in v {
                if !seen.insert(a) {
                    return Some((s, a.clone()));
                }
            }
        }
        None
    }

    pub fn is_deterministic(&self) -> bool {
        self.nondeterminism().is_none()
    }

    pub fn to_dot(&self) -> String {
        dot(&self.names, self.start, |_| None, self.transitions().map(|(s, a, t)| (s, a.clone(), t)))
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn dot(
    names: &[String],
    start: StateId,
    label: impl Fn(StateId) -> Option<String>,
    edges: impl Iterator<Item = (StateId, Action, StateId)>,
) -> String {
    let mut out = String::from("digraph model {\n  rankdir=LR;\n");
    for (i, n) in names.iter().enumerate() {
        let shape = if i == start { "doublecircle" } else { "circle" };
        let text = match label(i) {
            Some(l) => format!("{n}\\n{l}"),
            None => n.clone(),
        };
        out.push_str(&format!("  \"{}\" [shape={shape}, label=\"{}\"];\n", dot_escape(n), dot_escape(&text).replace("\\\\n", "\\n")));
    }
    for (s, a, t) in edges {
        out.push_str(&format!("  \"{}\" -> \"{}\" [label=\"{}\"];\n", dot_escape(&names[s]), dot_escape(&names[t]), a));
    }
    out.push_str("}\n");
    out
}
