//! A knowledge base whose fact store is a single tree-shaped model.
//!
//! Facts are asserted as core formulae and merged into the store with a
//! non-monotonic rule: when a state's new label conflicts with what is stored,
//! the new label wins and the transitions it forbids are deleted. Queries are
//! conjunctions of path literals with variables in action position.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{simpl, LatticeModel};
use crate::model::{Model, ModelBuilder, ModelError, StateId, StateLabel};
use crate::syntax::{parse_core, Action, Formula, ParseError, Variable};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("the assertion is unsatisfiable; store unchanged")]
    Unsatisfiable,
    #[error("formula uses negation or disjunction")]
    NotCore,
    #[error("no state at path `{0}`")]
    PathNotFound(String),
    #[error("the model is not a tree")]
    NotATree,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("bad query literal `{0}`")]
    BadLiteral(String),
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Node {
    label: StateLabel,
    children: BTreeMap<Action, Arc<Node>>,
}

impl Node {
    fn empty() -> Node {
        Node { label: StateLabel::All, children: BTreeMap::new() }
    }

    fn from_model(m: &Model, s: StateId) -> Node {
        let children = m.successors(s).map(|(a, t)| (a.clone(), Arc::new(Node::from_model(m, t)))).collect();
        Node { label: m.label(s).clone(), children }
    }
}

pub type Path = Vec<Action>;

pub fn path_string(path: &[Action]) -> String {
    path.iter().map(Action::as_str).collect::<Vec<_>>().join("/")
}

/// Parses `a/b/c`; the empty string is the empty path.
pub fn parse_path(text: &str) -> Result<Path, KbError> {
    let text = text.trim().trim_matches('/');
    if text.is_empty() {
        return Ok(Vec::new());
    }
    Ok(text.split('/').map(|s| Action::new(s.trim())).collect::<Result<_, _>>()?)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChangeReport {
    /// Paths of deleted transitions, each with its whole subtree.
    pub removed: Vec<String>,
    /// Paths of newly created transitions.
    pub added: Vec<String>,
}

/// An immutable view of the store taken at one revision.
#[derive(Clone, Debug)]
pub struct Snapshot {
    root: Arc<Node>,
    pub revision: u64,
}

#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    root: Arc<Node>,
    revision: u64,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase::new()
    }
}

impl KnowledgeBase {
    /// The empty store: a single unconstrained root.
    pub fn new() -> Self {
        KnowledgeBase { root: Arc::new(Node::empty()), revision: 0 }
    }

    pub fn from_model(m: &Model) -> Result<Self, KbError> {
        if !m.is_tree() {
            return Err(KbError::NotATree);
        }
        Ok(KnowledgeBase { root: Arc::new(Node::from_model(m, m.start())), revision: 0 })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { root: self.root.clone(), revision: self.revision }
    }

    /// The store as a model; states are named by their path from the root `/`.
    pub fn to_model(&self) -> Model {
        let mut b = ModelBuilder::new();
        let root = b.named_state("/", self.root.label.clone());
        let mut stack = vec![(root, String::new(), &self.root)];
        while let Some((id, path, node)) = stack.pop() {
            for (a, child) in &node.children {
                let p = format!("{path}/{a}");
                let cid = b.named_state(p.clone(), child.label.clone());
                b.edge(id, a.clone(), cid);
                stack.push((cid, p, child));
            }
        }
        b.build(root)
    }

    /// Re-checks the store through the model validator.
    pub fn validate(&self) -> Result<Model, KbError> {
        let m = Model::from_raw(&self.to_model().to_raw())?;
        if !m.is_tree() {
            return Err(KbError::NotATree);
        }
        Ok(m)
    }

    pub fn label_at(&self, path: &[Action]) -> Option<&StateLabel> {
        let mut node = &self.root;
        for a in path {
            node = node.children.get(a)?;
        }
        Some(&node.label)
    }

    pub fn assert_fact(&mut self, f: &Formula) -> Result<ChangeReport, KbError> {
        if !f.is_core() {
            return Err(KbError::NotCore);
        }
        let m = match simpl(f).map_err(|_| KbError::NotCore)? {
            LatticeModel::Bottom => return Err(KbError::Unsatisfiable),
            LatticeModel::Model(m) => m,
        };
        let mut report = ChangeReport::default();
        let mut path = Vec::new();
        merge(Arc::make_mut(&mut self.root), &m, m.start(), &mut path, &mut report);
        self.revision += 1;
        Ok(report)
    }

    /// Removes the transition at the end of `path` together with its subtree.
    pub fn retract_path(&mut self, path: &[Action]) -> Result<ChangeReport, KbError> {
        let Some((last, prefix)) = path.split_last() else {
            return Err(KbError::PathNotFound(String::new()));
        };
        if self.label_at(path).is_none() {
            return Err(KbError::PathNotFound(path_string(path)));
        }
        let mut node = Arc::make_mut(&mut self.root);
        for a in prefix {
            node = Arc::make_mut(node.children.get_mut(a).expect("path checked"));
        }
        node.children.remove(last);
        self.revision += 1;
        Ok(ChangeReport { removed: vec![path_string(path)], added: Vec::new() })
    }

    /// Resets the label at `path` to Σ.
    pub fn relabel(&mut self, path: &[Action]) -> Result<(), KbError> {
        if self.label_at(path).is_none() {
            return Err(KbError::PathNotFound(path_string(path)));
        }
        let mut node = Arc::make_mut(&mut self.root);
        for a in path {
            node = Arc::make_mut(node.children.get_mut(a).expect("path checked"));
        }
        node.label = StateLabel::All;
        self.revision += 1;
        Ok(())
    }

    pub fn query(&self, literals: &[QueryLiteral]) -> QueryResult {
        self.snapshot().query(literals)
    }
}

fn merge(node: &mut Node, m: &Model, s: StateId, path: &mut Path, report: &mut ChangeReport) {
    let new = m.label(s);
    let meet = node.label.intersect(new);
    let compatible = node.children.keys().all(|a| meet.allows(a)) && m.out_actions(s).iter().all(|a| meet.allows(a));
    if compatible {
        node.label = meet;
    } else {
        node.label = new.clone();
        let doomed: Vec<Action> = node.children.keys().filter(|a| !new.allows(a)).cloned().collect();
        for a in doomed {
            node.children.remove(&a);
            path.push(a);
            report.removed.push(path_string(path));
            path.pop();
        }
    }
    for (a, t) in m.successors(s) {
        path.push(a.clone());
        match node.children.get_mut(a) {
            Some(child) => merge(Arc::make_mut(child), m, t, path, report),
            None => {
                node.children.insert(a.clone(), Arc::new(Node::from_model(m, t)));
                report.added.push(path_string(path));
            }
        }
        path.pop();
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Const(Action),
    Var(Variable),
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Const(a) => write!(f, "<{a}>"),
            Step::Var(v) => write!(f, "<{v}>"),
        }
    }
}

/// A path literal such as `<spouse><X>(<Y> /\ !{Y})`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QueryLiteral {
    pub steps: Vec<Step>,
    /// The final step is the only transition allowed at its source state.
    pub functional: bool,
}

impl QueryLiteral {
    pub fn new(steps: Vec<Step>, functional: bool) -> Result<Self, KbError> {
        if steps.is_empty() {
            return Err(KbError::BadLiteral(String::new()));
        }
        Ok(QueryLiteral { steps, functional })
    }

    pub fn variables(&self) -> BTreeSet<&Variable> {
        self.steps.iter().filter_map(|s| if let Step::Var(v) = s { Some(v) } else { None }).collect()
    }

    fn prefix_variables(&self) -> BTreeSet<&Variable> {
        self.steps[..self.steps.len() - 1].iter().filter_map(|s| if let Step::Var(v) = s { Some(v) } else { None }).collect()
    }

    /// Parses `<a><X>`, `<a><b>T` or `<a><X>(<Y> /\ !{Y})`.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let bad = || KbError::BadLiteral(text.trim().to_string());
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut rest = compact.as_str();
        let mut steps = Vec::new();
        let step = |name: &str| -> Result<Step, KbError> {
            if name.starts_with(|c: char| c.is_ascii_uppercase()) {
                Ok(Step::Var(Variable::new(name)?))
            } else {
                Ok(Step::Const(Action::new(name)?))
            }
        };
        while let Some(r) = rest.strip_prefix('<') {
            let end = r.find('>').ok_or_else(bad)?;
            steps.push(step(&r[..end])?);
            rest = &r[end + 1..];
        }
        let mut functional = false;
        if let Some(r) = rest.strip_prefix('(') {
            let inner = r.strip_suffix(')').ok_or_else(bad)?;
            let (last, bang) = inner.split_once("/\\").ok_or_else(bad)?;
            let name = last.strip_prefix('<').and_then(|s| s.strip_suffix('>')).ok_or_else(bad)?;
            let set = bang.strip_prefix("!{").and_then(|s| s.strip_suffix('}')).ok_or_else(bad)?;
            if name != set {
                return Err(bad());
            }
            steps.push(step(name)?);
            functional = true;
            rest = "";
        }
        if !(rest.is_empty() || rest == "T") || steps.is_empty() {
            return Err(bad());
        }
        QueryLiteral::new(steps, functional)
    }
}

impl fmt::Display for QueryLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.steps.len();
        let shown = if self.functional { n - 1 } else { n };
        for s in &self.steps[..shown] {
            write!(f, "{s}")?;
        }
        if self.functional {
            let last = &self.steps[n - 1];
            let name = match last {
                Step::Const(a) => a.to_string(),
                Step::Var(v) => v.to_string(),
            };
            write!(f, "({last} /\\ !{{{name}}})")?;
        }
        Ok(())
    }
}

/// Splits `lit, lit, ...` at top-level commas.
pub fn parse_query(text: &str) -> Result<Vec<QueryLiteral>, KbError> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in text.char_indices() {
        match c {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts.into_iter().filter(|p| !p.trim().is_empty()).map(QueryLiteral::parse).collect()
}

pub type Bindings = BTreeMap<Variable, Action>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryResult {
    /// Distinct solutions in sorted order.
    pub bindings: Vec<Bindings>,
    /// Number of transition candidates examined.
    pub nodes: u64,
}

impl Snapshot {
    pub fn query(&self, literals: &[QueryLiteral]) -> QueryResult {
        let mut out = BTreeSet::new();
        let mut nodes = 0;
        let mut env = Bindings::new();
        solve(&self.root, literals, &mut env, &mut nodes, &mut out);
        QueryResult { bindings: out.into_iter().collect(), nodes }
    }
}

fn solve(root: &Arc<Node>, literals: &[QueryLiteral], env: &mut Bindings, nodes: &mut u64, out: &mut BTreeSet<Bindings>) {
    let Some((lit, rest)) = literals.split_first() else {
        out.insert(env.clone());
        return;
    };
    walk(root, lit, 0, root, rest, env, nodes, out);
}

#[allow(clippy::too_many_arguments)]
fn walk(
    node: &Arc<Node>,
    lit: &QueryLiteral,
    i: usize,
    root: &Arc<Node>,
    rest: &[QueryLiteral],
    env: &mut Bindings,
    nodes: &mut u64,
    out: &mut BTreeSet<Bindings>,
) {
    if i == lit.steps.len() {
        solve(root, rest, env, nodes, out);
        return;
    }
    let last = i + 1 == lit.steps.len();
    let fixed = match &lit.steps[i] {
        Step::Const(a) => Some(a.clone()),
        Step::Var(v) => env.get(v).cloned(),
    };
    let admits = |a: &Action| !(last && lit.functional) || node.label.within(&BTreeSet::from([a.clone()]));
    match fixed {
        Some(a) => {
            *nodes += 1;
            if let Some(child) = node.children.get(&a) {
                if admits(&a) {
                    walk(child, lit, i + 1, root, rest, env, nodes, out);
                }
            }
        }
        None => {
            let Step::Var(v) = &lit.steps[i] else { unreachable!("constants are fixed") };
            for (a, child) in &node.children {
                *nodes += 1;
                if admits(a) {
                    env.insert(v.clone(), a.clone());
                    walk(child, lit, i + 1, root, rest, env, nodes, out);
                    env.remove(v);
                }
            }
        }
    }
}

/// Greedy reordering: fewest unbound variables first, then literals that are
/// functional once their prefix is bound, then literals binding the prefix of a
/// pending functional literal, then original order.
pub fn optimize_query(literals: &[QueryLiteral], bound: &BTreeSet<Variable>) -> Vec<QueryLiteral> {
    let mut bound: BTreeSet<Variable> = bound.clone();
    let mut remaining: Vec<&QueryLiteral> = literals.iter().collect();
    let mut out = Vec::with_capacity(literals.len());
    while !remaining.is_empty() {
        let wanted: BTreeSet<&Variable> = remaining
            .iter()
            .filter(|l| l.functional)
            .flat_map(|l| l.prefix_variables())
            .filter(|v| !bound.contains(*v))
            .collect();
        let key = |l: &QueryLiteral| {
            let unbound = l.variables().into_iter().filter(|v| !bound.contains(*v)).count();
            let functional = l.functional && l.prefix_variables().into_iter().all(|v| bound.contains(v));
            let enabling = !l.functional && l.variables().into_iter().any(|v| wanted.contains(v));
            (unbound, !functional, !enabling)
        };
        let best = (0..remaining.len()).min_by_key(|&i| (key(remaining[i]), i)).expect("non-empty");
        let lit = remaining.remove(best);
        bound.extend(lit.variables().into_iter().cloned());
        out.push(lit.clone());
    }
    out
}

/// `n` Welsh people `p0..`, married in pairs `p0-p1`, `p2-p3`, ...
pub fn welsh_dataset(n: usize) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let person = |i: usize| Action::new(&format!("p{i}")).expect("valid name");
    let welsh = Action::new("welsh").expect("valid name");
    let spouse = Action::new("spouse").expect("valid name");
    for i in 0..n {
        kb.assert_fact(&Formula::path([welsh.clone(), person(i)], Formula::Top)).expect("satisfiable");
        let partner = i ^ 1;
        if partner < n {
            let tail = Formula::and(Formula::may(person(partner), Formula::Top), Formula::bang([person(partner)]));
            kb.assert_fact(&Formula::path([spouse.clone(), person(i)], tail)).expect("satisfiable");
        }
    }
    kb
}

/// `<welsh><X>, <welsh><Y>, <spouse><X>(<Y> /\ !{Y})`.
pub fn welsh_query() -> Vec<QueryLiteral> {
    parse_query("<welsh><X>, <welsh><Y>, <spouse><X>(<Y> /\\ !{Y})").expect("valid query")
}

#[derive(Clone, Debug, PartialEq)]
pub enum KbCommand {
    Assert(Formula),
    Retract(Path),
    Relabel(Path),
    Query(Vec<QueryLiteral>),
    Explain(Vec<QueryLiteral>),
    Save(String),
    Load(String),
    Dump,
    Dot,
}

impl KbCommand {
    pub fn parse(line: &str) -> Result<KbCommand, KbError> {
        let line = line.trim();
        let (word, arg) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let arg = arg.trim();
        Ok(match word {
            "assert" => KbCommand::Assert(parse_core(arg)?),
            "retract" => KbCommand::Retract(parse_path(arg)?),
            "relabel" => KbCommand::Relabel(parse_path(arg)?),
            "query" => KbCommand::Query(parse_query(arg)?),
            "explain" => KbCommand::Explain(parse_query(arg)?),
            "save" => KbCommand::Save(arg.to_string()),
            "load" => KbCommand::Load(arg.to_string()),
            "dump" => KbCommand::Dump,
            "dot" => KbCommand::Dot,
            _ => return Err(KbError::UnknownCommand(word.to_string())),
        })
    }

    /// The log line for mutating commands.
    pub fn log_line(&self) -> Option<String> {
        match self {
            KbCommand::Assert(f) => Some(format!("assert {f}")),
            KbCommand::Retract(p) => Some(format!("retract {}", path_string(p))),
            KbCommand::Relabel(p) => Some(format!("relabel {}", path_string(p))),
            _ => None,
        }
    }
}

fn format_bindings(b: &Bindings) -> String {
    if b.is_empty() {
        return "true".to_string();
    }
    b.iter().map(|(v, a)| format!("{v}={a}")).collect::<Vec<_>>().join(", ")
}

/// A REPL session: the store plus its append-only command log.
#[derive(Clone, Debug, Default)]
pub struct Session {
    pub kb: KnowledgeBase,
    pub log: Vec<String>,
}

impl Session {
    pub fn new() -> Self {
        Session::default()
    }

    /// Runs one command line and returns its textual output.
    pub fn execute(&mut self, line: &str) -> Result<String, KbError> {
        let cmd = KbCommand::parse(line)?;
        let out = match &cmd {
            KbCommand::Assert(f) => {
                let r = self.kb.assert_fact(f)?;
                r.removed.iter().map(|p| format!("removed {p}")).collect::<Vec<_>>().join("\n")
            }
            KbCommand::Retract(p) => {
                let r = self.kb.retract_path(p)?;
                r.removed.iter().map(|p| format!("removed {p}")).collect::<Vec<_>>().join("\n")
            }
            KbCommand::Relabel(p) => {
                self.kb.relabel(p)?;
                String::new()
            }
            KbCommand::Query(lits) => {
                let r = self.kb.query(&optimize_query(lits, &BTreeSet::new()));
                if r.bindings.is_empty() {
                    "false".to_string()
                } else {
                    r.bindings.iter().map(format_bindings).collect::<Vec<_>>().join("\n")
                }
            }
            KbCommand::Explain(lits) => {
                let opt = optimize_query(lits, &BTreeSet::new());
                let (before, after) = (self.kb.query(lits), self.kb.query(&opt));
                let order = opt.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
                format!("order: {order}\nnodes: {} (unoptimized {})\nsolutions: {}", after.nodes, before.nodes, after.bindings.len())
            }
            KbCommand::Save(file) => {
                std::fs::write(file, self.kb.to_model().to_json())?;
                format!("saved revision {}", self.kb.revision())
            }
            KbCommand::Load(file) => {
                let m = Model::from_json(&std::fs::read_to_string(file)?)?;
                self.kb = KnowledgeBase::from_model(&m)?;
                self.log.clear();
                format!("loaded {} states", m.len())
            }
            KbCommand::Dump => self.kb.to_model().to_json(),
            KbCommand::Dot => self.kb.to_model().to_dot(),
        };
        if let Some(l) = cmd.log_line() {
            self.log.push(l);
        }
        Ok(out)
    }
}

/// Rebuilds a store from an optional snapshot and a command log.
pub fn replay(snapshot: Option<&Model>, log: &str) -> Result<KnowledgeBase, KbError> {
    let mut kb = match snapshot {
        Some(m) => KnowledgeBase::from_model(m)?,
        None => KnowledgeBase::new(),
    };
    for line in log.lines().filter(|l| !l.trim().is_empty()) {
        match KbCommand::parse(line)? {
            KbCommand::Assert(f) => {
                kb.assert_fact(&f)?;
            }
            KbCommand::Retract(p) => {
                kb.retract_path(&p)?;
            }
            KbCommand::Relabel(p) => kb.relabel(&p)?,
            _ => {}
        }
    }
    Ok(kb)
}
