//! Entailment and incompatibility, plus the procedure for formulae with negation.

use std::ops::ControlFlow;
use std::rc::Rc;

use thiserror::Error;

use crate::lattice::{char_formula, simpl, LatticeError, LatticeModel};
use crate::model::{Model, ModelBuilder, StateId, StateLabel};
use crate::semantics::satisfies;
use crate::syntax::{Action, ActionSet, Alphabet, Formula};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    #[error("formula uses negation or disjunction")]
    NotCore,
    #[error("formula contains negation")]
    HasNegation,
    #[error("base model is not a tree")]
    NotATree,
}

impl From<LatticeError> for DecideError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::NotATree => DecideError::NotATree,
            LatticeError::NotCore => DecideError::NotCore,
        }
    }
}

/// `f ⊨ g` for core formulae: simpl(f) satisfies g.
pub fn entails(f: &Formula, g: &Formula) -> Result<bool, DecideError> {
    if !g.is_core() {
        return Err(DecideError::NotCore);
    }
    match simpl(f)? {
        LatticeModel::Bottom => Ok(true),
        LatticeModel::Model(m) => Ok(satisfies(&m, g).expect("core formula")),
    }
}

/// True iff no model satisfies both formulae.
pub fn incompatible(f: &Formula, g: &Formula) -> Result<bool, DecideError> {
    Ok(simpl(&Formula::and(f.clone(), g.clone()))?.is_bottom())
}

/// An action outside `avoid`, named `fresh`, `fresh1`, `fresh2`, ….
pub fn fresh_action(avoid: &ActionSet) -> Action {
    (0..)
        .map(|i| if i == 0 { "fresh".to_string() } else { format!("fresh{i}") })
        .map(|n| Action::new(&n).expect("valid name"))
        .find(|a| !avoid.contains(a))
        .expect("unbounded supply")
}

/// When `f ⊭ g`, a formula `x` with `incompatible(g, x)` and not `incompatible(f, x)`.
///
/// Returns `None` when `f ⊨ g`. The witness is the characteristic formula of a
/// refinement of simpl(f) that blocks one path formula of simpl(g).
pub fn incompatibility_witness(f: &Formula, g: &Formula) -> Result<Option<Formula>, DecideError> {
    if entails(f, g)? {
        return Ok(None);
    }
    let m = match simpl(f)? {
        LatticeModel::Model(m) => m,
        LatticeModel::Bottom => unreachable!("⊥ entails everything"),
    };
    let gm = match simpl(g)? {
        LatticeModel::Bottom => return Ok(Some(Formula::Top)),
        LatticeModel::Model(gm) => gm,
    };
    let mut avoid = f.actions();
    avoid.extend(g.actions());
    let refined = block_path(&m, &gm, &avoid).expect("a failing path formula exists when not entailed");
    Ok(Some(char_formula(&LatticeModel::Model(refined), &Alphabet::Open)?))
}

/// Finds a path formula of `gm` that fails on `m` and returns `m` refined to forbid it.
fn block_path(m: &Model, gm: &Model, avoid: &ActionSet) -> Option<Model> {
    let mut stack = vec![(gm.start(), m.start())];
    while let Some((gs, ms)) = stack.pop() {
        if let StateLabel::Finite(allowed) = gm.label(gs) {
            if !m.label(ms).within(allowed) {
                let out = m.out_actions(ms);
                let b = out.iter().find(|a| !allowed.contains(*a)).cloned();
                return Some(match b {
                    Some(_) => m.clone(),
                    None => {
                        let b = match m.label(ms) {
                            StateLabel::Finite(own) => own.iter().find(|a| !allowed.contains(*a)).cloned().expect("label not within"),
                            StateLabel::All => {
                                let mut av = avoid.clone();
                                av.extend(allowed.iter().cloned());
                                fresh_action(&av)
                            }
                        };
                        with_edge(m, ms, b)
                    }
                });
            }
        }
        for (a, gt) in gm.successors(gs) {
            match m.successor(ms, a) {
                Some(mt) => stack.push((gt, mt)),
                None => {
                    let label = match m.label(ms) {
                        StateLabel::Finite(own) => StateLabel::Finite(own.iter().filter(|x| *x != a).cloned().collect()),
                        StateLabel::All => StateLabel::Finite(m.out_actions(ms)),
                    };
                    return Some(relabel(m, ms, label));
                }
            }
        }
    }
    None
}

fn rebuild(m: &Model, mut label: impl FnMut(StateId) -> StateLabel) -> (ModelBuilder, Vec<StateId>) {
    let mut b = ModelBuilder::new();
    let ids: Vec<StateId> = (0..m.len()).map(|s| b.named_state(m.name(s), label(s))).collect();
    for (s, a, t) in m.transitions() {
        b.edge(ids[s], a.clone(), ids[t]);
    }
    (b, ids)
}

fn relabel(m: &Model, at: StateId, label: StateLabel) -> Model {
    let (b, ids) = rebuild(m, |s| if s == at { label.clone() } else { m.label(s).clone() });
    b.build(ids[m.start()])
}

fn with_edge(m: &Model, at: StateId, a: Action) -> Model {
    let (mut b, ids) = rebuild(m, |s| m.label(s).clone());
    let t = b.state(StateLabel::All);
    b.edge(ids[at], a, t);
    b.build(ids[m.start()])
}

/// ¬_S(f): a negation-free formula standing for the negation of `f` relative to `s`.
///
/// The empty disjunction arising from `!A` with `S ⊆ A` is `F`.
pub fn negate_s(f: &Formula, s: &ActionSet) -> Result<Formula, DecideError> {
    Ok(match f {
        Formula::Top => Formula::Bottom,
        Formula::Bottom => Formula::Top,
        Formula::And(l, r) => Formula::or(negate_s(l, s)?, negate_s(r, s)?),
        Formula::Or(l, r) => Formula::and(negate_s(l, s)?, negate_s(r, s)?),
        Formula::May(a, g) => {
            let rest: ActionSet = s.iter().filter(|b| *b != a).cloned().collect();
            Formula::or(Formula::Bang(rest), Formula::may(a.clone(), negate_s(g, s)?))
        }
        Formula::Bang(set) => Formula::disj(s.difference(set).map(|a| Formula::may(a.clone(), Formula::Top)).collect::<Vec<_>>()),
        Formula::Neg(_) => return Err(DecideError::HasNegation),
    })
}

/// Removes every `~` innermost-out using ¬_S.
pub fn neg_eliminate(f: &Formula, s: &ActionSet) -> Formula {
    match f {
        Formula::Top | Formula::Bottom | Formula::Bang(_) => f.clone(),
        Formula::And(l, r) => Formula::and(neg_eliminate(l, s), neg_eliminate(r, s)),
        Formula::Or(l, r) => Formula::or(neg_eliminate(l, s), neg_eliminate(r, s)),
        Formula::May(a, g) => Formula::may(a.clone(), neg_eliminate(g, s)),
        Formula::Neg(g) => negate_s(&neg_eliminate(g, s), s).expect("inner formula is negation-free"),
    }
}

/// Disjunctive normal form: Or-free disjuncts, in left-to-right order.
///
/// Besides distributing `/\` over `\/`, a modality is distributed over a
/// disjunction below it, `<a>(p \/ q)` ⇝ `<a>p \/ <a>q`.
pub fn to_dnf(f: &Formula) -> Result<Vec<Formula>, DecideError> {
    Ok(match f {
        Formula::Top | Formula::Bottom | Formula::Bang(_) => vec![f.clone()],
        Formula::Or(l, r) => {
            let mut out = to_dnf(l)?;
            out.extend(to_dnf(r)?);
            out
        }
        Formula::And(l, r) => {
            let (ls, rs) = (to_dnf(l)?, to_dnf(r)?);
            let mut out = Vec::with_capacity(ls.len() * rs.len());
            for x in &ls {
                for y in &rs {
                    out.push(Formula::and(x.clone(), y.clone()));
                }
            }
            out
        }
        Formula::May(a, g) => to_dnf(g)?.into_iter().map(|d| Formula::may(a.clone(), d)).collect(),
        Formula::Neg(_) => return Err(DecideError::HasNegation),
    })
}

/// Parameters of an S-extension enumeration.
#[derive(Clone, Debug)]
pub struct SExtensionSpec {
    pub base: Model,
    pub actions: ActionSet,
    /// Maximal height of an added subtree, counting the edge from the base state.
    pub height: usize,
}

#[derive(Debug)]
struct Shape {
    children: Vec<(Action, Rc<Shape>)>,
}

/// Every Σ-labelled tree over `actions` of height ≤ `h`.
fn shapes(actions: &ActionSet, h: usize) -> Vec<Rc<Shape>> {
    let mut level = vec![Rc::new(Shape { children: Vec::new() })];
    for _ in 0..h {
        let mut next = vec![Vec::new()];
        for a in actions {
            let mut grown = Vec::new();
            for partial in &next {
                grown.push(partial.clone());
                for s in &level {
                    let mut p = partial.clone();
                    p.push((a.clone(), s.clone()));
                    grown.push(p);
                }
            }
            next = grown;
        }
        level = next.into_iter().map(|children| Rc::new(Shape { children })).collect();
    }
    level
}

/// Lazy enumeration of S-extensions; see [`s_extensions`].
pub struct SExtensions {
    base: Model,
    slots: Vec<(StateId, Action)>,
    shapes: Vec<Rc<Shape>>,
    counter: Vec<usize>,
    done: bool,
}

/// Enumerates the S-extensions of a tree model whose added subtrees have bounded height.
///
/// Each base state may gain one fresh Σ-labelled subtree per action in
/// `S ∩ λ(x)` that it does not already use. Subtrees are canonical, so the
/// enumeration has no duplicates up to equivalence.
pub fn s_extensions(spec: &SExtensionSpec) -> Result<SExtensions, DecideError> {
    if !spec.base.is_tree() {
        return Err(DecideError::NotATree);
    }
    let base = spec.base.compact();
    let mut slots = Vec::new();
    if spec.height > 0 {
        for x in 0..base.len() {
            for a in &spec.actions {
                if base.label(x).allows(a) && base.successor(x, a).is_none() {
                    slots.push((x, a.clone()));
                }
            }
        }
    }
    let shapes = if spec.height > 0 { shapes(&spec.actions, spec.height - 1) } else { Vec::new() };
    let counter = vec![0; slots.len()];
    Ok(SExtensions { base, slots, shapes, counter, done: false })
}

impl SExtensions {
    fn current(&self) -> Model {
        let (mut b, ids) = rebuild(&self.base, |s| self.base.label(s).clone());
        for ((x, a), &choice) in self.slots.iter().zip(&self.counter) {
            if choice == 0 {
                continue;
            }
            let root = b.state(StateLabel::All);
            b.edge(ids[*x], a.clone(), root);
            let mut stack = vec![(root, self.shapes[choice - 1].clone())];
            while let Some((at, shape)) = stack.pop() {
                for (c, sub) in &shape.children {
                    let t = b.state(StateLabel::All);
                    b.edge(at, c.clone(), t);
                    stack.push((t, sub.clone()));
                }
            }
        }
        b.build(ids[self.base.start()])
    }
}

impl Iterator for SExtensions {
    type Item = Model;

    fn next(&mut self) -> Option<Model> {
        if self.done {
            return None;
        }
        let m = self.current();
        let radix = self.shapes.len() + 1;
        self.done = true;
        for c in self.counter.iter_mut() {
            *c += 1;
            if *c < radix {
                self.done = false;
                break;
            }
            *c = 0;
        }
        Some(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeightBound {
    ModalDepth,
    Length,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NegStrategy {
    /// Sound and complete: enumerates label refinements and extensions of every
    /// disjunct of a positive over-approximation of the premise.
    #[default]
    Exact,
    /// ¬_S elimination, DNF and S-extensions of each disjunct, checked against the
    /// conclusion only. Kept for comparison; it can answer "entailed" wrongly.
    SExtension(HeightBound),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NegOptions {
    pub strategy: NegStrategy,
}

/// `f ⊨ g` for formulae that may use `~` and `\/`.
pub fn entails_neg(f: &Formula, g: &Formula) -> bool {
    entails_neg_with(f, g, NegOptions::default())
}

pub fn entails_neg_with(f: &Formula, g: &Formula, options: NegOptions) -> bool {
    match options.strategy {
        NegStrategy::Exact => neg_counterexample(f, g).is_none(),
        NegStrategy::SExtension(bound) => entails_neg_sext(f, g, bound),
    }
}

fn entails_neg_sext(f: &Formula, g: &Formula, bound: HeightBound) -> bool {
    let mut s = f.actions();
    s.extend(g.actions());
    s.insert(fresh_action(&s));
    let height = match bound {
        HeightBound::ModalDepth => g.modal_depth(),
        HeightBound::Length => g.length(),
        HeightBound::Fixed(h) => h,
    };
    let eliminated = neg_eliminate(f, &s);
    for d in to_dnf(&eliminated).expect("negation-free") {
        let base = match simpl(&d).expect("core disjunct") {
            LatticeModel::Bottom => continue,
            LatticeModel::Model(m) => m,
        };
        let spec = SExtensionSpec { base, actions: s.clone(), height };
        for m in s_extensions(&spec).expect("simpl yields trees") {
            if !crate::semantics::eval_extended(&m, g) {
                return false;
            }
        }
    }
    true
}

/// A model of `f` that falsifies `g`, if one exists.
pub fn neg_counterexample(f: &Formula, g: &Formula) -> Option<Model> {
    let mut actions = f.actions();
    actions.extend(g.actions());
    let depth = f.modal_depth().max(g.modal_depth());
    let labels = label_options(&actions);
    let mut found = None;
    for d in to_dnf(&relax(f, true)).expect("relaxation is negation-free") {
        let base = match simpl(&d).expect("core disjunct") {
            LatticeModel::Bottom => continue,
            LatticeModel::Model(m) => m,
        };
        let mut ctx = Refine { base: &base, actions: &actions, depth, labels: &labels, fresh: Vec::new() };
        let root = ctx.base_options(base.start(), 0);
        let flow = for_each_root(&root, |t| {
            if t.eval(f) && !t.eval(g) {
                found = Some(t.to_model());
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        if flow.is_break() {
            break;
        }
    }
    found
}

/// A negation-free formula implied by `f` (when `positive`) or by `~f`.
fn relax(f: &Formula, positive: bool) -> Formula {
    match (f, positive) {
        (Formula::Neg(g), p) => relax(g, !p),
        (Formula::Top | Formula::Bottom | Formula::Bang(_), true) => f.clone(),
        (Formula::May(a, g), true) => Formula::may(a.clone(), relax(g, true)),
        (Formula::And(l, r), true) => Formula::and(relax(l, true), relax(r, true)),
        (Formula::Or(l, r), true) => Formula::or(relax(l, true), relax(r, true)),
        (Formula::Top, false) => Formula::Bottom,
        (Formula::Bottom | Formula::Bang(_) | Formula::May(..), false) => Formula::Top,
        (Formula::And(l, r), false) => Formula::or(relax(l, false), relax(r, false)),
        (Formula::Or(l, r), false) => Formula::and(relax(l, false), relax(r, false)),
    }
}

/// Labels distinguishable by formulae over `actions`: Σ and every subset.
fn label_options(actions: &ActionSet) -> Vec<StateLabel> {
    let list: Vec<&Action> = actions.iter().collect();
    let mut out = vec![StateLabel::All];
    for mask in 0u64..(1u64 << list.len()) {
        out.push(StateLabel::Finite((0..list.len()).filter(|i| mask >> i & 1 == 1).map(|i| list[i].clone()).collect()));
    }
    out
}

/// Candidate tree used while enumerating refinements.
#[derive(Debug)]
struct TNode {
    label: StateLabel,
    children: Vec<(Action, Rc<TNode>)>,
}

impl TNode {
    fn child(&self, a: &Action) -> Option<&TNode> {
        self.children.iter().find(|(b, _)| b == a).map(|(_, t)| &**t)
    }

    fn eval(&self, f: &Formula) -> bool {
        match f {
            Formula::Top => true,
            Formula::Bottom => false,
            Formula::And(l, r) => self.eval(l) && self.eval(r),
            Formula::Or(l, r) => self.eval(l) || self.eval(r),
            Formula::Neg(g) => !self.eval(g),
            Formula::May(a, g) => self.child(a).is_some_and(|t| t.eval(g)),
            Formula::Bang(set) => self.label.within(set),
        }
    }

    fn to_model(&self) -> Model {
        let mut b = ModelBuilder::new();
        let root = b.state(self.label.clone());
        let mut stack = vec![(root, self)];
        while let Some((id, node)) = stack.pop() {
            for (a, c) in &node.children {
                let t = b.state(c.label.clone());
                b.edge(id, a.clone(), t);
                stack.push((t, c));
            }
        }
        b.build(root).compact()
    }
}

/// The choices available at one node: a label and, per slot, a list of subtrees.
struct Choices {
    labels: Vec<StateLabel>,
    /// Per label: per slot (action, options); `None` stands for an absent optional child.
    slots: Vec<Vec<(Action, Vec<Option<Rc<TNode>>>)>>,
}

struct Refine<'a> {
    base: &'a Model,
    actions: &'a ActionSet,
    depth: usize,
    labels: &'a [StateLabel],
    fresh: Vec<Option<Rc<Vec<Rc<TNode>>>>>,
}

impl Refine<'_> {
    fn verbatim(&self, s: StateId) -> Rc<TNode> {
        Rc::new(TNode {
            label: self.base.label(s).clone(),
            children: self.base.successors(s).map(|(a, t)| (a.clone(), self.verbatim(t))).collect(),
        })
    }

    /// Choices for base state `s` at distance `k` from the root.
    fn base_choices(&mut self, s: StateId, k: usize) -> Choices {
        let own = self.base.label(s).clone();
        let out = self.base.out_actions(s);
        let labels: Vec<StateLabel> = if k > self.depth {
            vec![own]
        } else {
            self.labels
                .iter()
                .filter(|l| l.is_subset_of(&own) && out.iter().all(|a| l.allows(a)))
                .cloned()
                .collect()
        };
        let mut fixed = Vec::new();
        for (a, t) in self.base.successors(s) {
            let opts = if k >= self.depth { vec![self.verbatim(t)] } else { self.base_options(t, k + 1) };
            fixed.push((a.clone(), opts.into_iter().map(Some).collect::<Vec<_>>()));
        }
        let mut slots = Vec::new();
        for l in &labels {
            let mut per = fixed.clone();
            if k < self.depth {
                let extra = self.fresh_options(self.depth - k - 1);
                for a in self.actions {
                    if l.allows(a) && !out.contains(a) {
                        let mut opts = vec![None];
                        opts.extend(extra.iter().cloned().map(Some));
                        per.push((a.clone(), opts));
                    }
                }
            }
            slots.push(per);
        }
        Choices { labels, slots }
    }

    fn base_options(&mut self, s: StateId, k: usize) -> Vec<Rc<TNode>> {
        let choices = self.base_choices(s, k);
        let mut out = Vec::new();
        expand(&choices, &mut |t| out.push(t));
        out
    }

    /// Every abstract subtree of height ≤ `h` made of fresh states.
    fn fresh_options(&mut self, h: usize) -> Rc<Vec<Rc<TNode>>> {
        if self.fresh.len() <= h {
            self.fresh.resize(h + 1, None);
        }
        if let Some(v) = &self.fresh[h] {
            return v.clone();
        }
        let below = if h > 0 { Some(self.fresh_options(h - 1)) } else { None };
        let mut slots = Vec::new();
        for l in self.labels {
            let mut per = Vec::new();
            if let Some(below) = &below {
                for a in self.actions {
                    if l.allows(a) {
                        let mut opts = vec![None];
                        opts.extend(below.iter().cloned().map(Some));
                        per.push((a.clone(), opts));
                    }
                }
            }
            slots.push(per);
        }
        let choices = Choices { labels: self.labels.to_vec(), slots };
        let mut out = Vec::new();
        expand(&choices, &mut |t| out.push(t));
        let v = Rc::new(out);
        self.fresh[h] = Some(v.clone());
        v
    }
}

fn expand(choices: &Choices, visit: &mut impl FnMut(Rc<TNode>)) {
    for (label, slots) in choices.labels.iter().zip(&choices.slots) {
        let mut counter = vec![0usize; slots.len()];
        loop {
            let mut children = slots
                .iter()
                .zip(&counter)
                .filter_map(|((a, opts), &i)| opts[i].as_ref().map(|t| (a.clone(), t.clone())))
                .collect::<Vec<_>>();
            children.sort_by(|x, y| x.0.cmp(&y.0));
            visit(Rc::new(TNode { label: label.clone(), children }));
            let mut carried = true;
            for (c, (_, opts)) in counter.iter_mut().zip(slots) {
                *c += 1;
                if *c < opts.len() {
                    carried = false;
                    break;
                }
                *c = 0;
            }
            if carried {
                break;
            }
        }
    }
}

fn for_each_root<B>(root: &[Rc<TNode>], mut visit: impl FnMut(&TNode) -> ControlFlow<B>) -> ControlFlow<B> {
    for t in root {
        visit(t)?;
    }
    ControlFlow::Continue(())
}
