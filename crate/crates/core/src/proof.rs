//! Sequent-style proof system: derivations, a checker and a synthesizer.
//!
//! Judgements are `φ ⊢ ψ` between single formulae. Thirteen rules:
//!
//! ```text
//! Id         φ ⊢ φ
//! TopRight   φ ⊢ T
//! BotLeft    F ⊢ φ
//! Trans      φ ⊢ ψ,  ψ ⊢ ξ        ⟹  φ ⊢ ξ
//! AndLeft1   φ ⊢ ψ                ⟹  φ /\ ξ ⊢ ψ
//! AndLeft2   φ ⊢ ψ                ⟹  ξ /\ φ ⊢ ψ
//! AndRight   φ ⊢ ψ,  φ ⊢ ξ        ⟹  φ ⊢ ψ /\ ξ
//! BotRight1  a ∉ A                ⟹  !A /\ <a>φ ⊢ F
//! BotRight2                           <a>F ⊢ F
//! BangRight1 φ ⊢ !A,  A ⊆ A'      ⟹  φ ⊢ !A'
//! BangRight2 φ ⊢ !A,  φ ⊢ !B      ⟹  φ ⊢ !(A ∩ B)
//! Normal     φ ⊢ ψ                ⟹  <a>φ ⊢ <a>ψ
//! Det        φ ⊢ <a>ψ /\ <a>ξ     ⟹  φ ⊢ <a>(ψ /\ ξ)
//! ```
//!
//! Side conditions are read off the conclusion, so derivations carry no extra data.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{Model, ModelBuilder, StateLabel};
use crate::syntax::{parse_core, Action, ActionSet, Formula};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Id,
    TopRight,
    BotLeft,
    Trans,
    AndLeft1,
    AndLeft2,
    AndRight,
    BotRight1,
    BotRight2,
    BangRight1,
    BangRight2,
    Normal,
    Det,
}

impl Rule {
    pub const ALL: [Rule; 13] = [
        Rule::Id,
        Rule::TopRight,
        Rule::BotLeft,
        Rule::Trans,
        Rule::AndLeft1,
        Rule::AndLeft2,
        Rule::AndRight,
        Rule::BotRight1,
        Rule::BotRight2,
        Rule::BangRight1,
        Rule::BangRight2,
        Rule::Normal,
        Rule::Det,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Id => "Id",
            Rule::TopRight => "TopRight",
            Rule::BotLeft => "BotLeft",
            Rule::Trans => "Trans",
            Rule::AndLeft1 => "AndLeft1",
            Rule::AndLeft2 => "AndLeft2",
            Rule::AndRight => "AndRight",
            Rule::BotRight1 => "BotRight1",
            Rule::BotRight2 => "BotRight2",
            Rule::BangRight1 => "BangRight1",
            Rule::BangRight2 => "BangRight2",
            Rule::Normal => "Normal",
            Rule::Det => "Det",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Rule::Id | Rule::TopRight | Rule::BotLeft | Rule::BotRight1 | Rule::BotRight2 => 0,
            Rule::AndLeft1 | Rule::AndLeft2 | Rule::BangRight1 | Rule::Normal | Rule::Det => 1,
            Rule::Trans | Rule::AndRight | Rule::BangRight2 => 2,
        }
    }

    pub fn schema(self) -> &'static str {
        match self {
            Rule::Id => "φ ⊢ φ",
            Rule::TopRight => "φ ⊢ T",
            Rule::BotLeft => "F ⊢ φ",
            Rule::Trans => "φ ⊢ ψ, ψ ⊢ ξ / φ ⊢ ξ",
            Rule::AndLeft1 => "φ ⊢ ψ / φ /\\ ξ ⊢ ψ",
            Rule::AndLeft2 => "φ ⊢ ψ / ξ /\\ φ ⊢ ψ",
            Rule::AndRight => "φ ⊢ ψ, φ ⊢ ξ / φ ⊢ ψ /\\ ξ",
            Rule::BotRight1 => "a ∉ A / !A /\\ <a>φ ⊢ F",
            Rule::BotRight2 => "<a>F ⊢ F",
            Rule::BangRight1 => "φ ⊢ !A, A ⊆ A' / φ ⊢ !A'",
            Rule::BangRight2 => "φ ⊢ !A, φ ⊢ !B / φ ⊢ !(A ∩ B)",
            Rule::Normal => "φ ⊢ ψ / <a>φ ⊢ <a>ψ",
            Rule::Det => "φ ⊢ <a>ψ /\\ <a>ξ / φ ⊢ <a>(ψ /\\ ξ)",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = ProofError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| ProofError::Parse(format!("unknown rule `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sequent {
    pub lhs: Formula,
    pub rhs: Formula,
}

impl Sequent {
    pub fn new(lhs: Formula, rhs: Formula) -> Self {
        Sequent { lhs, rhs }
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |- {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rule: Rule,
    pub conclusion: Sequent,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn new(rule: Rule, lhs: Formula, rhs: Formula, premises: Vec<Derivation>) -> Self {
        Derivation { rule, conclusion: Sequent::new(lhs, rhs), premises }
    }

    pub fn lhs(&self) -> &Formula {
        &self.conclusion.lhs
    }

    pub fn rhs(&self) -> &Formula {
        &self.conclusion.rhs
    }

    /// Number of rule applications.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        1 + self.premises.iter().map(Derivation::height).max().unwrap_or(0)
    }

    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.write_sexpr(&mut out, 0);
        out
    }

    fn write_sexpr(&self, out: &mut String, indent: usize) {
        out.push_str(&format!("({} \"{}\"", self.rule, self.conclusion));
        for p in &self.premises {
            out.push('\n');
            out.push_str(&" ".repeat(indent + 2));
            p.write_sexpr(out, indent + 2);
        }
        out.push(')');
    }

    pub fn from_sexpr(text: &str) -> Result<Derivation, ProofError> {
        let mut p = SexprParser { src: text, pos: 0 };
        let d = p.derivation()?;
        p.skip_ws();
        if p.pos < text.len() {
            return Err(ProofError::Parse(format!("trailing input at offset {}", p.pos)));
        }
        Ok(d)
    }
}

// Constructors mirroring the rules. Conclusions are computed from premises where possible.

pub fn id(f: Formula) -> Derivation {
    Derivation::new(Rule::Id, f.clone(), f, vec![])
}

pub fn top_right(f: Formula) -> Derivation {
    Derivation::new(Rule::TopRight, f, Formula::Top, vec![])
}

pub fn bot_left(f: Formula) -> Derivation {
    Derivation::new(Rule::BotLeft, Formula::Bottom, f, vec![])
}

pub fn trans(p1: Derivation, p2: Derivation) -> Derivation {
    let (lhs, rhs) = (p1.lhs().clone(), p2.rhs().clone());
    Derivation::new(Rule::Trans, lhs, rhs, vec![p1, p2])
}

/// From `φ ⊢ ψ` conclude `φ /\ other ⊢ ψ`.
pub fn and_left1(p: Derivation, other: Formula) -> Derivation {
    let (lhs, rhs) = (Formula::and(p.lhs().clone(), other), p.rhs().clone());
    Derivation::new(Rule::AndLeft1, lhs, rhs, vec![p])
}

/// From `φ ⊢ ψ` conclude `other /\ φ ⊢ ψ`.
pub fn and_left2(p: Derivation, other: Formula) -> Derivation {
    let (lhs, rhs) = (Formula::and(other, p.lhs().clone()), p.rhs().clone());
    Derivation::new(Rule::AndLeft2, lhs, rhs, vec![p])
}

pub fn and_right(p1: Derivation, p2: Derivation) -> Derivation {
    let (lhs, rhs) = (p1.lhs().clone(), Formula::and(p1.rhs().clone(), p2.rhs().clone()));
    Derivation::new(Rule::AndRight, lhs, rhs, vec![p1, p2])
}

pub fn bot_right1(bang: ActionSet, a: Action, body: Formula) -> Derivation {
    Derivation::new(Rule::BotRight1, Formula::and(Formula::Bang(bang), Formula::may(a, body)), Formula::Bottom, vec![])
}

pub fn bot_right2(a: Action) -> Derivation {
    Derivation::new(Rule::BotRight2, Formula::may(a, Formula::Bottom), Formula::Bottom, vec![])
}

pub fn bang_right1(p: Derivation, wider: ActionSet) -> Derivation {
    let lhs = p.lhs().clone();
    Derivation::new(Rule::BangRight1, lhs, Formula::Bang(wider), vec![p])
}

pub fn bang_right2(p1: Derivation, p2: Derivation) -> Derivation {
    let rhs = match (p1.rhs(), p2.rhs()) {
        (Formula::Bang(a), Formula::Bang(b)) => Formula::Bang(a.intersection(b).cloned().collect()),
        _ => Formula::Bottom,
    };
    let lhs = p1.lhs().clone();
    Derivation::new(Rule::BangRight2, lhs, rhs, vec![p1, p2])
}

pub fn normal(p: Derivation, a: Action) -> Derivation {
    let (lhs, rhs) = (Formula::may(a.clone(), p.lhs().clone()), Formula::may(a, p.rhs().clone()));
    Derivation::new(Rule::Normal, lhs, rhs, vec![p])
}

pub fn det(p: Derivation) -> Derivation {
    let rhs = match p.rhs() {
        Formula::And(l, r) => match (&**l, &**r) {
            (Formula::May(a, x), Formula::May(_, y)) => Formula::may(a.clone(), Formula::and((**x).clone(), (**y).clone())),
            _ => Formula::Bottom,
        },
        _ => Formula::Bottom,
    };
    let lhs = p.lhs().clone();
    Derivation::new(Rule::Det, lhs, rhs, vec![p])
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rule {rule} at premise path {path:?} does not match `{expected}`: {actual} ({reason})")]
pub struct CheckFailure {
    /// Indices of premises from the root to the failing node.
    pub path: Vec<usize>,
    pub rule: Rule,
    pub expected: &'static str,
    pub actual: Sequent,
    pub reason: String,
}

#[derive(Debug, Clone, Error)]
pub enum ProofError {
    #[error("not entailed; countermodel {}", .countermodel.to_json())]
    NotEntailed { countermodel: Model },
    #[error("formula uses negation or disjunction")]
    NotCore,
    #[error("invalid premise: {0}")]
    InvalidPremise(CheckFailure),
    #[error("premise does not have the required shape: {0}")]
    Shape(String),
    #[error("malformed derivation: {0}")]
    Parse(String),
}

/// Checks every node against its rule schema; reports the first failure in pre-order.
pub fn check_derivation(d: &Derivation) -> Result<(), CheckFailure> {
    let mut path = Vec::new();
    check_node(d, &mut path)
}

fn check_node(d: &Derivation, path: &mut Vec<usize>) -> Result<(), CheckFailure> {
    if let Err(reason) = check_local(d) {
        return Err(CheckFailure { path: path.clone(), rule: d.rule, expected: d.rule.schema(), actual: d.conclusion.clone(), reason });
    }
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        check_node(p, path)?;
        path.pop();
    }
    Ok(())
}

fn ensure(cond: bool, reason: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(reason.to_string())
    }
}

fn check_local(d: &Derivation) -> Result<(), String> {
    let (lhs, rhs) = (d.lhs(), d.rhs());
    ensure(lhs.is_core() && rhs.is_core(), "sequents must be negation- and disjunction-free")?;
    ensure(d.premises.len() == d.rule.arity(), &format!("expected {} premises, found {}", d.rule.arity(), d.premises.len()))?;
    let p = |i: usize| &d.premises[i].conclusion;
    match d.rule {
        Rule::Id => ensure(lhs == rhs, "sides differ"),
        Rule::TopRight => ensure(*rhs == Formula::Top, "right side is not T"),
        Rule::BotLeft => ensure(*lhs == Formula::Bottom, "left side is not F"),
        Rule::Trans => {
            ensure(p(0).lhs == *lhs, "first premise has a different left side")?;
            ensure(p(0).rhs == p(1).lhs, "premises do not chain")?;
            ensure(p(1).rhs == *rhs, "second premise has a different right side")
        }
        Rule::AndLeft1 | Rule::AndLeft2 => {
            let Formula::And(l, r) = lhs else { return Err("left side is not a conjunction".into()) };
            let kept = if d.rule == Rule::AndLeft1 { l } else { r };
            ensure(**kept == p(0).lhs, "premise left side is not the selected conjunct")?;
            ensure(p(0).rhs == *rhs, "premise right side differs")
        }
        Rule::AndRight => {
            let Formula::And(l, r) = rhs else { return Err("right side is not a conjunction".into()) };
            ensure(p(0).lhs == *lhs && p(1).lhs == *lhs, "premise left sides differ")?;
            ensure(p(0).rhs == **l && p(1).rhs == **r, "premise right sides are not the conjuncts")
        }
        Rule::BotRight1 => {
            ensure(*rhs == Formula::Bottom, "right side is not F")?;
            match lhs {
                Formula::And(l, r) => match (&**l, &**r) {
                    (Formula::Bang(set), Formula::May(a, _)) => ensure(!set.contains(a), "side condition a ∉ A fails"),
                    _ => Err("left side is not !A /\\ <a>φ".into()),
                },
                _ => Err("left side is not !A /\\ <a>φ".into()),
            }
        }
        Rule::BotRight2 => {
            ensure(*rhs == Formula::Bottom, "right side is not F")?;
            ensure(matches!(lhs, Formula::May(_, g) if **g == Formula::Bottom), "left side is not <a>F")
        }
        Rule::BangRight1 => {
            ensure(p(0).lhs == *lhs, "premise left side differs")?;
            match (&p(0).rhs, rhs) {
                (Formula::Bang(a), Formula::Bang(wider)) => ensure(a.is_subset(wider), "side condition A ⊆ A' fails"),
                _ => Err("premise and conclusion must end in tantum formulae".into()),
            }
        }
        Rule::BangRight2 => {
            ensure(p(0).lhs == *lhs && p(1).lhs == *lhs, "premise left sides differ")?;
            match (&p(0).rhs, &p(1).rhs, rhs) {
                (Formula::Bang(a), Formula::Bang(b), Formula::Bang(c)) => {
                    ensure(a.intersection(b).cloned().collect::<ActionSet>() == *c, "conclusion is not the intersection")
                }
                _ => Err("premises and conclusion must end in tantum formulae".into()),
            }
        }
        Rule::Normal => match (lhs, rhs) {
            (Formula::May(a, l), Formula::May(b, r)) => {
                ensure(a == b, "modalities differ")?;
                ensure(p(0).lhs == **l && p(0).rhs == **r, "premise is not the unprefixed sequent")
            }
            _ => Err("both sides must be <a>-formulae".into()),
        },
        Rule::Det => {
            ensure(p(0).lhs == *lhs, "premise left side differs")?;
            let Formula::May(a, body) = rhs else { return Err("right side is not <a>(ψ /\\ ξ)".into()) };
            let Formula::And(x, y) = &**body else { return Err("right side is not <a>(ψ /\\ ξ)".into()) };
            let expected = Formula::and(Formula::may(a.clone(), (**x).clone()), Formula::may(a.clone(), (**y).clone()));
            ensure(p(0).rhs == expected, "premise right side is not <a>ψ /\\ <a>ξ")
        }
    }
}

/// A finite tree model used by the synthesizer.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Tree {
    label: StateLabel,
    children: BTreeMap<Action, Tree>,
}

impl Tree {
    fn leaf(label: StateLabel) -> Tree {
        Tree { label, children: BTreeMap::new() }
    }

    fn bang(&self) -> Formula {
        match &self.label {
            StateLabel::All => Formula::Top,
            StateLabel::Finite(set) => Formula::Bang(set.clone()),
        }
    }

    fn rest(&self) -> Formula {
        Formula::conj(self.children.iter().map(|(a, t)| Formula::may(a.clone(), t.char_raw())).collect::<Vec<_>>())
    }

    /// `bang(w) /\ rest(w)`, the exact shape the derivations manipulate.
    fn char_raw(&self) -> Formula {
        Formula::and(self.bang(), self.rest())
    }

    fn satisfies(&self, f: &Formula) -> bool {
        match f {
            Formula::Top => true,
            Formula::Bottom | Formula::Neg(_) | Formula::Or(..) => false,
            Formula::And(l, r) => self.satisfies(l) && self.satisfies(r),
            Formula::May(a, g) => self.children.get(a).is_some_and(|t| t.satisfies(g)),
            Formula::Bang(set) => self.label.within(set),
        }
    }

    fn glb(&self, other: &Tree) -> Option<Tree> {
        let label = self.label.intersect(&other.label);
        let mut children = BTreeMap::new();
        for (a, t) in &self.children {
            let merged = match other.children.get(a) {
                Some(u) => t.glb(u)?,
                None => t.clone(),
            };
            children.insert(a.clone(), merged);
        }
        for (a, u) in &other.children {
            children.entry(a.clone()).or_insert_with(|| u.clone());
        }
        if children.keys().all(|a| label.allows(a)) {
            Some(Tree { label, children })
        } else {
            None
        }
    }

    fn to_model(&self) -> Model {
        let mut b = ModelBuilder::new();
        let root = b.state(self.label.clone());
        let mut queue = std::collections::VecDeque::from([(root, self)]);
        while let Some((id, t)) = queue.pop_front() {
            for (a, c) in &t.children {
                let cid = b.state(c.label.clone());
                b.edge(id, a.clone(), cid);
                queue.push_back((cid, c));
            }
        }
        b.build(root)
    }
}

/// Derives `x ⊢ target` where `target` is a conjunct of `x` along And-nodes.
fn select(x: &Formula, target: &Formula) -> Option<Derivation> {
    if x == target {
        return Some(id(x.clone()));
    }
    match x {
        Formula::And(l, r) => {
            if let Some(d) = select(l, target) {
                Some(and_left1(d, (**r).clone()))
            } else {
                select(r, target).map(|d| and_left2(d, (**l).clone()))
            }
        }
        _ => None,
    }
}

/// `charR(t) ⊢ φ` for `t ⊨ φ`.
fn lemma4(t: &Tree, f: &Formula) -> Derivation {
    let x = t.char_raw();
    match f {
        Formula::Top => top_right(x),
        Formula::And(l, r) => and_right(lemma4(t, l), lemma4(t, r)),
        Formula::May(a, g) => {
            let child = &t.children[a];
            let proj = select(&x, &Formula::may(a.clone(), child.char_raw())).expect("conjunct of char");
            trans(proj, normal(lemma4(child, g), a.clone()))
        }
        Formula::Bang(set) => {
            let own = t.bang();
            let proj = select(&x, &own).expect("tantum conjunct of char");
            if own == *f {
                proj
            } else {
                bang_right1(proj, set.clone())
            }
        }
        Formula::Bottom | Formula::Neg(_) | Formula::Or(..) => unreachable!("satisfied core formula"),
    }
}

enum Simplified {
    Model(Tree, Derivation),
    Bottom(Derivation),
}

/// `φ ⊢ charR(simpl φ)`, or `φ ⊢ F` when φ is unsatisfiable.
fn lemma5(f: &Formula) -> Simplified {
    match f {
        Formula::Top => Simplified::Model(Tree::leaf(StateLabel::All), and_right(top_right(Formula::Top), top_right(Formula::Top))),
        Formula::Bottom => Simplified::Bottom(id(Formula::Bottom)),
        Formula::Bang(set) => {
            let t = Tree::leaf(StateLabel::Finite(set.clone()));
            Simplified::Model(t, and_right(id(f.clone()), top_right(f.clone())))
        }
        Formula::May(a, g) => match lemma5(g) {
            Simplified::Model(child, d) => {
                let boxed = Formula::may(a.clone(), child.char_raw());
                let wrap = and_right(top_right(boxed.clone()), id(boxed));
                let mut t = Tree::leaf(StateLabel::All);
                t.children.insert(a.clone(), child);
                Simplified::Model(t, trans(normal(d, a.clone()), wrap))
            }
            Simplified::Bottom(d) => Simplified::Bottom(trans(normal(d, a.clone()), bot_right2(a.clone()))),
        },
        Formula::And(l, r) => match (lemma5(l), lemma5(r)) {
            (Simplified::Bottom(d), _) => Simplified::Bottom(and_left1(d, (**r).clone())),
            (_, Simplified::Bottom(d)) => Simplified::Bottom(and_left2(d, (**l).clone())),
            (Simplified::Model(t1, d1), Simplified::Model(t2, d2)) => {
                let both = and_right(and_left1(d1, (**r).clone()), and_left2(d2, (**l).clone()));
                match lemma6(&t1, &t2) {
                    Simplified::Model(t, d) => Simplified::Model(t, trans(both, d)),
                    Simplified::Bottom(d) => Simplified::Bottom(trans(both, d)),
                }
            }
        },
        Formula::Neg(_) | Formula::Or(..) => unreachable!("core formula"),
    }
}

/// `charR(t1) /\ charR(t2) ⊢ charR(t1 ⊓ t2)`, or `⊢ F` when the meet is ⊥.
fn lemma6(t1: &Tree, t2: &Tree) -> Simplified {
    let (x1, x2) = (t1.char_raw(), t2.char_raw());
    let p = Formula::and(x1.clone(), x2.clone());
    let from1 = |target: &Formula| select(&x1, target).map(|d| and_left1(d, x2.clone()));
    let from2 = |target: &Formula| select(&x2, target).map(|d| and_left2(d, x1.clone()));

    // A transition on one side that the other side's tantum forbids.
    let clash = |own: &Tree, other: &Tree| {
        let StateLabel::Finite(set) = &other.label else { return None };
        own.children.iter().find(|(a, _)| !set.contains(*a)).map(|(a, c)| (set.clone(), a.clone(), c.char_raw()))
    };
    if let Some((set, a, body)) = clash(t2, t1) {
        let d = and_right(from1(&Formula::Bang(set.clone())).expect("tantum"), from2(&Formula::may(a.clone(), body.clone())).expect("modality"));
        return Simplified::Bottom(trans(d, bot_right1(set, a, body)));
    }
    if let Some((set, a, body)) = clash(t1, t2) {
        let d = and_right(from2(&Formula::Bang(set.clone())).expect("tantum"), from1(&Formula::may(a.clone(), body.clone())).expect("modality"));
        // `!A /\ <a>φ` is the only shape BotRight1 accepts, so the tantum comes first.
        return Simplified::Bottom(trans(d, bot_right1(set, a, body)));
    }

    // Shared actions: P ⊢ <a>(charR(c1) /\ charR(c2)) by Det, then recurse under Normal.
    let shared = |a: &Action, c1: &Tree, c2: &Tree| {
        let m1 = Formula::may(a.clone(), c1.char_raw());
        let m2 = Formula::may(a.clone(), c2.char_raw());
        let joined = det(and_right(from1(&m1).expect("modality"), from2(&m2).expect("modality")));
        (joined, lemma6(c1, c2))
    };
    for (a, c1) in &t1.children {
        if let Some(c2) = t2.children.get(a) {
            if let (joined, Simplified::Bottom(inner)) = shared(a, c1, c2) {
                let down = trans(joined, normal(inner, a.clone()));
                return Simplified::Bottom(trans(down, bot_right2(a.clone())));
            }
        }
    }

    let meet = t1.glb(t2).expect("no clash at any depth");
    let bang = match (&t1.label, &t2.label) {
        (StateLabel::Finite(a), StateLabel::Finite(b)) => {
            bang_right2(from1(&Formula::Bang(a.clone())).expect("tantum"), from2(&Formula::Bang(b.clone())).expect("tantum"))
        }
        (StateLabel::Finite(a), StateLabel::All) => from1(&Formula::Bang(a.clone())).expect("tantum"),
        (StateLabel::All, StateLabel::Finite(b)) => from2(&Formula::Bang(b.clone())).expect("tantum"),
        (StateLabel::All, StateLabel::All) => top_right(p.clone()),
    };
    let mut parts = Vec::new();
    for (a, child) in &meet.children {
        let d = match (t1.children.get(a), t2.children.get(a)) {
            (Some(c1), Some(c2)) => match shared(a, c1, c2) {
                (joined, Simplified::Model(_, inner)) => trans(joined, normal(inner, a.clone())),
                (_, Simplified::Bottom(_)) => unreachable!("handled above"),
            },
            (Some(_), None) => from1(&Formula::may(a.clone(), child.char_raw())).expect("modality"),
            (None, Some(_)) => from2(&Formula::may(a.clone(), child.char_raw())).expect("modality"),
            (None, None) => unreachable!("child of the meet"),
        };
        parts.push(d);
    }
    let rest = conj_right(&p, parts);
    Simplified::Model(meet, and_right(bang, rest))
}

/// From derivations of `P ⊢ ψi`, a derivation of `P ⊢ ψ1 /\ (ψ2 /\ …)`; `P ⊢ T` if empty.
fn conj_right(p: &Formula, mut parts: Vec<Derivation>) -> Derivation {
    match parts.len() {
        0 => top_right(p.clone()),
        1 => parts.pop().expect("one"),
        _ => {
            let first = parts.remove(0);
            and_right(first, conj_right(p, parts))
        }
    }
}

/// A checkable derivation of `f ⊢ g`, or the countermodel simpl(f) when `f ⊭ g`.
pub fn derive(f: &Formula, g: &Formula) -> Result<Derivation, ProofError> {
    if !f.is_core() || !g.is_core() {
        return Err(ProofError::NotCore);
    }
    if f == g {
        return Ok(id(f.clone()));
    }
    match lemma5(f) {
        Simplified::Bottom(d) => Ok(trans(d, bot_left(g.clone()))),
        Simplified::Model(t, d) => {
            if t.satisfies(g) {
                Ok(trans(d, lemma4(&t, g)))
            } else {
                Err(ProofError::NotEntailed { countermodel: t.to_model() })
            }
        }
    }
}

/// From `φ1 /\ … /\ φn ⊢ ψ` derive `<a>φ1 /\ … /\ <a>φn ⊢ <a>ψ` with primitive rules.
///
/// The premise's left side is split along its right spine of conjunctions.
pub fn derived_rule_normal_multi(premise: Derivation, a: &Action) -> Result<Derivation, ProofError> {
    check_derivation(&premise).map_err(ProofError::InvalidPremise)?;
    let parts: Vec<Formula> = premise.lhs().conjuncts().into_iter().cloned().collect();
    if parts.len() == 1 {
        return Ok(normal(premise, a.clone()));
    }
    fn build(parts: &[Formula], a: &Action) -> Derivation {
        let prefixed = Formula::conj(parts.iter().map(|p| Formula::may(a.clone(), p.clone())).collect::<Vec<_>>());
        if parts.len() == 2 {
            return det(id(prefixed));
        }
        let head = Formula::may(a.clone(), parts[0].clone());
        let tail = Formula::conj(parts[1..].iter().map(|p| Formula::may(a.clone(), p.clone())).collect::<Vec<_>>());
        let left = and_left1(id(head.clone()), tail.clone());
        let right = and_left2(build(&parts[1..], a), head);
        det(and_right(left, right))
    }
    let gather = build(&parts, a);
    Ok(trans(gather, normal(premise, a.clone())))
}

/// From `φ /\ !A ⊢ ψ` and `A' ⊆ A` derive `φ /\ !A' ⊢ ψ`.
pub fn derived_bang_left(premise: Derivation, narrower: ActionSet) -> Result<Derivation, ProofError> {
    check_derivation(&premise).map_err(ProofError::InvalidPremise)?;
    let (phi, wide) = match premise.lhs() {
        Formula::And(l, r) => match &**r {
            Formula::Bang(set) => ((**l).clone(), set.clone()),
            _ => return Err(ProofError::Shape("left side must be φ /\\ !A".into())),
        },
        _ => return Err(ProofError::Shape("left side must be φ /\\ !A".into())),
    };
    if !narrower.is_subset(&wide) {
        return Err(ProofError::Shape("the new tantum set must be a subset of the old one".into()));
    }
    let narrow = Formula::Bang(narrower);
    let keep_phi = and_left1(id(phi.clone()), narrow.clone());
    let widen = bang_right1(and_left2(id(narrow), phi), wide);
    Ok(trans(and_right(keep_phi, widen), premise))
}

struct SexprParser<'a> {
    src: &'a str,
    pos: usize,
}

impl SexprParser<'_> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ProofError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ProofError::Parse(format!("expected `{c}` at offset {}", self.pos)))
        }
    }

    fn derivation(&mut self) -> Result<Derivation, ProofError> {
        self.expect('(')?;
        self.skip_ws();
        let start = self.pos;
        while self.src[self.pos..].starts_with(|c: char| c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let rule: Rule = self.src[start..self.pos].parse()?;
        self.expect('"')?;
        let end = self.src[self.pos..].find('"').ok_or_else(|| ProofError::Parse("unterminated sequent".into()))?;
        let text = &self.src[self.pos..self.pos + end];
        self.pos += end + 1;
        let (l, r) = text.split_once("|-").ok_or_else(|| ProofError::Parse(format!("sequent without `|-`: {text}")))?;
        let parse = |s: &str| parse_core(s.trim()).map_err(|e| ProofError::Parse(e.to_string()));
        let conclusion = Sequent::new(parse(l)?, parse(r)?);
        let mut premises = Vec::new();
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with(')') {
                self.pos += 1;
                break;
            }
            premises.push(self.derivation()?);
        }
        Ok(Derivation { rule, conclusion, premises })
    }
}
