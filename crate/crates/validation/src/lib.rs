//! Independent oracles shared by the acceptance suite.
//!
//! Everything here is deliberately naive: formula families are listed
//! explicitly, models are enumerated exhaustively and satisfaction is checked
//! state by state. Nothing goes through the lattice or the decision procedures.

use std::collections::{BTreeSet, HashMap};

use cathoristic::model::ModelBuilder;
use cathoristic::syntax::action_set;
use cathoristic::{parse_core, Action, ActionSet, Formula, Model, PureModel, StateId, StateLabel};
use rand::Rng;

pub fn act(name: &str) -> Action {
    Action::new(name).expect("valid action name")
}

pub fn set(names: &[&str]) -> ActionSet {
    action_set(names.iter().copied()).expect("valid action names")
}

/// `*` is the full alphabet, anything else a comma list such as `a,b` (empty for `{}`).
pub fn label(text: &str) -> StateLabel {
    match text.trim() {
        "*" => StateLabel::All,
        t => {
            let t = t.trim_start_matches('{').trim_end_matches('}');
            StateLabel::Finite(action_set(t.split(',').map(str::trim).filter(|s| !s.is_empty())).expect("valid label"))
        }
    }
}

/// A finite tree used to spell out models by hand.
#[derive(Clone, Debug)]
pub struct Tree {
    pub label: StateLabel,
    pub kids: Vec<(Action, Tree)>,
}

impl Tree {
    pub fn leaf(l: &str) -> Tree {
        Tree { label: label(l), kids: Vec::new() }
    }

    pub fn node(l: &str, kids: Vec<(&str, Tree)>) -> Tree {
        Tree { label: label(l), kids: kids.into_iter().map(|(a, t)| (act(a), t)).collect() }
    }

    pub fn to_model(&self) -> Model {
        fn go(b: &mut ModelBuilder, t: &Tree) -> StateId {
            let s = b.state(t.label.clone());
            for (a, k) in &t.kids {
                let c = go(b, k);
                b.edge(s, a.clone(), c);
            }
            s
        }
        let mut b = ModelBuilder::new();
        let root = go(&mut b, self);
        b.build(root)
    }
}

/// Base formulae of the exhaustive family: `T` and every tantum over subsets of `{a,b}`.
fn level0() -> Vec<Formula> {
    let mut out = vec![Formula::Top];
    for s in [&[][..], &["a"], &["b"], &["a", "b"]] {
        out.push(Formula::Bang(set(s)));
    }
    out
}

fn lift(fs: &[Formula]) -> Vec<Formula> {
    let mut out = fs.to_vec();
    for a in ["a", "b"] {
        for f in fs {
            let g = Formula::may(act(a), f.clone());
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// Path formulae of modal depth at most one (15 of them).
pub fn level1() -> Vec<Formula> {
    lift(&level0())
}

/// Path formulae of modal depth at most two (35 of them).
pub fn level2() -> Vec<Formula> {
    lift(&level1())
}

/// The exhaustive family over `{a,b}`, depth ≤ 2: all depth-2 paths, every
/// conjunction of two distinct non-trivial depth-1 paths, ten conjunctions that
/// meet below a modality, and `F`. 137 formulae.
pub fn depth2_family() -> Vec<Formula> {
    let mut out = level2();
    let l1: Vec<Formula> = level1().into_iter().filter(|f| *f != Formula::Top).collect();
    for i in 0..l1.len() {
        for j in i + 1..l1.len() {
            out.push(Formula::and(l1[i].clone(), l1[j].clone()));
        }
    }
    for x in ["a", "b"] {
        for body in ["<a>T /\\ <b>T", "<a>T /\\ !{a}", "<b>T /\\ !{a}"] {
            out.push(parse(&format!("<{x}>({body})")));
        }
    }
    for text in ["<a><a>T /\\ <a>!{b}", "<a><b>T /\\ <a>!{a}", "<b><a>!{} /\\ <b><b>T", "<a><b>!{a} /\\ <b><a>T"] {
        out.push(parse(text));
    }
    out.push(Formula::Bottom);
    out
}

pub fn parse(text: &str) -> Formula {
    parse_core(text).unwrap_or_else(|e| panic!("`{text}`: {e}"))
}

/// The five labels that matter for formulae over `{a,b}`.
pub fn oracle_labels() -> Vec<StateLabel> {
    vec![StateLabel::All, label("{}"), label("a"), label("b"), label("a,b")]
}

/// All tree models over `{a,b,z}` of height ≤ 2 with labels from [`oracle_labels`].
///
/// Only Σ-labelled states may carry an extra `z` leaf; deeper levels are
/// invisible to formulae of modal depth ≤ 2 over `{a,b}`.
pub fn oracle_models() -> Vec<Model> {
    fn trees(depth: usize, max: usize) -> Vec<Tree> {
        let below = if depth < max { trees(depth + 1, max) } else { Vec::new() };
        let mut out = Vec::new();
        for l in oracle_labels() {
            let mut partial: Vec<Vec<(Action, Tree)>> = vec![Vec::new()];
            if depth < max {
                for a in ["a", "b"] {
                    if !l.allows(&act(a)) {
                        continue;
                    }
                    let mut next = Vec::new();
                    for p in &partial {
                        next.push(p.clone());
                        for t in &below {
                            let mut q = p.clone();
                            q.push((act(a), t.clone()));
                            next.push(q);
                        }
                    }
                    partial = next;
                }
                if l.is_all() {
                    let with_z: Vec<_> = partial
                        .iter()
                        .map(|p| {
                            let mut q = p.clone();
                            q.push((act("z"), Tree::leaf("*")));
                            q
                        })
                        .collect();
                    partial.extend(with_z);
                }
            }
            out.extend(partial.into_iter().map(|kids| Tree { label: l.clone(), kids }));
        }
        out
    }
    trees(0, 2).iter().map(Tree::to_model).collect()
}

/// Direct recursive satisfaction, written independently of the library evaluator.
pub fn holds(m: &Model, s: StateId, f: &Formula) -> bool {
    match f {
        Formula::Top => true,
        Formula::Bottom => false,
        Formula::And(l, r) => holds(m, s, l) && holds(m, s, r),
        Formula::Or(l, r) => holds(m, s, l) || holds(m, s, r),
        Formula::Neg(g) => !holds(m, s, g),
        Formula::May(a, g) => m.successors(s).any(|(b, t)| b == a && holds(m, t, g)),
        Formula::Bang(allowed) => match m.label(s) {
            StateLabel::All => false,
            StateLabel::Finite(l) => l.is_subset(allowed),
        },
    }
}

/// A fixed-size bit set over model indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bits(Vec<u64>);

impl Bits {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> bool) -> Bits {
        let mut words = vec![0u64; n.div_ceil(64)];
        for i in 0..n {
            if f(i) {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Bits(words)
    }

    pub fn is_subset(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(x, y)| x & !y == 0)
    }

    pub fn is_disjoint(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(x, y)| x & y == 0)
    }

    /// First index set here but not in `other`.
    pub fn first_outside(&self, other: &Bits) -> Option<usize> {
        self.0.iter().zip(&other.0).enumerate().find_map(|(i, (x, y))| {
            let d = x & !y;
            (d != 0).then(|| i * 64 + d.trailing_zeros() as usize)
        })
    }
}

/// Satisfaction sets of `formulas` over `models`: the brute-force entailment oracle.
pub fn satisfaction_table(models: &[Model], formulas: &[Formula]) -> Vec<Bits> {
    formulas.iter().map(|f| Bits::from_fn(models.len(), |i| holds(&models[i], models[i].start(), f))).collect()
}

/// Pure models over `{a,b}` with 1..=`max_states` states, start 0, every state
/// reachable; relabellings of the non-start states are listed once when
/// `max_states ≤ 3`.
pub fn pure_models(max_states: usize) -> Vec<PureModel> {
    let acts = [act("a"), act("b")];
    let mut out = Vec::new();
    for n in 1..=max_states {
        let slots: Vec<(usize, usize, usize)> =
            (0..n).flat_map(|s| (0..2).flat_map(move |a| (0..n).map(move |t| (s, a, t)))).collect();
        let index = |s: usize, a: usize, t: usize| (s * 2 + a) * n + t;
        for mask in 0u64..(1 << slots.len()) {
            if n == 3 {
                let swap = |x: usize| [0, 2, 1][x];
                let mut swapped = 0u64;
                for (i, &(s, a, t)) in slots.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        swapped |= 1 << index(swap(s), a, swap(t));
                    }
                }
                if swapped < mask {
                    continue;
                }
            }
            let edges: Vec<(usize, usize, usize)> =
                slots.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e).collect();
            let mut seen = vec![false; n];
            seen[0] = true;
            let mut stack = vec![0];
            while let Some(s) = stack.pop() {
                for &(x, _, t) in &edges {
                    if x == s && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            if seen.iter().all(|&r| r) {
                out.push(PureModel::from_edges(n, edges.iter().map(|&(s, a, t)| (s, acts[a].clone(), t)), 0));
            }
        }
    }
    out
}

/// Interned k-step bisimulation signatures. For models of at most `n` states
/// each, `rounds ≥ 2n` makes equal keys coincide with bisimilarity.
#[derive(Default)]
pub struct BisimKeys {
    table: HashMap<Vec<(String, u32)>, u32>,
}

impl BisimKeys {
    pub fn key(&mut self, p: &PureModel, rounds: usize) -> u32 {
        let mut cur = vec![0u32; p.len()];
        for _ in 0..rounds {
            let next: Vec<u32> = (0..p.len())
                .map(|s| {
                    let sig: BTreeSet<(String, u32)> = p.successors(s).iter().map(|(a, t)| (a.as_str().to_string(), cur[*t])).collect();
                    let sig: Vec<_> = sig.into_iter().collect();
                    let fresh = self.table.len() as u32 + 1;
                    *self.table.entry(sig).or_insert(fresh)
                })
                .collect();
            cur = next;
        }
        cur[p.start()]
    }
}

/// Strongest depth-`k` description of a pure state: its out-set and, recursively, every successor.
pub fn pure_char(p: &PureModel, s: StateId, k: usize) -> Formula {
    if k == 0 {
        return Formula::Top;
    }
    let mut parts = vec![Formula::Bang(p.out_actions(s))];
    parts.extend(p.successors(s).iter().map(|(a, t)| Formula::may(a.clone(), pure_char(p, *t, k - 1))));
    Formula::conj(parts)
}

/// Random admissible tree model over `actions` of height ≤ `depth`.
pub fn random_tree(rng: &mut impl Rng, actions: &[&str], depth: usize) -> Tree {
    let l = if rng.gen_bool(0.4) {
        StateLabel::All
    } else {
        StateLabel::Finite(actions.iter().filter(|_| rng.gen_bool(0.5)).map(|a| act(a)).collect())
    };
    let mut kids = Vec::new();
    if depth > 0 {
        for a in actions {
            if l.allows(&act(a)) && rng.gen_bool(0.45) {
                kids.push((act(a), random_tree(rng, actions, depth - 1)));
            }
        }
    }
    Tree { label: l, kids }
}

/// Random core formula over `actions` of modal depth ≤ `depth`.
pub fn random_formula(rng: &mut impl Rng, actions: &[&str], depth: usize) -> Formula {
    let roll = if depth == 0 { rng.gen_range(0..3) } else { rng.gen_range(0..10) };
    match roll {
        0 => Formula::Top,
        1..=2 => Formula::Bang(actions.iter().filter(|_| rng.gen_bool(0.5)).map(|a| act(a)).collect()),
        3..=6 => Formula::may(act(actions[rng.gen_range(0..actions.len())]), random_formula(rng, actions, depth - 1)),
        _ => Formula::and(random_formula(rng, actions, depth - 1), random_formula(rng, actions, depth)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_sizes() {
        assert_eq!(level1().len(), 15);
        assert_eq!(level2().len(), 35);
        assert_eq!(depth2_family().len(), 137);
        let distinct: BTreeSet<String> = depth2_family().iter().map(|f| f.to_string()).collect();
        assert_eq!(distinct.len(), 137);
    }

    #[test]
    fn model_space_size() {
        assert_eq!(oracle_models().len(), 44897);
    }

    #[test]
    fn pure_models_are_reachable() {
        let ps = pure_models(2);
        assert!(ps.iter().all(|p| p.start() == 0));
        assert_eq!(ps.iter().filter(|p| p.len() == 1).count(), 4);
    }

    #[test]
    fn keys_match_unfolding() {
        let mut keys = BisimKeys::default();
        let loopy = PureModel::from_edges(1, [(0, act("a"), 0)], 0);
        let two = PureModel::from_edges(2, [(0, act("a"), 1), (1, act("a"), 0)], 0);
        let stop = PureModel::from_edges(2, [(0, act("a"), 1)], 0);
        assert_eq!(keys.key(&loopy, 6), keys.key(&two, 6));
        assert_ne!(keys.key(&loopy, 6), keys.key(&stop, 6));
    }
}
