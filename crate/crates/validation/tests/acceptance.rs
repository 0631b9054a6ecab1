//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails.
//!
//! `cargo test -p cathoristic-validation --test acceptance -- 3 7` runs a subset.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cathoristic::bench::bench_entail;
use cathoristic::decide::negate_s;
use cathoristic::fol::{Element, FolEnv, Side};
use cathoristic::kb::{parse_path, welsh_dataset, welsh_query, KbError};
use cathoristic::proof::{and_left1, and_left2, bang_right2, bot_left, bot_right1, bot_right2, det, id, normal, trans, ProofError};
use cathoristic::{
    check_derivation, char_formula, derive, distinguishing_formula, entails, entails_neg, equivalent, eval_extended, eval_fol, extract_model, fixtures,
    glb, guards, incompatibility_witness, incompatible, lub, optimize_query, satisfies, satisfies_pure, simpl, translate_fol1, translate_fol2,
    translate_model, bisimilar, parse_neg, Alphabet, Derivation, Formula, FolTarget, KnowledgeBase, LatticeModel, Model, PureModel, Rule,
};
use cathoristic_validation::{
    act, depth2_family, holds, label, level1, level2, oracle_models, parse, pure_char, pure_models, random_formula, random_tree, satisfaction_table,
    set, BisimKeys, Bits, Tree,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

// Pinned budgets, in seconds.
const BUDGET_FIG1: u64 = 1;
const BUDGET_FIGURES: u64 = 1;
const BUDGET_ORACLE: u64 = 10 * 60;
const BUDGET_PROOF: u64 = 15 * 60;
const BUDGET_BRANDOM: u64 = 15 * 60;
const BUDGET_ROUND_TRIP: u64 = 5 * 60;
const BUDGET_BISIM: u64 = 5 * 60;
const BUDGET_FOL: u64 = 2 * 60;
const BUDGET_NEG: u64 = 20 * 60;
const BUDGET_KB_OPT: u64 = 30;
const BUDGET_KB_UPDATE: u64 = 60;

// Performance thresholds.
const MAX_DOUBLING_RATIO: f64 = 4.5;
const MAX_SECONDS_N4000: f64 = 10.0;
/// Optimized search nodes per person on the welsh dataset.
const WELSH_NODES_PER_PERSON: u64 = 8;
const WELSH_MIN_SPEEDUP: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, u64, Check); 12] = [
        (1, "figure-1 satisfaction table", BUDGET_FIG1, c1_fig1),
        (2, "lattice figures", BUDGET_FIGURES, c2_figures),
        (3, "entails vs brute-force oracle", BUDGET_ORACLE, c3_oracle),
        (4, "proof system", BUDGET_PROOF, c4_proofs),
        (5, "incompatibility property", BUDGET_BRANDOM, c5_brandom),
        (6, "round trips", BUDGET_ROUND_TRIP, c6_round_trips),
        (7, "bisimilarity characterisation", BUDGET_BISIM, c7_bisim),
        (8, "first-order correspondence", BUDGET_FOL, c8_fol),
        (9, "negation extension", BUDGET_NEG, c9_neg),
        (10, "entailment performance", u64::MAX, c10_perf),
        (11, "query optimizer", BUDGET_KB_OPT, c11_optimizer),
        (12, "non-monotonic update", BUDGET_KB_UPDATE, c12_update),
    ];
    let mut failed = Vec::new();
    for (n, name, budget, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = std::thread::Builder::new().stack_size(512 << 20).spawn(check).expect("spawn").join();
        let elapsed = start.elapsed();
        let Outcome { mut pass, mut detail } = result.unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if elapsed > Duration::from_secs(budget) {
            pass = false;
            detail.push_str(&format!("; over budget of {budget}s"));
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} {name}: {detail} ({:.2}s)", elapsed.as_secs_f64());
        if !pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------------------
// Shared data

struct Oracle {
    family: Vec<Formula>,
    models: Vec<Model>,
    sat: Vec<Bits>,
}

fn oracle() -> &'static Oracle {
    static ORACLE: OnceLock<Oracle> = OnceLock::new();
    ORACLE.get_or_init(|| {
        let family = depth2_family();
        let models = oracle_models();
        let sat = satisfaction_table(&models, &family);
        Oracle { family, models, sat }
    })
}

/// Flattens conjunctions and sorts them, recursively, so that conjunct order is irrelevant.
fn normal_form(f: &Formula) -> String {
    match f {
        Formula::And(..) => {
            let mut parts: Vec<String> = f.conjuncts().into_iter().map(normal_form).collect();
            parts.sort();
            format!("({})", parts.join(" & "))
        }
        Formula::May(a, g) => format!("<{a}>{}", normal_form(g)),
        other => other.to_string(),
    }
}

// ---------------------------------------------------------------------------
// 1

fn c1_fig1() -> Outcome {
    let m = fixtures::m_fig1();
    let positives = [
        "<a>T",
        "<a><b>T",
        "<a>!{b,c}",
        "<a>!{b,c,d}",
        "<c>T",
        "<c>!{}",
        "<c>!{a}",
        "<c>!{a,b}",
        "<a>T /\\ <c>T",
        "<a>(<b>T /\\ !{b,c})",
    ];
    let negatives = ["<b>T", "!{a}", "!{a,c}", "<a>!{b}", "<a><c>T", "<a><b>!{c}"];
    let mut wrong = Vec::new();
    for (texts, expected) in [(&positives[..], true), (&negatives[..], false)] {
        for t in texts {
            if satisfies(&m, &parse(t)).unwrap() != expected {
                wrong.push(t.to_string());
            }
        }
    }
    outcome(
        wrong.is_empty(),
        format!("{} positive and {} negative formulae, wrong: {wrong:?}", positives.len(), negatives.len()),
    )
}

// ---------------------------------------------------------------------------
// 2

fn c2_figures() -> Outcome {
    let leaf = Tree::leaf;
    let node = Tree::node;
    let lm = |t: Tree| LatticeModel::from(t.to_model());
    let glbs: Vec<(Tree, Tree, Option<Tree>)> = vec![
        (node("*", vec![("a", leaf("*"))]), node("*", vec![("b", leaf("*"))]), Some(node("*", vec![("a", leaf("*")), ("b", leaf("*"))]))),
        (
            node("*", vec![("a", node("b", vec![("b", leaf("*"))]))]),
            node("*", vec![("a", node("*", vec![("b", leaf("*")), ("c", leaf("*"))]))]),
            None,
        ),
        (
            node("a,b", vec![("a", node("*", vec![("b", leaf("*"))]))]),
            node("a,c", vec![("a", node("b,c", vec![("c", node("*", vec![("d", leaf("*"))]))]))]),
            Some(node("a", vec![("a", node("b,c", vec![("b", leaf("*")), ("c", node("*", vec![("d", leaf("*"))]))]))])),
        ),
        (
            node("*", vec![("a", leaf("c")), ("b", node("*", vec![("d", leaf("*"))]))]),
            node("*", vec![("a", node("*", vec![("c", leaf("*"))])), ("b", leaf("d"))]),
            Some(node("*", vec![("a", node("c", vec![("c", leaf("*"))])), ("b", node("d", vec![("d", leaf("*"))]))])),
        ),
    ];
    let lubs: Vec<(Tree, Tree, Tree)> = vec![
        (node("*", vec![("a", leaf("*")), ("b", leaf("*"))]), node("*", vec![("a", leaf("*")), ("c", leaf("*"))]), node("*", vec![("a", leaf("*"))])),
        (node("a", vec![("a", leaf("*"))]), node("b", vec![("b", leaf("*"))]), leaf("a,b")),
        (
            node("a", vec![("a", node("*", vec![("b", leaf("c"))]))]),
            node("a,b", vec![("a", node("b,c", vec![("b", leaf("d")), ("c", leaf("*"))]))]),
            node("a,b", vec![("a", node("*", vec![("b", leaf("c,d"))]))]),
        ),
    ];
    let mut wrong = Vec::new();
    for (i, (l, r, want)) in glbs.into_iter().enumerate() {
        let (l, r) = (lm(l), lm(r));
        let want = want.map(lm).unwrap_or(LatticeModel::Bottom);
        for (x, y) in [(&l, &r), (&r, &l)] {
            match glb(x, y) {
                Ok(got) if equivalent(&got, &want) => {}
                _ => wrong.push(format!("glb figure {}", i + 1)),
            }
        }
    }
    for (i, (l, r, want)) in lubs.into_iter().enumerate() {
        let (l, r, want) = (lm(l), lm(r), lm(want));
        if !equivalent(&lub(&l, &r), &want) || !equivalent(&lub(&r, &l), &want) {
            wrong.push(format!("lub figure {}", i + 1));
        }
    }
    outcome(wrong.is_empty(), format!("4 glb and 3 lub figures, both argument orders, mismatches: {wrong:?}"))
}

// ---------------------------------------------------------------------------
// 3

fn c3_oracle() -> Outcome {
    let o = oracle();
    let n = o.family.len();
    let mut disagreements = Vec::new();
    let mut entailed = 0;
    for i in 0..n {
        for j in 0..n {
            let want = o.sat[i].is_subset(&o.sat[j]);
            let got = entails(&o.family[i], &o.family[j]).unwrap();
            entailed += got as usize;
            if got != want {
                disagreements.push(format!("{} |= {}: got {got}", o.family[i], o.family[j]));
            }
        }
    }
    disagreements.truncate(5);
    outcome(
        disagreements.is_empty(),
        format!(
            "{} formulae, {} ordered pairs ({entailed} entailed), {} oracle models, disagreements: {disagreements:?}",
            n,
            n * n,
            o.models.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 4

fn figure_derivations() -> (Derivation, Derivation) {
    let a = act("a");
    let f = parse("<a>!{b,c} /\\ <a>!{c,d}");
    let (bc, cd) = (parse("!{b,c}"), parse("!{c,d}"));
    let top = trans(det(id(f)), normal(bang_right2(and_left1(id(bc.clone()), cd.clone()), and_left2(id(cd), bc)), a.clone()));
    let g = parse("<a>!{b} /\\ <a><c>T");
    let bottom = trans(trans(trans(det(id(g)), normal(bot_right1(set(&["b"]), act("c"), Formula::Top), a.clone())), bot_right2(a)), bot_left(parse("<d>T")));
    (top, bottom)
}

fn node_paths(d: &Derivation, prefix: Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(prefix.clone());
    for (i, p) in d.premises.iter().enumerate() {
        let mut q = prefix.clone();
        q.push(i);
        node_paths(p, q, out);
    }
}

fn node_at<'a>(d: &'a mut Derivation, path: &[usize]) -> &'a mut Derivation {
    match path.split_first() {
        None => d,
        Some((i, rest)) => node_at(&mut d.premises[*i], rest),
    }
}

fn c4_proofs() -> Outcome {
    let mut problems = Vec::new();
    let (top, bottom) = figure_derivations();
    for (d, lhs, rhs) in [(&top, "<a>!{b,c} /\\ <a>!{c,d}", "<a>!{c}"), (&bottom, "<a>!{b} /\\ <a><c>T", "<d>T")] {
        if let Err(e) = check_derivation(d) {
            problems.push(format!("figure derivation rejected: {e}"));
        }
        if *d.lhs() != parse(lhs) || *d.rhs() != parse(rhs) {
            problems.push(format!("figure derivation concludes {}", d.conclusion));
        }
        match Derivation::from_sexpr(&d.to_sexpr()) {
            Ok(back) if back == *d => {}
            _ => problems.push("figure derivation does not round-trip".into()),
        }
        let mut paths = Vec::new();
        node_paths(d, Vec::new(), &mut paths);
        for path in &paths {
            for r in Rule::ALL {
                let mut m = d.clone();
                let node = node_at(&mut m, path);
                if node.rule == r {
                    continue;
                }
                node.rule = r;
                if check_derivation(&m).is_ok() {
                    problems.push(format!("mutation to {r} at {path:?} accepted"));
                }
            }
        }
    }
    let o = oracle();
    let n = o.family.len();
    let (mut derived, mut refuted, mut biggest) = (0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            let (f, g) = (&o.family[i], &o.family[j]);
            let want = entails(f, g).unwrap();
            match derive(f, g) {
                Ok(d) => {
                    derived += 1;
                    biggest = biggest.max(d.size());
                    if !want {
                        problems.push(format!("derived non-entailment {f} |- {g}"));
                    }
                    if let Err(e) = check_derivation(&d) {
                        problems.push(format!("{f} |- {g}: {e}"));
                    }
                    if d.lhs() != f || d.rhs() != g {
                        problems.push(format!("{f} |- {g}: concludes {}", d.conclusion));
                    }
                }
                Err(ProofError::NotEntailed { countermodel }) => {
                    refuted += 1;
                    if want {
                        problems.push(format!("no derivation for entailed {f} |- {g}"));
                    }
                    let s = countermodel.start();
                    if !holds(&countermodel, s, f) || holds(&countermodel, s, g) {
                        problems.push(format!("bad countermodel for {f} |- {g}"));
                    }
                }
                Err(e) => problems.push(format!("{f} |- {g}: {e}")),
            }
        }
    }
    let count = problems.len();
    problems.truncate(5);
    outcome(
        count == 0,
        format!("2 figure derivations with every single-rule mutation rejected; {derived} derivations checked, {refuted} refuted with countermodels, largest {biggest} nodes; problems: {problems:?}"),
    )
}

// ---------------------------------------------------------------------------
// 5

fn c5_brandom() -> Outcome {
    let o = oracle();
    let n = o.family.len();
    let mut inc = vec![vec![false; n]; n];
    let mut problems = Vec::new();
    for i in 0..n {
        for j in 0..n {
            inc[i][j] = incompatible(&o.family[i], &o.family[j]).unwrap();
            if inc[i][j] != o.sat[i].is_disjoint(&o.sat[j]) {
                problems.push(format!("incompatible({}, {}) disagrees with the oracle", o.family[i], o.family[j]));
            }
        }
    }
    let (mut inclusions, mut witnesses) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let (f, g) = (&o.family[i], &o.family[j]);
            if entails(f, g).unwrap() {
                inclusions += 1;
                if (0..n).any(|x| inc[j][x] && !inc[i][x]) {
                    problems.push(format!("{f} |= {g} but I({g}) is not inside I({f})"));
                }
                if incompatibility_witness(f, g).unwrap().is_some() {
                    problems.push(format!("witness offered for entailed {f} |= {g}"));
                }
            } else {
                witnesses += 1;
                match incompatibility_witness(f, g).unwrap() {
                    Some(x) if incompatible(g, &x).unwrap() && !incompatible(f, &x).unwrap() => {}
                    other => problems.push(format!("{f} |/= {g}: bad witness {other:?}")),
                }
            }
        }
    }
    let count = problems.len();
    problems.truncate(5);
    outcome(
        count == 0,
        format!("{inclusions} entailed pairs with I(g) inside I(f), {witnesses} witnesses verified, {count} problems {problems:?}"),
    )
}

// ---------------------------------------------------------------------------
// 6

fn c6_round_trips() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x6a11);
    let actions = ["a", "b", "c"];
    let alphabet = Alphabet::closed(set(&actions)).unwrap();
    let mut problems = Vec::new();
    for _ in 0..500 {
        let m = random_tree(&mut rng, &actions, 3).to_model();
        let lm = LatticeModel::from(m.clone());
        let back = simpl(&char_formula(&lm, &alphabet).unwrap()).unwrap();
        if !equivalent(&back, &lm) {
            problems.push(format!("simpl(char(m)) differs for {}", m.to_json()));
        }
    }
    let (mut pairs, mut positive) = (0, 0);
    while pairs < 500 {
        let f = random_formula(&mut rng, &actions, 3);
        let s = simpl(&f).unwrap();
        if s.is_bottom() {
            continue;
        }
        let other = LatticeModel::from(random_tree(&mut rng, &actions, 3).to_model());
        let candidate = if rng.gen_bool(0.5) { glb(&s, &other).unwrap() } else { other };
        let Some(m) = candidate.as_model().cloned() else { continue };
        pairs += 1;
        let c = char_formula(&s, &alphabet).unwrap();
        let (x, y) = (satisfies(&m, &f).unwrap(), satisfies(&m, &c).unwrap());
        positive += x as usize;
        if x != y {
            problems.push(format!("{f} vs char(simpl) {c} on {}", m.to_json()));
        }
    }
    let count = problems.len();
    problems.truncate(3);
    outcome(count == 0, format!("500 tree models, {pairs} (m,f) pairs of which {positive} satisfied, failures {count} {problems:?}"))
}

// ---------------------------------------------------------------------------
// 7

fn show_pure(p: &PureModel) -> String {
    let edges: Vec<String> = p.transitions().map(|(s, a, t)| format!("{s}{a}{t}")).collect();
    format!("[{}]", edges.join(" "))
}

/// Separates `p` from `q` with `distinguishing_formula`, using `blocked` true in `q` only.
fn separates(p: &PureModel, q: &PureModel, blocked: &Formula) -> bool {
    match distinguishing_formula(p, blocked) {
        Ok(g) => satisfies_pure(p, &g).unwrap() && !satisfies_pure(q, &g).unwrap(),
        Err(_) => false,
    }
}

fn c7_bisim() -> Outcome {
    const ROUNDS: usize = 8;
    const DEEP: usize = 8;
    let family = depth2_family();
    let models = pure_models(3);
    let mut keys = BisimKeys::default();
    let key: Vec<u32> = models.iter().map(|p| keys.key(p, ROUNDS)).collect();
    let theory: Vec<Vec<bool>> = models.iter().map(|p| family.iter().map(|f| satisfies_pure(p, f).unwrap()).collect()).collect();

    // Bisimilar ⇒ same theory.
    let mut theory_of_class: HashMap<u32, usize> = HashMap::new();
    let mut bisimilar_but_different = 0;
    for (i, k) in key.iter().enumerate() {
        let rep = *theory_of_class.entry(*k).or_insert(i);
        if theory[rep] != theory[i] {
            bisimilar_but_different += 1;
        }
    }
    // Same theory ⇒ bisimilar.
    let mut classes_of_theory: BTreeMap<&Vec<bool>, BTreeMap<u32, usize>> = BTreeMap::new();
    for (i, t) in theory.iter().enumerate() {
        classes_of_theory.entry(t).or_default().entry(key[i]).or_insert(i);
    }
    let mut agreeing_pairs: Vec<(usize, usize)> = Vec::new();
    for classes in classes_of_theory.values() {
        let reps: Vec<usize> = classes.values().copied().collect();
        for x in 0..reps.len() {
            for y in x + 1..reps.len() {
                agreeing_pairs.push((reps[x], reps[y]));
            }
        }
    }

    // Library bisimilarity against the key oracle, and separation of non-bisimilar pairs.
    let mut rng = StdRng::seed_from_u64(0xb151);
    let mut sample: Vec<(usize, usize)> = agreeing_pairs.iter().copied().take(3000).collect();
    while sample.len() < agreeing_pairs.len().min(3000) + 20000 {
        sample.push((rng.gen_range(0..models.len()), rng.gen_range(0..models.len())));
    }
    let mut bisim_mismatch = 0;
    let (mut by_family, mut by_deeper, mut inseparable, mut unseparated) = (0, 0, 0, 0);
    let mut unseparated_deterministic = 0;
    let mut inseparable_example = None;
    for &(i, j) in &sample {
        let (p, q) = (&models[i], &models[j]);
        let same = key[i] == key[j];
        if bisimilar(p, q) != same {
            bisim_mismatch += 1;
        }
        if same {
            continue;
        }
        let from_family = family.iter().enumerate().find_map(|(k, f)| match (theory[i][k], theory[j][k]) {
            (false, true) => Some((p, q, f.clone())),
            (true, false) => Some((q, p, f.clone())),
            _ => None,
        });
        if let Some((x, y, blocked)) = from_family {
            if separates(x, y, &blocked) {
                by_family += 1;
            } else {
                unseparated += 1;
                unseparated_deterministic += y.is_deterministic() as usize;
            }
            continue;
        }
        let deeper = (1..=DEEP).find_map(|d| {
            let (cp, cq) = (pure_char(p, p.start(), d), pure_char(q, q.start(), d));
            if !satisfies_pure(p, &cq).unwrap() {
                Some((p, q, cq))
            } else if !satisfies_pure(q, &cp).unwrap() {
                Some((q, p, cp))
            } else {
                None
            }
        });
        match deeper {
            Some((x, y, blocked)) => {
                if separates(x, y, &blocked) {
                    by_deeper += 1;
                } else {
                    unseparated += 1;
                    unseparated_deterministic += y.is_deterministic() as usize;
                }
            }
            None => {
                inseparable += 1;
                inseparable_example.get_or_insert((i, j));
            }
        }
    }

    // The worked example.
    let y = PureModel::from_parts(&["y", "z1", "z2", "w1", "w2"], &[("y", "a", "z1"), ("y", "a", "z2"), ("z1", "b", "w1"), ("z2", "c", "w2")], "y").unwrap();
    let y2 = PureModel::from_parts(&["y", "z", "w1", "w2"], &[("y", "a", "z"), ("z", "b", "w1"), ("z", "c", "w2")], "y").unwrap();
    let g = distinguishing_formula(&y, &parse("<a>(<b>T /\\ <c>T)")).unwrap();
    let worked = normal_form(&g) == normal_form(&parse("<a>(<b>T /\\ !{b}) /\\ <a>(!{c} /\\ <c>T)"))
        && !bisimilar(&y, &y2)
        && satisfies_pure(&y, &g).unwrap()
        && !satisfies_pure(&y2, &g).unwrap();

    let deterministic_agreeing = agreeing_pairs.iter().filter(|&&(i, j)| models[i].is_deterministic() && models[j].is_deterministic()).count();
    let example = agreeing_pairs.first().map(|&(i, j)| format!(" e.g. {} vs {}", show_pure(&models[i]), show_pure(&models[j]))).unwrap_or_default();
    let inseparable_text = inseparable_example.map(|(i, j)| format!(" e.g. {} vs {}", show_pure(&models[i]), show_pure(&models[j]))).unwrap_or_default();
    let pass = bisimilar_but_different == 0 && agreeing_pairs.is_empty() && bisim_mismatch == 0 && unseparated == 0 && inseparable == 0 && worked;
    outcome(
        pass,
        format!(
            "{} pure models, {} bisimulation classes, {} theories; bisimilar with different theories: {bisimilar_but_different}; \
             non-bisimilar classes agreeing on the family: {} ({deterministic_agreeing} between deterministic models){example}; bisimilar() mismatches on {} sampled pairs: {bisim_mismatch}; \
             separated via family {by_family}, via deeper formula {by_deeper}, separation failures {unseparated} ({unseparated_deterministic} against a deterministic model), \
             inseparable by any core formula up to depth {DEEP}: {inseparable}{inseparable_text}; worked example {}",
            models.len(),
            theory_of_class.len(),
            classes_of_theory.len(),
            agreeing_pairs.len(),
            sample.len(),
            if worked { "reproduced" } else { "NOT reproduced" },
        ),
    )
}

// ---------------------------------------------------------------------------
// 8

fn c8_fol() -> Outcome {
    let sigma = Alphabet::closed(set(&["a", "b", "c", "d", "z"])).unwrap();
    let family: Vec<Formula> = depth2_family().into_iter().filter(|f| *f != Formula::Bottom).collect();
    let (admis, det) = guards();
    let mut problems = Vec::new();
    let mut checks = 0;
    for (name, m) in fixtures::all() {
        let one = translate_model(&m, FolTarget::OneSorted, &sigma).unwrap();
        let two = translate_model(&m, FolTarget::TwoSorted, &sigma).unwrap();
        for f in &family {
            let want = satisfies(&m, f).unwrap();
            for (side, var) in [(Side::X, "x"), (Side::Y, "y")] {
                let env = FolEnv::from([(var.to_string(), Element::State(m.start()))]);
                if eval_fol(&one, &translate_fol1(f, side).unwrap(), &env).unwrap() != want {
                    problems.push(format!("{name}: one-sorted {var} translation of {f}"));
                }
            }
            let env = FolEnv::from([("x".to_string(), Element::State(m.start()))]);
            if eval_fol(&two, &translate_fol2(f).unwrap(), &env).unwrap() != want {
                problems.push(format!("{name}: two-sorted translation of {f}"));
            }
            checks += 3;
        }
        for (gname, g) in [("admissibility", &admis), ("determinism", &det)] {
            if !eval_fol(&two, g, &FolEnv::new()).unwrap() {
                problems.push(format!("{name}: {gname} guard fails"));
            }
        }
        match extract_model(&two, &sigma) {
            Ok(back) if equivalent(&back.with_start(m.start()).into(), &m.clone().into()) && back.len() == m.len() => {}
            other => problems.push(format!("{name}: extraction gave {other:?}")),
        }
    }
    let count = problems.len();
    problems.truncate(5);
    outcome(
        count == 0,
        format!("{} fixtures x {} formulae, {checks} correspondence checks, guards and extraction on every fixture; problems {count} {problems:?}", fixtures::all().len(), family.len()),
    )
}

// ---------------------------------------------------------------------------
// 9

/// Formulae over `{a,b}` of modal depth ≤ 2 with at most two negations.
fn neg_family() -> Vec<Formula> {
    let small: Vec<Formula> = ["<a>T", "<b>T", "!{a}", "!{b}", "<a>!{}"].iter().map(|t| parse(t)).collect();
    let neg = |f: &Formula| Formula::neg(f.clone());
    let mut out: Vec<Formula> = level1();
    out.extend(level2().iter().map(neg));
    for x in ["a", "b"] {
        out.extend(level1().iter().filter(|f| **f != Formula::Top).map(|f| Formula::may(act(x), neg(f))));
    }
    for (i, p) in small.iter().enumerate() {
        out.push(neg(&neg(p)));
        for (j, q) in small.iter().enumerate() {
            if i < j {
                out.push(Formula::and(neg(p), neg(q)));
            }
            if i != j {
                out.push(Formula::and(p.clone(), neg(q)));
                out.push(neg(&Formula::and(p.clone(), neg(q))));
                out.push(Formula::or(neg(p), q.clone()));
            }
        }
    }
    out
}

fn count_neg(f: &Formula) -> usize {
    match f {
        Formula::Neg(g) => 1 + count_neg(g),
        Formula::And(l, r) | Formula::Or(l, r) => count_neg(l) + count_neg(r),
        Formula::May(_, g) => count_neg(g),
        _ => 0,
    }
}

fn c9_neg() -> Outcome {
    let o = oracle();
    let family = neg_family();
    let shape_ok = family.iter().all(|f| count_neg(f) <= 2 && f.modal_depth() <= 2 && f.actions().is_subset(&set(&["a", "b"])));
    let sat = satisfaction_table(&o.models, &family);
    let mut problems = Vec::new();
    let mut entailed = 0;
    for i in 0..family.len() {
        for j in 0..family.len() {
            let want = sat[i].is_subset(&sat[j]);
            let got = entails_neg(&family[i], &family[j]);
            entailed += got as usize;
            if got != want {
                problems.push(format!("{} |= {}: got {got}", family[i], family[j]));
            }
        }
    }
    // Core formulae: entails_neg agrees with entails.
    let core: Vec<&Formula> = o.family.iter().step_by(3).collect();
    for f in &core {
        for g in &core {
            if entails_neg(f, g) != entails(f, g).unwrap() {
                problems.push(format!("core pair {f}, {g}"));
            }
        }
    }
    // Excluded middle with the relative negation fails in the one-state Σ model,
    // and with S = {a} in a model that has only a b-transition.
    let phi = parse("<a>T");
    let em_ab = Formula::or(phi.clone(), negate_s(&phi, &set(&["a", "b"])).unwrap());
    let em_a = Formula::or(phi.clone(), negate_s(&phi, &set(&["a"])).unwrap());
    let b_only = Tree::node("*", vec![("b", Tree::leaf("*"))]).to_model();
    let regression = em_ab.to_string() == "<a>T \\/ !{b} \\/ <a>F"
        && !eval_extended(&fixtures::m_top(), &em_ab)
        && !entails_neg(&Formula::Top, &em_ab)
        && em_a.to_string() == "<a>T \\/ !{} \\/ <a>F"
        && !eval_extended(&b_only, &em_a)
        && entails_neg(&Formula::Top, &parse_neg("<a>T \\/ ~<a>T").unwrap());
    if !regression {
        problems.push(format!("excluded-middle regression: {em_ab} / {em_a}"));
    }
    let count = problems.len();
    problems.truncate(5);
    outcome(
        count == 0 && shape_ok,
        format!(
            "{} formulae, {} ordered pairs ({entailed} entailed) against {} oracle models, {} core pairs, excluded-middle regression {}; problems {count} {problems:?}",
            family.len(),
            family.len() * family.len(),
            o.models.len(),
            core.len() * core.len(),
            if regression { "holds" } else { "broken" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 10

fn c10_perf() -> Outcome {
    let rows = bench_entail(&[1000, 2000, 4000], 3);
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let last = rows.last().map(|r| r.seconds).unwrap_or(f64::INFINITY);
    let pass = ratios.iter().all(|r| *r <= MAX_DOUBLING_RATIO) && last <= MAX_SECONDS_N4000;
    let table: Vec<String> = rows.iter().map(|r| format!("n={} size={} {:.4}s", r.n, r.size, r.seconds)).collect();
    outcome(pass, format!("{table:?}, doubling ratios {ratios:.2?} (limit {MAX_DOUBLING_RATIO}), n=4000 limit {MAX_SECONDS_N4000}s"))
}

// ---------------------------------------------------------------------------
// 11

fn c11_optimizer() -> Outcome {
    let n = 1000u64;
    let kb = welsh_dataset(n as usize);
    let query = welsh_query();
    let optimized = optimize_query(&query, &BTreeSet::new());
    let plain = kb.query(&query);
    let fast = kb.query(&optimized);
    let order: Vec<String> = optimized.iter().map(|l| l.to_string()).collect();
    let pass = fast.nodes <= WELSH_NODES_PER_PERSON * n
        && plain.nodes >= WELSH_MIN_SPEEDUP * fast.nodes
        && plain.bindings == fast.bindings
        && plain.bindings.len() == n as usize;
    outcome(
        pass,
        format!(
            "order {order:?}; nodes {} optimized (limit {}), {} unoptimized ({:.0}x); {} bindings, identical: {}",
            fast.nodes,
            WELSH_NODES_PER_PERSON * n,
            plain.nodes,
            plain.nodes as f64 / fast.nodes.max(1) as f64,
            fast.bindings.len(),
            plain.bindings == fast.bindings
        ),
    )
}

// ---------------------------------------------------------------------------
// 12

fn paths(m: &Model) -> Vec<Vec<cathoristic::Action>> {
    let mut out = Vec::new();
    let mut stack = vec![(m.start(), Vec::new())];
    while let Some((s, p)) = stack.pop() {
        for (a, t) in m.successors(s) {
            let mut q: Vec<cathoristic::Action> = p.clone();
            q.push(a.clone());
            out.push(q.clone());
            stack.push((t, q));
        }
    }
    out
}

fn c12_update() -> Outcome {
    let mut problems = Vec::new();
    let mut kb = KnowledgeBase::new();
    kb.assert_fact(&parse("<tl><colour>(<amber>T /\\ !{amber})")).unwrap();
    let report = kb.assert_fact(&parse("<tl><colour>(<red>T /\\ !{red})")).unwrap();
    let traffic = report.removed == vec!["tl/colour/amber".to_string()]
        && kb.label_at(&parse_path("tl/colour/red").unwrap()).is_some()
        && kb.label_at(&parse_path("tl/colour/amber").unwrap()).is_none()
        && kb.label_at(&parse_path("tl/colour").unwrap()) == Some(&label("red"));
    if !traffic {
        problems.push(format!("traffic light: removed {:?}", report.removed));
    }

    let mut rng = StdRng::seed_from_u64(0x7a1f);
    let actions = ["p", "q", "r"];
    let (mut asserts, mut retracts, mut rejected) = (0, 0, 0);
    for _ in 0..1000 {
        let mut kb = KnowledgeBase::new();
        for _ in 0..8 {
            let before = kb.to_model();
            if rng.gen_bool(0.7) {
                let f = random_formula(&mut rng, &actions, 3);
                let s = simpl(&f).unwrap();
                match kb.assert_fact(&f) {
                    Ok(_) => {
                        asserts += 1;
                        let after = LatticeModel::from(kb.to_model());
                        if let Ok(LatticeModel::Model(meet)) = glb(&before.clone().into(), &s) {
                            if !equivalent(&after, &meet.into()) {
                                problems.push(format!("assert {f} differs from the meet"));
                            }
                        }
                        let mut again = kb.clone();
                        again.assert_fact(&f).unwrap();
                        if !equivalent(&again.to_model().into(), &after) {
                            problems.push(format!("assert {f} is not idempotent"));
                        }
                    }
                    Err(KbError::Unsatisfiable) => {
                        rejected += 1;
                        if !s.is_bottom() || kb.to_model().to_json() != before.to_json() {
                            problems.push(format!("assert {f} rejected wrongly or changed the store"));
                        }
                    }
                    Err(e) => problems.push(format!("assert {f}: {e}")),
                }
            } else {
                let ps = paths(&before);
                if ps.is_empty() {
                    continue;
                }
                let p = &ps[rng.gen_range(0..ps.len())];
                match kb.retract_path(p) {
                    Ok(_) => retracts += 1,
                    Err(e) => problems.push(format!("retract {p:?}: {e}")),
                }
                if kb.label_at(p).is_some() {
                    problems.push(format!("retract {p:?} left the path"));
                }
            }
            match kb.validate() {
                Ok(m) if m.is_tree() => {}
                other => problems.push(format!("invalid store: {other:?}")),
            }
        }
    }
    let count = problems.len();
    problems.truncate(5);
    outcome(
        count == 0,
        format!(
            "traffic light removes exactly tl/colour/amber: {traffic}; 1000 random sequences, {asserts} asserts, {retracts} retracts, {rejected} unsatisfiable asserts rejected; problems {count} {problems:?}"
        ),
    )
}
