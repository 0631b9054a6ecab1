//! `cl`: command-line front end for cathoristic logic.
//!
//! Exit status: 0 for true/success, 1 for false/not entailed, 2 for usage,
//! parse and input errors.

use std::io::{BufRead, Write};
use std::path::Path;
use std::process::ExitCode;

use cathoristic::decide::{entails_neg_with, neg_counterexample, HeightBound, NegOptions, NegStrategy};
use cathoristic::fol::{self, FolEnv, FolTarget, Side};
use cathoristic::kb::{replay, Session};
use cathoristic::proof::{self, ProofError};
use cathoristic::semantics::QEnv;
use cathoristic::{
    bench, bisimilar, char_formula, distinguishing_formula, entails, eval_extended, fixtures, glb, lub, parse_core, parse_neg,
    parse_quantified, satisfies, satisfies_pure, satisfies_quantified, simpl, Alphabet, Formula, LatticeModel, Model, PureModel,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "cl", version, about = "Cathoristic logic toolkit")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Closed alphabet, e.g. `a,b,c`; overrides CL_ALPHABET.
    #[arg(long, global = true)]
    alphabet: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Does the model satisfy the formula?
    Check {
        model: String,
        formula: String,
        /// Evaluate on the label-free model (tantum checks the out-set).
        #[arg(long)]
        pure: bool,
        /// Formula uses the quantified dialect (needs a closed alphabet).
        #[arg(long)]
        quantified: bool,
    },
    /// Does the first formula entail the second?
    Entail {
        f: String,
        g: String,
        /// Allow `~` and `\/`.
        #[arg(long)]
        neg: bool,
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Entailment for formulae with negation and disjunction.
    EntailNeg {
        f: String,
        g: String,
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// The least upper bound of the models of a formula.
    Simpl {
        formula: String,
        #[arg(long)]
        dot: bool,
    },
    /// Characteristic formula of a model.
    Char { model: String },
    /// Greatest lower bound of two models.
    Glb {
        m1: String,
        m2: String,
        #[arg(long)]
        dot: bool,
    },
    /// Least upper bound of two models.
    Lub {
        m1: String,
        m2: String,
        #[arg(long)]
        dot: bool,
    },
    /// Is the formula satisfiable?
    Sat { formula: String },
    /// Are two pure models bisimilar?
    Bisim { p1: String, p2: String },
    /// A formula true in the pure model and incompatible with the given one.
    Dist { model: String, formula: String },
    /// Derivation of `f |- g` as an s-expression.
    Prove { f: String, g: String },
    /// Checks a derivation file.
    CheckProof { derivation: String },
    /// First-order translations.
    Fol(FolArgs),
    /// Hennessy-Milner translation over a closed alphabet.
    Hml {
        formula: String,
        /// Conjoin the determinism constraint for these formulae.
        #[arg(long = "deterministic", num_args = 1..)]
        gamma: Vec<String>,
    },
    /// Knowledge-base REPL reading commands from stdin.
    Kb {
        /// Start from this model snapshot.
        #[arg(long)]
        load: Option<String>,
        /// Replay this command log before reading stdin, and append new commands to it.
        #[arg(long)]
        log: Option<String>,
    },
    /// Timing harness.
    Bench {
        #[arg(value_enum)]
        target: BenchTarget,
        /// Chain lengths.
        #[arg(long = "chain", num_args = 1.., default_values_t = [1000usize, 2000, 4000])]
        chain: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

#[derive(Args, Debug)]
struct StrategyArgs {
    /// Decision procedure for the negation extension.
    #[arg(long, value_enum, default_value_t = Strategy::Exact)]
    strategy: Strategy,
    /// Extension height for `--strategy s-extension`: `depth`, `length` or a number.
    #[arg(long, default_value = "depth")]
    bound: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Strategy {
    Exact,
    SExtension,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchTarget {
    Entail,
}

#[derive(Args, Debug)]
struct FolArgs {
    /// Formula, or model then formula with `--check-correspondence`.
    #[arg(required = true, num_args = 1..=2)]
    inputs: Vec<String>,
    #[arg(long, conflicts_with = "two_sorted")]
    one_sorted: bool,
    #[arg(long)]
    two_sorted: bool,
    /// Variable the one-sorted translation is relative to.
    #[arg(long, default_value = "x")]
    side: String,
    /// Compare both translations against direct satisfaction on a model.
    #[arg(long)]
    check_correspondence: bool,
}

#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

/// Strips a leading `key=` from positional arguments, so `model=x.json` works.
fn strip_key(arg: &str) -> &str {
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') => v,
        _ => arg,
    }
}

/// Inline text, or the contents of a file given as `@path`.
fn text_arg(arg: &str) -> Result<String, Failure> {
    let arg = strip_key(arg);
    match arg.strip_prefix('@') {
        Some(path) => Ok(std::fs::read_to_string(path).map_err(|e| Failure(format!("{path}: {e}")))?.trim().to_string()),
        None => Ok(arg.to_string()),
    }
}

fn core_arg(arg: &str) -> Result<Formula, Failure> {
    Ok(parse_core(&text_arg(arg)?)?)
}

fn neg_arg(arg: &str) -> Result<Formula, Failure> {
    Ok(parse_neg(&text_arg(arg)?)?)
}

fn read_file(arg: &str) -> Result<String, Failure> {
    let path = strip_key(arg);
    let path = path.strip_prefix('@').unwrap_or(path);
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{path}: {e}")))
}

/// A model file; the built-in fixture names (`M_FIG1.json`, ...) work without a file.
fn model_arg(arg: &str) -> Result<Model, Failure> {
    let path = strip_key(arg);
    let path = path.strip_prefix('@').unwrap_or(path);
    if !Path::new(path).exists() {
        let stem = Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or(path);
        if let Some(m) = fixtures::by_name(stem) {
            return Ok(m);
        }
    }
    Ok(Model::from_json(&read_file(path)?)?)
}

fn pure_arg(arg: &str) -> Result<PureModel, Failure> {
    let path = strip_key(arg);
    if !Path::new(path).exists() {
        let stem = Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or(path);
        if let Some(m) = fixtures::by_name(stem) {
            return Ok(cathoristic::to_pure(&m));
        }
    }
    Ok(PureModel::from_json(&read_file(path)?)?)
}

fn alphabet(cli: &Cli) -> Result<Alphabet, Failure> {
    match cli.alphabet.clone().or_else(|| std::env::var("CL_ALPHABET").ok()) {
        Some(list) => Ok(Alphabet::parse_list(&list)?),
        None => Ok(Alphabet::Open),
    }
}

fn closed_alphabet(cli: &Cli) -> Result<Alphabet, Failure> {
    match alphabet(cli)? {
        Alphabet::Open => Err(Failure("this command needs a closed alphabet: set CL_ALPHABET or pass --alphabet".into())),
        a => Ok(a),
    }
}

fn neg_options(s: &StrategyArgs) -> Result<NegOptions, Failure> {
    let strategy = match s.strategy {
        Strategy::Exact => NegStrategy::Exact,
        Strategy::SExtension => NegStrategy::SExtension(match s.bound.as_str() {
            "depth" => HeightBound::ModalDepth,
            "length" => HeightBound::Length,
            n => HeightBound::Fixed(n.parse().map_err(|_| Failure(format!("bad bound `{n}`")))?),
        }),
    };
    Ok(NegOptions { strategy })
}

fn lattice_json(m: &LatticeModel) -> Value {
    match m {
        LatticeModel::Bottom => Value::Null,
        LatticeModel::Model(m) => serde_json::to_value(m.to_raw()).expect("serializable"),
    }
}

fn print_lattice(m: &LatticeModel, dot: bool, as_json: bool) {
    match m {
        LatticeModel::Bottom if as_json => println!("{}", json!({ "bottom": true, "model": null })),
        LatticeModel::Bottom => println!("bottom"),
        LatticeModel::Model(m) if dot => print!("{}", m.to_dot()),
        LatticeModel::Model(_) if as_json => println!("{}", json!({ "bottom": false, "model": lattice_json(m) })),
        LatticeModel::Model(m) => println!("{}", m.to_json()),
    }
}

fn verdict(cli: &Cli, key: &str, value: bool, extra: Value) {
    if cli.json {
        let mut obj = json!({ key: value });
        if let (Value::Object(o), Value::Object(e)) = (&mut obj, extra) {
            o.extend(e);
        }
        println!("{obj}");
    } else {
        println!("{value}");
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Check { model, formula, pure, quantified } => {
            let m = model_arg(model)?;
            let result = if *quantified {
                let f = parse_quantified(&text_arg(formula)?)?;
                satisfies_quantified(&m, &f, &QEnv::new(), &closed_alphabet(cli)?)?
            } else {
                let f = neg_arg(formula)?;
                match (pure, f.is_core()) {
                    (true, _) => satisfies_pure(&cathoristic::to_pure(&m), &f)?,
                    (false, true) => satisfies(&m, &f)?,
                    (false, false) => eval_extended(&m, &f),
                }
            };
            verdict(cli, "satisfied", result, json!({}));
            Ok(result)
        }
        Command::Entail { f, g, neg, strategy } if *neg => entail_neg(cli, f, g, strategy),
        Command::Entail { f, g, strategy, .. } => {
            let (pf, pg) = (neg_arg(f)?, neg_arg(g)?);
            if !pf.is_core() || !pg.is_core() {
                return entail_neg(cli, f, g, strategy);
            }
            let result = entails(&pf, &pg)?;
            let counter = if result { Value::Null } else { lattice_json(&simpl(&pf)?) };
            verdict(cli, "entailed", result, json!({ "countermodel": counter }));
            Ok(result)
        }
        Command::EntailNeg { f, g, strategy } => entail_neg(cli, f, g, strategy),
        Command::Simpl { formula, dot } => {
            let m = simpl(&core_arg(formula)?)?;
            print_lattice(&m, *dot, cli.json);
            Ok(true)
        }
        Command::Char { model } => {
            let f = char_formula(&LatticeModel::Model(model_arg(model)?), &alphabet(cli)?)?;
            if cli.json {
                println!("{}", json!({ "formula": f.to_string() }));
            } else {
                println!("{f}");
            }
            Ok(true)
        }
        Command::Glb { m1, m2, dot } => {
            let m = glb(&LatticeModel::Model(model_arg(m1)?), &LatticeModel::Model(model_arg(m2)?))?;
            print_lattice(&m, *dot, cli.json);
            Ok(true)
        }
        Command::Lub { m1, m2, dot } => {
            let m = lub(&LatticeModel::Model(model_arg(m1)?), &LatticeModel::Model(model_arg(m2)?));
            print_lattice(&m, *dot, cli.json);
            Ok(true)
        }
        Command::Sat { formula } => {
            let f = neg_arg(formula)?;
            let witness = if f.is_core() {
                simpl(&f)?.as_model().cloned()
            } else {
                neg_counterexample(&f, &Formula::Bottom)
            };
            let model = witness.as_ref().map(|m| serde_json::to_value(m.to_raw()).expect("serializable")).unwrap_or(Value::Null);
            verdict(cli, "satisfiable", witness.is_some(), json!({ "model": model }));
            Ok(witness.is_some())
        }
        Command::Bisim { p1, p2 } => {
            let result = bisimilar(&pure_arg(p1)?, &pure_arg(p2)?);
            verdict(cli, "bisimilar", result, json!({}));
            Ok(result)
        }
        Command::Dist { model, formula } => {
            let p = pure_arg(model)?;
            match distinguishing_formula(&p, &core_arg(formula)?) {
                Ok(g) => {
                    if cli.json {
                        println!("{}", json!({ "formula": g.to_string() }));
                    } else {
                        println!("{g}");
                    }
                    Ok(true)
                }
                Err(e) => {
                    if cli.json {
                        println!("{}", json!({ "formula": null, "reason": e.to_string() }));
                    } else {
                        eprintln!("{e}");
                    }
                    Ok(false)
                }
            }
        }
        Command::Prove { f, g } => match proof::derive(&core_arg(f)?, &core_arg(g)?) {
            Ok(d) => {
                if cli.json {
                    println!("{}", json!({ "entailed": true, "derivation": d.to_sexpr(), "size": d.size() }));
                } else {
                    println!("{}", d.to_sexpr());
                }
                Ok(true)
            }
            Err(ProofError::NotEntailed { countermodel }) => {
                let raw = serde_json::to_value(countermodel.to_raw()).expect("serializable");
                if cli.json {
                    println!("{}", json!({ "entailed": false, "countermodel": raw }));
                } else {
                    println!("not entailed; countermodel:\n{}", countermodel.to_json());
                }
                Ok(false)
            }
            Err(e) => Err(e.into()),
        },
        Command::CheckProof { derivation } => {
            let d = proof::Derivation::from_sexpr(&read_file(derivation)?)?;
            match proof::check_derivation(&d) {
                Ok(()) => {
                    verdict(cli, "valid", true, json!({ "conclusion": d.conclusion.to_string() }));
                    Ok(true)
                }
                Err(e) => {
                    let report = json!({
                        "path": e.path, "rule": e.rule.name(), "expected": e.expected,
                        "actual": e.actual.to_string(), "reason": e.reason,
                    });
                    if cli.json {
                        println!("{}", json!({ "valid": false, "failure": report }));
                    } else {
                        println!("false\n{e}");
                    }
                    Ok(false)
                }
            }
        }
        Command::Fol(args) => run_fol(cli, args),
        Command::Hml { formula, gamma } => {
            let sigma = closed_alphabet(cli)?;
            let f = core_arg(formula)?;
            let h = if gamma.is_empty() {
                fol::translate_hml(&f, &sigma)?
            } else {
                let gamma = gamma.iter().map(|g| core_arg(g)).collect::<Result<Vec<_>, _>>()?;
                fol::translate_hml_deterministic(&f, &sigma, &gamma)?
            };
            if cli.json {
                println!("{}", json!({ "hml": h.to_string() }));
            } else {
                println!("{h}");
            }
            Ok(true)
        }
        Command::Kb { load, log } => run_kb(cli, load.as_deref(), log.as_deref()),
        Command::Bench { target: BenchTarget::Entail, chain, reps } => {
            let rows = bench::bench_entail(chain, *reps);
            for r in &rows {
                if cli.json {
                    println!("{}", json!({ "n": r.n, "size": r.size, "seconds": r.seconds, "ratio": r.ratio }));
                } else {
                    let ratio = r.ratio.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
                    println!("n={:<6} size={:<7} time={:.6}s ratio={ratio}", r.n, r.size, r.seconds);
                }
            }
            Ok(true)
        }
    }
}

fn entail_neg(cli: &Cli, f: &str, g: &str, strategy: &StrategyArgs) -> Outcome {
    let (f, g) = (neg_arg(f)?, neg_arg(g)?);
    let options = neg_options(strategy)?;
    let result = entails_neg_with(&f, &g, options);
    let counter = match options.strategy {
        NegStrategy::Exact if !result => neg_counterexample(&f, &g).map(|m| serde_json::to_value(m.to_raw()).expect("serializable")),
        _ => None,
    };
    verdict(cli, "entailed", result, json!({ "countermodel": counter }));
    Ok(result)
}

fn run_fol(cli: &Cli, args: &FolArgs) -> Outcome {
    let side = match args.side.as_str() {
        "x" => Side::X,
        "y" => Side::Y,
        s => return Err(Failure(format!("side must be x or y, not `{s}`"))),
    };
    if args.check_correspondence {
        let [model, formula] = args.inputs.as_slice() else {
            return Err(Failure("--check-correspondence takes a model and a formula".into()));
        };
        let (m, f) = (model_arg(model)?, core_arg(formula)?);
        let direct = satisfies(&m, &f)?;
        let env = FolEnv::from([("x".to_string(), fol::Element::State(m.start()))]);
        let one = fol::eval_fol(&fol::translate_model(&m, FolTarget::OneSorted, &Alphabet::Open)?, &fol::translate_fol1(&f, Side::X)?, &env)?;
        let mut report = json!({ "satisfies": direct, "one_sorted": one });
        let mut agree = one == direct;
        if let Ok(sigma) = closed_alphabet(cli) {
            let two = fol::eval_fol(&fol::translate_model(&m, FolTarget::TwoSorted, &sigma)?, &fol::translate_fol2(&f)?, &env)?;
            report["two_sorted"] = json!(two);
            agree &= two == direct;
        }
        report["agree"] = json!(agree);
        if cli.json {
            println!("{report}");
        } else {
            println!("{}", if agree { "agree" } else { "disagree" });
        }
        return Ok(agree);
    }
    let [formula] = args.inputs.as_slice() else {
        return Err(Failure("expected a single formula".into()));
    };
    let f = core_arg(formula)?;
    let out = if args.two_sorted { fol::translate_fol2(&f)? } else { fol::translate_fol1(&f, side)? };
    if cli.json {
        println!("{}", json!({ "fol": out.to_string() }));
    } else {
        println!("{out}");
    }
    Ok(true)
}

fn run_kb(cli: &Cli, load: Option<&str>, log: Option<&str>) -> Outcome {
    let mut session = Session::new();
    if let Some(path) = load {
        session.execute(&format!("load {path}"))?;
    }
    if let Some(path) = log.filter(|p| Path::new(p).exists()) {
        let snapshot = session.kb.to_model();
        session.kb = replay(Some(&snapshot), &std::fs::read_to_string(path)?)?;
    }
    let mut log_file = match log {
        Some(path) => Some(std::fs::OpenOptions::new().create(true).append(true).open(path)?),
        None => None,
    };
    let stdin = std::io::stdin();
    let mut ok = true;
    for line in stdin.lock().lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "quit" || line == "exit" {
            break;
        }
        let logged = session.log.len();
        match session.execute(line) {
            Ok(out) => {
                if cli.json {
                    println!("{}", json!({ "ok": true, "output": out }));
                } else if !out.is_empty() {
                    println!("{out}");
                }
            }
            Err(e) => {
                ok = false;
                if cli.json {
                    println!("{}", json!({ "ok": false, "error": e.to_string() }));
                } else {
                    eprintln!("error: {e}");
                }
            }
        }
        if let Some(file) = log_file.as_mut() {
            for entry in &session.log[logged..] {
                writeln!(file, "{entry}")?;
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Deeply nested formulae recurse when printed or dropped.
    let outcome = bench::with_big_stack(move || run(&cli));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
