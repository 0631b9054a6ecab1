use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn cl(args: &[&str]) -> Output {
    cl_with(args, &[], None)
}

fn cl_with(args: &[&str], env: &[(&str, &str)], stdin: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cl"));
    cmd.args(args).env_remove("CL_ALPHABET").stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("binary runs");
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    } else {
        drop(child.stdin.take());
    }
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(stdout(o).trim()).unwrap_or_else(|e| panic!("bad json {:?}: {e}", stdout(o)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn entail_exit_codes() {
    assert_eq!(code(&cl(&["entail", "<a><b>T", "<a>T"])), 0);
    assert_eq!(stdout(&cl(&["entail", "<a><b>T", "<a>T"])).trim(), "true");
    assert_eq!(code(&cl(&["entail", "<a>T", "<a><b>T"])), 1);
    let o = cl(&["--json", "entail", "<a>T", "<a><b>T"]);
    let v = json(&o);
    assert_eq!(v["entailed"], false);
    assert!(v["countermodel"]["states"].is_array());
    assert_eq!(json(&cl(&["--json", "entail", "<a>T /\\ !{}", "<b>T"]))["countermodel"], Value::Null);
}

#[test]
fn entail_with_negation() {
    assert_eq!(code(&cl(&["entail", "--neg", "~<a>T", "~<a><b>T"])), 0);
    assert_eq!(code(&cl(&["entail", "~<a>T", "~<a><b>T"])), 0);
    assert_eq!(code(&cl(&["entail-neg", "T", "<a>T \\/ ~<a>T"])), 0);
    let v = json(&cl(&["--json", "entail-neg", "T", "<a>T"]));
    assert_eq!(v["entailed"], false);
    assert!(v["countermodel"].is_object());
    for bound in ["depth", "1", "2"] {
        let o = cl(&["entail-neg", "--strategy", "s-extension", "--bound", bound, "~<a>T", "~<a><b>T"]);
        assert_eq!(code(&o), 0, "bound {bound}");
    }
    assert_eq!(code(&cl(&["entail-neg", "--strategy", "s-extension", "--bound", "many", "T", "T"])), 2);
}

#[test]
fn check_models() {
    assert_eq!(code(&cl(&["check", "model=M_FIG1.json", "formula=<b>T"])), 1);
    assert_eq!(code(&cl(&["check", "M_FIG1.json", "<a>(<b>T /\\ !{b,c})"])), 0);
    assert_eq!(json(&cl(&["--json", "check", "M_FIG1.json", "<c>!{}"]))["satisfied"], true);
    // Tantum reads the out-set on pure models.
    assert_eq!(code(&cl(&["check", "M_AB.json", "!{a}"])), 1);
    assert_eq!(code(&cl(&["check", "--pure", "M_AB.json", "!{a}"])), 0);
    assert_eq!(code(&cl(&["check", "M_FIG1.json", "~<b>T"])), 0);
    let q = cl(&["--alphabet", "a,b,c", "check", "--quantified", "M_FIG1.json", "exists X. <X>T"]);
    assert_eq!(code(&q), 0, "{}", String::from_utf8_lossy(&q.stderr));
    assert_eq!(code(&cl(&["check", "--quantified", "M_FIG1.json", "exists X. <X>T"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", &stdout(&cl(&["simpl", "<a>!{b}"])));
    assert_eq!(code(&cl(&["check", &m, "<a>!{b,c}"])), 0);
    let f = write(dir.path(), "f.txt", "<a><b>T\n");
    assert_eq!(code(&cl(&["check", &m, &format!("@{f}")])), 1);
}

#[test]
fn errors_exit_two() {
    let o = cl(&["entail", "<a>(T", "T"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert_eq!(code(&cl(&["check", "no/such/model.json", "T"])), 2);
    assert_eq!(code(&cl(&["frobnicate"])), 2);
    assert_eq!(code(&cl(&["simpl", "~<a>T"])), 2);
}

#[test]
fn lattice_commands() {
    let dot = stdout(&cl(&["simpl", "<a><b>T", "--dot"]));
    assert!(dot.starts_with("digraph"), "{dot}");
    assert!(dot.contains("-> ") && dot.contains("label=\"a\"") && dot.contains("label=\"b\""));
    let v = json(&cl(&["--json", "simpl", "<a>T /\\ !{}"]));
    assert_eq!(v["bottom"], true);
    let v = json(&cl(&["--json", "simpl", "<a>!{b}"]));
    assert_eq!(v["bottom"], false);
    assert_eq!(v["model"]["states"].as_array().unwrap().len(), 2);

    assert_eq!(stdout(&cl(&["char", "M_AB_STRICT.json"])).trim(), "!{a} /\\ <a>(!{b} /\\ <b>!{})");
    assert_eq!(json(&cl(&["--json", "char", "M_AB.json"]))["formula"], "<a><b>T");

    let dir = tempfile::tempdir().unwrap();
    let left = write(dir.path(), "l.json", &stdout(&cl(&["simpl", "<a>!{b}"])));
    let right = write(dir.path(), "r.json", &stdout(&cl(&["simpl", "<a><c>T"])));
    let v = json(&cl(&["--json", "glb", &left, &right]));
    assert_eq!(v["bottom"], true);
    assert_eq!(stdout(&cl(&["glb", &left, &right])).trim(), "bottom");
    let v = json(&cl(&["--json", "glb", "M_AB.json", "M_LEFTBANG.json"]));
    assert_eq!(v["bottom"], false);
    assert!(stdout(&cl(&["glb", "--dot", "M_AB.json", "M_TOP.json"])).starts_with("digraph"));
    let v = json(&cl(&["--json", "lub", "M_AB.json", "M_FIG1.json"]));
    assert_eq!(v["bottom"], false);
    assert!(stdout(&cl(&["lub", "--dot", &left, &right])).starts_with("digraph"));
    let joined = write(dir.path(), "j.json", &stdout(&cl(&["lub", &left, &right])));
    assert_eq!(stdout(&cl(&["char", &joined])).trim(), "<a>T");
}

#[test]
fn satisfiability() {
    assert_eq!(code(&cl(&["sat", "<a>!{b}"])), 0);
    assert_eq!(code(&cl(&["sat", "<a>F"])), 1);
    assert_eq!(code(&cl(&["sat", "~<a>T /\\ <a>T"])), 1);
    let v = json(&cl(&["--json", "sat", "~<a>T /\\ !{a,b}"]));
    assert_eq!(v["satisfiable"], true);
    assert!(v["model"].is_object());
    assert_eq!(json(&cl(&["--json", "sat", "<a>F"]))["model"], Value::Null);
}

#[test]
fn pure_models() {
    assert_eq!(code(&cl(&["bisim", "M_AB.json", "M_AB.json"])), 0);
    assert_eq!(code(&cl(&["bisim", "M_AB.json", "M_FIG1.json"])), 1);
    assert_eq!(json(&cl(&["--json", "bisim", "M_TOP.json", "M_TOP.json"]))["bisimilar"], true);

    let dir = tempfile::tempdir().unwrap();
    let y = write(
        dir.path(),
        "y.json",
        r#"{"states":["y","z1","z2","w1","w2"],"start":"y","transitions":[["y","a","z1"],["y","a","z2"],["z1","b","w1"],["z2","c","w2"]]}"#,
    );
    let o = cl(&["dist", &y, "<a>(<b>T /\\ <c>T)"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "<a>(<b>T /\\ !{b}) /\\ <a>(!{c} /\\ <c>T)");
    assert_eq!(json(&cl(&["--json", "dist", "M_TOP.json", "<a>T"]))["formula"], "!{}");
    let v = json(&cl(&["--json", "dist", &y, "<a>T"]));
    assert_eq!(v["formula"], Value::Null);
    assert_eq!(code(&cl(&["dist", &y, "<a>T"])), 1);
}

#[test]
fn proofs_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = cl(&["prove", "<a>!{b,c} /\\ <a>!{c,d}", "<a>!{c}"]);
    assert_eq!(code(&o), 0);
    let proof = write(dir.path(), "p.sexpr", &stdout(&o));
    let v = json(&cl(&["--json", "check-proof", &proof]));
    assert_eq!(v["valid"], true);
    assert_eq!(v["conclusion"], "<a>!{b,c} /\\ <a>!{c,d} |- <a>!{c}");
    assert_eq!(code(&cl(&["check-proof", &proof])), 0);

    let bad = write(dir.path(), "bad.sexpr", "(Trans \"<a>T |- <b>T\"\n  (Id \"<a>T |- <a>T\")\n  (Id \"<a>T |- <a>T\"))");
    assert_eq!(code(&cl(&["check-proof", &bad])), 1);
    let v = json(&cl(&["--json", "check-proof", &bad]));
    assert_eq!(v["valid"], false);
    assert!(v["failure"]["rule"].is_string());
    let garbage = write(dir.path(), "garbage.sexpr", "(Nope");
    assert_eq!(code(&cl(&["check-proof", &garbage])), 2);

    let v = json(&cl(&["--json", "prove", "<a>T", "<b>T"]));
    assert_eq!(v["entailed"], false);
    assert!(v["countermodel"]["states"].is_array());
    assert_eq!(code(&cl(&["prove", "<a>T", "<b>T"])), 1);
    let v = json(&cl(&["--json", "prove", "<a>!{b} /\\ <a><c>T", "<d>T"]));
    assert_eq!(v["entailed"], true);
    assert!(v["size"].as_u64().unwrap() > 1);
}

#[test]
fn first_order_translations() {
    assert_eq!(stdout(&cl(&["fol", "<a>!{b}"])).trim(), "exists y.(Arrow_a(x,y) /\\ Restrict{b}(y))");
    assert_eq!(stdout(&cl(&["fol", "--one-sorted", "--side", "y", "<a>T"])).trim(), "exists x.(Arrow_a(y,x) /\\ T)");
    let two = stdout(&cl(&["fol", "--two-sorted", "!{a,b}"]));
    assert_eq!(two.trim(), "forall act A.(Allowed(x,A) -> (A=a \\/ A=b))");
    assert_eq!(json(&cl(&["--json", "fol", "--two-sorted", "!{}"]))["fol"], "forall act A.(Allowed(x,A) -> F)");
    assert_eq!(code(&cl(&["fol", "--side", "z", "T"])), 2);
    assert_eq!(code(&cl(&["fol", "--one-sorted", "--two-sorted", "T"])), 2);

    let o = cl(&["fol", "--check-correspondence", "M_FIG1.json", "<a>!{b,c}"]);
    assert_eq!((code(&o), stdout(&o).trim().to_string()), (0, "agree".to_string()));
    let v = json(&cl_with(&["--json", "fol", "--check-correspondence", "M_FIG1.json", "<b>T"], &[("CL_ALPHABET", "a,b,c,z")], None));
    assert_eq!(v["satisfies"], false);
    assert_eq!(v["one_sorted"], false);
    assert_eq!(v["two_sorted"], false);
    assert_eq!(v["agree"], true);
}

#[test]
fn hennessy_milner() {
    let o = cl_with(&["hml", "!{a}"], &[("CL_ALPHABET", "a,b,c")], None);
    assert_eq!(stdout(&o).trim(), "~<b>T /\\ ~<c>T");
    let o = cl(&["--alphabet", "a,b", "--json", "hml", "<a>!{b}"]);
    assert_eq!(json(&o)["hml"], "<a>~<a>T");
    assert_eq!(code(&cl(&["hml", "!{a}"])), 2);
    let o = cl(&["--alphabet", "a", "hml", "<a>T", "--deterministic", "<a>T"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("~("), "{}", stdout(&o));
}

#[test]
fn knowledge_base_repl() {
    let script = "# traffic light\n\
        assert <tl><colour>(<amber>T /\\ !{amber})\n\
        assert <tl><colour>(<red>T /\\ !{red})\n\
        query <tl><colour><C>\n\
        explain <tl><colour><C>\n\
        retract nosuch\n\
        quit\n\
        query <never><reached>\n";
    let o = cl_with(&["kb"], &[], Some(script));
    let out = stdout(&o);
    assert!(out.contains("removed tl/colour/amber"), "{out}");
    assert!(out.contains("C=red"));
    assert!(out.contains("order: <tl><colour><C>"));
    assert!(!out.contains("never"));
    assert_eq!(code(&o), 1, "the failed retract makes the session unsuccessful");

    let o = cl_with(&["--json", "kb"], &[], Some("assert <a><b>T\nquery <a><X>\nfrobnicate\n"));
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1]["output"], "X=b");
    assert_eq!(lines[2]["ok"], false);
}

#[test]
fn knowledge_base_persistence() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("kb.log");
    let log = log.to_str().unwrap();
    let snap = dir.path().join("snap.json");
    let snap = snap.to_str().unwrap();
    let o = cl_with(&["kb", "--log", log], &[], Some("assert <brown><married>(<elizabeth>T /\\ !{elizabeth})\nassert <brown><friend><jones>T\n"));
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(log).unwrap().lines().count(), 2);

    let o = cl_with(&["kb", "--log", log], &[], Some(&format!("retract brown/friend\nquery <brown><married><W>\nsave {snap}\ndump\n")));
    let out = stdout(&o);
    assert!(out.contains("removed brown/friend"), "{out}");
    assert!(out.contains("W=elizabeth"));
    assert_eq!(std::fs::read_to_string(log).unwrap().lines().count(), 3);

    let o = cl_with(&["kb", "--load", snap], &[], Some("query <brown><friend><F>\nquery <brown><married><W>\ndot\n"));
    let out = stdout(&o);
    assert!(out.starts_with("false\nW=elizabeth\ndigraph"), "{out}");
}

#[test]
fn bench_reports_rows() {
    let o = cl(&["--json", "bench", "entail", "--chain", "20", "40", "--reps", "1"]);
    assert_eq!(code(&o), 0);
    let rows: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["n"], 20);
    assert_eq!(rows[0]["ratio"], Value::Null);
    assert!(rows[1]["ratio"].as_f64().unwrap() > 0.0);
    let text = stdout(&cl(&["bench", "entail", "--chain", "10", "--reps", "1"]));
    assert!(text.starts_with("n=10"), "{text}");
}
