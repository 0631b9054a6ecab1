//! Timing harness for the entailment decision procedure on chain formulae.

use std::time::{Duration, Instant};

use crate::decide::entails;
use crate::syntax::{Action, Formula};

/// `f = <a>^n<b>T /\ <a>^n!{b,c}` and `g = <a>^n(<b>T /\ !{b,c,d})`, with `f ⊨ g`.
pub fn chain_pair(n: usize) -> (Formula, Formula) {
    let act = |s: &str| Action::new(s).expect("valid name");
    let a = act("a");
    let chain = |tail: Formula| Formula::path(std::iter::repeat(a.clone()).take(n), tail);
    let f = Formula::and(chain(Formula::may(act("b"), Formula::Top)), chain(Formula::bang([act("b"), act("c")])));
    let g = chain(Formula::and(Formula::may(act("b"), Formula::Top), Formula::bang([act("b"), act("c"), act("d")])));
    (f, g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Formula size (node count) of `f` plus `g`.
    pub size: usize,
    /// Best wall time over the repetitions.
    pub seconds: f64,
    /// Time relative to the previous row.
    pub ratio: Option<f64>,
}

/// Best-of-`reps` time of one `entails` call after one warm-up call.
pub fn time_entail(n: usize, reps: usize) -> Duration {
    let (f, g) = chain_pair(n);
    assert!(entails(&f, &g).expect("core formulae"));
    let mut best = Duration::MAX;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        let r = entails(&f, &g).expect("core formulae");
        best = best.min(t.elapsed());
        assert!(r);
    }
    best
}

pub fn bench_entail(sizes: &[usize], reps: usize) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = Vec::new();
    for &n in sizes {
        let (f, g) = chain_pair(n);
        let seconds = time_entail(n, reps).as_secs_f64();
        let ratio = rows.last().map(|r| seconds / r.seconds.max(1e-9));
        rows.push(BenchRow { n, size: f.length() + g.length(), seconds, ratio });
    }
    rows
}

/// Runs `job` on a thread with a large stack; deep formulae recurse when dropped or printed.
pub fn with_big_stack<T: Send + 'static>(job: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new().stack_size(512 << 20).spawn(job).expect("spawn").join().expect("worker panicked")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chains_entail() {
        let (f, g) = chain_pair(3);
        assert_eq!(f.to_string(), "<a><a><a><b>T /\\ <a><a><a>!{b,c}");
        assert_eq!(g.to_string(), "<a><a><a>(<b>T /\\ !{b,c,d})");
        let rows = with_big_stack(|| bench_entail(&[50, 100], 1));
        assert_eq!(rows.len(), 2);
        assert!(rows[1].ratio.is_some());
    }
}
