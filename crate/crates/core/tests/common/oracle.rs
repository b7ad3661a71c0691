//! Exhaustive oracles for the alignment search and the optimal trace pairing.

use chrono::{Duration, TimeZone, Utc};
use prosim::conformance::{align_trace, DEFAULT_STATE_LIMIT};
use prosim::evaluation::cycle_time_mae;
use prosim::eventlog::{Event, EventLog, Trace};
use prosim::graph::{GraphBuilder, NodeId, NodeKind, ProcessGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
enum Tree {
    Leaf(String),
    Seq(Vec<Tree>),
    Xor(Vec<Tree>),
    And(Vec<Tree>),
}

fn random_tree(rng: &mut ChaCha8Rng, budget: usize, next: &mut usize) -> Tree {
    if budget <= 1 || rng.random_bool(0.35) {
        *next += 1;
        return Tree::Leaf(format!("t{}", *next - 1));
    }
    let k = rng.random_range(2..=budget.min(3));
    let mut left = budget;
    let mut children = Vec::with_capacity(k);
    for i in 0..k {
        let remaining = k - i - 1;
        let b = if remaining == 0 { left } else { rng.random_range(1..=left - remaining) };
        left -= b;
        children.push(random_tree(rng, b, next));
    }
    match rng.random_range(0..3) {
        0 => Tree::Seq(children),
        1 => Tree::Xor(children),
        _ => Tree::And(children),
    }
}

/// Adds the fragment for `tree`; returns its entry and exit nodes.
fn build(tree: &Tree, b: &mut GraphBuilder) -> (NodeId, NodeId) {
    match tree {
        Tree::Leaf(l) => {
            let n = b.task(l);
            (n, n)
        }
        Tree::Seq(children) => {
            let parts: Vec<(NodeId, NodeId)> = children.iter().map(|c| build(c, b)).collect();
            for w in parts.windows(2) {
                b.edge(w[0].1, w[1].0);
            }
            (parts[0].0, parts[parts.len() - 1].1)
        }
        Tree::Xor(children) | Tree::And(children) => {
            let and = matches!(tree, Tree::And(_));
            let split = b.node(if and { NodeKind::AndSplit } else { NodeKind::XorSplit });
            let join = b.node(if and { NodeKind::AndJoin } else { NodeKind::XorJoin });
            for c in children {
                let (entry, exit) = build(c, b);
                b.edge(split, entry);
                b.edge(exit, join);
            }
            (split, join)
        }
    }
}

fn to_graph(tree: &Tree) -> ProcessGraph {
    let mut b = ProcessGraph::builder();
    let s = b.node(NodeKind::Start);
    let (entry, exit) = build(tree, &mut b);
    let e = b.node(NodeKind::End);
    b.edge(s, entry);
    b.edge(exit, e);
    b.build().unwrap()
}

fn interleavings(a: &[String], b: &[String]) -> Vec<Vec<String>> {
    if a.is_empty() || b.is_empty() {
        return vec![[a, b].concat()];
    }
    let mut out = Vec::new();
    for mut rest in interleavings(&a[1..], b) {
        rest.insert(0, a[0].clone());
        out.push(rest);
    }
    for mut rest in interleavings(a, &b[1..]) {
        rest.insert(0, b[0].clone());
        out.push(rest);
    }
    out
}

fn language(tree: &Tree) -> Vec<Vec<String>> {
    match tree {
        Tree::Leaf(l) => vec![vec![l.clone()]],
        Tree::Xor(children) => children.iter().flat_map(language).collect(),
        Tree::Seq(children) | Tree::And(children) => {
            let mut acc = vec![Vec::new()];
            for c in children {
                let lc = language(c);
                let mut next = Vec::new();
                for prefix in &acc {
                    for w in &lc {
                        if matches!(tree, Tree::Seq(_)) {
                            next.push([prefix.as_slice(), w.as_slice()].concat());
                        } else {
                            next.extend(interleavings(prefix, w));
                        }
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            dp[i][j] = if a[i - 1] == b[j - 1] { dp[i - 1][j - 1] + 1 } else { dp[i - 1][j].max(dp[i][j - 1]) };
        }
    }
    dp[a.len()][b.len()]
}

/// Insert/delete distance to the closest word of the model's language.
fn exhaustive_cost(trace: &[String], words: &[Vec<String>]) -> usize {
    words.iter().map(|w| trace.len() + w.len() - 2 * lcs(trace, w)).min().unwrap()
}

/// Compares alignment costs with exhaustive search on `cases` random
/// block-structured models of at most 8 tasks and traces of at most 6
/// events; returns one line per mismatch.
pub fn alignment_mismatches(cases: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for case in 0..cases {
        let mut next = 0;
        let budget = rng.random_range(1..=8);
        let tree = random_tree(&mut rng, budget, &mut next);
        let graph = to_graph(&tree);
        let words = language(&tree);
        let mut alphabet: Vec<String> = (0..next).map(|i| format!("t{i}")).collect();
        alphabet.push("z".into());
        let len = rng.random_range(0..=6);
        let trace: Vec<String> = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())].clone()).collect();
        let expected = exhaustive_cost(&trace, &words);
        match align_trace(&graph, &trace, DEFAULT_STATE_LIMIT) {
            Ok(a) if a.cost as usize == expected => {}
            Ok(a) => out.push(format!("case {case}: cost {} != {expected} for {tree:?} / {trace:?}", a.cost)),
            Err(e) => out.push(format!("case {case}: {e}")),
        }
    }
    out
}

fn log_with(cycle_times: &[i64], starts: &[i64]) -> EventLog {
    let t0 = Utc.with_ymd_and_hms(2022, 5, 2, 8, 0, 0).unwrap();
    let traces = cycle_times
        .iter()
        .zip(starts)
        .enumerate()
        .map(|(i, (&c, &s))| {
            let start = t0 + Duration::seconds(s);
            Trace::new(format!("c{i}"), vec![Event::new("A", start, start + Duration::seconds(c))]).unwrap()
        })
        .collect();
    EventLog::new(traces).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Pads by repeating the cycle time of the latest-starting trace.
fn padded(cts: &[i64], starts: &[i64], n: usize) -> Vec<i64> {
    let latest = (0..cts.len()).max_by_key(|&i| (starts[i], std::cmp::Reverse(i))).unwrap();
    let mut v = cts.to_vec();
    v.resize(n, cts[latest]);
    v
}

/// Compares the cycle-time MAE with the best of all pairings on `cases`
/// random instances of at most 7 traces per log.
pub fn pairing_mismatches(cases: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for case in 0..cases {
        let n_gen = rng.random_range(1..=7);
        let n_ref = if rng.random_bool(0.75) { n_gen } else { rng.random_range(1..=7) };
        let mut draw = |n: usize| -> (Vec<i64>, Vec<i64>) {
            let cts = (0..n).map(|_| rng.random_range(0..5000)).collect();
            let mut starts: Vec<i64> = (0..n as i64).map(|i| i * 3600).collect();
            starts.reverse();
            (cts, starts)
        };
        let (gc, gs) = draw(n_gen);
        let (rc, rs) = draw(n_ref);
        let n = n_gen.max(n_ref);
        let (g, r) = (padded(&gc, &gs, n), padded(&rc, &rs, n));
        let best = permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| (g[i] - r[j]).abs()).sum::<i64>())
            .min()
            .unwrap();
        let expected = best as f64 / n as f64;
        let got = cycle_time_mae(&log_with(&gc, &gs), &log_with(&rc, &rs)).unwrap().mae_secs;
        if got != expected {
            out.push(format!("case {case}: {got} != {expected}"));
        }
    }
    out
}
