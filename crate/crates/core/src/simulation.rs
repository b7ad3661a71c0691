//! Sequence generation from a stochastic process model and control-flow log
//! similarity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::{hungarian, normalized_levenshtein};
use crate::graph::StochasticProcessModel;
use crate::semantics::Marking;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("produced only {produced} of {requested} sequences within {attempts} attempts")]
    Budget { produced: usize, requested: usize, attempts: usize },
    #[error("sequence bags must be non-empty")]
    EmptyBag,
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Plays the token game `n` times. XOR branches follow the edge
/// probabilities and the next task is drawn uniformly among the enabled
/// ones. Runs that deadlock or exceed `max_len` are discarded; at most `10n`
/// runs are attempted.
pub fn generate_sequences(
    model: &StochasticProcessModel,
    n: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, SimulationError> {
    if n == 0 {
        return Err(SimulationError::Argument("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bag = Vec::with_capacity(n);
    let budget = 10 * n;
    let mut attempts = 0;
    while bag.len() < n && attempts < budget {
        attempts += 1;
        if let Some(seq) = one_run(model, max_len, &mut rng) {
            bag.push(seq);
        }
    }
    if bag.len() < n {
        return Err(SimulationError::Budget { produced: bag.len(), requested: n, attempts });
    }
    Ok(bag)
}

fn one_run(model: &StochasticProcessModel, max_len: usize, rng: &mut ChaCha8Rng) -> Option<Vec<String>> {
    let graph = model.graph();
    let mut marking = Marking::initial(graph, ());
    let mut seq = Vec::new();
    loop {
        match marking.settle(graph).ok()? {
            Some(split) => {
                let options = model.split_probabilities(split);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = None;
                for &(e, p) in &options {
                    acc += p;
                    if p > 0.0 && u < acc {
                        chosen = Some(e);
                        break;
                    }
                }
                // rounding can leave u above the running sum
                let edge = chosen.or_else(|| options.iter().rev().find(|o| o.1 > 0.0).map(|o| o.0))?;
                marking.choose(graph, split, edge);
            }
            None => {
                if marking.completed(graph) {
                    return Some(seq);
                }
                let enabled = marking.enabled_tasks(graph);
                if enabled.is_empty() {
                    return None;
                }
                let task = enabled[rng.random_range(0..enabled.len())];
                marking.fire_task(graph, task, ());
                seq.push(graph.node(task).kind.label().expect("task").to_string());
                if seq.len() > max_len {
                    return None;
                }
            }
        }
    }
}

/// Repeats the bag's members round-robin until it holds `size` sequences.
pub fn pad_round_robin<T: Clone>(bag: &[T], size: usize) -> Vec<T> {
    (0..size.max(bag.len())).map(|i| bag[i % bag.len()].clone()).collect()
}

/// One minus the mean normalised edit distance under the optimal one-to-one
/// pairing of the two bags. The smaller bag is padded round-robin.
pub fn cfls<A: AsRef<str>, B: AsRef<str>>(generated: &[Vec<A>], reference: &[Vec<B>]) -> Result<f64, SimulationError> {
    if generated.is_empty() || reference.is_empty() {
        return Err(SimulationError::EmptyBag);
    }
    let size = generated.len().max(reference.len());
    let g: Vec<Vec<&str>> = generated.iter().map(|s| s.iter().map(AsRef::as_ref).collect()).collect();
    let g = pad_round_robin(&g, size);
    let r: Vec<Vec<&str>> = reference.iter().map(|s| s.iter().map(AsRef::as_ref).collect()).collect();
    let r = pad_round_robin(&r, size);
    let cost: Vec<Vec<f64>> = g.iter().map(|a| r.iter().map(|b| normalized_levenshtein(a, b)).collect()).collect();
    let (_, total) = hungarian(&cost);
    Ok((1.0 - total / size as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeKind, ProcessGraph};
    use std::collections::BTreeMap;

    fn s(x: &[&str]) -> Vec<String> {
        x.iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn linear_model_repeats_its_only_sequence() {
        let mut b = ProcessGraph::builder();
        let st = b.node(NodeKind::Start);
        let a = b.task("A");
        let bb = b.task("B");
        let c = b.task("C");
        let e = b.node(NodeKind::End);
        b.chain(&[st, a, bb, c, e]);
        let m = StochasticProcessModel::equiprobable(b.build().unwrap());
        let bag = generate_sequences(&m, 3, 10, 1).unwrap();
        assert_eq!(bag, vec![s(&["A", "B", "C"]); 3]);
    }

    fn xor_model(p: f64) -> StochasticProcessModel {
        let g = crate::graph::tests::xor_graph();
        let outs = g.outgoing(g.xor_splits()[0]).to_vec();
        StochasticProcessModel::new(g, BTreeMap::from([(outs[0], p), (outs[1], 1.0 - p)])).unwrap()
    }

    #[test]
    fn branch_frequencies_follow_probabilities() {
        let bag = generate_sequences(&xor_model(0.7), 10_000, 10, 42).unwrap();
        let x = bag.iter().filter(|s| s[1] == "X").count() as f64 / 10_000.0;
        assert!((x - 0.7).abs() < 0.02, "{x}");
        let bag = generate_sequences(&xor_model(1.0), 500, 10, 42).unwrap();
        assert!(bag.iter().all(|s| s[1] == "X"));
    }

    #[test]
    fn same_seed_same_bag() {
        let m = xor_model(0.4);
        assert_eq!(generate_sequences(&m, 50, 10, 7).unwrap(), generate_sequences(&m, 50, 10, 7).unwrap());
    }

    #[test]
    fn too_short_max_len_exhausts_budget() {
        let err = generate_sequences(&xor_model(0.5), 5, 2, 0).unwrap_err();
        assert_eq!(err, SimulationError::Budget { produced: 0, requested: 5, attempts: 50 });
    }

    #[test]
    fn cfls_examples() {
        let bag = vec![s(&["A", "B"]), s(&["C"])];
        assert_eq!(cfls(&bag, &bag).unwrap(), 1.0);
        assert_eq!(cfls(&[s(&["A"])], &[s(&["B"])]).unwrap(), 0.0);
        let other = vec![s(&["A", "B"]), s(&["C", "D"])];
        assert!((cfls(&bag, &other).unwrap() - 0.75).abs() < 1e-12);
        assert!((cfls(&other, &bag).unwrap() - 0.75).abs() < 1e-12);
    }
}
