//! Activity embeddings trained so that activities occurring close together
//! in traces get similar vectors.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("need at least two activities, found {0}")]
    Alphabet(usize),
    #[error("embedding dimension must be at least 2")]
    Dimension,
    #[error("activity {0:?} already has an embedding")]
    Duplicate(String),
    #[error("no example trace contains {0:?}")]
    NoExamples(String),
    #[error("activity {0:?} has no embedding; extend the table first")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Largest position gap that still counts as co-occurrence.
    pub window: usize,
    pub negatives_per_positive: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { epochs: 300, learning_rate: 0.05, window: 2, negatives_per_positive: 2 }
    }
}

/// `ceil(sqrt(n)) + 1`.
pub fn default_dim(alphabet_size: usize) -> usize {
    (alphabet_size as f64).sqrt().ceil() as usize + 1
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let n = dot(a, a).sqrt() * dot(b, b).sqrt();
    if n == 0.0 {
        0.0
    } else {
        dot(a, b) / n
    }
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Distinct unordered pairs of different activities at most `window` apart.
pub fn co_occurrences<S: AsRef<str>>(sequences: &[Vec<S>], window: usize) -> BTreeSet<(String, String)> {
    let mut pairs = BTreeSet::new();
    for seq in sequences {
        for i in 0..seq.len() {
            for j in i + 1..seq.len().min(i + window + 1) {
                let (a, b) = (seq[i].as_ref(), seq[j].as_ref());
                if a != b {
                    pairs.insert(unordered(a, b));
                }
            }
        }
    }
    pairs
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect()
}

/// Labelled pairs for one epoch: every positive once plus sampled negatives.
fn epoch_examples(
    positives: &[(String, String)],
    negatives: &[(String, String)],
    fallback: &[String],
    ratio: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(String, String, f64)> {
    let mut out: Vec<(String, String, f64)> = positives.iter().map(|(a, b)| (a.clone(), b.clone(), 1.0)).collect();
    for _ in 0..positives.len() * ratio {
        let pair = if negatives.is_empty() {
            let a = &fallback[rng.random_range(0..fallback.len())];
            let b = &fallback[rng.random_range(0..fallback.len())];
            (a.clone(), b.clone())
        } else {
            negatives[rng.random_range(0..negatives.len())].clone()
        };
        out.push((pair.0, pair.1, 0.0));
    }
    out.shuffle(rng);
    out
}

/// Logistic loss on dot products: co-occurring pairs are pushed towards a
/// positive score, sampled non-co-occurring pairs towards a negative one.
pub fn pretrain_embeddings<S: AsRef<str>>(
    sequences: &[Vec<S>],
    dim: usize,
    seed: u64,
    config: &EmbeddingConfig,
) -> Result<EmbeddingTable, EmbeddingError> {
    let alphabet: BTreeSet<String> = sequences.iter().flatten().map(|a| a.as_ref().to_string()).collect();
    if alphabet.len() < 2 {
        return Err(EmbeddingError::Alphabet(alphabet.len()));
    }
    if dim < 2 {
        return Err(EmbeddingError::Dimension);
    }
    let labels: Vec<String> = alphabet.iter().cloned().collect();
    let positive_set = co_occurrences(sequences, config.window);
    let positives: Vec<(String, String)> = positive_set.iter().cloned().collect();
    let mut negatives = Vec::new();
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let p = unordered(a, b);
            if !positive_set.contains(&p) {
                negatives.push(p);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors: BTreeMap<String, Vec<f64>> =
        labels.iter().map(|l| (l.clone(), random_vector(&mut rng, dim))).collect();
    for _ in 0..config.epochs {
        for (a, b, y) in epoch_examples(&positives, &negatives, &labels, config.negatives_per_positive, &mut rng) {
            if a == b {
                continue;
            }
            let (va, vb) = (vectors[&a].clone(), vectors[&b].clone());
            let g = sigmoid(dot(&va, &vb)) - y;
            for (x, other) in vectors.get_mut(&a).expect("known").iter_mut().zip(&vb) {
                *x -= config.learning_rate * g * other;
            }
            for (x, other) in vectors.get_mut(&b).expect("known").iter_mut().zip(&va) {
                *x -= config.learning_rate * g * other;
            }
        }
    }
    Ok(EmbeddingTable { dim, vectors })
}

impl EmbeddingTable {
    pub fn get(&self, label: &str) -> Result<&[f64], EmbeddingError> {
        self.vectors.get(label).map(Vec::as_slice).ok_or_else(|| EmbeddingError::Unknown(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.vectors.contains_key(label)
    }

    /// Fits a vector for `label` with every existing vector frozen.
    pub fn extend<S: AsRef<str>>(
        &self,
        label: &str,
        examples: &[Vec<S>],
        seed: u64,
        config: &EmbeddingConfig,
    ) -> Result<EmbeddingTable, EmbeddingError> {
        if self.contains(label) {
            return Err(EmbeddingError::Duplicate(label.to_string()));
        }
        if !examples.iter().any(|s| s.iter().any(|a| a.as_ref() == label)) {
            return Err(EmbeddingError::NoExamples(label.to_string()));
        }
        let partners: BTreeSet<String> = co_occurrences(examples, config.window)
            .into_iter()
            .filter_map(|(a, b)| {
                if a == label {
                    Some(b)
                } else if b == label {
                    Some(a)
                } else {
                    None
                }
            })
            .filter(|p| self.contains(p))
            .collect();
        let positives: Vec<(String, String)> = partners.iter().map(|p| (label.to_string(), p.clone())).collect();
        let negatives: Vec<(String, String)> = self
            .vectors
            .keys()
            .filter(|k| !partners.contains(*k))
            .map(|k| (label.to_string(), k.clone()))
            .collect();
        let existing: Vec<String> = self.vectors.keys().cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = random_vector(&mut rng, self.dim);
        for _ in 0..config.epochs {
            let examples = if positives.is_empty() {
                // nothing known co-occurs: keep the vector away from everyone
                negatives.iter().map(|(a, b)| (a.clone(), b.clone(), 0.0)).collect()
            } else {
                epoch_examples(&positives, &negatives, &existing, config.negatives_per_positive, &mut rng)
            };
            for (_, other, y) in examples {
                let Some(other) = self.vectors.get(&other) else { continue };
                let g = sigmoid(dot(&v, other)) - y;
                for (x, o) in v.iter_mut().zip(other) {
                    *x -= config.learning_rate * g * o;
                }
            }
        }
        let mut out = self.clone();
        out.vectors.insert(label.to_string(), v);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> Vec<Vec<&'static str>> {
        let mut seqs = Vec::new();
        for i in 0..30 {
            seqs.push(if i % 2 == 0 { vec!["A", "B", "C", "D"] } else { vec!["A", "B", "E", "D"] });
            seqs.push(vec!["X", "Y", "Z"]);
        }
        seqs
    }

    #[test]
    fn co_occurring_activities_end_up_closer() {
        let t = pretrain_embeddings(&synthetic(), 4, 1, &EmbeddingConfig::default()).unwrap();
        let c = |a: &str, b: &str| cosine(t.get(a).unwrap(), t.get(b).unwrap());
        assert!(c("A", "B") > c("A", "Z"));
        assert!(t.vectors.values().flatten().all(|x| x.is_finite()));
        assert!(t.vectors.values().all(|v| dot(v, v) > 0.0));
    }

    #[test]
    fn same_seed_same_table() {
        let cfg = EmbeddingConfig { epochs: 20, ..Default::default() };
        assert_eq!(pretrain_embeddings(&synthetic(), 3, 4, &cfg), pretrain_embeddings(&synthetic(), 3, 4, &cfg));
    }

    #[test]
    fn default_dim_heuristic() {
        assert_eq!(default_dim(6), 4);
        assert_eq!(default_dim(9), 4);
        assert_eq!(default_dim(10), 5);
    }

    #[test]
    fn extension_keeps_old_vectors_and_rejects_duplicates() {
        let cfg = EmbeddingConfig::default();
        let t = pretrain_embeddings(&synthetic(), 4, 1, &cfg).unwrap();
        let examples = vec![vec!["A", "N", "B"]; 5];
        let t2 = t.extend("N", &examples, 2, &cfg).unwrap();
        for (k, v) in &t.vectors {
            assert_eq!(&t2.vectors[k], v);
        }
        let n = t2.get("N").unwrap();
        let mut cos: Vec<f64> = t.vectors.values().map(|v| cosine(n, v)).collect();
        cos.sort_by(f64::total_cmp);
        let median = cos[cos.len() / 2];
        assert!(cosine(n, t.get("A").unwrap()) > median);
        assert_eq!(t2.extend("N", &examples, 2, &cfg), Err(EmbeddingError::Duplicate("N".into())));
        assert_eq!(t.extend("Q", &examples, 2, &cfg), Err(EmbeddingError::NoExamples("Q".into())));
    }
}
