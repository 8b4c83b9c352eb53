#![allow(dead_code)]

use rand::Rng;
use sncv_core::dataset::{ClassScheme, Dataset, Example, Fold};
use sncv_core::seed::rng_from;
use sncv_core::sncv::{quality_score, ScoredDataset};
use sncv_core::synth::{generate_population, PopulationConfig};

/// Random point on the probability simplex over `k` classes.
pub fn random_probs(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Scored set from prepared examples and opposite-fold probabilities; folds
/// alternate by position and quality scores follow from the probabilities.
pub fn scored_of(scheme: &ClassScheme, examples: Vec<Example<f64>>, probs: Vec<Vec<f64>>) -> ScoredDataset<f64> {
    let examples = examples
        .into_iter()
        .zip(&probs)
        .enumerate()
        .map(|(i, (mut e, p))| {
            e.fold = Some(if i % 2 == 0 { Fold::D1 } else { Fold::D2 });
            e.quality_score = Some(quality_score(p, e.label, scheme).unwrap());
            e
        })
        .collect();
    let d = Dataset::new(scheme.clone(), 1, examples).unwrap();
    ScoredDataset::new(d, probs).unwrap()
}

/// Scored set from explicit labels; ids are `x000000`, `x000001`, ...
pub fn scored_from(scheme: &ClassScheme, labels: &[usize], probs: Vec<Vec<f64>>) -> ScoredDataset<f64> {
    let examples = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| Example::new(format!("x{i:06}"), vec![0.0], l))
        .collect();
    scored_of(scheme, examples, probs)
}

/// Probability vector putting `p` on `class` and the rest evenly elsewhere.
pub fn peaked(k: usize, class: usize, p: f64) -> Vec<f64> {
    (0..k).map(|j| if j == class { p } else { (1.0 - p) / (k - 1) as f64 }).collect()
}

/// Random scored set of size `n` under `scheme`.
pub fn random_scored(scheme: &ClassScheme, n: usize, seed: u64) -> ScoredDataset<f64> {
    let mut rng = rng_from(seed);
    let k = scheme.num_classes();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let probs = (0..n).map(|_| random_probs(&mut rng, k)).collect();
    scored_from(scheme, &labels, probs)
}

/// Clean synthetic population of size `n`.
pub fn population(n: usize, seed: u64, prefix: &str, base: &PopulationConfig) -> Dataset<f64> {
    let cfg = PopulationConfig {
        n,
        seed,
        id_prefix: prefix.into(),
        ..base.clone()
    };
    generate_population(&cfg, &ClassScheme::gsr()).unwrap()
}
