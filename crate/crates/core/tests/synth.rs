mod common;

use proptest::prelude::*;
use sncv_core::dataset::{positive_rate, ClassScheme, Dataset};
use sncv_core::synth::{
    apply_grader_noise, boundary_noise_rate, branched_means, flip_to_adjacent, identity_confusion, reference_role_noise,
    GraderPool, GraderProfile, GraderRole, PopulationConfig,
};
use sncv_core::trainer::{train, Hyperparams};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn gsr() -> ClassScheme {
    ClassScheme::gsr()
}

fn uniform_priors() -> PopulationConfig {
    PopulationConfig {
        class_priors: vec![0.25; 4],
        ..PopulationConfig::reference()
    }
}

fn profile(id: &str, role: GraderRole, confusion: Vec<Vec<f64>>) -> GraderProfile {
    GraderProfile {
        grader_id: id.into(),
        role,
        confusion,
        workload_weight: 1.0,
    }
}

#[test]
fn default_population_matches_the_referable_share() {
    let d = common::population(20_000, 1, "ex", &PopulationConfig::default());
    let rate = positive_rate(&d).unwrap();
    assert!((rate - 0.246).abs() <= 0.01, "positive rate {rate}");
    assert!(d.iter().all(|e| e.true_label == Some(e.label)));
}

#[test]
fn generation_is_deterministic() {
    let base = PopulationConfig::reference();
    let a = common::population(500, 9, "ex", &base);
    assert_eq!(a, common::population(500, 9, "ex", &base));
    assert_ne!(a, common::population(500, 10, "ex", &base));
    let pool = GraderPool::reference(&gsr());
    assert_eq!(
        apply_grader_noise(&a, &pool, 4).unwrap(),
        apply_grader_noise(&a, &pool, 4).unwrap()
    );
}

#[test]
fn tight_clusters_are_learned_almost_perfectly() {
    // Auto-generated means scale with the spread, so fix them explicitly.
    let base = PopulationConfig {
        class_means: Some(branched_means(12, 1.0)),
        class_spread: 0.05,
        ..PopulationConfig::default()
    };
    let d = common::population(2000, 2, "ex", &base);
    let tune = common::population(500, 3, "tune", &base);
    let m = train(&d, &tune, &Hyperparams::default()).unwrap();
    assert!(m.meta.tune_auc_at_stop > 0.99);
}

#[test]
fn identity_pool_keeps_labels() {
    let d = common::population(3000, 5, "ex", &PopulationConfig::reference());
    let noisy = apply_grader_noise(&d, &GraderPool::noiseless(&gsr()), 6).unwrap();
    assert!(noisy.iter().all(|e| e.label == e.true_label.unwrap() && e.grader_id.is_some()));
    assert_eq!(boundary_noise_rate(&noisy).unwrap(), 0.0);
}

fn empirical_confusion(d: &Dataset<f64>, grader: &str) -> (Vec<Vec<f64>>, usize) {
    let mut counts = vec![vec![0usize; 4]; 4];
    let mut n = 0;
    for e in d.iter().filter(|e| e.grader_id.as_deref() == Some(grader)) {
        counts[e.true_label.unwrap()][e.label] += 1;
        n += 1;
    }
    let rows = counts
        .iter()
        .map(|r| {
            let t: usize = r.iter().sum();
            r.iter().map(|&c| c as f64 / t as f64).collect()
        })
        .collect();
    (rows, n)
}

#[test]
fn per_grader_confusion_converges_to_the_configured_matrix() {
    let s = gsr();
    let pool = GraderPool::new(
        vec![
            profile("a", GraderRole::GlaucomaSpecialist, flip_to_adjacent(4, 0.1)),
            profile("b", GraderRole::TraineeFellow, reference_role_noise(GraderRole::TraineeFellow).confusion(&s)),
            profile(
                "c",
                GraderRole::Optometrist,
                vec![
                    vec![0.4, 0.3, 0.2, 0.1],
                    vec![0.1, 0.6, 0.3, 0.0],
                    vec![0.0, 0.5, 0.5, 0.0],
                    vec![0.25, 0.25, 0.25, 0.25],
                ],
            ),
        ],
        4,
    )
    .unwrap();
    let d = common::population(60_000, 7, "ex", &uniform_priors());
    let noisy = apply_grader_noise(&d, &pool, 8).unwrap();
    for g in &pool.graders {
        let (emp, n) = empirical_confusion(&noisy, &g.grader_id);
        assert!(n >= 5000, "grader {} labelled {n}", g.grader_id);
        let worst = emp
            .iter()
            .flatten()
            .zip(g.confusion.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.03, "grader {}: max deviation {worst}", g.grader_id);
    }
}

#[test]
fn marginal_noise_matches_the_weighted_crossing_rate() {
    let s = gsr();
    let base = PopulationConfig::reference();
    let mut pool = GraderPool::reference(&s);
    // Uneven workloads make the weighting matter.
    for (i, g) in pool.graders.iter_mut().enumerate() {
        g.workload_weight = 1.0 + (i % 5) as f64;
    }
    let d = common::population(20_000, 11, "ex", &base);
    let noisy = apply_grader_noise(&d, &pool, 12).unwrap();
    let expected: f64 = base
        .class_priors
        .iter()
        .enumerate()
        .map(|(c, p)| p * pool.expected_crossing_rate(&s, c))
        .sum();
    let observed = boundary_noise_rate(&noisy).unwrap();
    assert!((observed - expected).abs() < 0.01, "observed {observed}, expected {expected}");
}

#[test]
fn uniform_confusion_row_gives_uniform_labels() {
    let mut confusion = identity_confusion(4);
    confusion[1] = vec![0.25; 4];
    let pool = GraderPool::new(vec![profile("u", GraderRole::Ophthalmologist, confusion)], 4).unwrap();
    let base = PopulationConfig {
        class_priors: vec![0.0, 1.0, 0.0, 0.0],
        ..PopulationConfig::reference()
    };
    let noisy = apply_grader_noise(&common::population(5000, 13, "ex", &base), &pool, 14).unwrap();
    let mut counts = [0f64; 4];
    for e in noisy.iter() {
        counts[e.label] += 1.0;
    }
    let stat: f64 = counts.iter().map(|c| (c - 1250.0).powi(2) / 1250.0).sum();
    let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat}, p = {p}");
}

#[test]
fn empty_pool_is_rejected() {
    assert_eq!(GraderPool::new(vec![], 4).unwrap_err().code(), "empty-pool");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noise_leaves_features_and_truth_alone(seed: u64, n in 1usize..400) {
        let d = common::population(n, seed, "ex", &PopulationConfig::reference());
        let noisy = apply_grader_noise(&d, &GraderPool::reference(&gsr()), seed).unwrap();
        prop_assert_eq!(noisy.len(), d.len());
        for (a, b) in d.iter().zip(noisy.iter()) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert_eq!(&a.features, &b.features);
            prop_assert_eq!(a.true_label, b.true_label);
        }
    }
}
