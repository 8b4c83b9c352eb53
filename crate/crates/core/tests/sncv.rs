mod common;

use std::collections::HashSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use sncv_core::dataset::{split_random, ClassScheme, Dataset, Fold};
use sncv_core::seed::derive_seed;
use sncv_core::sncv::{
    cross_fold_score, qs_histogram, quality_score, select_lowest_stratified, select_ncv, select_stratified,
    CrossFold, ScoredDataset,
};
use sncv_core::synth::{apply_grader_noise, branched_means, GraderPool, PopulationConfig, RoleNoise};
use sncv_core::trainer::Hyperparams;

fn ids(ids: &[String]) -> HashSet<&str> {
    ids.iter().map(String::as_str).collect()
}

/// Boundary side of the argmax, ties to the lowest index, by hand.
fn argmax_side(p: &[f64], s: &ClassScheme) -> bool {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    s.is_positive(best)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quality_scores_avoid_the_gap_and_carry_the_right_sign(
        raw in prop::collection::vec(0.0f64..1.0, 4),
        label in 0usize..4,
    ) {
        let total: f64 = raw.iter().sum::<f64>() + 4e-3;
        let p: Vec<f64> = raw.iter().map(|v| (v + 1e-3) / total).collect();
        let s = ClassScheme::gsr();
        let qs = quality_score(&p, label, &s).unwrap();
        prop_assert!(qs.abs() >= 0.25 - 1e-12 && qs.abs() <= 1.0);
        prop_assert_eq!(qs > 0.0, argmax_side(&p, &s) == s.is_positive(label));
        prop_assert_eq!(qs.abs(), p.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn stratified_quota_and_containment(n in 20usize..300, seed: u64, k1 in 1usize..300, k2 in 1usize..300) {
        let scored = common::random_scored(&ClassScheme::gsr(), n, seed);
        let (k1, k2) = ((k1 - 1) % n + 1, (k2 - 1) % n + 1);
        let (lo, hi) = (k1.min(k2), k1.max(k2));
        let a = select_stratified(&scored, lo).unwrap();
        let b = select_stratified(&scored, hi).unwrap();
        for r in [&a, &b] {
            prop_assert_eq!(r.n_positive_selected + r.n_negative_selected, r.selected_ids.len());
            prop_assert!(r.selected_ids.len() <= r.k_requested.unwrap());
            let quota = (r.tau_used * r.k_requested.unwrap() as f64).round() as usize;
            let n_pos = scored.examples().iter().filter(|e| e.label >= 2).count();
            prop_assert_eq!(r.n_positive_selected, quota.min(n_pos));
        }
        // Containment holds per class, so it holds for the union.
        prop_assert!(ids(&a.selected_ids).is_subset(&ids(&b.selected_ids)));
    }

    #[test]
    fn lowest_and_highest_halves_are_disjoint(n in 4usize..300, seed: u64, k in 1usize..150) {
        let scored = common::random_scored(&ClassScheme::gsr(), n, seed);
        let k = (k - 1) % (n / 2) + 1;
        let hi = select_stratified(&scored, k).unwrap();
        let lo = select_lowest_stratified(&scored, k).unwrap();
        // Rounding of the quota can exceed half of a small class.
        let n_pos = scored.examples().iter().filter(|e| e.label >= 2).count();
        prop_assume!(2 * hi.n_positive_requested <= n_pos);
        prop_assume!(2 * hi.n_negative_requested <= n - n_pos);
        prop_assert!(ids(&hi.selected_ids).is_disjoint(&ids(&lo.selected_ids)));
        prop_assert_eq!(hi.n_positive_selected, lo.n_positive_selected);
    }

    #[test]
    fn ncv_is_the_positive_score_filter(n in 1usize..300, seed: u64) {
        let scored = common::random_scored(&ClassScheme::gsr(), n, seed);
        let sel = select_ncv(&scored);
        let direct: HashSet<&str> = scored
            .examples()
            .iter()
            .filter(|e| e.quality_score.unwrap() > 0.0)
            .map(|e| e.id.as_str())
            .collect();
        prop_assert_eq!(ids(&sel.selected_ids), direct);
    }

    #[test]
    fn histogram_gap_is_empty(n in 1usize..300, seed: u64) {
        let scored = common::random_scored(&ClassScheme::gsr(), n, seed);
        let h = qs_histogram(&scored, 0.05).unwrap();
        prop_assert_eq!(h.mass_within(-0.25, 0.25), 0);
        let total: usize = h.bins.iter().map(|b| b.count_nonreferable + b.count_referable).sum();
        prop_assert_eq!(total, n);
    }
}

#[test]
fn thousand_example_quota_matches_the_worked_split() {
    let s = ClassScheme::gsr();
    // 236 labels on the referable side, the rest below it.
    let labels: Vec<usize> = (0..1000).map(|i| if i < 236 { 2 + i % 2 } else { i % 2 }).collect();
    let probs = (0..1000).map(|_| vec![0.7, 0.1, 0.1, 0.1]).collect();
    let scored = common::scored_from(&s, &labels, probs);
    let r = select_stratified(&scored, 1000).unwrap();
    assert_eq!((r.n_positive_selected, r.n_negative_selected), (236, 764));
    let half = select_stratified(&scored, 500).unwrap();
    assert_eq!((half.n_positive_selected, half.n_negative_selected), (118, 382));
}

fn hp() -> Hyperparams {
    Hyperparams {
        max_epochs: 25,
        ..Default::default()
    }
}

/// Reference priors with well-separated class means, so that disagreement
/// with the opposite fold comes from label noise rather than class overlap.
fn separated(spread: f64) -> PopulationConfig {
    PopulationConfig {
        class_means: Some(branched_means(12, spread)),
        ..PopulationConfig::reference()
    }
}

fn noisy_world(rate: f64, n: usize, seed: u64) -> (Dataset<f64>, Dataset<f64>) {
    let pool = GraderPool::from_role_noise(&ClassScheme::gsr(), |_| RoleNoise {
        negative_near: rate,
        positive_near: rate,
        far_factor: 1.0,
        within_side: 0.0,
    });
    let base = separated(3.0);
    let data = apply_grader_noise(&common::population(n, seed, "ex", &base), &pool, seed).unwrap();
    let tune = apply_grader_noise(&common::population(2000, seed + 1, "tune", &base), &pool, seed + 1).unwrap();
    (data, tune)
}

fn thirty_percent() -> &'static (Dataset<f64>, CrossFold<f64>) {
    static CELL: OnceLock<(Dataset<f64>, CrossFold<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (data, tune) = noisy_world(0.3, 6000, 31);
        let cf = cross_fold_score(&data, &tune, &hp(), 32).unwrap();
        (data, cf)
    })
}

fn noisy(scored: &ScoredDataset<f64>, i: usize) -> bool {
    let e = &scored.examples()[i];
    e.label != e.true_label.unwrap()
}

#[test]
fn lowest_scores_concentrate_label_noise() {
    let (_, cf) = thirty_percent();
    let scored = &cf.scored;
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored.score(a).total_cmp(&scored.score(b)));
    let decile = &order[..scored.len() / 10];
    let frac = decile.iter().filter(|&&i| noisy(scored, i)).count() as f64 / decile.len() as f64;
    assert!(frac >= 0.7, "noisy share of bottom decile {frac}");

    let marginal = (0..scored.len()).filter(|&i| noisy(scored, i)).count() as f64 / scored.len() as f64;
    let low = select_lowest_stratified(scored, scored.len() / 10).unwrap();
    let picked = ids(&low.selected_ids);
    let idx: Vec<usize> = (0..scored.len())
        .filter(|&i| picked.contains(scored.examples()[i].id.as_str()))
        .collect();
    let band = idx.iter().filter(|&&i| noisy(scored, i)).count() as f64 / idx.len() as f64;
    assert!(band >= 2.0 * marginal, "band {band} vs marginal {marginal}");
}

#[test]
fn scores_come_from_the_opposite_fold() {
    let (data, cf) = thirty_percent();
    let (d1, _) = split_random(data, derive_seed(32, "split")).unwrap();
    let in_d1: HashSet<&str> = d1.iter().map(|e| e.id.as_str()).collect();
    let scored = &cf.scored;
    assert_eq!(scored.len(), data.len());
    for (e, p) in scored.examples().iter().zip(scored.probabilities()) {
        let fold = e.fold.unwrap();
        assert_eq!(fold == Fold::D1, in_d1.contains(e.id.as_str()));
        assert_eq!(&cf.scorer_for(fold).predict(&e.features).unwrap(), p);
        let qs = quality_score(p, e.label, scored.scheme()).unwrap();
        assert_eq!(e.quality_score.unwrap(), qs);
    }
    let half = data.len() / 2;
    assert_eq!(scored.examples().iter().filter(|e| e.fold == Some(Fold::D1)).count(), half);
}

#[test]
fn scoring_is_deterministic() {
    let (data, tune) = noisy_world(0.1, 600, 41);
    let a = cross_fold_score(&data, &tune, &hp(), 5).unwrap();
    let b = cross_fold_score(&data, &tune, &hp(), 5).unwrap();
    assert_eq!(a.scored, b.scored);
}

#[test]
fn noiseless_separable_set_scores_positive() {
    let base = separated(4.0);
    let data = common::population(2000, 51, "ex", &base);
    let tune = common::population(500, 52, "tune", &base);
    // Tune AUC saturates within an epoch here; train on to full confidence.
    let full = Hyperparams {
        max_epochs: 40,
        patience: 40,
        ..Default::default()
    };
    let cf = cross_fold_score(&data, &tune, &full, 53).unwrap();
    assert!(cf.scored.scores().iter().all(|&q| q > 0.0));
    let h = qs_histogram(&cf.scored, 0.05).unwrap();
    assert!(h.mass_within(0.8, 1.0) as f64 >= 0.95 * data.len() as f64);
    assert_eq!(select_ncv(&cf.scored).n_selected, data.len());
}

#[test]
fn reference_noise_skews_ncv_and_the_histogram() {
    let pool = GraderPool::reference(&ClassScheme::gsr());
    let base = PopulationConfig::reference();
    let data = apply_grader_noise(&common::population(8000, 61, "ex", &base), &pool, 61).unwrap();
    let tune = apply_grader_noise(&common::population(2000, 62, "tune", &base), &pool, 62).unwrap();
    let cf = cross_fold_score(&data, &tune, &hp(), 63).unwrap();
    let ncv = select_ncv(&cf.scored);
    assert!(ncv.positive_rate() < ncv.tau_used, "{} vs {}", ncv.positive_rate(), ncv.tau_used);

    let h = qs_histogram(&cf.scored, 0.05).unwrap();
    let side = |f: fn(&sncv_core::sncv::HistogramBin) -> usize| {
        let top: usize = h.bins.iter().filter(|b| b.bin_lo >= 0.9 - 1e-9).map(f).sum();
        let all: usize = h.bins.iter().map(f).sum();
        top as f64 / all as f64
    };
    let non = side(|b| b.count_nonreferable);
    let refr = side(|b| b.count_referable);
    assert!(non > 2.0 * refr, "top-bin share {non} vs {refr}");
}
