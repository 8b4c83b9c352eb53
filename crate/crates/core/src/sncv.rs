//! Stratified noisy cross-validation.
//!
//! Each example gets a quality score from the model trained on the opposite
//! half of a random split: the max softmax probability, signed negative when
//! the predicted class and the observed label fall on different sides of the
//! referral boundary. Selection then ranks positive-labeled and
//! negative-labeled examples separately and keeps the observed positive rate.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{self, split_random, ClassScheme, Dataset, Example, Fold};
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};
use crate::seed::derive_seed;
use crate::trainer::{train, Hyperparams, Model};

/// Smallest fold a model is trained on by default.
pub const MIN_TRAINABLE_SIZE: usize = 100;

fn check_probabilities<T: Scalar>(probs: &[T], k: usize) -> Result<()> {
    if probs.len() != k {
        return Err(Error::InvalidProbabilities(format!(
            "{} entries for {k} classes",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
        return Err(Error::InvalidProbabilities("entries must be finite and non-negative".into()));
    }
    let total: T = probs.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Signed confidence of `probs` against the observed `label`: `+max p` when
/// the argmax class and the label sit on the same side of the boundary,
/// `-max p` otherwise. Argmax ties go to the lowest class index.
pub fn quality_score<T: Scalar>(probs: &[T], label: usize, scheme: &ClassScheme) -> Result<T> {
    let k = scheme.num_classes();
    check_probabilities(probs, k)?;
    if label >= k {
        return Err(Error::LabelOutOfRange {
            row: 0,
            label,
            num_classes: k,
        });
    }
    let i = argmax(probs);
    let p = probs[i];
    Ok(if scheme.is_positive(i) == scheme.is_positive(label) {
        p
    } else {
        -p
    })
}

/// Dataset with a fold and quality score on every example, plus the
/// opposite-fold predicted distribution behind each score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset<T> {
    dataset: Dataset<T>,
    probabilities: Vec<Vec<T>>,
}

impl<T: Scalar> ScoredDataset<T> {
    /// Validates that scores and probabilities agree with the scoring rule.
    pub fn new(dataset: Dataset<T>, probabilities: Vec<Vec<T>>) -> Result<Self> {
        if probabilities.len() != dataset.len() {
            return Err(Error::LengthMismatch {
                left: dataset.len(),
                right: probabilities.len(),
            });
        }
        for (e, p) in dataset.iter().zip(&probabilities) {
            let expected = quality_score(p, e.label, dataset.scheme())?;
            match (e.fold, e.quality_score) {
                (Some(_), Some(qs)) if qs == expected => {}
                (Some(_), Some(qs)) => {
                    return Err(Error::InvalidDataset(format!(
                        "example {}: stored quality score {qs} disagrees with probabilities ({expected})",
                        e.id
                    )))
                }
                _ => {
                    return Err(Error::InvalidDataset(format!(
                        "example {} lacks a fold or quality score",
                        e.id
                    )))
                }
            }
        }
        Ok(ScoredDataset { dataset, probabilities })
    }

    pub fn dataset(&self) -> &Dataset<T> {
        &self.dataset
    }

    pub fn scheme(&self) -> &ClassScheme {
        self.dataset.scheme()
    }

    pub fn probabilities(&self) -> &[Vec<T>] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn examples(&self) -> &[Example<T>] {
        self.dataset.examples()
    }

    pub fn score(&self, i: usize) -> T {
        self.dataset.examples()[i].quality_score.expect("validated on construction")
    }

    pub fn scores(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.score(i)).collect()
    }

    /// Whether the opposite-fold model's argmax class is referable.
    pub fn predicted_positive(&self, i: usize) -> bool {
        self.scheme().is_positive(argmax(&self.probabilities[i]))
    }

    /// Keeps the examples at `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<ScoredDataset<T>> {
        let ex = self.dataset.examples();
        let examples = indices.iter().map(|&i| ex[i].clone()).collect();
        Ok(ScoredDataset {
            dataset: self.dataset.with_examples(examples)?,
            probabilities: indices.iter().map(|&i| self.probabilities[i].clone()).collect(),
        })
    }

    /// CSV with `fold,quality_score,p0..` after the feature columns, plus
    /// the scheme sidecar.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        dataset::write_table(&self.dataset, Some(&self.probabilities), path)?;
        self.scheme().write_json(dataset::scheme_sidecar_path(path))
    }

    pub fn read_csv(path: impl AsRef<Path>, scheme: ClassScheme) -> Result<Self> {
        let (dataset, probs) = dataset::read_table(path.as_ref(), scheme)?;
        let probs = probs.ok_or_else(|| {
            Error::InvalidDataset("scored dataset needs probability columns p0..".into())
        })?;
        ScoredDataset::new(dataset, probs)
    }
}

/// Outcome of cross-fold scoring: the scored set and both fold models.
#[derive(Debug, Clone)]
pub struct CrossFold<T> {
    pub scored: ScoredDataset<T>,
    /// Trained on `D1`; scored the `D2` examples.
    pub model_d1: Model<T>,
    /// Trained on `D2`; scored the `D1` examples.
    pub model_d2: Model<T>,
}

impl<T: Scalar> CrossFold<T> {
    /// The model that produced the score of an example in `fold`.
    pub fn scorer_for(&self, fold: Fold) -> &Model<T> {
        match fold {
            Fold::D1 => &self.model_d2,
            Fold::D2 => &self.model_d1,
        }
    }
}

pub fn cross_fold_score<T: Scalar>(
    dataset: &Dataset<T>,
    tune_set: &Dataset<T>,
    hp: &Hyperparams,
    seed: u64,
) -> Result<CrossFold<T>> {
    cross_fold_score_with(dataset, tune_set, hp, seed, MIN_TRAINABLE_SIZE)
}

/// Splits `dataset` in half, trains one model per half (concurrently, each
/// early-stopped on `tune_set`) and scores every example with the model that
/// did not see it. Output keeps the input example order.
pub fn cross_fold_score_with<T: Scalar>(
    dataset: &Dataset<T>,
    tune_set: &Dataset<T>,
    hp: &Hyperparams,
    seed: u64,
    min_fold_size: usize,
) -> Result<CrossFold<T>> {
    if dataset.len() < 2 * min_fold_size.max(1) {
        return Err(Error::InvalidDataset(format!(
            "cross-fold scoring needs at least {} examples, got {}",
            2 * min_fold_size.max(1),
            dataset.len()
        )));
    }
    let (d1, d2) = split_random(dataset, derive_seed(seed, "split"))?;
    let hp1 = hp.with_seed(derive_seed(seed, "m1"));
    let hp2 = hp.with_seed(derive_seed(seed, "m2"));
    let (m1, m2) = rayon::join(
        || train(&d1, tune_set, &hp1).map_err(|e| e.in_fold("D1")),
        || train(&d2, tune_set, &hp2).map_err(|e| e.in_fold("D2")),
    );
    let (m1, m2) = (m1?, m2?);

    let mut by_id: std::collections::HashMap<&str, (Fold, Vec<T>)> =
        std::collections::HashMap::with_capacity(dataset.len());
    for (fold_set, scorer) in [(&d1, &m2), (&d2, &m1)] {
        let probs = scorer.predict_all(fold_set)?;
        for (e, p) in fold_set.iter().zip(probs) {
            by_id.insert(e.id.as_str(), (e.fold.expect("split sets folds"), p));
        }
    }
    let scheme = dataset.scheme();
    let mut examples = Vec::with_capacity(dataset.len());
    let mut probabilities = Vec::with_capacity(dataset.len());
    for e in dataset.iter() {
        let (fold, p) = by_id.remove(e.id.as_str()).expect("every example lands in a fold");
        let qs = quality_score(&p, e.label, scheme)?;
        examples.push(Example {
            fold: Some(fold),
            quality_score: Some(qs),
            ..e.clone()
        });
        probabilities.push(p);
    }
    Ok(CrossFold {
        scored: ScoredDataset {
            dataset: dataset.with_examples(examples)?,
            probabilities,
        },
        model_d1: m1,
        model_d2: m2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Highest quality scores, stratified by observed label.
    Highest,
    /// Lowest quality scores, stratified by observed label.
    Lowest,
    /// All examples whose opposite-fold prediction agrees at the boundary.
    Ncv,
    /// All examples whose opposite-fold argmax equals the label exactly.
    NcvExact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub mode: SelectionMode,
    #[serde(skip)]
    pub selected_ids: Vec<String>,
    pub k_requested: Option<usize>,
    pub n_selected: usize,
    pub n_positive_selected: usize,
    pub n_negative_selected: usize,
    /// Observed positive label rate of the scored set.
    pub tau_used: f64,
    pub n_positive_requested: usize,
    pub n_negative_requested: usize,
    pub positive_shortfall: usize,
    pub negative_shortfall: usize,
}

impl SelectionResult {
    pub fn positive_rate(&self) -> f64 {
        if self.n_selected == 0 {
            0.0
        } else {
            self.n_positive_selected as f64 / self.n_selected as f64
        }
    }

    pub fn ids_csv(&self) -> String {
        let mut s = String::from("id\n");
        for id in &self.selected_ids {
            s.push_str(id);
            s.push('\n');
        }
        s
    }
}

/// `round(tau * k)` with halves away from zero.
pub fn positive_quota(tau: f64, k: usize) -> usize {
    (tau * k as f64).round() as usize
}

/// Indices of one label side ordered by QS (descending for `highest`), ties
/// by ascending id.
fn ranked_side<T: Scalar>(scored: &ScoredDataset<T>, positive: bool, highest: bool) -> Vec<usize> {
    let ex = scored.examples();
    let scheme = scored.scheme();
    let mut idx: Vec<usize> = (0..ex.len())
        .filter(|&i| scheme.is_positive(ex[i].label) == positive)
        .collect();
    idx.sort_by(|&a, &b| {
        let (qa, qb) = (scored.score(a), scored.score(b));
        let by_score = if highest {
            qb.partial_cmp(&qa)
        } else {
            qa.partial_cmp(&qb)
        }
        .unwrap_or(Ordering::Equal);
        by_score.then_with(|| ex[a].id.cmp(&ex[b].id))
    });
    idx
}

fn select_banded<T: Scalar>(scored: &ScoredDataset<T>, k: usize, highest: bool) -> Result<SelectionResult> {
    let n = scored.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let tau = dataset::positive_rate(scored.dataset())?;
    let pos = ranked_side(scored, true, highest);
    let neg = ranked_side(scored, false, highest);
    let want_pos = positive_quota(tau, k).min(k);
    let want_neg = k - want_pos;
    let take_pos = want_pos.min(pos.len());
    let take_neg = want_neg.min(neg.len());
    let ex = scored.examples();
    let mut chosen: Vec<usize> = pos[..take_pos].iter().chain(&neg[..take_neg]).copied().collect();
    chosen.sort_by(|&a, &b| ex[a].id.cmp(&ex[b].id));
    Ok(SelectionResult {
        mode: if highest {
            SelectionMode::Highest
        } else {
            SelectionMode::Lowest
        },
        selected_ids: chosen.iter().map(|&i| ex[i].id.clone()).collect(),
        k_requested: Some(k),
        n_selected: take_pos + take_neg,
        n_positive_selected: take_pos,
        n_negative_selected: take_neg,
        tau_used: tau,
        n_positive_requested: want_pos,
        n_negative_requested: want_neg,
        positive_shortfall: want_pos - take_pos,
        negative_shortfall: want_neg - take_neg,
    })
}

/// The `round(τk)` highest-QS positive-labeled and `k - round(τk)`
/// highest-QS negative-labeled examples. A short side contributes all it
/// has; the other side is not topped up.
pub fn select_stratified<T: Scalar>(scored: &ScoredDataset<T>, k: usize) -> Result<SelectionResult> {
    select_banded(scored, k, true)
}

/// As [`select_stratified`], ranking ascending by QS.
pub fn select_lowest_stratified<T: Scalar>(scored: &ScoredDataset<T>, k: usize) -> Result<SelectionResult> {
    select_banded(scored, k, false)
}

fn select_filtered<T: Scalar>(
    scored: &ScoredDataset<T>,
    mode: SelectionMode,
    keep: impl Fn(usize) -> bool,
) -> SelectionResult {
    let ex = scored.examples();
    let scheme = scored.scheme();
    let tau = dataset::positive_rate(scored.dataset()).unwrap_or(0.0);
    let chosen: Vec<usize> = (0..ex.len()).filter(|&i| keep(i)).collect();
    let n_pos = chosen.iter().filter(|&&i| scheme.is_positive(ex[i].label)).count();
    let mut ids: Vec<String> = chosen.iter().map(|&i| ex[i].id.clone()).collect();
    ids.sort();
    SelectionResult {
        mode,
        n_selected: ids.len(),
        selected_ids: ids,
        k_requested: None,
        n_positive_selected: n_pos,
        n_negative_selected: chosen.len() - n_pos,
        tau_used: tau,
        n_positive_requested: 0,
        n_negative_requested: 0,
        positive_shortfall: 0,
        negative_shortfall: 0,
    }
}

/// Plain noisy cross-validation: every example with a positive quality
/// score, unstratified.
pub fn select_ncv<T: Scalar>(scored: &ScoredDataset<T>) -> SelectionResult {
    select_filtered(scored, SelectionMode::Ncv, |i| scored.score(i) > T::zero())
}

/// Noisy cross-validation requiring the argmax class to equal the label.
pub fn select_ncv_exact<T: Scalar>(scored: &ScoredDataset<T>) -> SelectionResult {
    select_filtered(scored, SelectionMode::NcvExact, |i| {
        argmax(&scored.probabilities()[i]) == scored.examples()[i].label
    })
}

/// How the final training subset is chosen.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KChoice {
    Fixed(usize),
    /// Fractions of `|D|`; the one with the best tune AUC wins (first on ties).
    Grid(Vec<f64>),
    Ncv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KTrial {
    pub k: usize,
    pub tune_auc: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T> {
    /// Final model trained on the selection.
    pub model: Model<T>,
    pub cross_fold: CrossFold<T>,
    pub selection: SelectionResult,
    pub k_trials: Vec<KTrial>,
}

/// Cross-fold scoring, selection and a final model on the selected subset.
pub fn run_sncv_pipeline<T: Scalar>(
    dataset: &Dataset<T>,
    tune_set: &Dataset<T>,
    k: &KChoice,
    hp: &Hyperparams,
    seed: u64,
) -> Result<PipelineOutput<T>> {
    let cross_fold = cross_fold_score(dataset, tune_set, hp, seed)?;
    finish_pipeline(cross_fold, tune_set, k, hp, seed)
}

/// Selection and final training on an existing cross-fold result.
pub fn finish_pipeline<T: Scalar>(
    cross_fold: CrossFold<T>,
    tune_set: &Dataset<T>,
    k: &KChoice,
    hp: &Hyperparams,
    seed: u64,
) -> Result<PipelineOutput<T>> {
    let scored = &cross_fold.scored;
    let n = scored.len();
    let final_hp = hp.with_seed(derive_seed(seed, "m3"));
    let fit = |sel: &SelectionResult| -> Result<Model<T>> {
        let subset = scored.dataset().select_ids(sel.selected_ids.iter().map(String::as_str));
        train(&subset, tune_set, &final_hp)
    };
    let (model, selection, k_trials) = match k {
        KChoice::Ncv => {
            let sel = select_ncv(scored);
            (fit(&sel)?, sel, Vec::new())
        }
        KChoice::Fixed(k) => {
            let sel = select_stratified(scored, *k)?;
            let model = fit(&sel)?;
            let trial = KTrial {
                k: *k,
                tune_auc: model.meta.tune_auc_at_stop,
            };
            (model, sel, vec![trial])
        }
        KChoice::Grid(fractions) => {
            if fractions.is_empty() {
                return Err(Error::InvalidConfig("empty k grid".into()));
            }
            let ks: Vec<usize> = fractions
                .iter()
                .map(|&f| ((f * n as f64).round() as usize).clamp(1, n))
                .collect();
            let fitted: Vec<(SelectionResult, Model<T>)> = ks
                .par_iter()
                .map(|&k| {
                    let sel = select_stratified(scored, k)?;
                    let model = fit(&sel)?;
                    Ok((sel, model))
                })
                .collect::<Result<_>>()?;
            let trials: Vec<KTrial> = ks
                .iter()
                .zip(&fitted)
                .map(|(&k, (_, m))| KTrial {
                    k,
                    tune_auc: m.meta.tune_auc_at_stop,
                })
                .collect();
            let best = (0..trials.len())
                .fold(0, |b, i| if trials[i].tune_auc > trials[b].tune_auc { i } else { b });
            let (sel, model) = fitted.into_iter().nth(best).expect("non-empty grid");
            (model, sel, trials)
        }
    };
    Ok(PipelineOutput {
        model,
        cross_fold,
        selection,
        k_trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count_nonreferable: usize,
    pub count_referable: usize,
}

/// Quality-score counts over `[-1, 1]`, split by binarized observed label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsHistogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

impl QsHistogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count_nonreferable,count_referable\n");
        for b in &self.bins {
            s.push_str(&format!(
                "{},{},{},{}\n",
                b.bin_lo, b.bin_hi, b.count_nonreferable, b.count_referable
            ));
        }
        s
    }

    /// Counts of scores strictly inside `(lo, hi)`, by binning bounds.
    pub fn mass_within(&self, lo: f64, hi: f64) -> usize {
        self.bins
            .iter()
            .filter(|b| b.bin_lo >= lo && b.bin_hi <= hi)
            .map(|b| b.count_nonreferable + b.count_referable)
            .sum()
    }
}

pub fn qs_histogram<T: Scalar>(scored: &ScoredDataset<T>, bin_width: f64) -> Result<QsHistogram> {
    if !(bin_width > 0.0 && bin_width <= 2.0) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width} outside (0, 2]")));
    }
    let n_bins = (2.0 / bin_width - 1e-9).ceil() as usize;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            bin_lo: -1.0 + i as f64 * bin_width,
            bin_hi: (-1.0 + (i + 1) as f64 * bin_width).min(1.0),
            count_nonreferable: 0,
            count_referable: 0,
        })
        .collect();
    let scheme = scored.scheme();
    for (i, e) in scored.examples().iter().enumerate() {
        let q = scored.score(i).as_f64();
        let b = (((q + 1.0) / bin_width).floor() as usize).min(n_bins - 1);
        if scheme.is_positive(e.label) {
            bins[b].count_referable += 1;
        } else {
            bins[b].count_nonreferable += 1;
        }
    }
    Ok(QsHistogram { bin_width, bins })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gsr() -> ClassScheme {
        ClassScheme::gsr()
    }

    #[test]
    fn worked_disagreement_examples() {
        let a = [0.02, 0.01, 0.95, 0.02];
        assert_eq!(quality_score(&a, 0, &gsr()).unwrap(), -0.95);
        let b = [0.2, 0.1, 0.6, 0.1];
        assert_eq!(quality_score(&b, 0, &gsr()).unwrap(), -0.6);
    }

    #[test]
    fn same_side_disagreement_scores_positive() {
        assert_eq!(quality_score(&[0.4, 0.3, 0.2, 0.1], 1, &gsr()).unwrap(), 0.4);
        assert_eq!(quality_score(&[0.25f64; 4], 1, &gsr()).unwrap(), 0.25);
        assert_eq!(quality_score(&[0.25f64; 4], 3, &gsr()).unwrap(), -0.25);
    }

    #[test]
    fn invalid_probability_vectors() {
        assert!(quality_score(&[0.5, 0.5, 0.5, 0.5], 0, &gsr()).is_err());
        assert!(quality_score(&[1.2, -0.2, 0.0, 0.0], 0, &gsr()).is_err());
        assert!(quality_score(&[0.5, 0.5], 0, &gsr()).is_err());
        assert!(quality_score(&[0.25f64; 4], 4, &gsr()).is_err());
    }

    /// 10 examples, labels 2 positives / 8 negatives with hand-set scores.
    fn hand_scored() -> ScoredDataset<f64> {
        let rows: [(usize, [f64; 4]); 10] = [
            (2, [0.1, 0.1, 0.7, 0.1]),
            (3, [0.5, 0.1, 0.2, 0.2]),
            (0, [0.9, 0.05, 0.03, 0.02]),
            (0, [0.6, 0.2, 0.1, 0.1]),
            (1, [0.3, 0.4, 0.2, 0.1]),
            (0, [0.1, 0.1, 0.8, 0.0]),
            (1, [0.35, 0.35, 0.2, 0.1]),
            (0, [0.7, 0.1, 0.1, 0.1]),
            (1, [0.2, 0.2, 0.3, 0.3]),
            (0, [0.95, 0.05, 0.0, 0.0]),
        ];
        let examples: Vec<Example<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, (label, p))| {
                let mut e = Example::new(format!("e{i}"), vec![i as f64], *label);
                e.fold = Some(if i % 2 == 0 { Fold::D1 } else { Fold::D2 });
                e.quality_score = Some(quality_score(p, *label, &gsr()).unwrap());
                e
            })
            .collect();
        let d = Dataset::new(gsr(), 1, examples).unwrap();
        ScoredDataset::new(d, rows.iter().map(|(_, p)| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn stratified_ranking_on_hand_set() {
        let s = hand_scored();
        // tau = 0.2 here; k = 5 → one positive (e0: +0.7) and four negatives.
        let sel = select_stratified(&s, 5).unwrap();
        assert_eq!(sel.n_positive_selected, 1);
        assert_eq!(sel.selected_ids, vec!["e0", "e2", "e3", "e7", "e9"]);
        let low = select_lowest_stratified(&s, 5).unwrap();
        assert_eq!(low.selected_ids, vec!["e1", "e4", "e5", "e6", "e8"]);
    }

    #[test]
    fn select_all_and_range_errors() {
        let s = hand_scored();
        let all = select_stratified(&s, 10).unwrap();
        assert_eq!((all.n_positive_selected, all.n_negative_selected), (2, 8));
        assert_eq!(select_stratified(&s, 0).unwrap_err().code(), "k-out-of-range");
        assert_eq!(select_stratified(&s, 11).unwrap_err().code(), "k-out-of-range");
    }

    #[test]
    fn ncv_keeps_positive_scores() {
        let s = hand_scored();
        let sel = select_ncv(&s);
        let direct: Vec<String> = s
            .examples()
            .iter()
            .filter(|e| e.quality_score.unwrap() > 0.0)
            .map(|e| e.id.clone())
            .collect();
        assert_eq!(sel.selected_ids, direct);
        assert_eq!(sel.k_requested, None);
        // e6 agrees at the boundary but not on the exact tier
        let exact = select_ncv_exact(&s);
        assert_eq!(sel.n_selected, 7);
        assert_eq!(exact.n_selected, 6);
        assert!(!exact.selected_ids.contains(&"e6".to_string()));
    }

    #[test]
    fn scored_dataset_rejects_inconsistent_scores() {
        let s = hand_scored();
        let mut ex = s.examples().to_vec();
        ex[0].quality_score = Some(-0.7);
        let d = s.dataset().with_examples(ex).unwrap();
        assert!(ScoredDataset::new(d, s.probabilities().to_vec()).is_err());
    }

    #[test]
    fn histogram_has_empty_gap() {
        let s = hand_scored();
        let h = qs_histogram(&s, 0.05).unwrap();
        assert_eq!(h.bins.len(), 40);
        assert_eq!(h.mass_within(-0.25 + 1e-9, 0.25 - 1e-9), 0);
        let total: usize = h.bins.iter().map(|b| b.count_referable + b.count_nonreferable).sum();
        assert_eq!(total, 10);
        assert!(h.to_csv().starts_with("bin_lo,bin_hi,count_nonreferable,count_referable\n"));
        assert!(qs_histogram(&s, 0.0).is_err());
    }

    #[test]
    fn quota_rounds_half_away_from_zero() {
        assert_eq!(positive_quota(0.236, 1000), 236);
        assert_eq!(positive_quota(0.25, 10), 3);
        assert_eq!(positive_quota(0.25, 4), 1);
    }
}
