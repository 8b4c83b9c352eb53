//! Experiment drivers behind `gen`, `bands` and `burden`, usable without
//! going through files.

use rayon::prelude::*;
use serde::Serialize;
use sncv_core::dataset::{sample_fraction, ClassScheme};
use sncv_core::seed::derive_seed;
use sncv_core::sncv::{
    cross_fold_score_with, finish_pipeline, select_lowest_stratified, select_ncv, select_stratified,
    KChoice, KTrial, SelectionResult,
};
use sncv_core::synth::{apply_grader_noise, boundary_noise_rate, generate_population, GraderPool, PopulationConfig};
use sncv_core::trainer::{train, Hyperparams};
use sncv_core::{Dataset64, Model64, ScoredDataset64};

use crate::config::{BurdenConfig, GenConfig};
use crate::error::CliResult;
use crate::report::{evaluate_model, non_inferiority, two_tailed, EvalReport, Scored};

/// A seeded synthetic world: clean population, its noisy-labeled copy and
/// clean tune and test sets drawn from the same distribution.
#[derive(Debug, Clone)]
pub struct World {
    pub population: Dataset64,
    pub train: Dataset64,
    pub tune: Dataset64,
    pub test: Dataset64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldSummary {
    pub n_train: usize,
    pub n_tune: usize,
    pub n_test: usize,
    /// Observed positive label rate of the noisy training set.
    pub tau: f64,
    pub true_positive_rate: f64,
    /// Share of training labels on the wrong side of the boundary.
    pub boundary_noise_rate: f64,
}

pub fn build_world(
    population: &PopulationConfig,
    gen: &GenConfig,
    scheme: &ClassScheme,
    pool: &GraderPool,
    seed: u64,
) -> CliResult<World> {
    let draw = |n: usize, label: &str, prefix: &str| {
        let cfg = PopulationConfig {
            n,
            seed: derive_seed(seed, label),
            id_prefix: prefix.to_string(),
            ..population.clone()
        };
        generate_population::<f64>(&cfg, scheme)
    };
    let pop = draw(population.n, "population", &population.id_prefix)?;
    let train = apply_grader_noise(&pop, pool, derive_seed(seed, "noise"))?;
    Ok(World {
        population: pop,
        train,
        tune: draw(gen.tune_n, "tune", "tune")?,
        test: draw(gen.test_n, "test", "test")?,
    })
}

impl World {
    pub fn summary(&self) -> CliResult<WorldSummary> {
        Ok(WorldSummary {
            n_train: self.train.len(),
            n_tune: self.tune.len(),
            n_test: self.test.len(),
            tau: self.train.positive_rate()?,
            true_positive_rate: self.population.positive_rate()?,
            boundary_noise_rate: boundary_noise_rate(&self.train)?,
        })
    }
}

fn band_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub fraction: f64,
    pub k: usize,
    pub high_tune_auc: f64,
    pub low_tune_auc: f64,
    /// High minus low.
    pub delta: f64,
    pub high_positive_rate: f64,
    pub low_positive_rate: f64,
}

/// Class make-up of the unstratified top and bottom `k` by quality score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionRow {
    pub k: usize,
    pub top_class_shares: Vec<f64>,
    pub top_positive_share: f64,
    pub bottom_class_shares: Vec<f64>,
    pub bottom_positive_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcvPoint {
    pub n_selected: usize,
    pub positive_rate: f64,
    pub tune_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandsReport {
    pub n: usize,
    pub tau: f64,
    pub bands: Vec<BandRow>,
    pub composition: Vec<CompositionRow>,
    pub ncv: NcvPoint,
}

impl BandsReport {
    pub fn band(&self, k: usize) -> Option<&BandRow> {
        self.bands.iter().find(|b| b.k == k)
    }

    pub fn bands_csv(&self) -> String {
        let mut s = String::from("fraction,k,high_tune_auc,low_tune_auc,delta,high_positive_rate,low_positive_rate\n");
        for b in &self.bands {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.fraction, b.k, b.high_tune_auc, b.low_tune_auc, b.delta, b.high_positive_rate, b.low_positive_rate
            ));
        }
        s
    }

    pub fn composition_csv(&self, scheme: &ClassScheme) -> String {
        let names = scheme.class_names();
        let mut s = String::from("k");
        for side in ["top", "bottom"] {
            for n in names {
                s.push_str(&format!(",{side}_{n}"));
            }
            s.push_str(&format!(",{side}_positive"));
        }
        s.push('\n');
        for r in &self.composition {
            s.push_str(&r.k.to_string());
            for (shares, pos) in [
                (&r.top_class_shares, r.top_positive_share),
                (&r.bottom_class_shares, r.bottom_positive_share),
            ] {
                for v in shares {
                    s.push_str(&format!(",{v}"));
                }
                s.push_str(&format!(",{pos}"));
            }
            s.push('\n');
        }
        s
    }
}

fn fit_selection(
    scored: &ScoredDataset64,
    sel: &SelectionResult,
    tune: &Dataset64,
    hp: &Hyperparams,
) -> CliResult<Model64> {
    let subset = scored.dataset().select_ids(sel.selected_ids.iter().map(String::as_str));
    Ok(train(&subset, tune, hp)?)
}

fn composition(scored: &ScoredDataset64, k: usize) -> CompositionRow {
    let ex = scored.examples();
    let scheme = scored.scheme();
    let mut order: Vec<usize> = (0..ex.len()).collect();
    // Descending by score, ties by id.
    order.sort_by(|&a, &b| {
        scored
            .score(b)
            .partial_cmp(&scored.score(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ex[a].id.cmp(&ex[b].id))
    });
    let mut bottom: Vec<usize> = order.clone();
    bottom.sort_by(|&a, &b| {
        scored
            .score(a)
            .partial_cmp(&scored.score(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ex[a].id.cmp(&ex[b].id))
    });
    let shares = |idx: &[usize]| -> (Vec<f64>, f64) {
        let mut counts = vec![0usize; scheme.num_classes()];
        for &i in idx {
            counts[ex[i].label] += 1;
        }
        let total = idx.len().max(1) as f64;
        let pos: usize = scheme.positive_indices().iter().map(|&c| counts[c]).sum();
        (counts.iter().map(|&c| c as f64 / total).collect(), pos as f64 / total)
    };
    let (top_class_shares, top_positive_share) = shares(&order[..k]);
    let (bottom_class_shares, bottom_positive_share) = shares(&bottom[..k]);
    CompositionRow {
        k,
        top_class_shares,
        top_positive_share,
        bottom_class_shares,
        bottom_positive_share,
    }
}

/// For each band fraction, trains on the stratified highest- and lowest-QS
/// `k` examples. Both models of a band share the seed `band-{k}`.
pub fn run_bands(
    scored: &ScoredDataset64,
    tune: &Dataset64,
    hp: &Hyperparams,
    fractions: &[f64],
    seed: u64,
) -> CliResult<BandsReport> {
    let n = scored.len();
    let mut ks: Vec<(f64, usize)> = fractions.iter().map(|&f| (f, band_size(f, n))).collect();
    ks.dedup_by_key(|p| p.1);
    let bands = ks
        .par_iter()
        .map(|&(fraction, k)| -> CliResult<BandRow> {
            let band_hp = hp.with_seed(derive_seed(seed, &format!("band-{k}")));
            let high_sel = select_stratified(scored, k)?;
            let low_sel = select_lowest_stratified(scored, k)?;
            let high = fit_selection(scored, &high_sel, tune, &band_hp)?;
            // The whole set is the same training data either way.
            let low_auc = if k == n {
                high.meta.tune_auc_at_stop
            } else {
                fit_selection(scored, &low_sel, tune, &band_hp)?.meta.tune_auc_at_stop
            };
            Ok(BandRow {
                fraction,
                k,
                high_tune_auc: high.meta.tune_auc_at_stop,
                low_tune_auc: low_auc,
                delta: high.meta.tune_auc_at_stop - low_auc,
                high_positive_rate: high_sel.positive_rate(),
                low_positive_rate: low_sel.positive_rate(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let ncv_sel = select_ncv(scored);
    let ncv_model = fit_selection(scored, &ncv_sel, tune, &hp.with_seed(derive_seed(seed, "band-ncv")))?;
    Ok(BandsReport {
        n,
        tau: scored.dataset().positive_rate()?,
        composition: ks.iter().map(|&(_, k)| composition(scored, k)).collect(),
        bands,
        ncv: NcvPoint {
            n_selected: ncv_sel.n_selected,
            positive_rate: ncv_sel.positive_rate(),
            tune_auc: ncv_model.meta.tune_auc_at_stop,
        },
    })
}

pub const FULL: &str = "full";
pub const SUBSAMPLE: &str = "subsample";
pub const SUBSAMPLE_SNCV: &str = "subsample+sncv";
pub const SUBSAMPLE_NCV: &str = "subsample+ncv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BurdenReport {
    pub n_full: usize,
    pub n_subsample: usize,
    pub fraction: f64,
    pub chosen_k: usize,
    pub k_trials: Vec<KTrial>,
    pub sncv_selection: SelectionResult,
    pub ncv_selection: SelectionResult,
    /// Models and tests on the held-out test set.
    pub eval: EvalReport,
}

/// Full-data and subsample baselines against SNCV and NCV applied to the
/// subsample, compared on `test`.
pub fn run_burden(
    train_set: &Dataset64,
    tune: &Dataset64,
    test: &Dataset64,
    hp: &Hyperparams,
    cfg: &BurdenConfig,
    min_fold_size: usize,
    seed: u64,
) -> CliResult<BurdenReport> {
    let sub = sample_fraction(train_set, cfg.fraction, derive_seed(seed, "subsample"))?;
    let sncv_seed = derive_seed(seed, "sncv");
    let grid = KChoice::Grid(cfg.k_grid.clone());
    let (baselines, pipelines) = rayon::join(
        || -> CliResult<(Model64, Model64)> {
            let full_hp = hp.with_seed(derive_seed(seed, "full"));
            if sub.len() == train_set.len() {
                // A subsample of the whole set is the full baseline.
                let full = train(train_set, tune, &full_hp)?;
                return Ok((full.clone(), full));
            }
            let (full, subm) = rayon::join(
                || train(train_set, tune, &full_hp),
                || train(&sub, tune, &hp.with_seed(derive_seed(seed, "sub"))),
            );
            Ok((full?, subm?))
        },
        || -> CliResult<_> {
            let cf = cross_fold_score_with(&sub, tune, hp, sncv_seed, min_fold_size)?;
            let (sncv, ncv) = rayon::join(
                || finish_pipeline(cf.clone(), tune, &grid, hp, sncv_seed),
                || finish_pipeline(cf.clone(), tune, &KChoice::Ncv, hp, sncv_seed),
            );
            Ok((sncv?, ncv?))
        },
    );
    let (full, subm) = baselines?;
    let (sncv, ncv) = pipelines?;

    let labels = test.binary_labels();
    let score = |m: &Model64| m.referable_scores(test);
    let s_full = score(&full)?;
    let s_sub = score(&subm)?;
    let s_sncv = score(&sncv.model)?;
    let s_ncv = score(&ncv.model)?;
    let arms = [
        Scored { name: FULL, scores: &s_full, tune_auc: Some(full.meta.tune_auc_at_stop) },
        Scored { name: SUBSAMPLE, scores: &s_sub, tune_auc: Some(subm.meta.tune_auc_at_stop) },
        Scored { name: SUBSAMPLE_SNCV, scores: &s_sncv, tune_auc: Some(sncv.model.meta.tune_auc_at_stop) },
        Scored { name: SUBSAMPLE_NCV, scores: &s_ncv, tune_auc: Some(ncv.model.meta.tune_auc_at_stop) },
    ];
    let models = arms
        .par_iter()
        .map(|a| evaluate_model(a, &labels, cfg.n_boot, Some(seed)))
        .collect::<CliResult<Vec<_>>>()?;
    let [a_full, a_sub, a_sncv, a_ncv] = &arms;
    let (m, alpha) = (cfg.margin, cfg.alpha);
    let tests = vec![
        non_inferiority(a_sub, a_sncv, &labels, m, alpha)?,
        non_inferiority(a_sncv, a_full, &labels, m, alpha)?,
        non_inferiority(a_sub, a_full, &labels, m, alpha)?,
        two_tailed(a_sub, a_full, &labels, alpha)?,
        two_tailed(a_sncv, a_sub, &labels, alpha)?,
        two_tailed(a_sncv, a_ncv, &labels, alpha)?,
        two_tailed(a_ncv, a_sub, &labels, alpha)?,
    ];
    Ok(BurdenReport {
        n_full: train_set.len(),
        n_subsample: sub.len(),
        fraction: cfg.fraction,
        chosen_k: sncv.selection.k_requested.unwrap_or(sncv.selection.n_selected),
        k_trials: sncv.k_trials,
        sncv_selection: sncv.selection,
        ncv_selection: ncv.selection,
        eval: EvalReport {
            evaluated_on: "test".into(),
            n_examples: test.len(),
            models,
            tests,
        },
    })
}
