//! One function per subcommand. Each reads its inputs from the resolved
//! config, writes artifacts under the output directory and returns a short
//! human-readable summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sncv_core::dataset::{read_dataset_with_scheme, scheme_sidecar_path, split_random, write_dataset};
use sncv_core::metrics::roc_auc;
use sncv_core::relabel::{
    filter_by_grader_role, grader_mismatch_analysis, parse_roles, run_relabel_experiment, SpecialistOracle,
};
use sncv_core::seed::derive_seed;
use sncv_core::sncv::{
    cross_fold_score_with, finish_pipeline, qs_histogram, quality_score, select_lowest_stratified, select_ncv,
    select_ncv_exact, select_stratified, CrossFold, KChoice, KTrial, PipelineOutput, SelectionResult,
};
use sncv_core::synth::GraderPool;
use sncv_core::trainer::{referable_mass, train, TrainingMeta};
use sncv_core::{ClassScheme, Dataset64, Model64, ScoredDataset64};

use crate::config::{existing, RunConfig, SelectMode};
use crate::error::{CliError, CliResult};
use crate::experiments::{build_world, run_bands, run_burden};
use crate::report::{evaluate_model, non_inferiority, two_tailed, write_report, write_text, EvalReport, Scored};

/// Every input path named in the config must exist before any work starts.
pub fn check_inputs(cfg: &RunConfig) -> CliResult<()> {
    let p = &cfg.paths;
    let named = [
        (&p.dataset, "dataset"),
        (&p.tune, "tune"),
        (&p.test, "test"),
        (&p.scored, "scored"),
        (&p.scheme, "scheme"),
        (&p.pool, "pool"),
    ];
    for (path, what) in named {
        if path.is_some() {
            existing(path, what)?;
        }
    }
    for m in &p.models {
        existing(&Some(m.clone()), "model")?;
    }
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Explicit scheme file, else the sidecar of `data`, else the default scheme.
fn resolve_scheme(cfg: &RunConfig, data: Option<&Path>) -> CliResult<ClassScheme> {
    if let Some(p) = &cfg.paths.scheme {
        return Ok(ClassScheme::read_json(p)?);
    }
    if let Some(d) = data {
        let side = scheme_sidecar_path(d);
        if side.is_file() {
            return Ok(ClassScheme::read_json(side)?);
        }
    }
    Ok(ClassScheme::default())
}

fn resolve_pool(cfg: &RunConfig, scheme: &ClassScheme) -> CliResult<GraderPool> {
    match &cfg.paths.pool {
        Some(p) => Ok(GraderPool::read_json(p, scheme.num_classes())?),
        None => Ok(GraderPool::reference(scheme)),
    }
}

fn load(cfg: &RunConfig, path: &Option<PathBuf>, what: &str) -> CliResult<Dataset64> {
    let p = existing(path, what)?;
    let scheme = resolve_scheme(cfg, Some(&p))?;
    Ok(read_dataset_with_scheme(&p, scheme)?)
}

fn load_scored(cfg: &RunConfig) -> CliResult<ScoredDataset64> {
    let p = existing(&cfg.paths.scored, "scored")?;
    let scheme = resolve_scheme(cfg, Some(&p))?;
    Ok(ScoredDataset64::read_csv(&p, scheme)?)
}

pub fn gen(cfg: &RunConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let scheme = resolve_scheme(cfg, None)?;
    let pool = resolve_pool(cfg, &scheme)?;
    let world = build_world(&cfg.population, &cfg.gen, &scheme, &pool, seed)?;
    let summary = world.summary()?;
    let out = out_dir(cfg)?;
    write_dataset(&world.population, out.join("population.csv"))?;
    write_dataset(&world.train, out.join("train.csv"))?;
    write_dataset(&world.tune, out.join("tune.csv"))?;
    write_dataset(&world.test, out.join("test.csv"))?;
    let mut truth = String::from("id,true_label\n");
    for e in world.train.iter() {
        truth.push_str(&format!("{},{}\n", e.id, e.true_label.expect("generated with truth")));
    }
    write_text(&out.join("truth.csv"), &truth)?;
    scheme.write_json(out.join("scheme.json"))?;
    write_text(&out.join("pool.json"), &pool.to_json()?)?;
    write_report(&out.join("gen_report.json"), "gen", cfg, &summary)?;
    Ok(format!(
        "tau {:.4}  boundary noise rate {:.4}  ({} train, {} tune, {} test)",
        summary.tau, summary.boundary_noise_rate, summary.n_train, summary.n_tune, summary.n_test
    ))
}

#[derive(Serialize)]
struct SplitSummary {
    n_d1: usize,
    n_d2: usize,
}

pub fn split(cfg: &RunConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let data = load(cfg, &cfg.paths.dataset, "dataset")?;
    let (d1, d2) = split_random(&data, derive_seed(seed, "split"))?;
    let out = out_dir(cfg)?;
    write_dataset(&d1, out.join("d1.csv"))?;
    write_dataset(&d2, out.join("d2.csv"))?;
    let s = SplitSummary {
        n_d1: d1.len(),
        n_d2: d2.len(),
    };
    write_report(&out.join("split_report.json"), "split", cfg, &s)?;
    Ok(format!("D1 {} examples, D2 {} examples", s.n_d1, s.n_d2))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    n_train: usize,
    n_tune: usize,
    meta: &'a TrainingMeta,
}

pub fn train_cmd(cfg: &RunConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let data = load(cfg, &cfg.paths.dataset, "dataset")?;
    let tune = load(cfg, &cfg.paths.tune, "tune")?;
    let model = train(&data, &tune, &cfg.hyperparams.with_seed(derive_seed(seed, "train")))?;
    let out = out_dir(cfg)?;
    model.write_json(out.join("model.json"))?;
    let s = TrainSummary {
        n_train: data.len(),
        n_tune: tune.len(),
        meta: &model.meta,
    };
    write_report(&out.join("train_report.json"), "train", cfg, &s)?;
    Ok(format!(
        "kept epoch {} of {}, tune AUC {:.4}",
        model.meta.stopped_epoch, model.meta.epochs_run, model.meta.tune_auc_at_stop
    ))
}

#[derive(Serialize)]
struct ScoreSummary {
    n: usize,
    /// AUC of the referable score against observed labels, when both sides occur.
    auc: Option<f64>,
    n_disagreeing: usize,
}

pub fn score(cfg: &RunConfig) -> CliResult<String> {
    let model_path = match cfg.paths.models.as_slice() {
        [m] => m.clone(),
        [] => return Err(CliError::Usage("score needs one --model".into())),
        _ => return Err(CliError::Usage("score takes exactly one --model".into())),
    };
    let model = Model64::read_json(&model_path)?;
    let data = load(cfg, &cfg.paths.dataset, "dataset")?;
    if model.scheme() != data.scheme() {
        return Err(CliError::Usage("model and dataset use different class schemes".into()));
    }
    let probs = model.predict_all(&data)?;
    let scheme = data.scheme();
    let mut csv = String::from("id,label,true_label,referable_score,quality_score");
    for j in 0..scheme.num_classes() {
        csv.push_str(&format!(",p{j}"));
    }
    csv.push('\n');
    let mut referable = Vec::with_capacity(data.len());
    let mut n_disagreeing = 0;
    for (e, p) in data.iter().zip(&probs) {
        let r = referable_mass(p, scheme);
        let qs = quality_score(p, e.label, scheme)?;
        n_disagreeing += (qs < 0.0) as usize;
        referable.push(r);
        csv.push_str(&format!(
            "{},{},{},{},{}",
            e.id,
            e.label,
            e.true_label.map(|t| t.to_string()).unwrap_or_default(),
            r,
            qs
        ));
        for v in p {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    let auc = roc_auc(&referable, &data.binary_labels()).ok().map(|r| r.auc);
    let out = out_dir(cfg)?;
    write_text(&out.join("predictions.csv"), &csv)?;
    let s = ScoreSummary {
        n: data.len(),
        auc,
        n_disagreeing,
    };
    write_report(&out.join("score_report.json"), "score", cfg, &s)?;
    Ok(match auc {
        Some(a) => format!("scored {} examples, AUC {a:.4}, {} disagree at the boundary", s.n, n_disagreeing),
        None => format!("scored {} examples, {} disagree at the boundary", s.n, n_disagreeing),
    })
}

fn fixed_k(cfg: &RunConfig, n: usize) -> CliResult<usize> {
    match (cfg.pipeline.k, cfg.pipeline.k_grid.first()) {
        (Some(k), _) => Ok(k),
        (None, Some(&f)) => Ok(((f * n as f64).round() as usize).clamp(1, n)),
        (None, None) => Err(CliError::Usage("selection needs --k or a k grid".into())),
    }
}

fn select_with(cfg: &RunConfig, scored: &ScoredDataset64) -> CliResult<SelectionResult> {
    Ok(match cfg.pipeline.select_mode {
        SelectMode::Highest => select_stratified(scored, fixed_k(cfg, scored.len())?)?,
        SelectMode::Lowest => select_lowest_stratified(scored, fixed_k(cfg, scored.len())?)?,
        SelectMode::Ncv => select_ncv(scored),
        SelectMode::NcvExact => select_ncv_exact(scored),
    })
}

fn write_selection_artifacts(
    cfg: &RunConfig,
    out: &Path,
    scored: &ScoredDataset64,
    sel: &SelectionResult,
) -> CliResult<()> {
    write_text(&out.join("selected_ids.csv"), &sel.ids_csv())?;
    let hist = qs_histogram(scored, cfg.pipeline.histogram_bin_width)?;
    write_text(&out.join("qs_histogram.csv"), &hist.to_csv())
}

fn selection_line(sel: &SelectionResult) -> String {
    format!(
        "selected {} ({} positive, {} negative; positive rate {:.4}, input {:.4})",
        sel.n_selected,
        sel.n_positive_selected,
        sel.n_negative_selected,
        sel.positive_rate(),
        sel.tau_used
    )
}

pub fn select(cfg: &RunConfig) -> CliResult<String> {
    let scored = load_scored(cfg)?;
    let sel = select_with(cfg, &scored)?;
    let out = out_dir(cfg)?;
    write_selection_artifacts(cfg, &out, &scored, &sel)?;
    write_report(&out.join("selection.json"), "select", cfg, &sel)?;
    Ok(selection_line(&sel))
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    n: usize,
    chosen_k: Option<usize>,
    k_trials: &'a [KTrial],
    selection: &'a SelectionResult,
    final_model: &'a TrainingMeta,
    fold_models: [&'a TrainingMeta; 2],
}

fn pipeline_output(cfg: &RunConfig, cf: CrossFold<f64>, tune: &Dataset64, seed: u64) -> CliResult<PipelineOutput<f64>> {
    let hp = &cfg.hyperparams;
    let choice = match cfg.pipeline.select_mode {
        SelectMode::Highest => match cfg.pipeline.k {
            Some(k) => KChoice::Fixed(k),
            None => KChoice::Grid(cfg.pipeline.k_grid.clone()),
        },
        SelectMode::Ncv => KChoice::Ncv,
        SelectMode::Lowest | SelectMode::NcvExact => {
            let sel = select_with(cfg, &cf.scored)?;
            let subset = cf.scored.dataset().select_ids(sel.selected_ids.iter().map(String::as_str));
            let model = train(&subset, tune, &hp.with_seed(derive_seed(seed, "m3")))?;
            return Ok(PipelineOutput {
                model,
                cross_fold: cf,
                selection: sel,
                k_trials: Vec::new(),
            });
        }
    };
    Ok(finish_pipeline(cf, tune, &choice, hp, seed)?)
}

pub fn pipeline(cfg: &RunConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let data = load(cfg, &cfg.paths.dataset, "dataset")?;
    let tune = load(cfg, &cfg.paths.tune, "tune")?;
    let cf = cross_fold_score_with(&data, &tune, &cfg.hyperparams, seed, cfg.pipeline.min_fold_size)?;
    let run = pipeline_output(cfg, cf, &tune, seed)?;
    let out = out_dir(cfg)?;
    let scored = &run.cross_fold.scored;
    run.model.write_json(out.join("model.json"))?;
    run.cross_fold.model_d1.write_json(out.join("model_d1.json"))?;
    run.cross_fold.model_d2.write_json(out.join("model_d2.json"))?;
    scored.write_csv(out.join("scored.csv"))?;
    write_selection_artifacts(cfg, &out, scored, &run.selection)?;

    let labels = tune.binary_labels();
    let s_m3 = run.model.referable_scores(&tune)?;
    let s_d1 = run.cross_fold.model_d1.referable_scores(&tune)?;
    let s_d2 = run.cross_fold.model_d2.referable_scores(&tune)?;
    let m3 = Scored {
        name: "final",
        scores: &s_m3,
        tune_auc: Some(run.model.meta.tune_auc_at_stop),
    };
    let d1 = Scored {
        name: "fold-d1",
        scores: &s_d1,
        tune_auc: Some(run.cross_fold.model_d1.meta.tune_auc_at_stop),
    };
    let d2 = Scored {
        name: "fold-d2",
        scores: &s_d2,
        tune_auc: Some(run.cross_fold.model_d2.meta.tune_auc_at_stop),
    };
    let ev = &cfg.eval;
    let eval = EvalReport {
        evaluated_on: "tune".into(),
        n_examples: tune.len(),
        models: [&m3, &d1, &d2]
            .iter()
            .map(|m| evaluate_model(m, &labels, ev.n_boot, Some(seed)))
            .collect::<CliResult<_>>()?,
        tests: vec![two_tailed(&m3, &d1, &labels, ev.alpha)?, two_tailed(&m3, &d2, &labels, ev.alpha)?],
    };
    write_report(&out.join("eval_report.json"), "pipeline", cfg, &eval)?;
    write_report(&out.join("selection.json"), "pipeline", cfg, &run.selection)?;
    let summary = PipelineSummary {
        n: scored.len(),
        chosen_k: run.selection.k_requested,
        k_trials: &run.k_trials,
        selection: &run.selection,
        final_model: &run.model.meta,
        fold_models: [&run.cross_fold.model_d1.meta, &run.cross_fold.model_d2.meta],
    };
    write_report(&out.join("pipeline_report.json"), "pipeline", cfg, &summary)?;
    let mut msg = selection_line(&run.selection);
    for t in &run.k_trials {
        msg.push_str(&format!("\n  k = {}: tune AUC {:.4}", t.k, t.tune_auc));
    }
    if let Some(k) = summary.chosen_k {
        msg.push_str(&format!("\nchosen k {k}"));
    }
    msg.push_str(&format!("\nfinal model tune AUC {:.4}", run.model.meta.tune_auc_at_stop));
    Ok(msg)
}

pub fn bands(cfg: &RunConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let data = load(cfg, &cfg.paths.dataset, "dataset")?;
    let tune = load(cfg, &cfg.paths.tune, "tune")?;
    let cf = cross_fold_score_with(&data, &tune, &cfg.hyperparams, seed, cfg.pipeline.min_fold_size)?;
    let report = run_bands(&cf.scored, &tune, &cfg.hyperparams, &cfg.bands.fractions, seed)?;
    let out = out_dir(cfg)?;
    write_text(&out.join("bands.csv"), &report.bands_csv())?;
    write_text(&out.join("composition.csv"), &report.composition_csv(data.scheme()))?;
    write_report(&out.join("bands_report.json"), "bands", cfg, &report)?;
    let mut msg = String::from("k        high     low      delta");
    for b in &report.bands {
        msg.push_str(&format!(
            "\n{:<8} {:.4}   {:.4}   {:+.4}",
            b.k, b.high_tune_auc, b.low_tune_auc, b.delta
        ));
    }
    msg.push_str(&format!(
        "\nncv: {} selected, positive rate {:.4}, tune AUC {:.4}",
        report.ncv.n_selected, report.ncv.positive_rate, report.ncv.tune_auc
    ));
    Ok(msg)
}

pub fn burden(cfg: &RunConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let data = load(cfg, &cfg.paths.dataset, "dataset")?;
    let tune = load(cfg, &cfg.paths.tune, "tune")?;
    let test = load(cfg, &cfg.paths.test, "test")?;
    let report = run_burden(
        &data,
        &tune,
        &test,
        &cfg.hyperparams,
        &cfg.burden,
        cfg.pipeline.min_fold_size,
        seed,
    )?;
    let out = out_dir(cfg)?;
    write_text(&out.join("burden_tests.csv"), &report.eval.to_csv())?;
    write_report(&out.join("burden_report.json"), "burden", cfg, &report)?;
    Ok(eval_lines(&report.eval))
}

fn eval_lines(ev: &EvalReport) -> String {
    let mut msg = String::new();
    for m in &ev.models {
        msg.push_str(&format!(
            "{:<16} AUC {:.4} [{:.4}, {:.4}]\n",
            m.name, m.auc, m.delong_ci[0], m.delong_ci[1]
        ));
    }
    for t in &ev.tests {
        msg.push_str(&format!("{:<60} p = {:.4}  {}\n", t.null_hypothesis, t.p_value, t.decision));
    }
    msg.trim_end().to_string()
}

pub fn relabel(cfg: &RunConfig) -> CliResult<String> {
    let seed = cfg.require_seed()?;
    let scored = load_scored(cfg)?;
    let oracle = SpecialistOracle {
        error_rate: cfg.relabel.oracle_error_rate,
        deviation_confusion: cfg.relabel.oracle_deviation.clone(),
        seed: derive_seed(seed, "oracle"),
    };
    let report = run_relabel_experiment(&scored, cfg.relabel.n_lowest, &oracle)?;
    let out = out_dir(cfg)?;
    write_text(&out.join("relabel_rows.csv"), &report.rows_csv())?;
    write_text(
        &out.join("relabel_confusion.csv"),
        &report.confusion.to_table("Original", "Specialist"),
    )?;
    write_report(&out.join("relabel_report.json"), "relabel", cfg, &report)?;
    Ok(format!(
        "relabeled {}: {} boundary disagreements, specialist sided with the model in {:.1}%",
        report.n_relabeled,
        report.n_boundary_disagreement,
        100.0 * report.model_agreement_rate
    ))
}

pub fn graders(cfg: &RunConfig) -> CliResult<String> {
    let scored = load_scored(cfg)?;
    let pool = resolve_pool(cfg, scored.scheme())?;
    let report = grader_mismatch_analysis(&scored, &pool, cfg.graders.mismatch_threshold)?;
    let out = out_dir(cfg)?;
    let mut csv = String::from("grader_id,role,n_labels,n_mismatched,mismatch_rate,flagged\n");
    for g in &report.graders {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            g.grader_id, g.role, g.n_labels, g.n_mismatched, g.mismatch_rate, g.flagged
        ));
    }
    write_text(&out.join("graders.csv"), &csv)?;
    let mut roles = String::from("role,n_graders,n_flagged,share_of_flagged,share_of_pool,mean_mismatch_rate\n");
    for r in &report.roles {
        roles.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.role, r.n_graders, r.n_flagged, r.share_of_flagged, r.share_of_pool, r.mean_mismatch_rate
        ));
    }
    write_text(&out.join("roles.csv"), &roles)?;
    if !cfg.graders.filter_roles.is_empty() {
        let keep = parse_roles(&cfg.graders.filter_roles)?;
        let filtered = filter_by_grader_role(scored.dataset(), &pool, &keep)?;
        write_dataset(&filtered, out.join("filtered.csv"))?;
    }
    write_report(&out.join("graders_report.json"), "graders", cfg, &report)?;
    let mut msg = format!("{} of {} graders flagged", report.n_flagged, report.graders.len());
    for r in report.roles.iter().filter(|r| r.n_graders > 0) {
        msg.push_str(&format!(
            "\n  {:<20} {}/{} flagged ({:.1}% of flagged)",
            r.role.as_str(),
            r.n_flagged,
            r.n_graders,
            100.0 * r.share_of_flagged
        ));
    }
    Ok(msg)
}

/// Evaluates each model on the test set; the first model is the reference
/// for pairwise tests. Bootstrap intervals need a seed.
pub fn eval(cfg: &RunConfig) -> CliResult<String> {
    if cfg.paths.models.is_empty() {
        return Err(CliError::Usage("eval needs at least one --model".into()));
    }
    let test = load(cfg, &cfg.paths.test, "test")?;
    let labels = test.binary_labels();
    let mut names = Vec::new();
    let mut scores = Vec::new();
    let mut tune_aucs = Vec::new();
    for (i, p) in cfg.paths.models.iter().enumerate() {
        let m = Model64::read_json(p)?;
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        names.push(if names.contains(&stem) { format!("{stem}-{i}") } else { stem });
        scores.push(m.referable_scores(&test)?);
        tune_aucs.push(m.meta.tune_auc_at_stop);
    }
    let arms: Vec<Scored> = (0..names.len())
        .map(|i| Scored {
            name: &names[i],
            scores: &scores[i],
            tune_auc: Some(tune_aucs[i]),
        })
        .collect();
    let ev = &cfg.eval;
    let models = arms
        .iter()
        .map(|a| evaluate_model(a, &labels, ev.n_boot, cfg.seed))
        .collect::<CliResult<Vec<_>>>()?;
    let mut tests = Vec::new();
    for cand in &arms[1..] {
        tests.push(two_tailed(cand, &arms[0], &labels, ev.alpha)?);
        tests.push(non_inferiority(cand, &arms[0], &labels, ev.margin, ev.alpha)?);
    }
    let report = EvalReport {
        evaluated_on: "test".into(),
        n_examples: test.len(),
        models,
        tests,
    };
    let out = out_dir(cfg)?;
    write_text(&out.join("eval_tests.csv"), &report.to_csv())?;
    write_report(&out.join("eval_report.json"), "eval", cfg, &report)?;
    Ok(eval_lines(&report))
}

