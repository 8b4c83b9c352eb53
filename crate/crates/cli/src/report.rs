//! Report types and writers. Every JSON report wraps its payload with the
//! command name, seed and resolved config.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sncv_core::metrics::{
    bootstrap_auc_ci, delong_auc_ci, delong_noninferiority, delong_two_tailed, roc_auc,
};
use sncv_core::seed::derive_seed;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Serialize)]
pub struct Report<'a, P> {
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config: &'a RunConfig,
    pub result: &'a P,
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<P: Serialize>(path: &Path, value: &P) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(sncv_core::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_report<P: Serialize>(path: &Path, command: &str, config: &RunConfig, result: &P) -> CliResult<()> {
    write_json(
        path,
        &Report {
            command,
            seed: config.seed,
            config,
            result,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEval {
    pub name: String,
    pub auc: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub delong_ci: [f64; 2],
    pub bootstrap_ci: Option<[f64; 2]>,
    /// Tune AUC at the early-stopping snapshot, when the model was trained here.
    pub tune_auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    TwoTailed,
    NonInferiority,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    pub candidate: String,
    pub reference: String,
    pub null_hypothesis: String,
    pub test: TestKind,
    pub auc_candidate: f64,
    pub auc_reference: f64,
    pub delta: f64,
    pub variance_of_delta: f64,
    pub z: f64,
    pub p_value: f64,
    pub margin: Option<f64>,
    pub alpha: f64,
    pub significant: bool,
    /// `Non-inferior`, `Superior`, `Inferior` or `-`.
    pub decision: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Which example set the AUCs come from, e.g. `tune` or `test`.
    pub evaluated_on: String,
    pub n_examples: usize,
    pub models: Vec<ModelEval>,
    pub tests: Vec<TestRow>,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelEval> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn test(&self, candidate: &str, reference: &str, kind: TestKind) -> Option<&TestRow> {
        self.tests
            .iter()
            .find(|t| t.candidate == candidate && t.reference == reference && t.test == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "candidate,reference,test,auc_candidate,auc_reference,delta,z,p_value,margin,decision\n",
        );
        for t in &self.tests {
            let kind = match t.test {
                TestKind::TwoTailed => "two-tailed",
                TestKind::NonInferiority => "non-inferiority",
            };
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                t.candidate,
                t.reference,
                kind,
                t.auc_candidate,
                t.auc_reference,
                t.delta,
                t.z,
                t.p_value,
                t.margin.map(|m| m.to_string()).unwrap_or_default(),
                t.decision
            ));
        }
        s
    }
}

/// Scores of one model on the evaluation set.
pub struct Scored<'a> {
    pub name: &'a str,
    pub scores: &'a [f64],
    pub tune_auc: Option<f64>,
}

/// AUC with DeLong and optional bootstrap intervals. Bootstrap seeds derive
/// from `seed` and the model name.
pub fn evaluate_model(model: &Scored, labels: &[bool], n_boot: usize, seed: Option<u64>) -> CliResult<ModelEval> {
    let roc = roc_auc(model.scores, labels)?;
    let (lo, hi) = delong_auc_ci(&roc, Z_95);
    let bootstrap_ci = match seed {
        Some(s) if n_boot > 0 => {
            let (a, b) = bootstrap_auc_ci(
                model.scores,
                labels,
                n_boot,
                derive_seed(s, &format!("bootstrap-{}", model.name)),
            )?;
            Some([a, b])
        }
        _ => None,
    };
    Ok(ModelEval {
        name: model.name.to_string(),
        auc: roc.auc,
        n_positive: roc.n_positive,
        n_negative: roc.n_negative,
        delong_ci: [lo, hi],
        bootstrap_ci,
        tune_auc: model.tune_auc,
    })
}

pub fn two_tailed(candidate: &Scored, reference: &Scored, labels: &[bool], alpha: f64) -> CliResult<TestRow> {
    let c = delong_two_tailed(candidate.scores, reference.scores, labels)?;
    let significant = c.p_two_tailed < alpha;
    let decision = match (significant, c.delta > 0.0) {
        (false, _) => "-",
        (true, true) => "Superior",
        (true, false) => "Inferior",
    };
    Ok(TestRow {
        candidate: candidate.name.to_string(),
        reference: reference.name.to_string(),
        null_hypothesis: format!("{} equal to {}", candidate.name, reference.name),
        test: TestKind::TwoTailed,
        auc_candidate: c.auc_a,
        auc_reference: c.auc_b,
        delta: c.delta,
        variance_of_delta: c.variance_of_delta,
        z: c.z,
        p_value: c.p_two_tailed,
        margin: None,
        alpha,
        significant,
        decision: decision.to_string(),
    })
}

pub fn non_inferiority(
    candidate: &Scored,
    reference: &Scored,
    labels: &[bool],
    margin: f64,
    alpha: f64,
) -> CliResult<TestRow> {
    let c = delong_noninferiority(candidate.scores, reference.scores, labels, margin)?;
    let p = c.p_noninferiority.expect("set by non-inferiority test");
    let significant = p < alpha;
    Ok(TestRow {
        candidate: candidate.name.to_string(),
        reference: reference.name.to_string(),
        null_hypothesis: format!(
            "{} inferior to {} by margin of {}",
            candidate.name, reference.name, margin
        ),
        test: TestKind::NonInferiority,
        auc_candidate: c.auc_a,
        auc_reference: c.auc_b,
        delta: c.delta,
        variance_of_delta: c.variance_of_delta,
        z: c.z_noninferiority.expect("set by non-inferiority test"),
        p_value: p,
        margin: Some(margin),
        alpha,
        significant,
        decision: if significant { "Non-inferior" } else { "-" }.to_string(),
    })
}
