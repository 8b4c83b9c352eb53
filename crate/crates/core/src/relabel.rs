//! Simulated relabeling of the lowest-quality tranche by a specialist oracle,
//! and per-grader mismatch analysis.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{confusion_matrix, BinaryConfusion};
use crate::scalar::Scalar;
use crate::seed;
use crate::sncv::ScoredDataset;
use crate::synth::{GraderPool, GraderRole};

/// Stand-in for the specialist who regrades without seeing earlier labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialistOracle {
    /// Probability the oracle deviates from the true label.
    pub error_rate: f64,
    /// Rows used on deviation; uniform over the other classes when absent.
    pub deviation_confusion: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl SpecialistOracle {
    pub fn perfect(seed: u64) -> Self {
        SpecialistOracle {
            error_rate: 0.0,
            deviation_confusion: None,
            seed,
        }
    }

    fn deviation_rows(&self, k: usize) -> Result<Vec<WeightedIndex<f64>>> {
        let rows = match &self.deviation_confusion {
            Some(m) => m.clone(),
            None => (0..k)
                .map(|c| (0..k).map(|j| if j == c { 0.0 } else { 1.0 / (k - 1) as f64 }).collect())
                .collect(),
        };
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidConfig(format!("deviation confusion must be {k}×{k}")));
        }
        rows.iter()
            .map(|r| {
                if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig("deviation rows must sum to 1".into()));
                }
                WeightedIndex::new(r).map_err(|e| Error::InvalidConfig(format!("deviation row: {e}")))
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.error_rate >= 0.0 && self.error_rate < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "oracle error rate {} outside [0, 1)",
                self.error_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelabelRow {
    pub id: String,
    pub qs: f64,
    pub original_label: usize,
    pub oracle_label: usize,
    pub true_label: usize,
    /// The tranche member crossed the boundary (QS < 0) and the oracle
    /// sided with the model.
    pub model_side_win: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelabelReport {
    pub n_relabeled: usize,
    /// Rows: original label side; columns: oracle label side.
    pub confusion: BinaryConfusion,
    /// Oracle label differs from the original on the full class scale.
    pub relabel_rate: f64,
    /// Oracle label differs from the original at the boundary.
    pub binarized_relabel_rate: f64,
    /// Tranche members where model and original label disagree at the boundary.
    pub n_boundary_disagreement: usize,
    /// Share of boundary disagreements resolved in the model's favour.
    pub model_agreement_rate: f64,
    /// Share of the whole tranche where the oracle's side matches the model's.
    pub model_agreement_rate_all: f64,
    #[serde(skip)]
    pub rows: Vec<RelabelRow>,
}

impl RelabelReport {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("id,qs,original_label,oracle_label,true_label,model_side_win\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.id, r.qs, r.original_label, r.oracle_label, r.true_label, r.model_side_win
            ));
        }
        s
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Indices of the `n` lowest quality scores overall, ties by ascending id.
pub fn lowest_tranche<T: Scalar>(scored: &ScoredDataset<T>, n: usize) -> Vec<usize> {
    let ex = scored.examples();
    let mut idx: Vec<usize> = (0..ex.len()).collect();
    idx.sort_by(|&a, &b| {
        scored
            .score(a)
            .partial_cmp(&scored.score(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ex[a].id.cmp(&ex[b].id))
    });
    idx.truncate(n);
    idx
}

/// Sends the `n_lowest` globally lowest-QS examples to `oracle` and tallies
/// how its labels compare with the originals and the cross-fold model.
pub fn run_relabel_experiment<T: Scalar>(
    scored: &ScoredDataset<T>,
    n_lowest: usize,
    oracle: &SpecialistOracle,
) -> Result<RelabelReport> {
    oracle.validate()?;
    if n_lowest > scored.len() {
        return Err(Error::KOutOfRange {
            k: n_lowest,
            n: scored.len(),
        });
    }
    let scheme = scored.scheme();
    let deviation = oracle.deviation_rows(scheme.num_classes())?;
    let tranche = lowest_tranche(scored, n_lowest);
    let stream = seed::derive_seed(oracle.seed, "oracle");
    let mut rows = Vec::with_capacity(tranche.len());
    for &i in &tranche {
        let e = &scored.examples()[i];
        let truth = e.true_label.ok_or_else(|| Error::NoGroundTruth(e.id.clone()))?;
        let mut rng = seed::rng_for(stream, &e.id);
        let oracle_label = if rng.random::<f64>() < oracle.error_rate {
            deviation[truth].sample(&mut rng)
        } else {
            truth
        };
        let qs = scored.score(i);
        let model_side = scored.predicted_positive(i);
        rows.push(RelabelRow {
            id: e.id.clone(),
            qs: qs.as_f64(),
            original_label: e.label,
            oracle_label,
            true_label: truth,
            model_side_win: qs < T::zero() && scheme.is_positive(oracle_label) == model_side,
        });
    }
    let originals: Vec<usize> = rows.iter().map(|r| r.original_label).collect();
    let relabels: Vec<usize> = rows.iter().map(|r| r.oracle_label).collect();
    let confusion = confusion_matrix(&originals, &relabels, scheme)?;
    let changed = rows.iter().filter(|r| r.oracle_label != r.original_label).count();
    let disagreements = rows.iter().filter(|r| r.qs < 0.0).count();
    let wins = rows.iter().filter(|r| r.model_side_win).count();
    let side_match = tranche
        .iter()
        .zip(&rows)
        .filter(|(&i, r)| scheme.is_positive(r.oracle_label) == scored.predicted_positive(i))
        .count();
    Ok(RelabelReport {
        n_relabeled: rows.len(),
        confusion,
        relabel_rate: ratio(changed, rows.len()),
        binarized_relabel_rate: ratio(confusion.off_diagonal(), rows.len()),
        n_boundary_disagreement: disagreements,
        model_agreement_rate: ratio(wins, disagreements),
        model_agreement_rate_all: ratio(side_match, rows.len()),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraderStat {
    pub grader_id: String,
    pub role: GraderRole,
    pub n_labels: usize,
    pub n_mismatched: usize,
    pub mismatch_rate: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleStat {
    pub role: GraderRole,
    pub n_graders: usize,
    pub n_flagged: usize,
    /// Share of the flagged group drawn from this role.
    pub share_of_flagged: f64,
    /// Share of all graders holding this role.
    pub share_of_pool: f64,
    /// Mean mismatch rate across this role's graders.
    pub mean_mismatch_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraderReport {
    pub threshold: f64,
    pub n_flagged: usize,
    pub graders: Vec<GraderStat>,
    pub roles: Vec<RoleStat>,
}

pub const DEFAULT_MISMATCH_THRESHOLD: f64 = 0.30;

/// Per grader, the share of their labels with a negative quality score;
/// graders strictly above `threshold` are flagged. Roles come from `pool`.
pub fn grader_mismatch_analysis<T: Scalar>(
    scored: &ScoredDataset<T>,
    pool: &GraderPool,
    threshold: f64,
) -> Result<GraderReport> {
    let roles = pool.roles();
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, e) in scored.examples().iter().enumerate() {
        if let Some(g) = &e.grader_id {
            let t = tally.entry(g.as_str()).or_default();
            t.0 += 1;
            t.1 += (scored.score(i) < T::zero()) as usize;
        }
    }
    if tally.is_empty() {
        return Err(Error::NoGraderIds);
    }
    let graders = tally
        .into_iter()
        .map(|(id, (n, bad))| {
            let role = *roles.get(id).ok_or_else(|| Error::UnknownGrader(id.to_string()))?;
            let rate = ratio(bad, n);
            Ok(GraderStat {
                grader_id: id.to_string(),
                role,
                n_labels: n,
                n_mismatched: bad,
                mismatch_rate: rate,
                flagged: rate > threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_flagged = graders.iter().filter(|g| g.flagged).count();
    let roles = GraderRole::ALL
        .into_iter()
        .map(|role| {
            let members: Vec<&GraderStat> = graders.iter().filter(|g| g.role == role).collect();
            let flagged = members.iter().filter(|g| g.flagged).count();
            RoleStat {
                role,
                n_graders: members.len(),
                n_flagged: flagged,
                share_of_flagged: ratio(flagged, n_flagged),
                share_of_pool: ratio(members.len(), graders.len()),
                mean_mismatch_rate: if members.is_empty() {
                    0.0
                } else {
                    members.iter().map(|g| g.mismatch_rate).sum::<f64>() / members.len() as f64
                },
            }
        })
        .collect();
    Ok(GraderReport {
        threshold,
        n_flagged,
        graders,
        roles,
    })
}

/// Examples labeled by graders holding any of `roles`. An empty role list
/// yields an empty dataset.
pub fn filter_by_grader_role<T: Scalar>(
    dataset: &Dataset<T>,
    pool: &GraderPool,
    roles: &[GraderRole],
) -> Result<Dataset<T>> {
    if roles.is_empty() {
        log::warn!("no grader roles requested; result is empty");
    }
    let by_id: HashMap<String, GraderRole> = pool.roles();
    for e in dataset.iter() {
        if let Some(g) = &e.grader_id {
            if !by_id.contains_key(g) {
                return Err(Error::UnknownGrader(g.clone()));
            }
        }
    }
    Ok(dataset.filter(|e| {
        e.grader_id
            .as_ref()
            .and_then(|g| by_id.get(g))
            .is_some_and(|r| roles.contains(r))
    }))
}

/// Parses role names, rejecting unknown ones.
pub fn parse_roles<S: AsRef<str>>(names: &[S]) -> Result<Vec<GraderRole>> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}
