//! ROC AUC, DeLong variance for correlated ROC curves, two-tailed and
//! non-inferiority tests, stratified bootstrap intervals and binarized
//! confusion counts.
//!
//! AUC is the Mann–Whitney statistic computed from midranks. The per-example
//! placement values are kept on [`RocResult`] so the covariance of two curves
//! scored on the same examples falls out of paired components.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::dataset::ClassScheme;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocResult<T> {
    pub auc: T,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Twice the Mann–Whitney U: correctly ordered pairs count 2, ties 1.
    pub twice_u: u64,
    /// For each positive: share of negatives scored below it (ties ½).
    #[serde(skip)]
    pub positive_placements: Vec<T>,
    /// For each negative: share of positives scored below it (ties ½).
    #[serde(skip)]
    pub negative_placements: Vec<T>,
}

impl<T: Scalar> RocResult<T> {
    /// DeLong variance of the single AUC estimate.
    pub fn variance(&self) -> T {
        sample_variance(&self.positive_placements) / T::from_count(self.n_positive)
            + sample_variance(&self.negative_placements) / T::from_count(self.n_negative)
    }
}

fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let n = T::from_count(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
}

/// Doubled midranks (1-based) of `values`; ties share the mean rank.
fn doubled_midranks<T: Scalar>(values: &[T]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r2 = (i + 1 + j) as u64;
        for &idx in &order[i..j] {
            ranks[idx] = r2;
        }
        i = j;
    }
    ranks
}

fn check_inputs<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(pos));
    }
    Ok(())
}

/// Midrank AUC: `P(score_pos > score_neg) + ½ P(equal)`, in `O(n log n)`.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<RocResult<T>> {
    check_inputs(scores, labels)?;
    let pos: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let (m, n) = (pos.len(), neg.len());
    if m == 0 || n == 0 {
        return Err(Error::DegenerateLabels);
    }
    let all = doubled_midranks(scores);
    let within_pos = doubled_midranks(&pos);
    let within_neg = doubled_midranks(&neg);
    let (mut ip, mut ineg) = (0, 0);
    let mut twice_u = 0u64;
    let mut pos_place = Vec::with_capacity(m);
    let mut neg_place = Vec::with_capacity(n);
    let two_n = T::from_count(2 * n);
    let two_m = T::from_count(2 * m);
    for (r_all, &l) in all.iter().zip(labels) {
        if l {
            let below = r_all - within_pos[ip];
            twice_u += below;
            pos_place.push(T::from_u64(below).unwrap() / two_n);
            ip += 1;
        } else {
            let below = r_all - within_neg[ineg];
            neg_place.push(T::from_u64(below).unwrap() / two_m);
            ineg += 1;
        }
    }
    let auc = T::from_u64(twice_u).unwrap() / T::from_count(2 * m * n);
    Ok(RocResult {
        auc,
        n_positive: m,
        n_negative: n,
        twice_u,
        positive_placements: pos_place,
        negative_placements: neg_place,
    })
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Test of two correlated ROC curves from scores on the same examples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelongComparison<T> {
    pub auc_a: T,
    pub auc_b: T,
    /// `auc_a - auc_b`.
    pub delta: T,
    pub variance_of_delta: T,
    /// `delta / sqrt(variance)`.
    pub z: T,
    pub p_two_tailed: T,
    pub margin: Option<T>,
    /// `(delta + margin) / sqrt(variance)`.
    pub z_noninferiority: Option<T>,
    /// Upper-tail p for H0: `auc_a <= auc_b - margin`.
    pub p_noninferiority: Option<T>,
}

impl<T: Scalar> DelongComparison<T> {
    pub fn differs(&self, alpha: f64) -> bool {
        self.p_two_tailed.as_f64() < alpha
    }

    /// `a` beats `b` two-tailed at `alpha`.
    pub fn a_better(&self, alpha: f64) -> bool {
        self.differs(alpha) && self.delta > T::zero()
    }

    pub fn non_inferior(&self, alpha: f64) -> bool {
        self.p_noninferiority.is_some_and(|p| p.as_f64() < alpha)
    }
}

fn delong_core<T: Scalar>(scores_a: &[T], scores_b: &[T], labels: &[bool]) -> Result<(RocResult<T>, RocResult<T>, T)> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::LengthMismatch {
            left: scores_a.len(),
            right: scores_b.len(),
        });
    }
    let ra = roc_auc(scores_a, labels)?;
    let rb = roc_auc(scores_b, labels)?;
    if ra.n_positive < 2 || ra.n_negative < 2 {
        return Err(Error::DegenerateLabels);
    }
    let diff = |x: &[T], y: &[T]| -> Vec<T> { x.iter().zip(y).map(|(&p, &q)| p - q).collect() };
    let d10 = diff(&ra.positive_placements, &rb.positive_placements);
    let d01 = diff(&ra.negative_placements, &rb.negative_placements);
    let var = sample_variance(&d10) / T::from_count(ra.n_positive)
        + sample_variance(&d01) / T::from_count(ra.n_negative);
    Ok((ra, rb, var.max(T::zero())))
}

/// Two-tailed DeLong test of `AUC_a = AUC_b`.
pub fn delong_two_tailed<T: Scalar>(scores_a: &[T], scores_b: &[T], labels: &[bool]) -> Result<DelongComparison<T>> {
    let (ra, rb, var) = delong_core(scores_a, scores_b, labels)?;
    let delta = ra.auc - rb.auc;
    let (z, p) = if var > T::zero() {
        let z = delta / var.sqrt();
        (z, T::lit(2.0 * normal_sf(z.abs().as_f64())).min(T::one()))
    } else if delta == T::zero() {
        (T::zero(), T::one())
    } else {
        return Err(Error::DegenerateVariance);
    };
    Ok(DelongComparison {
        auc_a: ra.auc,
        auc_b: rb.auc,
        delta,
        variance_of_delta: var,
        z,
        p_two_tailed: p,
        margin: None,
        z_noninferiority: None,
        p_noninferiority: None,
    })
}

/// One-sided shifted z-test of H0: `AUC_candidate <= AUC_reference - margin`.
/// A small p supports non-inferiority of the candidate.
pub fn delong_noninferiority<T: Scalar>(
    scores_candidate: &[T],
    scores_reference: &[T],
    labels: &[bool],
    margin: T,
) -> Result<DelongComparison<T>> {
    if !(margin > T::zero()) {
        return Err(Error::InvalidConfig(format!("margin must be positive, got {margin}")));
    }
    let mut cmp = delong_two_tailed(scores_candidate, scores_reference, labels)?;
    let shifted = cmp.delta + margin;
    let z_ni = if cmp.variance_of_delta > T::zero() {
        shifted / cmp.variance_of_delta.sqrt()
    } else if shifted > T::zero() {
        T::infinity()
    } else if shifted < T::zero() {
        T::neg_infinity()
    } else {
        T::zero()
    };
    cmp.margin = Some(margin);
    cmp.z_noninferiority = Some(z_ni);
    cmp.p_noninferiority = Some(T::lit(normal_sf(z_ni.as_f64())));
    Ok(cmp)
}

/// Wald interval for one AUC from its DeLong variance.
pub fn delong_auc_ci<T: Scalar>(roc: &RocResult<T>, z_crit: f64) -> (T, T) {
    let half = T::lit(z_crit) * roc.variance().sqrt();
    ((roc.auc - half).max(T::zero()), (roc.auc + half).min(T::one()))
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// 95% percentile interval of AUC over `n_boot` class-stratified resamples.
/// Replicate `r` draws from a stream seeded by `(seed, r)`, so the result
/// does not depend on thread scheduling.
pub fn bootstrap_auc_ci<T: Scalar>(scores: &[T], labels: &[bool], n_boot: usize, seed: u64) -> Result<(T, T)> {
    if n_boot < 100 {
        return Err(Error::InvalidConfig(format!("n_boot must be at least 100, got {n_boot}")));
    }
    roc_auc(scores, labels)?;
    let pos: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let mut aucs: Vec<T> = (0..n_boot)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng_for(seed, &format!("bootstrap-{r}"));
            let mut s = Vec::with_capacity(pos.len() + neg.len());
            let mut l = Vec::with_capacity(pos.len() + neg.len());
            for _ in 0..pos.len() {
                s.push(pos[rng.random_range(0..pos.len())]);
                l.push(true);
            }
            for _ in 0..neg.len() {
                s.push(neg[rng.random_range(0..neg.len())]);
                l.push(false);
            }
            roc_auc(&s, &l).expect("stratified resample keeps both classes").auc
        })
        .collect();
    aucs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok((quantile_sorted(&aucs, 0.025), quantile_sorted(&aucs, 0.975)))
}

/// 2×2 counts of binarized labels: rows are `a`, columns `b`; index 0 is
/// non-referable, 1 referable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BinaryConfusion {
    pub counts: [[usize; 2]; 2],
}

impl BinaryConfusion {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn off_diagonal(&self) -> usize {
        self.counts[0][1] + self.counts[1][0]
    }

    /// CSV table with named row and column sources, e.g.
    /// `,Specialist non-refer count,Specialist refer count` then one row per
    /// original side.
    pub fn to_table(&self, row_source: &str, column_source: &str) -> String {
        let c = &self.counts;
        format!(
            ",{column_source} non-refer count,{column_source} refer count\n\
             {row_source} non-refer count,{},{}\n\
             {row_source} refer count,{},{}\n",
            c[0][0], c[0][1], c[1][0], c[1][1]
        )
    }
}

pub fn confusion_matrix(labels_a: &[usize], labels_b: &[usize], scheme: &ClassScheme) -> Result<BinaryConfusion> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    let mut m = BinaryConfusion::default();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        m.counts[scheme.is_positive(a) as usize][scheme.is_positive(b) as usize] += 1;
    }
    Ok(m)
}
