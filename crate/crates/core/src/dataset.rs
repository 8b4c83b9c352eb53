//! Labeled datasets: class schemes, examples, deterministic splitting and
//! CSV/JSON persistence.
//!
//! Labels are class indices. The [`ClassScheme`] owns the binarization rule
//! (`label ∈ K+` is a positive, i.e. referable, case) and every other module
//! goes through it.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Ordered class names plus the subset of indices on the positive side of
/// the referral boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemeFile", into = "SchemeFile")]
pub struct ClassScheme {
    class_names: Vec<String>,
    positive: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SchemeFile {
    classes: Vec<String>,
    positive: Vec<usize>,
}

impl TryFrom<SchemeFile> for ClassScheme {
    type Error = Error;
    fn try_from(f: SchemeFile) -> Result<Self> {
        ClassScheme::new(f.classes, f.positive)
    }
}

impl From<ClassScheme> for SchemeFile {
    fn from(s: ClassScheme) -> Self {
        SchemeFile {
            classes: s.class_names,
            positive: s.positive,
        }
    }
}

impl ClassScheme {
    pub fn new<S: Into<String>>(
        class_names: impl IntoIterator<Item = S>,
        positive: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let class_names: Vec<String> = class_names.into_iter().map(Into::into).collect();
        if class_names.len() < 2 {
            return Err(Error::InvalidScheme("need at least two classes".into()));
        }
        let unique: HashSet<&str> = class_names.iter().map(String::as_str).collect();
        if unique.len() != class_names.len() {
            return Err(Error::InvalidScheme("class names must be unique".into()));
        }
        let positive: BTreeSet<usize> = positive.into_iter().collect();
        if positive.is_empty() {
            return Err(Error::InvalidScheme("positive set is empty".into()));
        }
        if let Some(&bad) = positive.iter().find(|&&p| p >= class_names.len()) {
            return Err(Error::InvalidScheme(format!(
                "positive index {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if positive.len() == class_names.len() {
            return Err(Error::InvalidScheme(
                "positive set must be a proper subset of the classes".into(),
            ));
        }
        Ok(ClassScheme {
            class_names,
            positive: positive.into_iter().collect(),
        })
    }

    /// Four-tier glaucoma suspect risk scale; the two upper tiers are referable.
    pub fn gsr() -> Self {
        ClassScheme::new(
            ["non-glaucomatous", "low-risk", "high-risk", "likely-glaucoma"],
            [2, 3],
        )
        .expect("static scheme is valid")
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn positive_indices(&self) -> &[usize] {
        &self.positive
    }

    /// The binarization rule: is `label` on the referable side?
    #[inline]
    pub fn is_positive(&self, label: usize) -> bool {
        self.positive.binary_search(&label).is_ok()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl Default for ClassScheme {
    fn default() -> Self {
        ClassScheme::gsr()
    }
}

/// Which half of the random split an example belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Fold {
    D1,
    D2,
}

impl Fold {
    pub fn opposite(self) -> Fold {
        match self {
            Fold::D1 => Fold::D2,
            Fold::D2 => Fold::D1,
        }
    }
}

impl fmt::Display for Fold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fold::D1 => "D1",
            Fold::D2 => "D2",
        })
    }
}

impl FromStr for Fold {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "D1" => Ok(Fold::D1),
            "D2" => Ok(Fold::D2),
            other => Err(format!("unknown fold {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub id: String,
    pub features: Vec<T>,
    /// Observed, possibly noisy, class index.
    pub label: usize,
    /// Hidden ground truth; only synthetic data carries it.
    pub true_label: Option<usize>,
    pub grader_id: Option<String>,
    pub fold: Option<Fold>,
    pub quality_score: Option<T>,
}

impl<T> Example<T> {
    pub fn new(id: impl Into<String>, features: Vec<T>, label: usize) -> Self {
        Example {
            id: id.into(),
            features,
            label,
            true_label: None,
            grader_id: None,
            fold: None,
            quality_score: None,
        }
    }
}

/// An immutable collection of examples sharing a scheme and feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    scheme: ClassScheme,
    feature_dim: usize,
    examples: Vec<Example<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(scheme: ClassScheme, feature_dim: usize, examples: Vec<Example<T>>) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidDataset("feature_dim must be positive".into()));
        }
        let k = scheme.num_classes();
        let min_qs = T::one() / T::from_count(k) - T::lit(1e-6);
        let max_qs = T::one() + T::lit(1e-6);
        let mut ids = HashSet::with_capacity(examples.len());
        for (row, e) in examples.iter().enumerate() {
            if e.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    got: e.features.len(),
                });
            }
            for label in std::iter::once(e.label).chain(e.true_label) {
                if label >= k {
                    return Err(Error::LabelOutOfRange {
                        row: row + 1,
                        label,
                        num_classes: k,
                    });
                }
            }
            if let Some(qs) = e.quality_score {
                let m = qs.abs();
                if !(m >= min_qs && m <= max_qs) {
                    return Err(Error::InvalidDataset(format!(
                        "example {}: quality score {qs} outside [1/{k}, 1] in magnitude",
                        e.id
                    )));
                }
            }
            if !ids.insert(e.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate id {:?}", e.id)));
            }
        }
        Ok(Dataset {
            scheme,
            feature_dim,
            examples,
        })
    }

    pub fn empty(scheme: ClassScheme, feature_dim: usize) -> Self {
        Dataset {
            scheme,
            feature_dim,
            examples: Vec::new(),
        }
    }

    pub fn scheme(&self) -> &ClassScheme {
        &self.scheme
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn examples(&self) -> &[Example<T>] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example<T>> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example<T>> {
        self.examples.iter()
    }

    /// Whether each example's observed label is referable.
    pub fn binary_labels(&self) -> Vec<bool> {
        self.examples
            .iter()
            .map(|e| self.scheme.is_positive(e.label))
            .collect()
    }

    /// Binarized ground truth, when every example carries one.
    pub fn binary_true_labels(&self) -> Result<Vec<bool>> {
        self.examples
            .iter()
            .map(|e| {
                e.true_label
                    .map(|t| self.scheme.is_positive(t))
                    .ok_or_else(|| Error::NoGroundTruth(e.id.clone()))
            })
            .collect()
    }

    /// Examples satisfying `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Example<T>) -> bool) -> Dataset<T> {
        Dataset {
            scheme: self.scheme.clone(),
            feature_dim: self.feature_dim,
            examples: self.examples.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    /// Subset with the given ids, in dataset order. Unknown ids are ignored.
    pub fn select_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Dataset<T> {
        let wanted: HashSet<&str> = ids.into_iter().collect();
        self.filter(|e| wanted.contains(e.id.as_str()))
    }

    /// Same scheme and dimension with a replacement example list.
    pub fn with_examples(&self, examples: Vec<Example<T>>) -> Result<Dataset<T>> {
        Dataset::new(self.scheme.clone(), self.feature_dim, examples)
    }

    /// Indices of the examples ordered by id.
    pub(crate) fn id_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.examples.len()).collect();
        order.sort_by(|&a, &b| self.examples[a].id.cmp(&self.examples[b].id));
        order
    }

    pub fn positive_rate(&self) -> Result<f64> {
        positive_rate(self)
    }
}

/// Fraction of examples whose observed label is in `K+`.
pub fn positive_rate<T: Scalar>(dataset: &Dataset<T>) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let positives = dataset
        .iter()
        .filter(|e| dataset.scheme.is_positive(e.label))
        .count();
    Ok(positives as f64 / dataset.len() as f64)
}

/// Seeded random halving. Ids are sorted before a Fisher–Yates shuffle, so
/// the partition does not depend on storage order. With an odd count the
/// extra example goes to `D1`. Both halves come back in id order with their
/// `fold` field set.
pub fn split_random<T: Scalar>(dataset: &Dataset<T>, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::TooSmallToSplit(n));
    }
    let mut order = dataset.id_order();
    order.shuffle(&mut seed::rng_from(seed));
    let n1 = n.div_ceil(2);
    let mut first: Vec<usize> = order[..n1].to_vec();
    let mut second: Vec<usize> = order[n1..].to_vec();
    first.sort_by(|&a, &b| dataset.examples[a].id.cmp(&dataset.examples[b].id));
    second.sort_by(|&a, &b| dataset.examples[a].id.cmp(&dataset.examples[b].id));
    let take = |idx: &[usize], fold: Fold| -> Dataset<T> {
        let examples = idx
            .iter()
            .map(|&i| Example {
                fold: Some(fold),
                ..dataset.examples[i].clone()
            })
            .collect();
        Dataset {
            scheme: dataset.scheme.clone(),
            feature_dim: dataset.feature_dim,
            examples,
        }
    };
    Ok((take(&first, Fold::D1), take(&second, Fold::D2)))
}

/// Seeded random subset of `round(fraction * n)` examples, in id order.
pub fn sample_fraction<T: Scalar>(dataset: &Dataset<T>, fraction: f64, seed: u64) -> Result<Dataset<T>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "subsample fraction {fraction} outside (0, 1]"
        )));
    }
    let n = dataset.len();
    let keep = ((fraction * n as f64).round() as usize).min(n);
    let mut order = dataset.id_order();
    order.shuffle(&mut seed::rng_from(seed));
    let mut chosen = order[..keep].to_vec();
    chosen.sort_by(|&a, &b| dataset.examples[a].id.cmp(&dataset.examples[b].id));
    Ok(Dataset {
        scheme: dataset.scheme.clone(),
        feature_dim: dataset.feature_dim,
        examples: chosen.iter().map(|&i| dataset.examples[i].clone()).collect(),
    })
}

/// Sidecar path holding the class scheme for a dataset CSV:
/// `train.csv` → `train.scheme.json`.
pub fn scheme_sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.scheme.json"))
}

/// Reads a dataset CSV, taking the scheme from its sidecar file.
pub fn read_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let scheme = ClassScheme::read_json(scheme_sidecar_path(path))?;
    read_dataset_with_scheme(path, scheme)
}

pub fn read_dataset_with_scheme<T: Scalar>(path: impl AsRef<Path>, scheme: ClassScheme) -> Result<Dataset<T>> {
    Ok(read_table(path.as_ref(), scheme)?.0)
}

/// Writes the dataset CSV and its scheme sidecar.
pub fn write_dataset<T: Scalar>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_table(dataset, None, path)?;
    dataset.scheme.write_json(scheme_sidecar_path(path))
}

const FIXED_COLUMNS: [&str; 4] = ["id", "label", "true_label", "grader_id"];

/// Writes the CSV body. `fold` and `quality_score` columns appear when any
/// example carries them or when `probabilities` is given; `p0..` columns
/// only with `probabilities`.
pub(crate) fn write_table<T: Scalar>(
    dataset: &Dataset<T>,
    probabilities: Option<&[Vec<T>]>,
    path: &Path,
) -> Result<()> {
    if let Some(p) = probabilities {
        if p.len() != dataset.len() {
            return Err(Error::LengthMismatch {
                left: dataset.len(),
                right: p.len(),
            });
        }
    }
    let scored = probabilities.is_some()
        || dataset
            .iter()
            .any(|e| e.fold.is_some() || e.quality_score.is_some());
    let k = dataset.scheme.num_classes();
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..dataset.feature_dim).map(|j| format!("f{j}")));
    if scored {
        header.push("fold".into());
        header.push("quality_score".into());
    }
    if probabilities.is_some() {
        header.extend((0..k).map(|j| format!("p{j}")));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(std::io::BufWriter::new(file));
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (i, e) in dataset.iter().enumerate() {
        record.clear();
        record.push(e.id.clone());
        record.push(e.label.to_string());
        record.push(e.true_label.map(|t| t.to_string()).unwrap_or_default());
        record.push(e.grader_id.clone().unwrap_or_default());
        record.extend(e.features.iter().map(|v| v.to_string()));
        if scored {
            record.push(e.fold.map(|f| f.to_string()).unwrap_or_default());
            record.push(e.quality_score.map(|q| q.to_string()).unwrap_or_default());
        }
        if let Some(p) = probabilities {
            record.extend(p[i].iter().map(|v| v.to_string()));
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Column layout discovered from a CSV header.
struct Layout {
    truth_col: Option<usize>,
    grader_col: Option<usize>,
    feature_start: usize,
    feature_dim: usize,
    fold_col: Option<usize>,
    qs_col: Option<usize>,
    prob_start: Option<usize>,
}

fn parse_layout(header: &csv::StringRecord, k: usize) -> Result<Layout> {
    let bad = |reason: String| Error::MalformedRow { row: 0, reason };
    for (i, want) in FIXED_COLUMNS[..2].iter().enumerate() {
        if header.get(i) != Some(want) {
            return Err(bad(format!("header column {i} must be {want:?}")));
        }
    }
    let mut col = 2;
    let mut optional = |name: &str| {
        (header.get(col) == Some(name)).then(|| {
            col += 1;
            col - 1
        })
    };
    let truth_col = optional("true_label");
    let grader_col = optional("grader_id");
    let feature_start = col;
    let mut feature_dim = 0;
    while header.get(col) == Some(format!("f{feature_dim}").as_str()) {
        feature_dim += 1;
        col += 1;
    }
    if feature_dim == 0 {
        return Err(bad("no feature columns f0..".into()));
    }
    let mut layout = Layout {
        truth_col,
        grader_col,
        feature_start,
        feature_dim,
        fold_col: None,
        qs_col: None,
        prob_start: None,
    };
    if header.get(col) == Some("fold") {
        layout.fold_col = Some(col);
        col += 1;
    }
    if header.get(col) == Some("quality_score") {
        layout.qs_col = Some(col);
        col += 1;
    }
    if header.get(col) == Some("p0") {
        for j in 0..k {
            if header.get(col + j) != Some(format!("p{j}").as_str()) {
                return Err(bad(format!("expected probability columns p0..p{}", k - 1)));
            }
        }
        layout.prob_start = Some(col);
        col += k;
    }
    if col != header.len() {
        return Err(bad(format!("unexpected column {:?}", header.get(col).unwrap_or(""))));
    }
    Ok(layout)
}

fn parse_label(cell: &str, scheme: &ClassScheme, row: usize) -> Result<usize> {
    let label = match cell.parse::<usize>() {
        Ok(idx) => idx,
        Err(_) => scheme.class_index(cell).ok_or_else(|| Error::UnknownClass {
            row,
            name: cell.to_string(),
        })?,
    };
    if label >= scheme.num_classes() {
        return Err(Error::LabelOutOfRange {
            row,
            label,
            num_classes: scheme.num_classes(),
        });
    }
    Ok(label)
}

fn parse_real<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    cell.trim()
        .parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::MalformedRow {
            row,
            reason: format!("column {column}: {cell:?} is not a finite number"),
        })
}

/// Reads a dataset or scored dataset. The `true_label` and `grader_id`
/// columns may be left out. Rows are numbered from 1 (first data row) in
/// errors.
pub(crate) fn read_table<T: Scalar>(path: &Path, scheme: ClassScheme) -> Result<(Dataset<T>, Option<Vec<Vec<T>>>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let header = rdr.headers()?.clone();
    let k = scheme.num_classes();
    let layout = parse_layout(&header, k)?;
    let mut examples = Vec::new();
    let mut probs: Option<Vec<Vec<T>>> = layout.prob_start.map(|_| Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected {} columns, found {}", header.len(), rec.len()),
            });
        }
        let label = parse_label(&rec[1], &scheme, row)?;
        let true_label = match layout.truth_col.map(|c| &rec[c]) {
            None | Some("") => None,
            Some(cell) => Some(parse_label(cell, &scheme, row)?),
        };
        let grader_id = match layout.grader_col.map(|c| &rec[c]) {
            None | Some("") => None,
            Some(cell) => Some(cell.to_string()),
        };
        let fs = layout.feature_start;
        let features = (0..layout.feature_dim)
            .map(|j| parse_real(&rec[fs + j], row, &header[fs + j]))
            .collect::<Result<Vec<T>>>()?;
        let fold = match layout.fold_col.map(|c| &rec[c]) {
            None | Some("") => None,
            Some(cell) => Some(cell.parse::<Fold>().map_err(|reason| Error::MalformedRow { row, reason })?),
        };
        let quality_score = match layout.qs_col.map(|c| &rec[c]) {
            None | Some("") => None,
            Some(cell) => Some(parse_real(cell, row, "quality_score")?),
        };
        if let (Some(start), Some(out)) = (layout.prob_start, probs.as_mut()) {
            let p = (0..k)
                .map(|j| parse_real(&rec[start + j], row, &header[start + j]))
                .collect::<Result<Vec<T>>>()?;
            out.push(p);
        }
        examples.push(Example {
            id: rec[0].to_string(),
            features,
            label,
            true_label,
            grader_id,
            fold,
            quality_score,
        });
    }
    let dataset = Dataset::new(scheme, layout.feature_dim, examples)?;
    Ok((dataset, probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(labels: &[usize]) -> Dataset<f64> {
        let examples = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Example::new(format!("e{i:03}"), vec![i as f64, -(i as f64)], l))
            .collect();
        Dataset::new(ClassScheme::gsr(), 2, examples).unwrap()
    }

    #[test]
    fn positive_rate_counts_referable_labels() {
        let d = toy(&[0, 0, 0, 1, 1, 1, 1, 2, 3, 3]);
        assert_eq!(positive_rate(&d).unwrap(), 0.3);
        assert_eq!(positive_rate(&toy(&[2, 3, 3])).unwrap(), 1.0);
    }

    #[test]
    fn positive_rate_of_empty_dataset_fails() {
        let d = Dataset::<f64>::empty(ClassScheme::gsr(), 3);
        assert_eq!(positive_rate(&d).unwrap_err().code(), "empty-dataset");
    }

    #[test]
    fn scheme_validation() {
        assert!(ClassScheme::new(["a", "b"], [0, 1]).is_err());
        assert!(ClassScheme::new(["a", "b"], Vec::<usize>::new()).is_err());
        assert!(ClassScheme::new(["a", "a"], [0]).is_err());
        assert!(ClassScheme::new(["a"], [0]).is_err());
        assert!(ClassScheme::new(["a", "b"], [2]).is_err());
        let s = ClassScheme::gsr();
        assert!(s.is_positive(2) && s.is_positive(3));
        assert!(!s.is_positive(0) && !s.is_positive(1));
    }

    #[test]
    fn scheme_json_shape() {
        let json = serde_json::to_string(&ClassScheme::gsr()).unwrap();
        assert_eq!(
            json,
            r#"{"classes":["non-glaucomatous","low-risk","high-risk","likely-glaucoma"],"positive":[2,3]}"#
        );
        let bad: std::result::Result<ClassScheme, _> =
            serde_json::from_str(r#"{"classes":["a","b"],"positive":[0,1]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn split_sizes_and_odd_rule() {
        let d = toy(&vec![0; 101]);
        let (a, b) = split_random(&d, 3).unwrap();
        assert_eq!((a.len(), b.len()), (51, 50));
        assert!(a.iter().all(|e| e.fold == Some(Fold::D1)));
        assert!(b.iter().all(|e| e.fold == Some(Fold::D2)));
        let d = toy(&vec![1; 70]);
        let (a, b) = split_random(&d, 3).unwrap();
        assert_eq!((a.len(), b.len()), (35, 35));
    }

    #[test]
    fn split_is_deterministic_and_order_independent() {
        let d = toy(&[0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2]);
        let (a1, b1) = split_random(&d, 11).unwrap();
        let (a2, b2) = split_random(&d, 11).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let mut reversed = d.examples().to_vec();
        reversed.reverse();
        let r = d.with_examples(reversed).unwrap();
        let (a3, _) = split_random(&r, 11).unwrap();
        assert_eq!(a1, a3);
    }

    #[test]
    fn split_rejects_tiny_sets() {
        let d = toy(&[0]);
        assert_eq!(split_random(&d, 0).unwrap_err().code(), "too-small-to-split");
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        let s = ClassScheme::gsr();
        let e = Example::new("a", vec![0.0f64], 7);
        assert_eq!(Dataset::new(s.clone(), 1, vec![e]).unwrap_err().code(), "label-out-of-range");
        let dup = vec![Example::new("a", vec![0.0f64], 0), Example::new("a", vec![1.0], 0)];
        assert!(Dataset::new(s.clone(), 1, dup).is_err());
        let wide = vec![Example::new("a", vec![0.0f64, 1.0], 0)];
        assert_eq!(Dataset::new(s, 1, wide).unwrap_err().code(), "dimension-mismatch");
    }

    #[test]
    fn sample_fraction_keeps_rounded_count() {
        let d = toy(&vec![0; 70]);
        assert_eq!(sample_fraction(&d, 4.0 / 7.0, 1).unwrap().len(), 40);
        assert_eq!(sample_fraction(&d, 1.0, 1).unwrap(), d);
        assert!(sample_fraction(&d, 0.0, 1).is_err());
    }

    #[test]
    fn sidecar_path_replaces_extension() {
        assert_eq!(
            scheme_sidecar_path(Path::new("/x/train.csv")),
            PathBuf::from("/x/train.scheme.json")
        );
    }
}
