//! Synthetic populations with known ground truth, corrupted by a pool of
//! graders whose errors follow per-grader confusion matrices.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassScheme, Dataset, Example};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub n: usize,
    pub feature_dim: usize,
    pub class_priors: Vec<f64>,
    /// Explicit per-class means; generated on a line when absent.
    pub class_means: Option<Vec<Vec<f64>>>,
    /// Shared isotropic standard deviation.
    pub class_spread: f64,
    /// Larger values pull adjacent class means together.
    pub ambiguity_overlap: f64,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for PopulationConfig {
    /// Desk-scale analog of the glaucoma training population: 24.6% of cases
    /// in the two referable tiers.
    fn default() -> Self {
        PopulationConfig {
            n: 20_000,
            feature_dim: 12,
            class_priors: vec![0.554, 0.2, 0.156, 0.09],
            class_means: None,
            class_spread: 1.0,
            ambiguity_overlap: 1.0,
            seed: 0,
            id_prefix: "ex".into(),
        }
    }
}

/// Spacing between adjacent class means, in units of `class_spread`, at
/// zero overlap.
const BASE_SEPARATION: f64 = 4.0;

impl PopulationConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 || self.feature_dim == 0 {
            return bad("population needs n > 0 and feature_dim > 0".into());
        }
        if self.class_priors.len() != num_classes {
            return bad(format!(
                "{} class priors for {num_classes} classes",
                self.class_priors.len()
            ));
        }
        if self.class_priors.iter().any(|&p| !(p >= 0.0)) {
            return bad("class priors must be non-negative".into());
        }
        let total: f64 = self.class_priors.iter().sum();
        if (total - 1.0).abs() > ROW_TOLERANCE {
            return bad(format!("class priors sum to {total}, not 1"));
        }
        if !(self.class_spread > 0.0) {
            return bad("class_spread must be positive".into());
        }
        if !(self.ambiguity_overlap >= 0.0) {
            return bad("ambiguity_overlap must be non-negative".into());
        }
        if let Some(means) = &self.class_means {
            if means.len() != num_classes || means.iter().any(|m| m.len() != self.feature_dim) {
                return bad("class_means must be classes × feature_dim".into());
            }
        }
        Ok(())
    }

    /// Class means: explicit, or evenly spaced on the diagonal direction and
    /// centred on the origin.
    pub fn means(&self, num_classes: usize) -> Vec<Vec<f64>> {
        if let Some(m) = &self.class_means {
            return m.clone();
        }
        let spacing = self.class_spread * BASE_SEPARATION / (1.0 + self.ambiguity_overlap);
        let unit = 1.0 / (self.feature_dim as f64).sqrt();
        let centre = (num_classes as f64 - 1.0) / 2.0;
        (0..num_classes)
            .map(|c| vec![(c as f64 - centre) * spacing * unit; self.feature_dim])
            .collect()
    }
}

/// Four-class layout used by the reference experiments, in units of
/// `spread`: the first three tiers sit on a severity axis `u` at -2, 0 and 2,
/// and the last tier branches off it at `(1, 2)` along an orthogonal axis `v`.
/// `u` spans the first half of the coordinates and `v` the rest.
pub fn branched_means(feature_dim: usize, spread: f64) -> Vec<Vec<f64>> {
    let split = feature_dim.div_ceil(2);
    let su = 1.0 / (split as f64).sqrt();
    let sv = if feature_dim > split {
        1.0 / ((feature_dim - split) as f64).sqrt()
    } else {
        0.0
    };
    [(-2.0, 0.0), (0.0, 0.0), (2.0, 0.0), (1.0, 2.0)]
        .iter()
        .map(|&(a, b)| {
            (0..feature_dim)
                .map(|j| spread * if j < split { a * su } else { b * sv })
                .collect()
        })
        .collect()
}

impl PopulationConfig {
    /// Reference population for the experiment suite: default size and
    /// priors with the branched four-class layout.
    pub fn reference() -> Self {
        let base = PopulationConfig::default();
        PopulationConfig {
            class_means: Some(branched_means(base.feature_dim, base.class_spread)),
            ..base
        }
    }
}

/// Draws `n` examples with true labels from the priors and features from the
/// class-conditional isotropic Gaussian. Observed labels start equal to the
/// true labels. Example `i` uses a stream seeded by `(seed, id)`.
pub fn generate_population<T: Scalar>(config: &PopulationConfig, scheme: &ClassScheme) -> Result<Dataset<T>> {
    let k = scheme.num_classes();
    config.validate(k)?;
    let means = config.means(k);
    let priors = WeightedIndex::new(&config.class_priors)
        .map_err(|e| Error::InvalidConfig(format!("class priors: {e}")))?;
    let width = config.n.to_string().len().max(6);
    let examples = (0..config.n)
        .map(|i| {
            let id = format!("{}{:0width$}", config.id_prefix, i, width = width);
            let mut rng = seed::rng_for(config.seed, &id);
            let c = priors.sample(&mut rng);
            let features = means[c]
                .iter()
                .map(|&mu| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(mu + config.class_spread * z)
                })
                .collect();
            let mut e = Example::new(id, features, c);
            e.true_label = Some(c);
            e
        })
        .collect();
    Dataset::new(scheme.clone(), config.feature_dim, examples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraderRole {
    GlaucomaSpecialist,
    RetinaSpecialist,
    Ophthalmologist,
    TraineeFellow,
    Optometrist,
}

impl GraderRole {
    pub const ALL: [GraderRole; 5] = [
        GraderRole::GlaucomaSpecialist,
        GraderRole::RetinaSpecialist,
        GraderRole::Ophthalmologist,
        GraderRole::TraineeFellow,
        GraderRole::Optometrist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraderRole::GlaucomaSpecialist => "glaucoma-specialist",
            GraderRole::RetinaSpecialist => "retina-specialist",
            GraderRole::Ophthalmologist => "ophthalmologist",
            GraderRole::TraineeFellow => "trainee-fellow",
            GraderRole::Optometrist => "optometrist",
        }
    }
}

impl fmt::Display for GraderRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraderRole {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GraderRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraderProfile {
    pub grader_id: String,
    pub role: GraderRole,
    /// Row = true class, column = assigned label.
    pub confusion: Vec<Vec<f64>>,
    pub workload_weight: f64,
}

/// Confusion rows as written in a pool file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ConfusionSpec {
    Matrix(Vec<Vec<f64>>),
    Adjacent { flip_to_adjacent: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpec {
    grader_id: String,
    role: GraderRole,
    confusion: ConfusionSpec,
    #[serde(default = "unit_weight")]
    workload_weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolSpec {
    graders: Vec<ProfileSpec>,
}

/// Row-stochastic matrix where each class moves to its neighbours with
/// probability `p`, split evenly when it has two.
pub fn flip_to_adjacent(num_classes: usize, p: f64) -> Vec<Vec<f64>> {
    (0..num_classes)
        .map(|c| {
            let mut row = vec![0.0; num_classes];
            let neighbours: Vec<usize> = [c.checked_sub(1), (c + 1 < num_classes).then_some(c + 1)]
                .into_iter()
                .flatten()
                .collect();
            row[c] = 1.0 - p;
            for &nb in &neighbours {
                row[nb] += p / neighbours.len() as f64;
            }
            row
        })
        .collect()
}

pub fn identity_confusion(num_classes: usize) -> Vec<Vec<f64>> {
    (0..num_classes)
        .map(|c| (0..num_classes).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Per-role error profile used to build the reference pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleNoise {
    /// Boundary-crossing probability for negative classes adjacent to the boundary.
    pub negative_near: f64,
    /// Boundary-crossing probability for positive classes adjacent to the boundary.
    pub positive_near: f64,
    /// Crossing rate of classes away from the boundary, relative to the near rate.
    pub far_factor: f64,
    /// Probability of a same-side severity slip to a neighbouring class.
    pub within_side: f64,
}

impl RoleNoise {
    /// Confusion matrix: a crossing lands on the nearest class across the
    /// boundary; same-side slips go to index neighbours on the same side.
    pub fn confusion(&self, scheme: &ClassScheme) -> Vec<Vec<f64>> {
        let k = scheme.num_classes();
        (0..k)
            .map(|c| {
                let side = scheme.is_positive(c);
                let across = (0..k)
                    .filter(|&j| scheme.is_positive(j) != side)
                    .min_by_key(|&j| (j.abs_diff(c), j))
                    .expect("scheme has both sides");
                let near = (0..k).any(|j| j.abs_diff(c) == 1 && scheme.is_positive(j) != side);
                let base = if side { self.positive_near } else { self.negative_near };
                let cross = if near { base } else { base * self.far_factor };
                let same: Vec<usize> = [c.checked_sub(1), (c + 1 < k).then_some(c + 1)]
                    .into_iter()
                    .flatten()
                    .filter(|&j| scheme.is_positive(j) == side)
                    .collect();
                let slip = if same.is_empty() { 0.0 } else { self.within_side };
                let mut row = vec![0.0; k];
                row[c] = 1.0 - cross - slip;
                row[across] += cross;
                for &j in &same {
                    row[j] += slip / same.len() as f64;
                }
                row
            })
            .collect()
    }
}

/// Default role profiles: specialists rarely cross the boundary, trainees
/// most often, with errors concentrated on the two boundary-adjacent tiers.
pub fn reference_role_noise(role: GraderRole) -> RoleNoise {
    let (negative_near, positive_near, far_factor, within_side) = match role {
        GraderRole::GlaucomaSpecialist => (0.02, 0.08, 0.25, 0.03),
        GraderRole::RetinaSpecialist => (0.08, 0.30, 0.25, 0.08),
        GraderRole::Ophthalmologist => (0.10, 0.35, 0.25, 0.08),
        GraderRole::TraineeFellow => (0.62, 0.78, 0.25, 0.12),
        GraderRole::Optometrist => (0.12, 0.40, 0.25, 0.10),
    };
    RoleNoise {
        negative_near,
        positive_near,
        far_factor,
        within_side,
    }
}

/// Grader head-count per role in the reference pool (43 graders).
pub const REFERENCE_ROLE_COUNTS: [(GraderRole, usize); 5] = [
    (GraderRole::GlaucomaSpecialist, 15),
    (GraderRole::RetinaSpecialist, 7),
    (GraderRole::Ophthalmologist, 8),
    (GraderRole::TraineeFellow, 10),
    (GraderRole::Optometrist, 3),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraderPool {
    pub graders: Vec<GraderProfile>,
}

impl GraderPool {
    pub fn new(graders: Vec<GraderProfile>, num_classes: usize) -> Result<Self> {
        let pool = GraderPool { graders };
        pool.validate(num_classes)?;
        Ok(pool)
    }

    /// 43 graders with equal workload and role-dependent confusion.
    pub fn reference(scheme: &ClassScheme) -> Self {
        Self::from_role_noise(scheme, reference_role_noise)
    }

    pub fn from_role_noise(scheme: &ClassScheme, noise: impl Fn(GraderRole) -> RoleNoise) -> Self {
        let mut graders = Vec::new();
        for (role, count) in REFERENCE_ROLE_COUNTS {
            let confusion = noise(role).confusion(scheme);
            for _ in 0..count {
                graders.push(GraderProfile {
                    grader_id: format!("g{:02}", graders.len() + 1),
                    role,
                    confusion: confusion.clone(),
                    workload_weight: 1.0,
                });
            }
        }
        GraderPool { graders }
    }

    /// Every grader labels perfectly.
    pub fn noiseless(scheme: &ClassScheme) -> Self {
        Self::from_role_noise(scheme, |_| RoleNoise {
            negative_near: 0.0,
            positive_near: 0.0,
            far_factor: 0.0,
            within_side: 0.0,
        })
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.graders.is_empty() {
            return Err(Error::EmptyPool);
        }
        let mut seen = HashMap::new();
        for g in &self.graders {
            if seen.insert(g.grader_id.as_str(), ()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate grader id {}", g.grader_id)));
            }
            if !(g.workload_weight >= 0.0 && g.workload_weight.is_finite()) {
                return Err(Error::InvalidConfig(format!("grader {}: bad workload weight", g.grader_id)));
            }
            if g.confusion.len() != num_classes || g.confusion.iter().any(|r| r.len() != num_classes) {
                return Err(Error::InvalidConfig(format!(
                    "grader {}: confusion must be {num_classes}×{num_classes}",
                    g.grader_id
                )));
            }
            for row in &g.confusion {
                if row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidConfig(format!(
                        "grader {}: confusion rows must be non-negative and sum to 1",
                        g.grader_id
                    )));
                }
            }
        }
        if self.graders.iter().all(|g| g.workload_weight == 0.0) {
            return Err(Error::InvalidConfig("all workload weights are zero".into()));
        }
        Ok(())
    }

    pub fn role_of(&self, grader_id: &str) -> Option<GraderRole> {
        self.graders.iter().find(|g| g.grader_id == grader_id).map(|g| g.role)
    }

    pub fn roles(&self) -> HashMap<String, GraderRole> {
        self.graders.iter().map(|g| (g.grader_id.clone(), g.role)).collect()
    }

    /// Parses a pool file, expanding `{"flip_to_adjacent": p}` shorthands.
    pub fn from_json(text: &str, num_classes: usize) -> Result<Self> {
        let spec: PoolSpec = serde_json::from_str(text)?;
        let graders = spec
            .graders
            .into_iter()
            .map(|p| GraderProfile {
                grader_id: p.grader_id,
                role: p.role,
                confusion: match p.confusion {
                    ConfusionSpec::Matrix(m) => m,
                    ConfusionSpec::Adjacent { flip_to_adjacent: q } => flip_to_adjacent(num_classes, q),
                },
                workload_weight: p.workload_weight,
            })
            .collect();
        GraderPool::new(graders, num_classes)
    }

    pub fn read_json(path: impl AsRef<Path>, num_classes: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GraderPool::from_json(&text, num_classes)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Workload-weighted probability that a true class `c` example receives
    /// a label on the other side of the boundary.
    pub fn expected_crossing_rate(&self, scheme: &ClassScheme, c: usize) -> f64 {
        let total: f64 = self.graders.iter().map(|g| g.workload_weight).sum();
        self.graders
            .iter()
            .map(|g| {
                let cross: f64 = (0..scheme.num_classes())
                    .filter(|&j| scheme.is_positive(j) != scheme.is_positive(c))
                    .map(|j| g.confusion[c][j])
                    .sum();
                g.workload_weight * cross
            })
            .sum::<f64>()
            / total
    }
}

/// Assigns each example a grader (∝ workload) and replaces its label with a
/// draw from that grader's confusion row for the true class. Features and
/// true labels are untouched.
pub fn apply_grader_noise<T: Scalar>(dataset: &Dataset<T>, pool: &GraderPool, seed: u64) -> Result<Dataset<T>> {
    let k = dataset.scheme().num_classes();
    pool.validate(k)?;
    let pick_grader = WeightedIndex::new(pool.graders.iter().map(|g| g.workload_weight))
        .map_err(|e| Error::InvalidConfig(format!("workload weights: {e}")))?;
    let rows: Vec<Vec<WeightedIndex<f64>>> = pool
        .graders
        .iter()
        .map(|g| {
            g.confusion
                .iter()
                .map(|row| WeightedIndex::new(row).expect("validated confusion row"))
                .collect()
        })
        .collect();
    // Namespaced so that sharing a seed with the population generator does
    // not correlate an example's label draw with its feature draw.
    let stream = seed::derive_seed(seed, "grader-noise");
    let examples = dataset
        .iter()
        .map(|e| {
            let truth = e.true_label.ok_or_else(|| Error::NoGroundTruth(e.id.clone()))?;
            let mut rng = seed::rng_for(stream, &e.id);
            let g = pick_grader.sample(&mut rng);
            Ok(Example {
                label: rows[g][truth].sample(&mut rng),
                grader_id: Some(pool.graders[g].grader_id.clone()),
                ..e.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    dataset.with_examples(examples)
}

/// Fraction of examples whose observed label differs from the true label at
/// the referral boundary.
pub fn boundary_noise_rate<T: Scalar>(dataset: &Dataset<T>) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let s = dataset.scheme();
    let mut flipped = 0usize;
    for e in dataset.iter() {
        let t = e.true_label.ok_or_else(|| Error::NoGroundTruth(e.id.clone()))?;
        flipped += (s.is_positive(t) != s.is_positive(e.label)) as usize;
    }
    Ok(flipped as f64 / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_shorthand_expansion() {
        let m = flip_to_adjacent(4, 0.2);
        assert_eq!(m[0], vec![0.8, 0.2, 0.0, 0.0]);
        assert_eq!(m[1], vec![0.1, 0.8, 0.1, 0.0]);
        assert_eq!(m[3], vec![0.0, 0.0, 0.2, 0.8]);
    }

    #[test]
    fn pool_json_accepts_matrix_and_shorthand() {
        let text = r#"{"graders":[
            {"grader_id":"a","role":"glaucoma-specialist","confusion":[[1,0],[0,1]]},
            {"grader_id":"b","role":"trainee-fellow","workload_weight":2.0,"confusion":{"flip_to_adjacent":0.5}}
        ]}"#;
        let pool = GraderPool::from_json(text, 2).unwrap();
        assert_eq!(pool.graders[1].confusion, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(pool.role_of("b"), Some(GraderRole::TraineeFellow));
        let bad = r#"{"graders":[{"grader_id":"a","role":"surgeon","confusion":[[1,0],[0,1]]}]}"#;
        assert!(GraderPool::from_json(bad, 2).is_err());
        let rows = r#"{"graders":[{"grader_id":"a","role":"optometrist","confusion":[[0.9,0.2],[0,1]]}]}"#;
        assert!(GraderPool::from_json(rows, 2).is_err());
        assert_eq!(
            GraderPool::from_json(r#"{"graders":[]}"#, 2).unwrap_err().code(),
            "empty-pool"
        );
    }

    #[test]
    fn reference_pool_is_row_stochastic() {
        let s = ClassScheme::gsr();
        let pool = GraderPool::reference(&s);
        assert_eq!(pool.graders.len(), 43);
        pool.validate(4).unwrap();
        let spec = reference_role_noise(GraderRole::GlaucomaSpecialist).confusion(&s);
        // class 1 crosses to class 2, class 3 crosses to class 1
        assert!(spec[1][2] > 0.0 && spec[3][1] > 0.0 && spec[3][0] == 0.0);
    }

    #[test]
    fn role_names_round_trip() {
        for r in GraderRole::ALL {
            assert_eq!(r.as_str().parse::<GraderRole>().unwrap(), r);
        }
        assert_eq!("nurse".parse::<GraderRole>().unwrap_err().code(), "unknown-role");
    }

    #[test]
    fn degenerate_population_is_rejected() {
        let s = ClassScheme::gsr();
        let cfg = PopulationConfig {
            n: 0,
            ..Default::default()
        };
        assert!(generate_population::<f64>(&cfg, &s).is_err());
        let cfg = PopulationConfig {
            feature_dim: 0,
            ..Default::default()
        };
        assert!(generate_population::<f64>(&cfg, &s).is_err());
        let cfg = PopulationConfig {
            class_priors: vec![0.5, 0.5, 0.5, -0.5],
            ..Default::default()
        };
        assert!(generate_population::<f64>(&cfg, &s).is_err());
    }

    #[test]
    fn noise_requires_truth() {
        let s = ClassScheme::gsr();
        let d = Dataset::new(s.clone(), 1, vec![Example::new("a", vec![0.0f64], 0)]).unwrap();
        let err = apply_grader_noise(&d, &GraderPool::reference(&s), 1).unwrap_err();
        assert_eq!(err.code(), "no-ground-truth");
    }
}
