//! Run configuration: a TOML file with one section per stage. Command-line
//! flags are applied on top of the loaded file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sncv_core::synth::PopulationConfig;
use sncv_core::Hyperparams;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Training dataset CSV.
    pub dataset: Option<PathBuf>,
    /// Clean tune set CSV.
    pub tune: Option<PathBuf>,
    /// Held-out test set CSV.
    pub test: Option<PathBuf>,
    /// Scored-dataset CSV.
    pub scored: Option<PathBuf>,
    /// Model JSON files, for `score` (single) and `eval` (several).
    pub models: Vec<PathBuf>,
    /// Class scheme JSON; otherwise the dataset sidecar, else the default scheme.
    pub scheme: Option<PathBuf>,
    /// Grader pool JSON; otherwise the reference pool.
    pub pool: Option<PathBuf>,
    /// Output directory. Not embedded in reports.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub tune_n: usize,
    pub test_n: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            tune_n: 5_000,
            test_n: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMode {
    Highest,
    Lowest,
    Ncv,
    NcvExact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub select_mode: SelectMode,
    /// Fixed selection size; takes precedence over `k_grid`.
    pub k: Option<usize>,
    /// Candidate selection sizes as fractions of the dataset.
    pub k_grid: Vec<f64>,
    pub min_fold_size: usize,
    pub histogram_bin_width: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            select_mode: SelectMode::Highest,
            k: None,
            k_grid: vec![0.75],
            min_fold_size: sncv_core::sncv::MIN_TRAINABLE_SIZE,
            histogram_bin_width: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsConfig {
    /// Band sizes as fractions of the dataset; 1.0 is the whole set.
    pub fractions: Vec<f64>,
}

impl Default for BandsConfig {
    /// The 1k, 10k, 25k, ..., 65k, all grid of a 70k corpus, rescaled.
    fn default() -> Self {
        let sizes = [1, 10, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70];
        BandsConfig {
            fractions: sizes.iter().map(|&s| s as f64 / 70.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurdenConfig {
    pub fraction: f64,
    pub k_grid: Vec<f64>,
    pub margin: f64,
    pub alpha: f64,
    pub n_boot: usize,
}

impl Default for BurdenConfig {
    fn default() -> Self {
        BurdenConfig {
            fraction: 4.0 / 7.0,
            k_grid: vec![0.625, 0.75, 0.875],
            margin: 0.02,
            alpha: 0.05,
            n_boot: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelabelConfig {
    /// Size of the lowest-score tranche; 1,277 of 70k rescaled to 20k.
    pub n_lowest: usize,
    pub oracle_error_rate: f64,
    pub oracle_deviation: Option<Vec<Vec<f64>>>,
}

impl Default for RelabelConfig {
    fn default() -> Self {
        RelabelConfig {
            n_lowest: 365,
            oracle_error_rate: 0.0,
            oracle_deviation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradersConfig {
    pub mismatch_threshold: f64,
    /// When non-empty, `graders` also writes the subset labeled by these roles.
    pub filter_roles: Vec<String>,
}

impl Default for GradersConfig {
    fn default() -> Self {
        GradersConfig {
            mismatch_threshold: sncv_core::relabel::DEFAULT_MISMATCH_THRESHOLD,
            filter_roles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub margin: f64,
    pub alpha: f64,
    pub n_boot: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            margin: 0.02,
            alpha: 0.05,
            n_boot: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub population: PopulationConfig,
    pub gen: GenConfig,
    pub hyperparams: Hyperparams,
    pub pipeline: PipelineConfig,
    pub bands: BandsConfig,
    pub burden: BurdenConfig,
    pub relabel: RelabelConfig,
    pub graders: GradersConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            paths: Paths::default(),
            population: PopulationConfig::reference(),
            gen: GenConfig::default(),
            hyperparams: Hyperparams::default(),
            pipeline: PipelineConfig::default(),
            bands: BandsConfig::default(),
            burden: BurdenConfig::default(),
            relabel: RelabelConfig::default(),
            graders: GradersConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("this command is stochastic and needs --seed or `seed` in the config".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Returns the path when set and present on disk; usage error otherwise.
pub fn existing(path: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    let p = path
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("no {what} path given")))?;
    if !p.is_file() {
        return Err(CliError::Usage(format!("{what} file not found: {}", p.display())));
    }
    Ok(p.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_fill_defaults() {
        let c = RunConfig::from_toml(
            "seed = 7\n[population]\nn = 500\n[hyperparams]\nhidden_units = 0\n[burden]\nmargin = 0.05\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.population.n, 500);
        assert_eq!(c.population.feature_dim, 12);
        assert_eq!(c.hyperparams.hidden_units, 0);
        assert_eq!(c.hyperparams.batch_size, 32);
        assert_eq!(c.burden.margin, 0.05);
        assert_eq!(c.burden.k_grid, vec![0.625, 0.75, 0.875]);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(RunConfig::from_toml("[hyperparams]\nlr = 1\n"), Err(CliError::Usage(_))));
    }

    #[test]
    fn output_dir_is_not_serialized() {
        let mut c = RunConfig::default();
        c.paths.out = Some("somewhere".into());
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("somewhere"));
    }
}
