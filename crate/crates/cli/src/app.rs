//! Argument parsing and dispatch. Flags override the config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{RunConfig, SelectMode};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "sncv", version, about = "Label-quality scoring and stratified selection for noisy labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic population, its noisy labels and clean tune/test sets.
    Gen,
    /// Seeded half split of a dataset.
    Split,
    /// Train one model with early stopping on the tune set.
    Train,
    /// Score a dataset with one trained model.
    Score,
    /// Select examples from a scored dataset.
    Select,
    /// Cross-fold scoring, selection and the final model.
    Pipeline,
    /// High- versus low-quality-score training bands.
    Bands,
    /// Full data against a subsample with and without selection.
    Burden,
    /// Send the lowest-score tranche to a simulated specialist.
    Relabel,
    /// Per-grader mismatch analysis.
    Graders,
    /// Compare models on a test set.
    Eval,
}

/// Every flag is optional and, when given, replaces the config value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tune: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    #[arg(long, global = true)]
    pub scored: Option<PathBuf>,
    #[arg(long, global = true)]
    pub scheme: Option<PathBuf>,
    #[arg(long, global = true)]
    pub pool: Option<PathBuf>,
    /// Model JSON; repeat for `eval`.
    #[arg(long = "model", global = true)]
    pub models: Vec<PathBuf>,

    /// Population size for `gen`.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub tune_n: Option<usize>,
    #[arg(long, global = true)]
    pub test_n: Option<usize>,

    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub hidden_units: Option<usize>,

    #[arg(long, value_enum, global = true)]
    pub select_mode: Option<SelectMode>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Comma-separated fractions of the dataset.
    #[arg(long, value_delimiter = ',', global = true)]
    pub k_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub min_fold_size: Option<usize>,

    /// Comma-separated band sizes as fractions of the dataset.
    #[arg(long, value_delimiter = ',', global = true)]
    pub band_fractions: Option<Vec<f64>>,

    /// Subsample fraction for `burden`.
    #[arg(long, global = true)]
    pub fraction: Option<f64>,
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub n_boot: Option<usize>,

    #[arg(long, global = true)]
    pub n_lowest: Option<usize>,
    #[arg(long, global = true)]
    pub oracle_error_rate: Option<f64>,

    #[arg(long, global = true)]
    pub mismatch_threshold: Option<f64>,
    /// Comma-separated grader roles to keep in `graders`.
    #[arg(long, value_delimiter = ',', global = true)]
    pub filter_roles: Option<Vec<String>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        fn set_opt<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set_opt(&mut cfg.seed, &self.seed);
        let p = &mut cfg.paths;
        set_opt(&mut p.out, &self.out);
        set_opt(&mut p.dataset, &self.dataset);
        set_opt(&mut p.tune, &self.tune);
        set_opt(&mut p.test, &self.test);
        set_opt(&mut p.scored, &self.scored);
        set_opt(&mut p.scheme, &self.scheme);
        set_opt(&mut p.pool, &self.pool);
        if !self.models.is_empty() {
            p.models = self.models.clone();
        }
        set(&mut cfg.population.n, &self.n);
        set(&mut cfg.gen.tune_n, &self.tune_n);
        set(&mut cfg.gen.test_n, &self.test_n);
        set(&mut cfg.hyperparams.learning_rate, &self.learning_rate);
        set(&mut cfg.hyperparams.max_epochs, &self.max_epochs);
        set(&mut cfg.hyperparams.hidden_units, &self.hidden_units);
        set(&mut cfg.pipeline.select_mode, &self.select_mode);
        set_opt(&mut cfg.pipeline.k, &self.k);
        if let Some(g) = &self.k_grid {
            cfg.pipeline.k_grid = g.clone();
            cfg.burden.k_grid = g.clone();
            // An explicit grid replaces a configured fixed k.
            if self.k.is_none() {
                cfg.pipeline.k = None;
            }
        }
        set(&mut cfg.pipeline.min_fold_size, &self.min_fold_size);
        set(&mut cfg.bands.fractions, &self.band_fractions);
        set(&mut cfg.burden.fraction, &self.fraction);
        set(&mut cfg.burden.margin, &self.margin);
        set(&mut cfg.eval.margin, &self.margin);
        set(&mut cfg.burden.alpha, &self.alpha);
        set(&mut cfg.eval.alpha, &self.alpha);
        set(&mut cfg.burden.n_boot, &self.n_boot);
        set(&mut cfg.eval.n_boot, &self.n_boot);
        set(&mut cfg.relabel.n_lowest, &self.n_lowest);
        set(&mut cfg.relabel.oracle_error_rate, &self.oracle_error_rate);
        set(&mut cfg.graders.mismatch_threshold, &self.mismatch_threshold);
        set(&mut cfg.graders.filter_roles, &self.filter_roles);
    }
}

/// Loads the config file, applies flags and checks that the inputs exist.
pub fn resolve_config(o: &Overrides) -> CliResult<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    o.apply(&mut cfg);
    commands::check_inputs(&cfg)?;
    Ok(cfg)
}

pub fn run_command(command: Command, cfg: &RunConfig) -> CliResult<String> {
    match command {
        Command::Gen => commands::gen(cfg),
        Command::Split => commands::split(cfg),
        Command::Train => commands::train_cmd(cfg),
        Command::Score => commands::score(cfg),
        Command::Select => commands::select(cfg),
        Command::Pipeline => commands::pipeline(cfg),
        Command::Bands => commands::bands(cfg),
        Command::Burden => commands::burden(cfg),
        Command::Relabel => commands::relabel(cfg),
        Command::Graders => commands::graders(cfg),
        Command::Eval => commands::eval(cfg),
    }
}

/// Runs the CLI on parsed arguments and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = resolve_config(&cli.overrides).and_then(|cfg| run_command(cli.command, &cfg));
    match result {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

impl From<clap::Error> for CliError {
    fn from(e: clap::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
