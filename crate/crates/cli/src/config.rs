//! Run configuration: TOML file, then CLI overrides, then validation.

use std::path::{Path, PathBuf};

use adrc_core::corpus::Task;
use adrc_core::embeddings::SkipgramConfig;
use adrc_core::ensemble::EnsembleSpec;
use adrc_core::nn::CnnConfig;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Numeric width used for network training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: f64,
    /// Field delimiter of the raw corpus file.
    pub delimiter: char,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train_fraction: 0.8,
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// Longer reviews are truncated.
    pub max_len: usize,
    /// Shorter reviews are right-padded with zero columns. Raised to the
    /// widest filter on resolve.
    pub min_len: usize,
}

impl Default for InputSection {
    fn default() -> Self {
        InputSection {
            max_len: 200,
            min_len: 8,
        }
    }
}

/// Skipgram settings shared by every table; the dimension comes from the
/// models that need the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub window: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub noise_power: f64,
    /// Also feed test-split comments to word2vec.
    pub include_test_text: bool,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let s = SkipgramConfig::default();
        EmbeddingSection {
            window: s.window,
            min_count: s.min_count,
            negatives: s.negatives,
            epochs: s.epochs,
            initial_lr: s.initial_lr,
            noise_power: s.noise_power,
            include_test_text: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub member_count: usize,
    pub filter_count_range: [usize; 2],
    pub filter_width_range: [usize; 2],
    pub embedding_dims: Vec<usize>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let spec = EnsembleSpec::default();
        EnsembleSection {
            member_count: spec.member_count,
            filter_count_range: spec.filter_count_range,
            filter_width_range: spec.filter_width_range,
            embedding_dims: spec.embedding_dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub logreg: bool,
    pub forest: bool,
    pub bag_of_words: bool,
    pub avg_embedding: bool,
    pub trees: usize,
    pub c: f64,
    pub max_iterations: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            logreg: true,
            forest: true,
            bag_of_words: true,
            avg_embedding: true,
            trees: 500,
            c: 0.01,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Committee sizes on the curve; empty means every size.
    pub curve_sizes: Vec<usize>,
    pub curve_trials: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            curve_sizes: Vec::new(),
            curve_trials: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub workdir: PathBuf,
    pub task: Task,
    /// Root of every derived seed (split, embeddings, networks, forest, curve).
    pub seed: u64,
    pub workers: usize,
    pub precision: Precision,
    pub split: SplitSection,
    pub input: InputSection,
    pub embeddings: EmbeddingSection,
    pub cnn: CnnConfig,
    pub ensemble: EnsembleSection,
    pub baselines: BaselineSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            workdir: PathBuf::from("adrc-work"),
            task: Task::Binary,
            seed: 1,
            workers: 1,
            precision: Precision::F64,
            split: SplitSection::default(),
            input: InputSection::default(),
            embeddings: EmbeddingSection::default(),
            cnn: CnnConfig::default(),
            ensemble: EnsembleSection::default(),
            baselines: BaselineSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub task: Option<Task>,
    pub members: Option<usize>,
    pub workers: Option<usize>,
    pub precision: Option<Precision>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Applies overrides, copies the root seed and class count into the
    /// sub-configurations, and validates the result.
    pub fn resolve(mut self, o: Overrides) -> Result<Self> {
        if let Some(v) = o.corpus {
            self.corpus = Some(v);
        }
        if let Some(v) = o.workdir {
            self.workdir = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.task {
            self.task = v;
        }
        if let Some(v) = o.members {
            self.ensemble.member_count = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = o.precision {
            self.precision = v;
        }
        self.cnn.seed = self.seed;
        self.cnn.class_count = self.task.class_count();
        let widest = self.ensemble.filter_width_range[1].max(self.cnn.filter_width);
        self.input.min_len = self.input.min_len.max(widest);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            bail!("split.train_fraction must lie strictly between 0 and 1");
        }
        if !self.split.delimiter.is_ascii() {
            bail!("split.delimiter must be a single ASCII character");
        }
        if self.input.min_len == 0 || self.input.max_len < self.input.min_len {
            bail!("input.min_len must be positive and no larger than input.max_len");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.seed > i64::MAX as u64 {
            bail!("seed must fit in a signed 64-bit integer");
        }
        if self.eval.curve_trials == 0 {
            bail!("eval.curve_trials must be at least 1");
        }
        self.skipgram(1).validate()?;
        self.cnn.validate()?;
        self.ensemble_spec().validate()?;
        Ok(())
    }

    pub fn skipgram(&self, dim: usize) -> SkipgramConfig {
        let e = &self.embeddings;
        SkipgramConfig {
            window: e.window,
            min_count: e.min_count,
            dim,
            negatives: e.negatives,
            epochs: e.epochs,
            initial_lr: e.initial_lr,
            noise_power: e.noise_power,
            seed: self.seed,
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            member_count: self.ensemble.member_count,
            filter_count_range: self.ensemble.filter_count_range,
            filter_width_range: self.ensemble.filter_width_range,
            embedding_dims: self.ensemble.embedding_dims.clone(),
            base_config: self.cnn.clone(),
            seed: self.seed,
        }
    }

    /// Every embedding dimension a model may need, ascending.
    pub fn embedding_dims(&self) -> Vec<usize> {
        let mut dims = self.ensemble.embedding_dims.clone();
        dims.push(self.cnn.embedding_dim);
        dims.sort_unstable();
        dims.dedup();
        dims
    }

    pub fn curve_sizes(&self) -> Vec<usize> {
        if self.eval.curve_sizes.is_empty() {
            (1..=self.ensemble.member_count).collect()
        } else {
            self.eval.curve_sizes.clone()
        }
    }
}
