//! Declarative run configuration: one JSON document per experiment.
//! Flags override config fields; the ADVFORGE_SEED environment variable
//! overrides the config seed (and is itself overridden by --seed).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use advforge::advgen::FlipStrategy;
use advforge::corpus::TaskKind;
use advforge::nnet::DecodeStrategy;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub challenge: Option<PathBuf>,
    /// Every artifact (checkpoints, dumps, reports) lands under this directory.
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default = "d_max_len")]
    pub max_len: usize,
    /// Generator context size; defaults to 150 (single_text) or 500 (pair).
    #[serde(default)]
    pub max_ctx: Option<usize>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { dim: d_dim(), max_len: d_max_len(), max_ctx: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub max_epochs: usize,
    #[serde(default = "d_patience")]
    pub patience: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            learning_rate: d_lr(),
            batch_size: d_batch(),
            max_epochs: d_epochs(),
            patience: d_patience(),
        }
    }
}

impl TrainParams {
    pub fn to_train_config(&self, seed: u64) -> advforge::nnet::TrainConfig {
        advforge::nnet::TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneParams {
    #[serde(default = "d_ft_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_ft_epochs")]
    pub epochs: usize,
    #[serde(default = "d_ft_n")]
    pub n: usize,
    /// Treat only successful attacks as labeled adversarial data.
    #[serde(default = "d_true")]
    pub successful_only: bool,
}

impl Default for FinetuneParams {
    fn default() -> Self {
        FinetuneParams {
            learning_rate: d_ft_lr(),
            epochs: d_ft_epochs(),
            n: d_ft_n(),
            successful_only: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum AttributionBackend {
    Lime,
    Ig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimeParams {
    #[serde(default = "d_lime_samples")]
    pub n_samples: usize,
    #[serde(default = "d_lime_features")]
    pub max_features: usize,
    #[serde(default = "d_kernel_width")]
    pub kernel_width: f64,
    #[serde(default = "d_ridge")]
    pub ridge_lambda: f64,
}

impl Default for LimeParams {
    fn default() -> Self {
        LimeParams {
            n_samples: d_lime_samples(),
            max_features: d_lime_features(),
            kernel_width: d_kernel_width(),
            ridge_lambda: d_ridge(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IgParams {
    #[serde(default = "d_ig_steps")]
    pub steps: usize,
}

impl Default for IgParams {
    fn default() -> Self {
        IgParams { steps: d_ig_steps() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributionParams {
    #[serde(default = "d_backend")]
    pub method: AttributionBackend,
    /// Fraction of tokens selected as z.
    #[serde(default = "d_fraction")]
    pub fraction: f64,
    #[serde(default = "d_select")]
    pub strategy: advforge::attribution::SelectStrategy,
    #[serde(default)]
    pub abs_scores: bool,
    #[serde(default)]
    pub lime: LimeParams,
    #[serde(default)]
    pub ig: IgParams,
}

impl Default for AttributionParams {
    fn default() -> Self {
        AttributionParams {
            method: d_backend(),
            fraction: d_fraction(),
            strategy: d_select(),
            abs_scores: false,
            lime: LimeParams::default(),
            ig: IgParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeParams {
    /// Defaults to top-k for single_text, beam for pair.
    #[serde(default)]
    pub strategy: Option<DecodeStrategy>,
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_k")]
    pub beam_size: usize,
    /// Total length cap; defaults to the generator context size.
    #[serde(default)]
    pub max_len: Option<usize>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { strategy: None, k: d_k(), beam_size: d_k(), max_len: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineParams {
    #[serde(default = "d_neighbors")]
    pub neighbor_count: usize,
    #[serde(default = "d_sim")]
    pub sim_threshold: f64,
    /// Budget: ceil(fraction × attackable length) substitutions.
    #[serde(default = "d_sub_frac")]
    pub max_substitutions_frac: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            neighbor_count: d_neighbors(),
            sim_threshold: d_sim(),
            max_substitutions_frac: d_sub_frac(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub label_names: Vec<String>,
    pub seed: u64,
    #[serde(default = "d_jobs")]
    pub jobs: usize,
    pub paths: Paths,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub train: TrainParams,
    #[serde(default = "d_gen_train")]
    pub gen_train: TrainParams,
    #[serde(default)]
    pub finetune: FinetuneParams,
    #[serde(default)]
    pub attribution: AttributionParams,
    #[serde(default = "d_flip")]
    pub flip: FlipStrategy,
    #[serde(default)]
    pub decode: DecodeParams,
    #[serde(default)]
    pub baseline: BaselineParams,
    /// Include prompt tokens in the generator loss (Eq.-style full-sequence loss).
    #[serde(default = "d_true")]
    pub loss_on_prompt: bool,
}

fn d_dim() -> usize { 64 }
fn d_max_len() -> usize { 64 }
fn d_lr() -> f64 { 2e-4 }
fn d_batch() -> usize { 16 }
fn d_epochs() -> usize { 20 }
fn d_patience() -> usize { 8 }
fn d_ft_lr() -> f64 { 2e-5 }
fn d_ft_epochs() -> usize { 3 }
fn d_ft_n() -> usize { 150 }
fn d_true() -> bool { true }
fn d_backend() -> AttributionBackend { AttributionBackend::Ig }
fn d_fraction() -> f64 { 0.2 }
fn d_select() -> advforge::attribution::SelectStrategy { advforge::attribution::SelectStrategy::Topk }
fn d_lime_samples() -> usize { 2000 }
fn d_lime_features() -> usize { 20 }
fn d_kernel_width() -> f64 { 0.25 }
fn d_ridge() -> f64 { 1.0 }
fn d_ig_steps() -> usize { 64 }
fn d_k() -> usize { 10 }
fn d_neighbors() -> usize { 10 }
fn d_sim() -> f64 { 0.5 }
fn d_sub_frac() -> f64 { 0.3 }
fn d_jobs() -> usize { 1 }
fn d_gen_train() -> TrainParams {
    TrainParams { learning_rate: d_lr(), batch_size: d_batch(), max_epochs: 60, patience: d_patience() }
}
fn d_flip() -> FlipStrategy { FlipStrategy::BinaryFlip }

impl RunConfig {
    /// Loads and validates a config; relative data paths resolve against the
    /// config file's directory. ADVFORGE_SEED, when set, overrides the seed.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [
            &mut config.paths.train,
            &mut config.paths.dev,
            &mut config.paths.test,
            &mut config.paths.out_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(challenge) = config.paths.challenge.as_mut() {
            if challenge.is_relative() {
                *challenge = base.join(&challenge);
            }
        }
        if let Ok(seed) = std::env::var("ADVFORGE_SEED") {
            config.seed =
                seed.parse().with_context(|| format!("ADVFORGE_SEED \"{seed}\" is not a u64"))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_names.len() < 2 {
            bail!("invalid label_names: need at least 2 classes");
        }
        for (name, path) in
            [("train", &self.paths.train), ("dev", &self.paths.dev), ("test", &self.paths.test)]
        {
            if !path.exists() {
                bail!("invalid paths.{name}: {} does not exist", path.display());
            }
        }
        if let Some(challenge) = &self.paths.challenge {
            if !challenge.exists() {
                bail!("invalid paths.challenge: {} does not exist", challenge.display());
            }
        }
        if !(self.attribution.fraction > 0.0 && self.attribution.fraction <= 1.0) {
            bail!("invalid attribution.fraction: must be in (0, 1]");
        }
        if self.jobs == 0 {
            bail!("invalid jobs: must be >= 1");
        }
        if matches!(self.flip, FlipStrategy::BinaryFlip) && self.label_names.len() != 2 {
            bail!("invalid flip: binary_flip needs exactly 2 classes");
        }
        if let FlipStrategy::FixedTarget(t) = self.flip {
            if t >= self.label_names.len() {
                bail!("invalid flip: fixed target {t} out of range");
            }
        }
        Ok(())
    }

    pub fn max_ctx(&self) -> usize {
        self.model.max_ctx.unwrap_or(match self.task {
            TaskKind::SingleText => 150,
            TaskKind::Pair => 500,
        })
    }

    pub fn decode_strategy(&self) -> DecodeStrategy {
        self.decode.strategy.unwrap_or(match self.task {
            TaskKind::SingleText => DecodeStrategy::Topk,
            TaskKind::Pair => DecodeStrategy::Beam,
        })
    }

    pub fn decode_max_len(&self) -> usize {
        self.decode.max_len.unwrap_or_else(|| self.max_ctx())
    }

    /// Canonical artifact locations under `out_dir`.
    pub fn artifact(&self, name: &str) -> PathBuf {
        self.paths.out_dir.join(name)
    }

    pub fn classifier_dir(&self) -> PathBuf {
        self.artifact("classifier")
    }

    pub fn generator_dir(&self, backend: AttributionBackend) -> PathBuf {
        self.artifact(&format!("generator-{}", backend_name(backend)))
    }

    pub fn split_path(&self, split: Split) -> PathBuf {
        match split {
            Split::Train => self.paths.train.clone(),
            Split::Dev => self.paths.dev.clone(),
            Split::Test => self.paths.test.clone(),
        }
    }
}

pub fn backend_name(backend: AttributionBackend) -> &'static str {
    match backend {
        AttributionBackend::Lime => "lime",
        AttributionBackend::Ig => "ig",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

pub fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Dev => "dev",
        Split::Test => "test",
    }
}
