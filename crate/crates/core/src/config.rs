//! The JSON run configuration consumed by the CLI: dataset location and
//! schema, split, training and augmentation settings, inference mode, model
//! selector and output directory.

use serde::{Deserialize, Serialize};

use crate::baselines::AutoencoderConfig;
use crate::dataset::{DatasetSchema, SplitConfig};
use crate::error::{Error, Result};
use crate::inference::InferenceMode;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: String,
    pub schema: DatasetSchema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    #[serde(rename = "phishssl")]
    PhishSsl,
    KMeans,
    Autoencoder,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phishssl" => Ok(Self::PhishSsl),
            "kmeans" => Ok(Self::KMeans),
            "autoencoder" => Ok(Self::Autoencoder),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected phishssl, kmeans or autoencoder)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PhishSsl => write!(f, "phishssl"),
            Self::KMeans => write!(f, "kmeans"),
            Self::Autoencoder => write!(f, "autoencoder"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansRunConfig {
    pub k: usize,
}

impl Default for KMeansRunConfig {
    fn default() -> Self {
        Self { k: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub inference_mode: InferenceMode,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub model: ModelKind,
    /// When present, `train` sweeps these margins and keeps the best
    /// validation AUC before the final run.
    #[serde(default)]
    pub margin_sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub kmeans: KMeansRunConfig,
    #[serde(default)]
    pub autoencoder: AutoencoderConfig,
}

fn default_output_dir() -> String {
    "out".to_string()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Route every seed through one value: split, training and the baselines
    /// all derive their streams from it.
    pub fn override_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.train.seed = seed;
        self.autoencoder.seed = seed;
    }
}
