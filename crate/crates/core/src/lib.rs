//! Label-free contrastive representation learning for tabular phishing-website
//! features.
//!
//! The library trains an attention-gated encoder with a triplet-margin loss over
//! augmented views of unlabeled feature vectors, then classifies websites by
//! nearest-class-prototype similarity. Labels are consumed only by the
//! evaluation protocol (prototype construction, validation model selection,
//! metrics) — never by the loss or gradient paths.
//!
//! Pipeline overview:
//!
//! 1. [`dataset`] loads CSV feature tables, maps labels, produces deterministic
//!    train/validation/test splits and z-score standardization.
//! 2. [`augment`] generates anchor/positive views (CutMix blend, Gaussian
//!    noise, feature corruption); [`model`] adds dropout-based view diversity.
//! 3. [`model`] is the encoder: a sigmoid feature-attention gate with residual
//!    blend, three dense layers with layer normalization, and a final
//!    L2-normalized embedding on the unit hypersphere.
//! 4. [`contrastive`] builds in-batch triplets via derangement negatives and
//!    computes the triplet margin loss with analytic gradients.
//! 5. [`train`] runs the optimization loop with adaptive-moment updates,
//!    per-epoch validation and best-checkpoint retention.
//! 6. [`inference`] classifies embeddings against class centroids;
//!    [`metrics`] scores predictions (confusion matrix, P/R/F1, ROC AUC).
//!
//! [`baselines`] provides the unsupervised comparison models (K-Means and a
//! reconstruction autoencoder), [`urlfeat`] the lexical URL feature extractor,
//! and [`synthetic`] a two-cluster dataset generator for demos and sanity
//! harnesses when the public datasets are not on disk.
//!
//! All numerical code is 64-bit and deterministic: every random decision flows
//! from an explicit seed through counter-derived [`rand_chacha::ChaCha8Rng`]
//! streams.

pub mod augment;
pub mod baselines;
pub mod config;
pub mod contrastive;
pub mod dataset;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod rng;
pub mod synthetic;
pub mod train;
pub mod urlfeat;

pub use augment::AugmentConfig;
pub use config::{ModelKind, RunConfig};
pub use contrastive::{Derangement, TripletBatch};
pub use dataset::{Class, Dataset, DatasetSchema, SplitConfig, StandardizationStats};
pub use error::{Error, Result};
pub use inference::{InferenceMode, Prediction, Prototypes};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use model::{AttentionParams, EncoderParams, ModelDims, ModelParams};
pub use neural::{DenseLayer, DropoutMask, LayerNorm, Matrix};
pub use train::{Checkpoint, TrainConfig, TrainHistory};
