//! Optimization loop: seeded epoch shuffles, view generation, two encoder
//! passes with independent dropout masks, derangement negatives, triplet
//! margin loss, adaptive-moment updates, per-epoch validation ROC AUC and
//! best-checkpoint retention.
//!
//! Labels never reach the loss or gradient paths: the training split's labels
//! are consumed only by prototype construction for the per-epoch validation
//! metric, and the validation labels only by that metric itself.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentConfig};
use crate::contrastive::{self, TripletBatch};
use crate::dataset::{Class, Dataset, StandardizationStats};
use crate::error::{Error, Result};
use crate::inference::{self, InferenceMode, Prototypes};
use crate::metrics::{self, ConfusionMatrix, MetricsReport};
use crate::model::{self, ModelDims, ModelGrad, ModelParams};
use crate::neural::Matrix;
use crate::rng;

/// Adaptive-moment estimation hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Network widths excluding the data-dependent input dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimsConfig {
    pub attention_hidden: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub embedding: usize,
}

impl Default for DimsConfig {
    fn default() -> Self {
        Self { attention_hidden: 64, hidden1: 256, hidden2: 128, embedding: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub margin: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub attention_enabled: bool,
    /// Compute attention weights once from the anchor and reuse them for the
    /// positive view. When false each view gates itself.
    pub share_attention_across_views: bool,
    pub residual_beta: f64,
    /// Train the residual blend scalar alongside the other parameters.
    pub learnable_residual_beta: bool,
    pub optimizer: AdamConfig,
    pub dims: DimsConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 1e-3,
            epochs: 20,
            margin: 1.0,
            seed: 42,
            augment: AugmentConfig::default(),
            attention_enabled: true,
            share_attention_across_views: true,
            residual_beta: 1.0,
            learnable_residual_beta: false,
            optimizer: AdamConfig::default(),
            dims: DimsConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.margin <= 0.0 {
            return Err(Error::Config("margin must be positive".into()));
        }
        self.augment.validate()
    }

    pub fn model_dims(&self, input: usize) -> ModelDims {
        ModelDims {
            input,
            attention_hidden: self.dims.attention_hidden,
            hidden1: self.dims.hidden1,
            hidden2: self.dims.hidden2,
            embedding: self.dims.embedding,
        }
    }

    fn update_residual(&self) -> bool {
        self.attention_enabled && self.learnable_residual_beta
    }
}

/// First/second moment accumulators mirroring the parameter tensors.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn for_params(params: &mut ModelParams, include_residual: bool) -> Self {
        let shapes: Vec<usize> =
            params.tensors_mut(include_residual).iter().map(|t| t.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Bias-corrected adaptive-moment update of one parameter tensor; `t` is the
/// 1-based step count.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    assert_eq!(params.len(), grads.len(), "adam: tensor shape");
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Apply one optimizer step to the whole model.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelGrad,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &AdamConfig,
    include_residual: bool,
) {
    state.step += 1;
    let grad_tensors = grads.tensors(include_residual);
    let param_tensors = params.tensors_mut(include_residual);
    assert_eq!(param_tensors.len(), grad_tensors.len(), "adam: tensor count");
    assert_eq!(param_tensors.len(), state.m.len(), "adam: state shape");
    for (((p, g), m), v) in
        param_tensors.into_iter().zip(grad_tensors).zip(&mut state.m).zip(&mut state.v)
    {
        adam_update(p, g, m, v, state.step, lr, cfg);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based index of the epoch whose parameters the checkpoint retains.
    pub best_epoch: usize,
}

pub const CHECKPOINT_VERSION: &str = "phishssl.checkpoint.v1";

/// Self-contained trained model: parameters, the standardizer they expect,
/// the class prototypes of the training split (so `predict` needs no labeled
/// reference data), and the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub dims: ModelDims,
    pub params: ModelParams,
    pub standardizer: StandardizationStats,
    pub prototypes: Prototypes,
    pub config: TrainConfig,
    pub best_val_auc: f64,
    pub best_epoch: usize,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version '{}' (expected '{CHECKPOINT_VERSION}')",
                ck.version
            )));
        }
        ck.params.check_dims(&ck.dims).map_err(|_| {
            Error::Checkpoint("checkpoint dims are inconsistent with its parameters".into())
        })?;
        if ck.prototypes.mu_legitimate.len() != ck.dims.embedding
            || ck.prototypes.mu_phishing.len() != ck.dims.embedding
        {
            return Err(Error::Checkpoint(
                "checkpoint prototypes do not match the embedding dimension".into(),
            ));
        }
        if ck.standardizer.mean.len() != ck.dims.input {
            return Err(Error::Checkpoint(
                "checkpoint standardizer does not match the input dimension".into(),
            ));
        }
        Ok(ck)
    }
}

/// Evaluation outcome of one model on one labeled split.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    pub scores: Vec<f64>,
    pub predictions: Vec<Class>,
}

/// Evaluate parameters on a standardized labeled split: prototypes come from
/// the reference split (the labeled training data), scores and hard labels
/// from the eval split.
pub fn evaluate_params(
    params: &ModelParams,
    reference: &Dataset,
    eval: &Dataset,
    mode: InferenceMode,
    threshold: f64,
) -> Result<EvalOutcome> {
    let ref_embeddings = model::encode_eval(&reference.to_matrix(), params)?;
    let prototypes = inference::build_prototypes(&ref_embeddings, &reference.labels, mode)?;
    let eval_embeddings = model::encode_eval(&eval.to_matrix(), params)?;
    let scores = inference::score_batch(&eval_embeddings, &prototypes);
    let predictions = inference::classify_batch(&eval_embeddings, &prototypes, threshold);
    let confusion = metrics::confusion(&eval.labels, &predictions)?;
    let prf = metrics::prf1(&confusion);
    let roc_auc = metrics::roc_auc(&scores, &eval.labels)?;
    Ok(EvalOutcome {
        confusion,
        report: MetricsReport::from_parts(prf, roc_auc),
        scores,
        predictions,
    })
}

fn validation_auc(params: &ModelParams, train_set: &Dataset, val_set: &Dataset) -> Result<f64> {
    let ref_embeddings = model::encode_eval(&train_set.to_matrix(), params)?;
    let prototypes =
        inference::build_prototypes(&ref_embeddings, &train_set.labels, InferenceMode::Euclidean)?;
    let val_embeddings = model::encode_eval(&val_set.to_matrix(), params)?;
    let scores = inference::score_batch(&val_embeddings, &prototypes);
    metrics::roc_auc(&scores, &val_set.labels)
}

fn batch_matrix(ds: &Dataset, indices: &[usize]) -> Matrix {
    Matrix::from_rows(indices.iter().map(|&i| ds.rows[i].clone()).collect())
        .expect("dataset rows are rectangular")
}

/// Train on the standardized training split, selecting the epoch with the
/// best validation ROC AUC. Returns the checkpoint carrying the best-epoch
/// parameters and the per-epoch history.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    stats: &StandardizationStats,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Degenerate("train: empty split".into()));
    }
    let dims = cfg.model_dims(train_set.dim);
    let mut params = model::init_params(
        &dims,
        cfg.augment.dropout_p,
        cfg.residual_beta,
        cfg.attention_enabled,
        cfg.seed,
    );
    let mut opt = OptimizerState::for_params(&mut params, cfg.update_residual());

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = rng::derive(cfg.seed, &[rng::stream::SHUFFLE, epoch as u64]);
        rng::shuffle(&mut order, &mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            // CutMix partners and derangement negatives both need >= 2 rows.
            if chunk.len() < 2 {
                continue;
            }
            let batch = batch_matrix(train_set, chunk);
            let mut batch_rng =
                rng::derive(cfg.seed, &[rng::stream::BATCH, epoch as u64, batch_index as u64]);

            let (x_anchor, x_positive) = augment::make_views(&batch, &cfg.augment, &mut batch_rng)?;
            let (mask_a, mask_p) = model::sample_view_masks(
                chunk.len(),
                &params.encoder,
                cfg.augment.enable_dropout_views,
                &mut batch_rng,
            );
            let (z_anchor, z_positive, trace) = model::forward_pair(
                &x_anchor,
                &x_positive,
                &params,
                mask_a,
                mask_p,
                cfg.share_attention_across_views,
            )?;
            let derangement = contrastive::sample_derangement(chunk.len(), &mut batch_rng)?;
            let triplets = TripletBatch::new(z_anchor, z_positive, derangement, cfg.margin)?;
            let (loss, grad_z_a, grad_z_p) = contrastive::batch_loss(&triplets);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {loss} at epoch {epoch}, batch {batch_index}"
                )));
            }
            let (grads, _, _) = model::backward_pair(&grad_z_a, &grad_z_p, &trace, &params);
            adam_step(
                &mut params,
                &grads,
                &mut opt,
                cfg.learning_rate,
                &cfg.optimizer,
                cfg.update_residual(),
            );
            loss_sum += loss * chunk.len() as f64;
            loss_count += chunk.len();
        }
        if loss_count == 0 {
            return Err(Error::Degenerate("train: no batch had at least 2 rows".into()));
        }

        let train_loss = loss_sum / loss_count as f64;
        let val_auc = validation_auc(&params, train_set, val_set)?;
        history.push(EpochRecord { epoch, train_loss, val_auc });
        if best.as_ref().is_none_or(|(b, _, _)| val_auc > *b) {
            best = Some((val_auc, epoch, params.clone()));
        }
    }

    let (best_val_auc, best_epoch, best_params) = best.expect("at least one epoch ran");
    let ref_embeddings = model::encode_eval(&train_set.to_matrix(), &best_params)?;
    let prototypes =
        inference::build_prototypes(&ref_embeddings, &train_set.labels, InferenceMode::Euclidean)?;
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION.to_string(),
        dims,
        params: best_params,
        standardizer: stats.clone(),
        prototypes,
        config: cfg.clone(),
        best_val_auc,
        best_epoch,
    };
    Ok((checkpoint, TrainHistory { epochs: history, best_epoch }))
}

/// The fixed ablation grid: the full model and the three single-component
/// removals.
pub const ABLATION_NAMES: [&str; 4] =
    ["full", "no-attention", "no-traditional-aug", "no-dropout-aug"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub seed: u64,
    pub report: MetricsReport,
}

fn ablation_config(base: &TrainConfig, name: &str) -> TrainConfig {
    let mut cfg = base.clone();
    match name {
        "full" => {}
        "no-attention" => cfg.attention_enabled = false,
        "no-traditional-aug" => cfg.augment.enable_traditional = false,
        "no-dropout-aug" => cfg.augment.enable_dropout_views = false,
        other => unreachable!("unknown ablation '{other}'"),
    }
    cfg
}

/// Four training runs differing only in the named switch, each evaluated on
/// the test split.
pub fn run_ablation(
    train_set: &Dataset,
    val_set: &Dataset,
    test_set: &Dataset,
    stats: &StandardizationStats,
    base: &TrainConfig,
    mode: InferenceMode,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(ABLATION_NAMES.len());
    for name in ABLATION_NAMES {
        let cfg = ablation_config(base, name);
        let (checkpoint, _) = train(train_set, val_set, stats, &cfg)?;
        let outcome = evaluate_params(&checkpoint.params, train_set, test_set, mode, 0.5)?;
        rows.push(AblationRow { name: name.to_string(), seed: cfg.seed, report: outcome.report });
    }
    Ok(rows)
}

/// Train once per candidate margin and pick the best validation AUC.
/// Returns the winning margin and the (margin, best val AUC) table.
pub fn sweep_margin(
    train_set: &Dataset,
    val_set: &Dataset,
    stats: &StandardizationStats,
    base: &TrainConfig,
    candidates: &[f64],
) -> Result<(f64, Vec<(f64, f64)>)> {
    if candidates.is_empty() {
        return Err(Error::Config("margin sweep needs at least one candidate".into()));
    }
    let mut table = Vec::with_capacity(candidates.len());
    for &margin in candidates {
        let cfg = TrainConfig { margin, ..base.clone() };
        let (checkpoint, _) = train(train_set, val_set, stats, &cfg)?;
        table.push((margin, checkpoint.best_val_auc));
    }
    let best =
        table.iter().fold(table[0], |acc, &(m, auc)| if auc > acc.1 { (m, auc) } else { acc });
    Ok((best.0, table))
}
