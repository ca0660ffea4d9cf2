//! Anchor/positive view generation for tabular rows.
//!
//! The traditional pipeline runs CutMix -> Gaussian noise -> feature
//! corruption, each stage gated by an independent coin. Augmentation operates
//! on standardized features so `noise_sigma` means the same thing for every
//! column. Dropout-based view diversity is not applied here — it happens in
//! the two encoder passes via independent masks (see
//! [`crate::model::sample_view_masks`]).

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Beta shape for the CutMix coefficient; values < 1 concentrate the
    /// blend near the extremes so the positive stays close to one parent.
    pub cutmix_alpha: f64,
    pub cutmix_prob: f64,
    /// Noise standard deviation on the standardized feature scale.
    pub noise_sigma: f64,
    pub noise_prob: f64,
    /// Per-feature replacement probability inside the corruption stage.
    pub corrupt_p: f64,
    pub corrupt_prob: f64,
    /// Encoder dropout probability used for dropout-based view generation.
    pub dropout_p: f64,
    pub enable_traditional: bool,
    pub enable_dropout_views: bool,
    /// When set, anchors run through the same pipeline as positives (with
    /// independent draws). Off by default: anchors stay clean.
    pub augment_anchor: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            cutmix_alpha: 0.2,
            cutmix_prob: 0.5,
            noise_sigma: 0.05,
            noise_prob: 0.5,
            corrupt_p: 0.1,
            corrupt_prob: 0.5,
            dropout_p: 0.1,
            enable_traditional: true,
            enable_dropout_views: true,
            augment_anchor: false,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("cutmix_prob", self.cutmix_prob),
            ("noise_prob", self.noise_prob),
            ("corrupt_p", self.corrupt_p),
            ("corrupt_prob", self.corrupt_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must be in [0,1), got {}",
                self.dropout_p
            )));
        }
        if self.cutmix_alpha <= 0.0 {
            return Err(Error::Config("cutmix_alpha must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Convex blend `lambda * x + (1 - lambda) * x_j`.
pub fn cutmix(x: &[f64], x_j: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if x.len() != x_j.len() {
        return Err(Error::Shape(format!("cutmix: {} vs {} dims", x.len(), x_j.len())));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("cutmix lambda must be in [0,1], got {lambda}")));
    }
    Ok(x.iter().zip(x_j).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect())
}

/// Add independent per-coordinate Gaussian noise with standard deviation
/// `sigma`.
pub fn gaussian_noise(x: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return x.to_vec();
    }
    x.iter().map(|&v| v + sigma * rng::standard_normal(rng)).collect()
}

/// Independently keep each coordinate with probability `1 - p_corrupt`, or
/// replace it with the same coordinate of a uniformly chosen donor row —
/// a marginal-preserving replacement.
pub fn corrupt(
    x: &[f64],
    p_corrupt: f64,
    donors: &Matrix,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if donors.rows() == 0 {
        return Err(Error::Degenerate("corrupt: empty donor batch".into()));
    }
    if donors.cols() != x.len() {
        return Err(Error::Shape(format!(
            "corrupt: row has {} dims, donors have {}",
            x.len(),
            donors.cols()
        )));
    }
    if !(0.0..=1.0).contains(&p_corrupt) {
        return Err(Error::Config(format!("p_corrupt must be in [0,1], got {p_corrupt}")));
    }
    let mut out = x.to_vec();
    for (c, v) in out.iter_mut().enumerate() {
        if p_corrupt > 0.0 && rng.random_bool(p_corrupt) {
            let donor = rng.random_range(0..donors.rows());
            *v = donors.get(donor, c);
        }
    }
    Ok(out)
}

fn augment_row(
    row: &[f64],
    index: usize,
    batch: &Matrix,
    cfg: &AugmentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut out = row.to_vec();
    if cfg.cutmix_prob > 0.0 && rng.random_bool(cfg.cutmix_prob) {
        let lambda = rng::sample_beta(cfg.cutmix_alpha, cfg.cutmix_alpha, rng);
        // Fold so the sample's own features dominate the blend.
        let lambda = lambda.max(1.0 - lambda);
        // Partner drawn from the rest of the batch.
        let mut j = rng.random_range(0..batch.rows() - 1);
        if j >= index {
            j += 1;
        }
        out = cutmix(&out, batch.row(j), lambda)?;
    }
    if cfg.noise_prob > 0.0 && rng.random_bool(cfg.noise_prob) {
        out = gaussian_noise(&out, cfg.noise_sigma, rng);
    }
    if cfg.corrupt_prob > 0.0 && rng.random_bool(cfg.corrupt_prob) {
        out = corrupt(&out, cfg.corrupt_p, batch, rng)?;
    }
    Ok(out)
}

/// Build the anchor and positive views of a batch.
///
/// Anchors are the original rows (unless `augment_anchor` is set); positives
/// run through the traditional pipeline when it is enabled, otherwise they
/// equal the anchors and the two views differ only through the encoder
/// dropout masks.
pub fn make_views(
    batch: &Matrix,
    cfg: &AugmentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, Matrix)> {
    cfg.validate()?;
    if batch.rows() == 0 {
        return Err(Error::Degenerate("make_views: empty batch".into()));
    }
    if cfg.enable_traditional && batch.rows() < 2 {
        return Err(Error::Degenerate(
            "make_views: traditional augmentation needs a batch of at least 2 rows".into(),
        ));
    }
    let anchors = if cfg.enable_traditional && cfg.augment_anchor {
        let rows: Result<Vec<Vec<f64>>> =
            (0..batch.rows()).map(|i| augment_row(batch.row(i), i, batch, cfg, rng)).collect();
        Matrix::from_rows(rows?)?
    } else {
        batch.clone()
    };
    let positives = if cfg.enable_traditional {
        let rows: Result<Vec<Vec<f64>>> =
            (0..batch.rows()).map(|i| augment_row(batch.row(i), i, batch, cfg, rng)).collect();
        Matrix::from_rows(rows?)?
    } else {
        batch.clone()
    };
    Ok((anchors, positives))
}
