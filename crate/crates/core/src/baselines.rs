//! Unsupervised comparison models: K-Means clustering and a reconstruction
//! autoencoder.
//!
//! Both consume the same standardized splits as the contrastive model.
//! Cluster-to-class mapping and the autoencoder's hard-label threshold are the
//! only places labels enter, mirroring how the prototype step confines label
//! usage to evaluation.

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};
use crate::metrics;
use crate::neural::{self, DenseLayer, Matrix};
use crate::rng;
use crate::train::{AdamConfig, adam_update};

// ---------------------------------------------------------------------------
// K-Means
// ---------------------------------------------------------------------------

/// Raw Lloyd clustering result.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Inertia (sum of squared distances to assigned centroids) after each
    /// assignment pass.
    pub inertia_history: Vec<f64>,
}

/// Clustering plus the majority-vote cluster-to-class mapping.
#[derive(Debug, Clone)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Matrix,
    pub cluster_to_class: Vec<Class>,
    pub seed: u64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0usize, squared_distance(x, centroids.row(0)));
    for c in 1..centroids.rows() {
        let d = squared_distance(x, centroids.row(c));
        // Ties keep the lower cluster index.
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from k seeded random distinct rows until the assignment
/// fixpoint or 300 iterations. Empty clusters are reseeded to the point
/// farthest from its assigned centroid.
pub fn kmeans_fit(x: &Matrix, k: usize, seed: u64) -> Result<KMeansFit> {
    let n = x.rows();
    if k == 0 {
        return Err(Error::Config("kmeans: k must be positive".into()));
    }
    if n < k {
        return Err(Error::Degenerate(format!("kmeans: {n} rows with k = {k}")));
    }
    let mut r = rng::derive(seed, &[rng::stream::KMEANS]);
    let mut pool: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut pool, &mut r);
    let mut centroids = Matrix::from_rows(pool[..k].iter().map(|&i| x.row(i).to_vec()).collect())?;

    let mut assignments = vec![0usize; n];
    let mut inertia_history = Vec::new();
    for _ in 0..300 {
        let mut inertia = 0.0;
        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest_centroid(x.row(i), &centroids);
            if assignments[i] != c {
                changed = true;
            }
            assignments[i] = c;
            inertia += d;
        }
        inertia_history.push(inertia);
        if !changed && inertia_history.len() > 1 {
            break;
        }

        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignments[i]] += 1;
            let s = sums.row_mut(assignments[i]);
            for (sv, xv) in s.iter_mut().zip(x.row(i)) {
                *sv += xv;
            }
        }
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let s = sums.row_mut(c);
                for sv in s.iter_mut() {
                    *sv /= counts[c] as f64;
                }
                centroids.row_mut(c).copy_from_slice(sums.row(c));
            } else {
                // Reseed to the point currently worst-served by its centroid.
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| {
                        let da = squared_distance(x.row(a), centroids.row(assignments[a]));
                        let db = squared_distance(x.row(b), centroids.row(assignments[b]));
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("non-empty dataset");
                taken.push(far);
                centroids.row_mut(c).copy_from_slice(x.row(far));
            }
        }
    }
    Ok(KMeansFit { centroids, assignments, inertia_history })
}

/// Majority-vote mapping from clusters to classes using labeled reference
/// rows; ties map to legitimate.
pub fn map_clusters(fit: &KMeansFit, labels: &[Class], k: usize) -> Result<Vec<Class>> {
    if fit.assignments.len() != labels.len() {
        return Err(Error::Shape(format!(
            "cluster mapping: {} assignments vs {} labels",
            fit.assignments.len(),
            labels.len()
        )));
    }
    let mut votes = vec![[0usize; 2]; k];
    for (&c, &l) in fit.assignments.iter().zip(labels) {
        votes[c][l.index()] += 1;
    }
    Ok(votes
        .iter()
        .map(|v| if v[1] > v[0] { Class::Phishing } else { Class::Legitimate })
        .collect())
}

/// Fit the clustering on labeled reference rows and derive the class mapping.
pub fn kmeans_model(x: &Matrix, labels: &[Class], k: usize, seed: u64) -> Result<KMeansModel> {
    let fit = kmeans_fit(x, k, seed)?;
    let cluster_to_class = map_clusters(&fit, labels, k)?;
    Ok(KMeansModel { k, centroids: fit.centroids, cluster_to_class, seed })
}

/// Class of the nearest centroid's mapped label.
pub fn kmeans_classify(x: &[f64], model: &KMeansModel) -> Class {
    let (c, _) = nearest_centroid(x, &model.centroids);
    model.cluster_to_class[c]
}

/// Continuous phishing score: distance to the nearest legitimate-mapped
/// centroid minus distance to the nearest phishing-mapped centroid. When the
/// mapping collapsed onto one class the model cannot rank, and every score is
/// 0.
pub fn kmeans_score(x: &[f64], model: &KMeansModel) -> f64 {
    let mut d_legit: Option<f64> = None;
    let mut d_phish: Option<f64> = None;
    for c in 0..model.centroids.rows() {
        let d = squared_distance(x, model.centroids.row(c)).sqrt();
        let slot = match model.cluster_to_class[c] {
            Class::Legitimate => &mut d_legit,
            Class::Phishing => &mut d_phish,
        };
        if slot.is_none_or(|cur| d < cur) {
            *slot = Some(d);
        }
    }
    match (d_legit, d_phish) {
        (Some(l), Some(p)) => l - p,
        _ => 0.0,
    }
}

// ---------------------------------------------------------------------------
// Autoencoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub hidden: usize,
    pub bottleneck: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            bottleneck: 16,
            epochs: 30,
            learning_rate: 1e-3,
            batch_size: 128,
            seed: 42,
        }
    }
}

/// Symmetric reconstruction network `D -> hidden -> bottleneck -> hidden -> D`
/// with ReLU on the hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub enc1: DenseLayer,
    pub enc2: DenseLayer,
    pub dec1: DenseLayer,
    pub dec2: DenseLayer,
}

impl AutoencoderModel {
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        let h1 = neural::relu(&self.enc1.forward(x)?);
        let code = neural::relu(&self.enc2.forward(&h1)?);
        let h2 = neural::relu(&self.dec1.forward(&code)?);
        self.dec2.forward(&h2)
    }

    /// Mean squared reconstruction error of one row.
    pub fn reconstruction_score(&self, row: &[f64]) -> Result<f64> {
        let x = Matrix::from_rows(vec![row.to_vec()])?;
        let y = self.reconstruct(&x)?;
        let d = row.len() as f64;
        Ok(row.iter().zip(y.row(0)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d)
    }

    /// Per-row anomaly scores; row order does not interact across rows.
    pub fn score_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        let y = self.reconstruct(x)?;
        let d = x.cols() as f64;
        Ok((0..x.rows())
            .map(|r| x.row(r).iter().zip(y.row(r)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d)
            .collect())
    }
}

struct FlatAdam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

/// Train by minimizing mean squared reconstruction error with
/// adaptive-moment updates. Returns the model and the per-epoch loss trace.
pub fn autoencoder_train(
    x: &Matrix,
    cfg: &AutoencoderConfig,
) -> Result<(AutoencoderModel, Vec<f64>)> {
    if x.rows() == 0 {
        return Err(Error::Degenerate("autoencoder: empty training set".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("autoencoder: epochs and batch_size must be positive".into()));
    }
    let d = x.cols();
    let mut r = rng::derive(cfg.seed, &[rng::stream::AUTOENCODER]);
    let mut he = |out: usize, inp: usize| -> DenseLayer {
        let std = (2.0 / inp as f64).sqrt();
        DenseLayer {
            weights: Matrix::from_fn(out, inp, |_, _| std * rng::standard_normal(&mut r)),
            bias: vec![0.0; out],
        }
    };
    let mut model = AutoencoderModel {
        enc1: he(cfg.hidden, d),
        enc2: he(cfg.bottleneck, cfg.hidden),
        dec1: he(cfg.hidden, cfg.bottleneck),
        dec2: he(d, cfg.hidden),
    };
    let adam = AdamConfig::default();
    let sizes = [
        cfg.hidden * d,
        cfg.hidden,
        cfg.bottleneck * cfg.hidden,
        cfg.bottleneck,
        cfg.hidden * cfg.bottleneck,
        cfg.hidden,
        d * cfg.hidden,
        d,
    ];
    let mut opt = FlatAdam {
        m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        step: 0,
    };

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut shuffle_rng = rng::derive(cfg.seed, &[rng::stream::AUTOENCODER, epoch as u64]);
        rng::shuffle(&mut order, &mut shuffle_rng);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = Matrix::from_rows(chunk.iter().map(|&i| x.row(i).to_vec()).collect())?;
            let n = batch.rows() as f64;

            // Forward with cached intermediates.
            let a1 = model.enc1.forward(&batch)?;
            let h1 = neural::relu(&a1);
            let a2 = model.enc2.forward(&h1)?;
            let code = neural::relu(&a2);
            let a3 = model.dec1.forward(&code)?;
            let h2 = neural::relu(&a3);
            let y = model.dec2.forward(&h2)?;

            let mut loss = 0.0;
            let mut grad_y = Matrix::zeros(y.rows(), y.cols());
            for row in 0..y.rows() {
                for c in 0..y.cols() {
                    let diff = y.get(row, c) - batch.get(row, c);
                    loss += diff * diff;
                    grad_y.set(row, c, 2.0 * diff / (n * d as f64));
                }
            }
            loss /= n * d as f64;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("autoencoder loss {loss} at epoch {epoch}")));
            }
            loss_sum += loss * n;

            let (g_h2, g_dec2) = model.dec2.backward(&h2, &grad_y);
            let g_a3 = neural::relu_backward(&a3, &g_h2);
            let (g_code, g_dec1) = model.dec1.backward(&code, &g_a3);
            let g_a2 = neural::relu_backward(&a2, &g_code);
            let (g_h1, g_enc2) = model.enc2.backward(&h1, &g_a2);
            let g_a1 = neural::relu_backward(&a1, &g_h1);
            let (_, g_enc1) = model.enc1.backward(&batch, &g_a1);

            opt.step += 1;
            let params: [&mut [f64]; 8] = [
                model.enc1.weights.data_mut(),
                &mut model.enc1.bias,
                model.enc2.weights.data_mut(),
                &mut model.enc2.bias,
                model.dec1.weights.data_mut(),
                &mut model.dec1.bias,
                model.dec2.weights.data_mut(),
                &mut model.dec2.bias,
            ];
            let grads: [&[f64]; 8] = [
                g_enc1.weights.data(),
                &g_enc1.bias,
                g_enc2.weights.data(),
                &g_enc2.bias,
                g_dec1.weights.data(),
                &g_dec1.bias,
                g_dec2.weights.data(),
                &g_dec2.bias,
            ];
            for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
                adam_update(p, g, &mut opt.m[i], &mut opt.v[i], opt.step, cfg.learning_rate, &adam);
            }
        }
        epoch_losses.push(loss_sum / x.rows() as f64);
    }
    Ok((model, epoch_losses))
}

/// Threshold on anomaly scores maximizing F1 against the given labels
/// (scores at or above the threshold predict phishing). Candidates are the
/// midpoints between adjacent distinct scores plus both outer boundaries.
pub fn select_threshold(scores: &[f64], labels: &[Class]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Shape("select_threshold: bad input lengths".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut candidates = vec![sorted[0] - 1.0];
    candidates.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(sorted[sorted.len() - 1] + 1.0);

    let mut best = (candidates[0], -1.0);
    for &t in &candidates {
        let preds: Vec<Class> = scores
            .iter()
            .map(|&s| if s >= t { Class::Phishing } else { Class::Legitimate })
            .collect();
        let cm = metrics::confusion(labels, &preds)?;
        let f1 = metrics::prf1(&cm).f1;
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Class::{Legitimate as L, Phishing as P};

    #[test]
    fn two_separated_pairs_converge_to_pair_means() {
        let x = Matrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.2, 0.0],
            vec![10.0, 10.0],
            vec![10.2, 10.0],
        ])
        .unwrap();
        let fit = kmeans_fit(&x, 2, 7).unwrap();
        let mut centroids: Vec<Vec<f64>> = (0..2).map(|c| fit.centroids.row(c).to_vec()).collect();
        centroids.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((centroids[0][0] - 0.1).abs() < 1e-12);
        assert!((centroids[0][1] - 0.0).abs() < 1e-12);
        assert!((centroids[1][0] - 10.1).abs() < 1e-12);
        assert!((centroids[1][1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn k_of_one_is_the_global_mean() {
        let x = Matrix::from_rows(vec![vec![1.0], vec![2.0], vec![6.0]]).unwrap();
        let fit = kmeans_fit(&x, 1, 3).unwrap();
        assert!((fit.centroids.get(0, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inertia_is_monotone_non_increasing() {
        let mut r = rng::derive(91, &[]);
        let x = Matrix::from_fn(200, 5, |_, _| rng::standard_normal(&mut r));
        for seed in 0..5 {
            let fit = kmeans_fit(&x, 4, seed).unwrap();
            for w in fit.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "inertia rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn every_point_ends_at_its_nearest_centroid() {
        let mut r = rng::derive(93, &[]);
        let x = Matrix::from_fn(100, 3, |_, _| rng::standard_normal(&mut r));
        let fit = kmeans_fit(&x, 3, 11).unwrap();
        for i in 0..x.rows() {
            let (nearest, _) = nearest_centroid(x.row(i), &fit.centroids);
            assert_eq!(fit.assignments[i], nearest);
        }
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let x = Matrix::from_rows(vec![vec![1.0]]).unwrap();
        assert!(kmeans_fit(&x, 2, 0).is_err());
    }

    #[test]
    fn duplicate_rows_still_yield_k_centroids() {
        let x =
            Matrix::from_rows(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![5.0, 5.0]])
                .unwrap();
        let fit = kmeans_fit(&x, 3, 13).unwrap();
        assert_eq!(fit.centroids.rows(), 3);
        assert!(fit.assignments.iter().all(|&a| a < 3));
    }

    #[test]
    fn majority_mapping_and_classification() {
        let x = Matrix::from_rows(vec![
            vec![0.0],
            vec![0.1],
            vec![0.2],
            vec![0.3],
            vec![0.4],
            vec![0.5],
            vec![0.6],
            vec![0.7],
            vec![0.8],
            vec![0.9],
            vec![10.0],
            vec![10.1],
        ])
        .unwrap();
        // Low cluster: 90% phishing. High cluster: all legitimate.
        let labels = [P, P, P, P, P, P, P, P, P, L, L, L];
        let model = kmeans_model(&x, &labels, 2, 17).unwrap();
        assert_eq!(kmeans_classify(&[0.05], &model), P);
        assert_eq!(kmeans_classify(&[10.05], &model), L);
        // A point on a centroid classifies as that cluster's class.
        let c = model.cluster_to_class.iter().position(|&cls| cls == P).unwrap();
        let at_centroid = model.centroids.row(c).to_vec();
        assert_eq!(kmeans_classify(&at_centroid, &model), P);
        // Scores rank phishing-side points above legitimate-side ones.
        assert!(kmeans_score(&[0.05], &model) > kmeans_score(&[10.05], &model));
    }

    #[test]
    fn equidistant_tie_prefers_the_lower_cluster_index() {
        let centroids = Matrix::from_rows(vec![vec![-1.0], vec![1.0]]).unwrap();
        let (c, _) = nearest_centroid(&[0.0], &centroids);
        assert_eq!(c, 0);
    }

    #[test]
    fn identity_autoencoder_scores_zero() {
        let d = 3;
        let eye = |n: usize, m: usize| Matrix::from_fn(n, m, |r, c| if r == c { 1.0 } else { 0.0 });
        let model = AutoencoderModel {
            enc1: DenseLayer { weights: eye(d, d), bias: vec![0.0; d] },
            enc2: DenseLayer { weights: eye(d, d), bias: vec![0.0; d] },
            dec1: DenseLayer { weights: eye(d, d), bias: vec![0.0; d] },
            dec2: DenseLayer { weights: eye(d, d), bias: vec![0.0; d] },
        };
        // Positive inputs pass the ReLUs untouched.
        let score = model.reconstruction_score(&[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn training_loss_decreases_on_the_two_cluster_dataset() {
        use crate::synthetic::{self, SyntheticConfig};
        let ds = synthetic::two_cluster(&SyntheticConfig {
            dim: 8,
            legitimate: 200,
            phishing: 100,
            seed: 3,
            ..SyntheticConfig::default()
        });
        let stats = crate::dataset::fit_standardizer(&ds).unwrap();
        let std_ds = crate::dataset::standardize_dataset(&ds, &stats).unwrap();
        let cfg = AutoencoderConfig { epochs: 12, seed: 3, ..AutoencoderConfig::default() };
        let (_, losses) = autoencoder_train(&std_ds.to_matrix(), &cfg).unwrap();
        let median = |xs: &[f64]| {
            let mut v = xs.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        assert!(median(&losses[losses.len() - 5..]) < median(&losses[..5]));
    }

    #[test]
    fn training_loss_decreases_on_structured_data() {
        let mut r = rng::derive(95, &[]);
        // Rank-2 data in 6 dims: reconstructible through the bottleneck.
        let x = Matrix::from_fn(300, 6, |_, c| {
            let _ = c;
            rng::standard_normal(&mut r)
        });
        let x = {
            let basis = [[1.0, 0.5, 0.0, -0.5, 1.0, 0.2], [0.0, 1.0, -1.0, 0.5, 0.2, 1.0]];
            Matrix::from_fn(300, 6, |row, c| {
                x.get(row, 0) * basis[0][c] + x.get(row, 1) * basis[1][c]
            })
        };
        let cfg = AutoencoderConfig {
            hidden: 16,
            bottleneck: 4,
            epochs: 12,
            batch_size: 64,
            seed: 5,
            ..AutoencoderConfig::default()
        };
        let (_, losses) = autoencoder_train(&x, &cfg).unwrap();
        let median = |xs: &[f64]| {
            let mut v = xs.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        assert!(median(&losses[losses.len() - 5..]) < median(&losses[..5]));
    }

    #[test]
    fn scores_are_independent_of_row_order() {
        let mut r = rng::derive(97, &[]);
        let x = Matrix::from_fn(40, 5, |_, _| rng::standard_normal(&mut r));
        let cfg = AutoencoderConfig {
            hidden: 8,
            bottleneck: 3,
            epochs: 3,
            batch_size: 16,
            seed: 9,
            ..AutoencoderConfig::default()
        };
        let (model, _) = autoencoder_train(&x, &cfg).unwrap();
        let forward = model.score_batch(&x).unwrap();
        let reversed_input =
            Matrix::from_rows((0..40).rev().map(|i| x.row(i).to_vec()).collect()).unwrap();
        let mut reversed = model.score_batch(&reversed_input).unwrap();
        reversed.reverse();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn autoencoder_gradients_match_finite_differences() {
        use crate::neural::grad_check;
        let mut r = rng::derive(99, &[]);
        let d = 4;
        let x = Matrix::from_fn(5, d, |_, _| rng::standard_normal(&mut r));
        let mut he = |out: usize, inp: usize| DenseLayer {
            weights: Matrix::from_fn(out, inp, |_, _| {
                (2.0 / inp as f64).sqrt() * rng::standard_normal(&mut r)
            }),
            bias: vec![0.0; out],
        };
        let model =
            AutoencoderModel { enc1: he(6, d), enc2: he(3, 6), dec1: he(6, 3), dec2: he(d, 6) };

        let mse = |m: &AutoencoderModel| -> f64 {
            let y = m.reconstruct(&x).unwrap();
            let mut loss = 0.0;
            for row in 0..y.rows() {
                for c in 0..y.cols() {
                    let diff = y.get(row, c) - x.get(row, c);
                    loss += diff * diff;
                }
            }
            loss / (y.rows() as f64 * d as f64)
        };

        // Recompute the training-step gradients for this fixed batch.
        let n = x.rows() as f64;
        let a1 = model.enc1.forward(&x).unwrap();
        let h1 = neural::relu(&a1);
        let a2 = model.enc2.forward(&h1).unwrap();
        let code = neural::relu(&a2);
        let a3 = model.dec1.forward(&code).unwrap();
        let h2 = neural::relu(&a3);
        let y = model.dec2.forward(&h2).unwrap();
        let grad_y = Matrix::from_fn(y.rows(), y.cols(), |row, c| {
            2.0 * (y.get(row, c) - x.get(row, c)) / (n * d as f64)
        });
        let (g_h2, g_dec2) = model.dec2.backward(&h2, &grad_y);
        let g_a3 = neural::relu_backward(&a3, &g_h2);
        let (g_code, g_dec1) = model.dec1.backward(&code, &g_a3);
        let g_a2 = neural::relu_backward(&a2, &g_code);
        let (g_h1, g_enc2) = model.enc2.backward(&h1, &g_a2);
        let g_a1 = neural::relu_backward(&a1, &g_h1);
        let (_, g_enc1) = model.enc1.backward(&x, &g_a1);

        type LayerAccess = fn(&mut AutoencoderModel) -> &mut Matrix;
        let checks: [(&Matrix, &Matrix, LayerAccess); 4] = [
            (&model.enc1.weights, &g_enc1.weights, |m| &mut m.enc1.weights),
            (&model.enc2.weights, &g_enc2.weights, |m| &mut m.enc2.weights),
            (&model.dec1.weights, &g_dec1.weights, |m| &mut m.dec1.weights),
            (&model.dec2.weights, &g_dec2.weights, |m| &mut m.dec2.weights),
        ];
        for (i, (w, g, access)) in checks.into_iter().enumerate() {
            let err = grad_check(
                |p| {
                    let mut m = model.clone();
                    access(&mut m).data_mut().copy_from_slice(p);
                    mse(&m)
                },
                w.data(),
                g.data(),
                1e-5,
            );
            assert!(err < 1e-4, "autoencoder layer {i} grad err {err}");
        }
    }

    #[test]
    fn threshold_selection_maximizes_f1() {
        let scores = [0.1, 0.2, 0.3, 0.8, 0.9, 1.0];
        let labels = [L, L, L, P, P, P];
        let t = select_threshold(&scores, &labels).unwrap();
        assert!(t > 0.3 && t <= 0.8, "threshold {t}");
        // Perfect split -> F1 = 1 at that threshold.
        let preds: Vec<Class> = scores.iter().map(|&s| if s >= t { P } else { L }).collect();
        let cm = metrics::confusion(&labels, &preds).unwrap();
        assert_eq!(metrics::prf1(&cm).f1, 1.0);
    }
}
