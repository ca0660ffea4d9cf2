//! Synthetic two-cluster dataset for demos and sanity harnesses.
//!
//! Two Gaussian blobs separated by `separation` (Euclidean distance between
//! means, in units of the legitimate cluster's per-coordinate std). The
//! phishing cluster is smaller and wider by default — reconstruction-style
//! anomaly scores need that asymmetry to rank it as anomalous, and it mirrors
//! how phishing feature rows sit in real tables: rarer and more dispersed.

use serde::{Deserialize, Serialize};

use crate::dataset::{Class, Dataset};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub legitimate: usize,
    pub phishing: usize,
    /// Euclidean distance between the cluster means.
    pub separation: f64,
    /// Per-coordinate std of the phishing cluster relative to the legitimate
    /// cluster's (which is fixed at 1).
    pub phishing_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            legitimate: 700,
            phishing: 300,
            separation: 6.0,
            phishing_spread: 2.0,
            seed: 42,
        }
    }
}

/// Generate the shuffled two-cluster dataset.
pub fn two_cluster(cfg: &SyntheticConfig) -> Dataset {
    let mut r = rng::derive(cfg.seed, &[rng::stream::SYNTHETIC]);
    let offset = cfg.separation / (cfg.dim as f64).sqrt();
    let mut rows = Vec::with_capacity(cfg.legitimate + cfg.phishing);
    let mut labels = Vec::with_capacity(cfg.legitimate + cfg.phishing);
    for _ in 0..cfg.legitimate {
        rows.push((0..cfg.dim).map(|_| rng::standard_normal(&mut r)).collect::<Vec<_>>());
        labels.push(Class::Legitimate);
    }
    for _ in 0..cfg.phishing {
        rows.push(
            (0..cfg.dim)
                .map(|_| offset + cfg.phishing_spread * rng::standard_normal(&mut r))
                .collect::<Vec<_>>(),
        );
        labels.push(Class::Phishing);
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    rng::shuffle(&mut order, &mut r);
    Dataset {
        rows: order.iter().map(|&i| rows[i].clone()).collect(),
        labels: order.iter().map(|&i| labels[i]).collect(),
        dim: cfg.dim,
    }
}

/// Render a dataset as a labeled CSV (`f0..f{D-1},label`) consumable by the
/// CLI with label column "label" and positive label "phishing".
pub fn to_csv_string(ds: &Dataset) -> String {
    let mut out = String::new();
    for c in 0..ds.dim {
        out.push_str(&format!("f{c},"));
    }
    out.push_str("label\n");
    for (row, label) in ds.rows.iter().zip(&ds.labels) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{label}\n"));
    }
    out
}
