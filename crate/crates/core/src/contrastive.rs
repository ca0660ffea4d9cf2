//! Triplet construction and triplet margin loss.
//!
//! Negatives come from an in-batch derangement of the positives: a random
//! rotation `pi[i] = (i + k) mod n` with `k` uniform in `1..n`, which is
//! fixed-point-free by construction, so no sample is ever its own negative.
//!
//! The loss per triplet is the hinge `max(0, d(a,p) - d(a,n) + m)` over L2
//! distances. At the hinge kink (active margin exactly 0) the subgradient is
//! taken as 0, and the distance gradient of coincident points is also 0 to
//! avoid division by zero.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neural::Matrix;

/// A fixed-point-free permutation of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derangement {
    pi: Vec<usize>,
}

impl Derangement {
    pub fn as_slice(&self) -> &[usize] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Sample a derangement of `0..n` by rotating indices with a uniform random
/// nonzero offset.
pub fn sample_derangement(n: usize, rng: &mut ChaCha8Rng) -> Result<Derangement> {
    if n < 2 {
        return Err(Error::Degenerate(format!("no derangement exists for n = {n}")));
    }
    let k = rng.random_range(1..n);
    Ok(Derangement { pi: (0..n).map(|i| (i + k) % n).collect() })
}

/// Anchor/positive/negative embedding triples for one batch.
///
/// `negatives.row(i) == positives.row(pi[i])` by construction.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub anchors: Matrix,
    pub positives: Matrix,
    pub negatives: Matrix,
    pub derangement: Derangement,
    pub margin: f64,
}

impl TripletBatch {
    pub fn new(
        anchors: Matrix,
        positives: Matrix,
        derangement: Derangement,
        margin: f64,
    ) -> Result<Self> {
        let n = anchors.rows();
        if positives.rows() != n || derangement.len() != n {
            return Err(Error::Shape(format!(
                "triplet batch: {n} anchors, {} positives, {} permutation entries",
                positives.rows(),
                derangement.len()
            )));
        }
        if anchors.cols() != positives.cols() {
            return Err(Error::Shape("triplet batch: embedding dims differ".into()));
        }
        if margin <= 0.0 {
            return Err(Error::Config(format!("margin must be positive, got {margin}")));
        }
        let negatives =
            Matrix::from_fn(n, positives.cols(), |r, c| positives.get(derangement.pi[r], c));
        Ok(Self { anchors, positives, negatives, derangement, margin })
    }

    pub fn len(&self) -> usize {
        self.anchors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.rows() == 0
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Hinge loss of one triplet with gradients w.r.t. all three embeddings.
pub fn triplet_loss(
    z_a: &[f64],
    z_p: &[f64],
    z_n: &[f64],
    margin: f64,
) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = z_a.len();
    let d_ap = distance(z_a, z_p);
    let d_an = distance(z_a, z_n);
    let active = d_ap - d_an + margin;
    if active <= 0.0 {
        return (0.0, vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    }
    let mut g_a = vec![0.0; d];
    let mut g_p = vec![0.0; d];
    let mut g_n = vec![0.0; d];
    if d_ap > 0.0 {
        for i in 0..d {
            let u = (z_a[i] - z_p[i]) / d_ap;
            g_a[i] += u;
            g_p[i] -= u;
        }
    }
    if d_an > 0.0 {
        for i in 0..d {
            let u = (z_a[i] - z_n[i]) / d_an;
            g_a[i] -= u;
            g_n[i] += u;
        }
    }
    (active, g_a, g_p, g_n)
}

/// Mean triplet loss over a batch with gradients w.r.t. the anchor and
/// positive matrices. The negative role of each positive is folded back into
/// the positive gradient through the derangement.
pub fn batch_loss(batch: &TripletBatch) -> (f64, Matrix, Matrix) {
    let n = batch.len();
    let dim = batch.anchors.cols();
    let mut total = 0.0;
    let mut grad_a = Matrix::zeros(n, dim);
    let mut grad_p = Matrix::zeros(n, dim);
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let (loss, g_a, g_p, g_n) = triplet_loss(
            batch.anchors.row(i),
            batch.positives.row(i),
            batch.negatives.row(i),
            batch.margin,
        );
        total += loss;
        let j = batch.derangement.pi[i];
        let ga = grad_a.row_mut(i);
        for c in 0..dim {
            ga[c] += g_a[c] * inv_n;
        }
        let gp = grad_p.row_mut(i);
        for c in 0..dim {
            gp[c] += g_p[c] * inv_n;
        }
        let gn = grad_p.row_mut(j);
        for c in 0..dim {
            gn[c] += g_n[c] * inv_n;
        }
    }
    (total * inv_n, grad_a, grad_p)
}
