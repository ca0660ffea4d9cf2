//! Prototype-based classification of embeddings.
//!
//! Class prototypes are plain means of labeled reference embeddings (not
//! re-normalized to the sphere). Euclidean mode turns distances into
//! normalized probabilities via a softmax over negated distances; cosine mode
//! reports per-class sigmoid similarities and labels by argmax.

use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};
use crate::neural::{Matrix, sigmoid_scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    #[default]
    Euclidean,
    Cosine,
}

impl std::str::FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::Config(format!("unknown inference mode '{other}'"))),
        }
    }
}

/// Per-class centroid embeddings with reference counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototypes {
    pub mu_legitimate: Vec<f64>,
    pub mu_phishing: Vec<f64>,
    pub n_legitimate: usize,
    pub n_phishing: usize,
    pub mode: InferenceMode,
}

/// One classified sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Class,
    pub prob_phishing: f64,
    /// Per-class raw score indexed by [`Class::index`]: distances in
    /// euclidean mode, cosine similarities in cosine mode.
    pub class_scores: [f64; 2],
}

/// Mean embedding per class. Errors if a class has no reference sample or a
/// centroid collapses to (near) zero norm.
pub fn build_prototypes(
    embeddings: &Matrix,
    labels: &[Class],
    mode: InferenceMode,
) -> Result<Prototypes> {
    if embeddings.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "prototypes: {} embeddings vs {} labels",
            embeddings.rows(),
            labels.len()
        )));
    }
    let d = embeddings.cols();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (r, label) in labels.iter().enumerate() {
        let k = label.index();
        counts[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(embeddings.row(r)) {
            *s += v;
        }
    }
    for (k, class) in [Class::Legitimate, Class::Phishing].into_iter().enumerate() {
        if counts[k] == 0 {
            return Err(Error::Degenerate(format!("prototypes: no reference samples for {class}")));
        }
        for s in sums[k].iter_mut() {
            *s /= counts[k] as f64;
        }
        let norm = sums[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Degenerate(format!(
                "prototypes: {class} centroid has zero norm (antipodal reference embeddings)"
            )));
        }
    }
    let mut it = sums.into_iter();
    Ok(Prototypes {
        mu_legitimate: it.next().unwrap(),
        mu_phishing: it.next().unwrap(),
        n_legitimate: counts[0],
        n_phishing: counts[1],
        mode,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn phishing_probability(z: &[f64], p: &Prototypes) -> (f64, [f64; 2]) {
    match p.mode {
        InferenceMode::Euclidean => {
            let d_l = euclidean(z, &p.mu_legitimate);
            let d_p = euclidean(z, &p.mu_phishing);
            // softmax over negated distances: exp(-d_p) / (exp(-d_p) + exp(-d_l))
            (sigmoid_scalar(d_l - d_p), [d_l, d_p])
        }
        InferenceMode::Cosine => {
            let s_l = cosine(z, &p.mu_legitimate);
            let s_p = cosine(z, &p.mu_phishing);
            (sigmoid_scalar(s_p), [s_l, s_p])
        }
    }
}

/// Classify one unit-norm embedding against the prototypes.
///
/// Euclidean mode labels phishing iff `prob_phishing >= threshold`. Cosine
/// mode labels by argmax of the similarities (its sigmoid scores are not
/// normalized across classes, so a probability threshold would not be
/// calibrated); the reported `prob_phishing` is `sigmoid(s_phishing)`.
pub fn classify(z: &[f64], p: &Prototypes, threshold: f64) -> Prediction {
    let (prob_phishing, class_scores) = phishing_probability(z, p);
    let label = match p.mode {
        InferenceMode::Euclidean => {
            if prob_phishing >= threshold {
                Class::Phishing
            } else {
                Class::Legitimate
            }
        }
        InferenceMode::Cosine => {
            if class_scores[1] >= class_scores[0] {
                Class::Phishing
            } else {
                Class::Legitimate
            }
        }
    };
    Prediction { label, prob_phishing, class_scores }
}

/// Phishing probability per row, used directly as ROC scores.
pub fn score_batch(embeddings: &Matrix, p: &Prototypes) -> Vec<f64> {
    (0..embeddings.rows()).map(|r| phishing_probability(embeddings.row(r), p).0).collect()
}

/// Hard labels per row at the given threshold.
pub fn classify_batch(embeddings: &Matrix, p: &Prototypes, threshold: f64) -> Vec<Class> {
    (0..embeddings.rows()).map(|r| classify(embeddings.row(r), p, threshold).label).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    const L: Class = Class::Legitimate;
    const P: Class = Class::Phishing;

    #[test]
    fn single_reference_per_class_is_the_centroid() {
        let e = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = build_prototypes(&e, &[L, P], InferenceMode::Euclidean).unwrap();
        assert_eq!(p.mu_legitimate, vec![1.0, 0.0]);
        assert_eq!(p.mu_phishing, vec![0.0, 1.0]);
        assert_eq!((p.n_legitimate, p.n_phishing), (1, 1));
    }

    #[test]
    fn mean_of_two_orthogonal_unit_vectors() {
        let e = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let p = build_prototypes(&e, &[L, L, P], InferenceMode::Euclidean).unwrap();
        assert_eq!(p.mu_legitimate, vec![0.5, 0.5]);
    }

    #[test]
    fn antipodal_references_are_degenerate() {
        let e = Matrix::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(build_prototypes(&e, &[L, L, P], InferenceMode::Euclidean).is_err());
    }

    #[test]
    fn missing_class_is_an_error() {
        let e = Matrix::from_rows(vec![vec![1.0, 0.0]]).unwrap();
        assert!(build_prototypes(&e, &[L], InferenceMode::Euclidean).is_err());
    }

    fn toy_prototypes(mode: InferenceMode) -> Prototypes {
        Prototypes {
            mu_legitimate: vec![1.0, 0.0],
            mu_phishing: vec![0.0, 1.0],
            n_legitimate: 1,
            n_phishing: 1,
            mode,
        }
    }

    #[test]
    fn equidistant_point_has_half_probability() {
        let p = toy_prototypes(InferenceMode::Euclidean);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pred = classify(&[s, s], &p, 0.5);
        assert!((pred.prob_phishing - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unit_distance_gap_gives_sigmoid_one() {
        // d_legit = 1, d_phish = 0 -> P(phish) = 1/(1 + e^-1)
        let p = Prototypes {
            mu_legitimate: vec![1.0, 1.0],
            mu_phishing: vec![1.0, 0.0],
            n_legitimate: 1,
            n_phishing: 1,
            mode: InferenceMode::Euclidean,
        };
        let pred = classify(&[1.0, 0.0], &p, 0.5);
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((pred.prob_phishing - expected).abs() < 1e-12);
        assert!((pred.prob_phishing - 0.73106).abs() < 1e-5);
        assert_eq!(pred.label, P);
    }

    #[test]
    fn embedding_at_prototype_classifies_as_that_class() {
        let p = toy_prototypes(InferenceMode::Euclidean);
        assert_eq!(classify(&[0.0, 1.0], &p, 0.5).label, P);
        assert_eq!(classify(&[1.0, 0.0], &p, 0.5).label, L);
        let pc = toy_prototypes(InferenceMode::Cosine);
        assert_eq!(classify(&[0.0, 1.0], &pc, 0.5).label, P);
        assert_eq!(classify(&[1.0, 0.0], &pc, 0.5).label, L);
    }

    #[test]
    fn euclidean_probabilities_sum_to_one_and_argmax_matches_argmin_distance() {
        let p = toy_prototypes(InferenceMode::Euclidean);
        let mut r = rng::derive(83, &[]);
        for _ in 0..200 {
            let raw = [rng::standard_normal(&mut r), rng::standard_normal(&mut r)];
            let norm = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
            if norm == 0.0 {
                continue;
            }
            let z = [raw[0] / norm, raw[1] / norm];
            let pred = classify(&z, &p, 0.5);
            let p_legit = sigmoid_scalar(pred.class_scores[1] - pred.class_scores[0]);
            assert!((pred.prob_phishing + p_legit - 1.0).abs() < 1e-12);
            let nearest = if pred.class_scores[1] < pred.class_scores[0] { P } else { L };
            if pred.class_scores[0] != pred.class_scores[1] {
                assert_eq!(pred.label, nearest);
            }
        }
    }

    #[test]
    fn scores_are_monotone_in_the_distance_gap() {
        let p = toy_prototypes(InferenceMode::Euclidean);
        let mut r = rng::derive(89, &[]);
        let mut last: Option<(f64, f64)> = None;
        for _ in 0..100 {
            let raw = [rng::standard_normal(&mut r), rng::standard_normal(&mut r)];
            let norm = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
            if norm == 0.0 {
                continue;
            }
            let z = [raw[0] / norm, raw[1] / norm];
            let pred = classify(&z, &p, 0.5);
            if let Some((gap_prev, score_prev)) = last {
                let gap = pred.class_scores[0] - pred.class_scores[1];
                if gap > gap_prev {
                    assert!(pred.prob_phishing > score_prev);
                } else if gap < gap_prev {
                    assert!(pred.prob_phishing < score_prev);
                }
            }
            last = Some((pred.class_scores[0] - pred.class_scores[1], pred.prob_phishing));
        }
    }

    #[test]
    fn score_batch_matches_classify() {
        let p = toy_prototypes(InferenceMode::Euclidean);
        let e = Matrix::from_rows(vec![vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        let scores = score_batch(&e, &p);
        assert_eq!(scores.len(), 2);
        for (r, s) in scores.iter().enumerate() {
            assert_eq!(*s, classify(e.row(r), &p, 0.5).prob_phishing);
            assert!((0.0..=1.0).contains(s));
        }
    }
}
