//! CSV loading, label mapping, deterministic splits and z-score
//! standardization.
//!
//! Standardization uses the population standard deviation and is fit on the
//! training split only; zero-variance columns get scale 1 so they standardize
//! to 0 without being dropped. Sentinel values (e.g. -1 placeholders) are
//! treated as ordinary numbers — the source datasets encode them that way.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Matrix;
use crate::rng;

/// Binary class with the phishing class as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Legitimate,
    Phishing,
}

impl Class {
    pub fn index(self) -> usize {
        match self {
            Class::Legitimate => 0,
            Class::Phishing => 1,
        }
    }

    pub fn is_phishing(self) -> bool {
        self == Class::Phishing
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Class::Legitimate => write!(f, "legitimate"),
            Class::Phishing => write!(f, "phishing"),
        }
    }
}

/// How to read a labeled CSV: which column holds the label, which label value
/// maps to the phishing class, and which columns to exclude from features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub label_column: String,
    pub positive_label: String,
    #[serde(default)]
    pub drop_columns: Vec<String>,
    /// Expected feature dimension; checked when set.
    #[serde(default)]
    pub feature_count: Option<usize>,
}

/// In-memory feature table with per-row class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Class>,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_rows(self.rows.clone()).expect("dataset rows are rectangular")
    }

    fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }
}

/// Per-feature mean and scale of the z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Split fractions and shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// (train, validation, test) fractions; must sum to 1.
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { ratios: [0.6, 0.2, 0.2], seed: 42 }
    }
}

/// Load a labeled CSV per `schema`. The header row is required; feature
/// column order follows the header.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;

    let headers =
        reader.headers().map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == schema.label_column)
        .ok_or_else(|| Error::Dataset(format!("missing label column '{}'", schema.label_column)))?;
    let feature_idx: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| *i != label_idx && !schema.drop_columns.iter().any(|d| d == h))
        .map(|(i, _)| i)
        .collect();
    let dim = feature_idx.len();
    if let Some(expected) = schema.feature_count
        && dim != expected
    {
        return Err(Error::Dataset(format!(
            "feature_count mismatch: schema expects {expected}, file has {dim}"
        )));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Dataset(format!(
                "row {}: has {} cells, header has {}",
                line + 2,
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(dim);
        for &i in &feature_idx {
            let cell = &record[i];
            let value: f64 = cell.parse().map_err(|_| {
                Error::Dataset(format!(
                    "row {}, column '{}': non-numeric value '{cell}'",
                    line + 2,
                    &headers[i]
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Dataset(format!(
                    "row {}, column '{}': non-finite value '{cell}'",
                    line + 2,
                    &headers[i]
                )));
            }
            row.push(value);
        }
        let label = if record[label_idx] == schema.positive_label {
            Class::Phishing
        } else {
            Class::Legitimate
        };
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Dataset(format!("{}: no rows", path.display())));
    }
    Ok(Dataset { rows, labels, dim })
}

/// Deterministic shuffled three-way split. Train and validation sizes are
/// `floor(N * ratio)` (with a 1e-9 nudge so decimal ratios hit their exact
/// integer products); the test split takes the remainder so no row is
/// dropped.
pub fn split(ds: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset, Dataset)> {
    if ds.is_empty() {
        return Err(Error::Degenerate("split: empty dataset".into()));
    }
    let sum: f64 = cfg.ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
    }
    if cfg.ratios.iter().any(|&r| r < 0.0) {
        return Err(Error::Config("split ratios must be non-negative".into()));
    }
    let n = ds.len();
    let n_train = ((n as f64) * cfg.ratios[0] + 1e-9).floor() as usize;
    let n_val = ((n as f64) * cfg.ratios[1] + 1e-9).floor() as usize;
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Degenerate(format!(
            "split of {n} rows produces an empty partition ({n_train}/{n_val}/{n_test})"
        )));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut r = rng::derive(cfg.seed, &[rng::stream::SPLIT]);
    rng::shuffle(&mut indices, &mut r);

    let train = ds.select(&indices[..n_train]);
    let val = ds.select(&indices[n_train..n_train + n_val]);
    let test = ds.select(&indices[n_train + n_val..]);
    Ok((train, val, test))
}

/// Fit per-feature mean and population standard deviation on the training
/// split. Zero-variance columns get scale 1.
pub fn fit_standardizer(train: &Dataset) -> Result<StandardizationStats> {
    if train.is_empty() {
        return Err(Error::Degenerate("fit_standardizer: empty dataset".into()));
    }
    let n = train.len() as f64;
    let d = train.dim;
    let mut mean = vec![0.0; d];
    for row in &train.rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut scale = vec![0.0; d];
    for row in &train.rows {
        for c in 0..d {
            let dv = row[c] - mean[c];
            scale[c] += dv * dv;
        }
    }
    for s in &mut scale {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Ok(StandardizationStats { mean, scale })
}

/// Apply the z-score transform to one feature vector.
pub fn standardize(x: &[f64], stats: &StandardizationStats) -> Result<Vec<f64>> {
    if x.len() != stats.mean.len() {
        return Err(Error::Shape(format!(
            "standardize: row has {} dims, stats have {}",
            x.len(),
            stats.mean.len()
        )));
    }
    Ok(x.iter().zip(stats.mean.iter().zip(&stats.scale)).map(|(v, (m, s))| (v - m) / s).collect())
}

/// Standardize every row of a dataset.
pub fn standardize_dataset(ds: &Dataset, stats: &StandardizationStats) -> Result<Dataset> {
    let rows: Result<Vec<Vec<f64>>> = ds.rows.iter().map(|r| standardize(r, stats)).collect();
    Ok(Dataset { rows: rows?, labels: ds.labels.clone(), dim: ds.dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp_csv(name: &str, contents: &str) -> std::path::PathBuf {
        let path =
            std::env::temp_dir().join(format!("phishssl-test-{}-{name}", std::process::id()));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn schema() -> DatasetSchema {
        DatasetSchema {
            label_column: "status".into(),
            positive_label: "phishing".into(),
            drop_columns: vec!["url".into()],
            feature_count: None,
        }
    }

    #[test]
    fn load_csv_maps_labels_and_preserves_order() {
        let path = write_temp_csv(
            "basic.csv",
            "url,f1,f2,status\nhttp://a.com,1.5,2,legitimate\nhttp://b.com,-1,0.25,phishing\n",
        );
        let ds = load_csv(&path, &schema()).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim, 2);
        assert_eq!(ds.rows[0], vec![1.5, 2.0]);
        assert_eq!(ds.labels, vec![Class::Legitimate, Class::Phishing]);
    }

    #[test]
    fn load_csv_error_cases() {
        let missing = write_temp_csv("missing-label.csv", "a,b\n1,2\n");
        assert!(matches!(load_csv(&missing, &schema()), Err(Error::Dataset(_))));
        std::fs::remove_file(&missing).ok();

        let non_numeric = write_temp_csv("non-numeric.csv", "url,f1,status\nx,oops,phishing\n");
        let err = load_csv(&non_numeric, &schema()).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
        std::fs::remove_file(&non_numeric).ok();

        let empty = write_temp_csv("empty.csv", "url,f1,status\n");
        let err = load_csv(&empty, &schema()).unwrap_err();
        assert!(err.to_string().contains("no rows"), "{err}");
        std::fs::remove_file(&empty).ok();

        let bad_count = write_temp_csv("count.csv", "url,f1,f2,status\nx,1,2,phishing\n");
        let mut s = schema();
        s.feature_count = Some(5);
        let err = load_csv(&bad_count, &s).unwrap_err();
        assert!(err.to_string().contains("feature_count"), "{err}");
        std::fs::remove_file(&bad_count).ok();
    }

    fn dummy(n: usize) -> Dataset {
        Dataset {
            rows: (0..n).map(|i| vec![i as f64]).collect(),
            labels: (0..n)
                .map(|i| if i % 2 == 0 { Class::Legitimate } else { Class::Phishing })
                .collect(),
            dim: 1,
        }
    }

    #[test]
    fn split_sizes_match_floor_rule() {
        let cfg = SplitConfig::default();
        let (tr, va, te) = split(&dummy(11_430), &cfg).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6858, 2286, 2286));
        let (tr, va, te) = split(&dummy(10_000), &cfg).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6000, 2000, 2000));
    }

    #[test]
    fn split_is_a_partition_and_seed_deterministic() {
        let ds = dummy(101);
        let cfg = SplitConfig { ratios: [0.6, 0.2, 0.2], seed: 9 };
        let (tr, va, te) = split(&ds, &cfg).unwrap();
        let mut all: Vec<usize> = tr
            .rows
            .iter()
            .chain(va.rows.iter())
            .chain(te.rows.iter())
            .map(|r| r[0] as usize)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());

        let (tr2, _, _) = split(&ds, &cfg).unwrap();
        assert_eq!(tr, tr2);
        let (tr3, _, _) = split(&ds, &SplitConfig { ratios: [0.6, 0.2, 0.2], seed: 10 }).unwrap();
        assert_ne!(tr, tr3);
    }

    #[test]
    fn degenerate_split_errors() {
        let cfg = SplitConfig::default();
        assert!(split(&dummy(2), &cfg).is_err());
        let bad = SplitConfig { ratios: [0.5, 0.4, 0.2], seed: 0 };
        assert!(split(&dummy(100), &bad).is_err());
    }

    #[test]
    fn standardizer_examples() {
        let ds = Dataset {
            rows: vec![
                vec![-1.0, 5.0, 0.0],
                vec![1.0, 5.0, 2.0],
                vec![-1.0, 5.0, 0.0],
                vec![1.0, 5.0, 2.0],
            ],
            labels: vec![Class::Legitimate; 4],
            dim: 3,
        };
        let stats = fit_standardizer(&ds).unwrap();
        // {-1, 1}: mean 0, population std 1
        assert_eq!(stats.mean[0], 0.0);
        assert_eq!(stats.scale[0], 1.0);
        // constant column: zero-variance rule forces scale 1
        assert_eq!(stats.mean[1], 5.0);
        assert_eq!(stats.scale[1], 1.0);
        // {0, 2}: mean 1, population std 1
        assert_eq!(stats.mean[2], 1.0);
        assert_eq!(stats.scale[2], 1.0);
    }

    #[test]
    fn standardize_examples() {
        let stats = StandardizationStats { mean: vec![1.0], scale: vec![2.0] };
        assert_eq!(standardize(&[3.0], &stats).unwrap(), vec![1.0]);
        assert_eq!(standardize(&[1.0], &stats).unwrap(), vec![0.0]);
        assert!(standardize(&[1.0, 2.0], &stats).is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_is_always_a_partition(n in 5usize..400, seed in 0u64..1000) {
            let ds = dummy(n);
            let cfg = SplitConfig { ratios: [0.6, 0.2, 0.2], seed };
            if let Ok((tr, va, te)) = split(&ds, &cfg) {
                let mut all: Vec<usize> = tr
                    .rows
                    .iter()
                    .chain(va.rows.iter())
                    .chain(te.rows.iter())
                    .map(|r| r[0] as usize)
                    .collect();
                proptest::prop_assert_eq!(all.len(), n, "no row dropped");
                all.sort_unstable();
                all.dedup();
                proptest::prop_assert_eq!(all.len(), n, "pairwise disjoint");
                let expect_train = ((n as f64) * 0.6 + 1e-9).floor() as usize;
                let expect_val = ((n as f64) * 0.2 + 1e-9).floor() as usize;
                proptest::prop_assert_eq!(tr.len(), expect_train);
                proptest::prop_assert_eq!(va.len(), expect_val);
                proptest::prop_assert_eq!(te.len(), n - expect_train - expect_val);
            }
        }
    }

    #[test]
    fn standardized_train_split_has_zero_mean_unit_std() {
        let mut r = rng::derive(55, &[]);
        let ds = Dataset {
            rows: (0..500)
                .map(|_| (0..7).map(|_| 3.0 + 2.5 * rng::standard_normal(&mut r)).collect())
                .collect(),
            labels: vec![Class::Legitimate; 500],
            dim: 7,
        };
        let stats = fit_standardizer(&ds).unwrap();
        let std_ds = standardize_dataset(&ds, &stats).unwrap();
        for c in 0..7 {
            let mean: f64 = std_ds.rows.iter().map(|row| row[c]).sum::<f64>() / 500.0;
            let var: f64 =
                std_ds.rows.iter().map(|row| (row[c] - mean) * (row[c] - mean)).sum::<f64>()
                    / 500.0;
            assert!(mean.abs() <= 1e-9, "col {c} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() <= 1e-9, "col {c} std {}", var.sqrt());
        }
    }
}
