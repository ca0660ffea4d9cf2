//! Command implementations behind the `phishssl` binary.
//!
//! Every command is a pure function of its inputs: identical configs produce
//! byte-identical output files. Floats are written in Rust's shortest
//! round-trip form with `.` as the decimal separator, and all columns have a
//! fixed documented order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result, bail};

use phishssl::baselines::{self};
use phishssl::config::{ModelKind, RunConfig};
use phishssl::dataset::{self, Class, Dataset, StandardizationStats};
use phishssl::inference;
use phishssl::metrics::{self, ConfusionMatrix, MetricsReport, RocPoint};
use phishssl::model;
use phishssl::neural::Matrix;
use phishssl::train::{self, CHECKPOINT_VERSION, Checkpoint, TrainHistory};
use phishssl::urlfeat::{self, LexiconConfig, UrlFeatureRow};

const CRATE_VERSION: &str = env!("CARGO_PKG_VERSION");

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn load_config(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<(RunConfig, PathBuf, u64)> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg.override_seed(seed);
    }
    let out_dir = out_override.map_or_else(|| PathBuf::from(&cfg.output_dir), Path::to_path_buf);
    let config_hash = fnv1a64(&std::fs::read(config_path)?);
    Ok((cfg, out_dir, config_hash))
}

/// Standardized train/validation/test splits plus the train-fit standardizer.
struct PreparedData {
    train: Dataset,
    val: Dataset,
    test: Dataset,
    stats: StandardizationStats,
}

fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let path = Path::new(&cfg.dataset.path);
    if !path.exists() {
        bail!("dataset not found: {}", path.display());
    }
    let ds = dataset::load_csv(path, &cfg.dataset.schema)?;
    let (train_raw, val_raw, test_raw) = dataset::split(&ds, &cfg.split)?;
    let stats = dataset::fit_standardizer(&train_raw)?;
    Ok(PreparedData {
        train: dataset::standardize_dataset(&train_raw, &stats)?,
        val: dataset::standardize_dataset(&val_raw, &stats)?,
        test: dataset::standardize_dataset(&test_raw, &stats)?,
        stats,
    })
}

fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,val_auc\n");
    for rec in &history.epochs {
        writeln!(out, "{},{},{}", rec.epoch, rec.train_loss, rec.val_auc).unwrap();
    }
    out
}

fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold).unwrap();
    }
    out
}

fn confusion_csv(cm: &ConfusionMatrix) -> String {
    format!(
        "tn,fp,fn,tp\n{},{},{},{}\n",
        cm.true_negatives, cm.false_positives, cm.false_negatives, cm.true_positives
    )
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    cfg: &RunConfig,
    config_hash: u64,
    extra: serde_json::Value,
) -> Result<()> {
    let mut manifest = serde_json::json!({
        "command": command,
        "dataset_path": cfg.dataset.path,
        "seed": cfg.train.seed,
        "split_seed": cfg.split.seed,
        "config_hash": format!("{config_hash:016x}"),
        "versions": {
            "crate": CRATE_VERSION,
            "checkpoint": CHECKPOINT_VERSION,
        },
    });
    if let serde_json::Value::Object(extra_map) = extra {
        manifest.as_object_mut().unwrap().extend(extra_map);
    }
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )?;
    Ok(())
}

/// `extract`: one URL per input line to one lexical feature row per CSV line.
pub fn cmd_extract(input: &Path, out_dir: &Path) -> Result<()> {
    if !input.exists() {
        bail!("dataset not found: {}", input.display());
    }
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("cannot read {}", input.display()))?;
    let lex = LexiconConfig::default();
    let mut out = UrlFeatureRow::COLUMNS.join(",");
    out.push('\n');
    for (lineno, line) in text.lines().enumerate() {
        let url = line.trim();
        if url.is_empty() || url.starts_with('#') {
            continue;
        }
        let row = urlfeat::extract_url_features(url, &lex)
            .with_context(|| format!("line {}: '{url}'", lineno + 1))?;
        let rendered: Vec<String> = row.values().iter().map(f64::to_string).collect();
        out.push_str(&rendered.join(","));
        out.push('\n');
    }
    ensure_out_dir(out_dir)?;
    std::fs::write(out_dir.join("url_features.csv"), out)?;
    Ok(())
}

/// `train`: checkpoint + per-epoch history + run manifest (+ margin sweep
/// table when the config requests one).
pub fn cmd_train(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<()> {
    let (mut cfg, out_dir, config_hash) = load_config(config_path, out_override, seed_override)?;
    let data = prepare_data(&cfg)?;

    let mut sweep_extra = serde_json::json!({});
    if let Some(candidates) = cfg.margin_sweep.clone() {
        let (best_margin, table) =
            train::sweep_margin(&data.train, &data.val, &data.stats, &cfg.train, &candidates)?;
        cfg.train.margin = best_margin;
        let mut sweep_csv = String::from("margin,val_auc\n");
        for (m, auc) in &table {
            writeln!(sweep_csv, "{m},{auc}").unwrap();
        }
        ensure_out_dir(&out_dir)?;
        std::fs::write(out_dir.join("sweep.csv"), sweep_csv)?;
        sweep_extra = serde_json::json!({
            "margin_sweep": { "candidates": candidates, "selected": best_margin },
        });
    }

    let (checkpoint, history) = train::train(&data.train, &data.val, &data.stats, &cfg.train)?;
    ensure_out_dir(&out_dir)?;
    checkpoint.save(out_dir.join("checkpoint.json"))?;
    std::fs::write(out_dir.join("history.csv"), history_csv(&history))?;
    write_manifest(
        &out_dir,
        "train",
        &cfg,
        config_hash,
        serde_json::json!({
            "best_epoch": history.best_epoch,
            "best_val_auc": checkpoint.best_val_auc,
            "margin": cfg.train.margin,
            "extra": sweep_extra,
        }),
    )?;
    Ok(())
}

fn eval_phishssl(
    checkpoint_path: &Path,
    cfg: &RunConfig,
) -> Result<(ConfusionMatrix, MetricsReport, Vec<f64>, Vec<Class>)> {
    let ck = Checkpoint::load(checkpoint_path)?;
    let path = Path::new(&cfg.dataset.path);
    if !path.exists() {
        bail!("dataset not found: {}", path.display());
    }
    let ds = dataset::load_csv(path, &cfg.dataset.schema)?;
    if ds.dim != ck.dims.input {
        bail!(
            "dimension mismatch: checkpoint expects {} features, dataset has {}",
            ck.dims.input,
            ds.dim
        );
    }
    // The checkpoint owns the preprocessing: its standardizer applies to the
    // reference and evaluation splits alike.
    let (train_raw, _, test_raw) = dataset::split(&ds, &cfg.split)?;
    let train_std = dataset::standardize_dataset(&train_raw, &ck.standardizer)?;
    let test_std = dataset::standardize_dataset(&test_raw, &ck.standardizer)?;
    let outcome =
        train::evaluate_params(&ck.params, &train_std, &test_std, cfg.inference_mode, 0.5)?;
    Ok((outcome.confusion, outcome.report, outcome.scores, outcome.predictions))
}

fn eval_kmeans(cfg: &RunConfig) -> Result<(ConfusionMatrix, MetricsReport, Vec<f64>, Vec<Class>)> {
    let data = prepare_data(cfg)?;
    let model = baselines::kmeans_model(
        &data.train.to_matrix(),
        &data.train.labels,
        cfg.kmeans.k,
        cfg.train.seed,
    )?;
    let predictions: Vec<Class> =
        data.test.rows.iter().map(|r| baselines::kmeans_classify(r, &model)).collect();
    let scores: Vec<f64> =
        data.test.rows.iter().map(|r| baselines::kmeans_score(r, &model)).collect();
    let confusion = metrics::confusion(&data.test.labels, &predictions)?;
    let report = MetricsReport::from_parts(
        metrics::prf1(&confusion),
        metrics::roc_auc(&scores, &data.test.labels)?,
    );
    Ok((confusion, report, scores, predictions))
}

fn eval_autoencoder(
    cfg: &RunConfig,
) -> Result<(ConfusionMatrix, MetricsReport, Vec<f64>, Vec<Class>)> {
    let data = prepare_data(cfg)?;
    let (model, _) = baselines::autoencoder_train(&data.train.to_matrix(), &cfg.autoencoder)?;
    // Reconstruction error is the anomaly score; the hard-label threshold is
    // tuned for F1 on the validation split.
    let val_scores = model.score_batch(&data.val.to_matrix())?;
    let threshold = baselines::select_threshold(&val_scores, &data.val.labels)?;
    let scores = model.score_batch(&data.test.to_matrix())?;
    let predictions: Vec<Class> = scores
        .iter()
        .map(|&s| if s >= threshold { Class::Phishing } else { Class::Legitimate })
        .collect();
    let confusion = metrics::confusion(&data.test.labels, &predictions)?;
    let report = MetricsReport::from_parts(
        metrics::prf1(&confusion),
        metrics::roc_auc(&scores, &data.test.labels)?,
    );
    Ok((confusion, report, scores, predictions))
}

/// `eval`: test-split metrics for the selected pipeline, written as
/// metrics.json + roc.csv + confusion.csv.
pub fn cmd_eval(
    config_path: &Path,
    checkpoint: Option<&Path>,
    model_override: Option<&str>,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<()> {
    let (cfg, out_dir, config_hash) = load_config(config_path, out_override, seed_override)?;
    let model_kind = match model_override {
        Some(name) => name.parse::<ModelKind>()?,
        None => cfg.model,
    };
    let (confusion, report, scores, _) = match model_kind {
        ModelKind::PhishSsl => {
            let ck = checkpoint.ok_or_else(|| {
                anyhow::anyhow!("--checkpoint is required for the phishssl model")
            })?;
            eval_phishssl(ck, &cfg)?
        }
        ModelKind::KMeans => eval_kmeans(&cfg)?,
        ModelKind::Autoencoder => eval_autoencoder(&cfg)?,
    };

    // Labels of the test split are re-derived for the ROC curve output.
    let labels = {
        let ds = dataset::load_csv(Path::new(&cfg.dataset.path), &cfg.dataset.schema)?;
        let (_, _, test_raw) = dataset::split(&ds, &cfg.split)?;
        test_raw.labels
    };
    let curve = metrics::roc_curve(&scores, &labels)?;

    ensure_out_dir(&out_dir)?;
    std::fs::write(out_dir.join("metrics.json"), serde_json::to_string_pretty(&report).unwrap())?;
    std::fs::write(out_dir.join("roc.csv"), roc_csv(&curve))?;
    std::fs::write(out_dir.join("confusion.csv"), confusion_csv(&confusion))?;
    write_manifest(
        &out_dir,
        "eval",
        &cfg,
        config_hash,
        serde_json::json!({ "model": model_kind.to_string() }),
    )?;
    Ok(())
}

/// `ablate`: the four-configuration comparison on the test split.
pub fn cmd_ablate(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<()> {
    let (cfg, out_dir, config_hash) = load_config(config_path, out_override, seed_override)?;
    let data = prepare_data(&cfg)?;
    let rows = train::run_ablation(
        &data.train,
        &data.val,
        &data.test,
        &data.stats,
        &cfg.train,
        cfg.inference_mode,
    )?;
    let mut out = String::from("config,seed,roc_auc,accuracy,precision,recall,f1\n");
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.name,
            row.seed,
            row.report.roc_auc,
            row.report.accuracy,
            row.report.precision,
            row.report.recall,
            row.report.f1
        )
        .unwrap();
    }
    ensure_out_dir(&out_dir)?;
    std::fs::write(out_dir.join("ablation.csv"), out)?;
    write_manifest(&out_dir, "ablate", &cfg, config_hash, serde_json::json!({}))?;
    Ok(())
}

/// Headerful all-numeric CSV of feature rows (the `predict` input format).
fn read_feature_csv(path: &Path) -> Result<Matrix> {
    if !path.exists() {
        bail!("dataset not found: {}", path.display());
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow::anyhow!("empty feature CSV"))?;
    let dim = header.split(',').count();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim {
            bail!("row {}: has {} cells, header has {dim}", lineno + 2, cells.len());
        }
        let row: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| anyhow::anyhow!("row {}: non-numeric cell", lineno + 2))?);
    }
    if rows.is_empty() {
        bail!("{}: no rows", path.display());
    }
    Ok(Matrix::from_rows(rows)?)
}

/// `predict`: phishing probability and hard label per feature row, using the
/// checkpoint's standardizer and stored training-split prototypes.
pub fn cmd_predict(checkpoint_path: &Path, dataset: &Path, out_dir: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint_path)?;
    let raw = read_feature_csv(dataset)?;
    if raw.cols() != ck.dims.input {
        bail!(
            "dimension mismatch: checkpoint expects {} features, dataset has {}",
            ck.dims.input,
            raw.cols()
        );
    }
    let rows: phishssl::Result<Vec<Vec<f64>>> =
        (0..raw.rows()).map(|r| dataset::standardize(raw.row(r), &ck.standardizer)).collect();
    let standardized = Matrix::from_rows(rows?)?;
    let embeddings = model::encode_eval(&standardized, &ck.params)?;

    let mut out = String::from("prob_phishing,label\n");
    for r in 0..embeddings.rows() {
        let pred = inference::classify(embeddings.row(r), &ck.prototypes, 0.5);
        writeln!(out, "{},{}", pred.prob_phishing, pred.label).unwrap();
    }
    ensure_out_dir(out_dir)?;
    std::fs::write(out_dir.join("predictions.csv"), out)?;
    Ok(())
}

/// `export-embeddings`: test-split embeddings plus labels, one row per
/// sample, for external projection tools.
pub fn cmd_export_embeddings(
    checkpoint_path: &Path,
    config_path: &Path,
    out_override: Option<&Path>,
) -> Result<()> {
    let (cfg, out_dir, config_hash) = load_config(config_path, out_override, None)?;
    let ck = Checkpoint::load(checkpoint_path)?;
    let path = Path::new(&cfg.dataset.path);
    if !path.exists() {
        bail!("dataset not found: {}", path.display());
    }
    let ds = dataset::load_csv(path, &cfg.dataset.schema)?;
    if ds.dim != ck.dims.input {
        bail!(
            "dimension mismatch: checkpoint expects {} features, dataset has {}",
            ck.dims.input,
            ds.dim
        );
    }
    let (_, _, test_raw) = dataset::split(&ds, &cfg.split)?;
    let test_std = dataset::standardize_dataset(&test_raw, &ck.standardizer)?;
    let embeddings = model::encode_eval(&test_std.to_matrix(), &ck.params)?;

    let mut header: Vec<String> = (0..embeddings.cols()).map(|c| format!("e{c}")).collect();
    header.push("label".into());
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..embeddings.rows() {
        let mut cells: Vec<String> = embeddings.row(r).iter().map(f64::to_string).collect();
        cells.push(test_std.labels[r].to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    ensure_out_dir(&out_dir)?;
    std::fs::write(out_dir.join("embeddings.csv"), out)?;
    write_manifest(&out_dir, "export-embeddings", &cfg, config_hash, serde_json::json!({}))?;
    Ok(())
}
