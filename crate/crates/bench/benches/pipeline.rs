//! Microbenchmarks for the hot paths: evaluation-mode encoding, a full
//! training step (views, two encoder passes, loss, backward, optimizer),
//! ROC AUC, Lloyd clustering and URL feature extraction.

use std::hint::black_box;

use criterion::{Criterion, criterion_group, criterion_main};

use phishssl::augment::{self, AugmentConfig};
use phishssl::contrastive::{self, TripletBatch};
use phishssl::dataset::Class;
use phishssl::metrics;
use phishssl::model::{self, ModelDims};
use phishssl::neural::Matrix;
use phishssl::rng;
use phishssl::train::{AdamConfig, OptimizerState, adam_step};
use phishssl::urlfeat::{LexiconConfig, extract_url_features};

fn standardized_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng::derive(seed, &[]);
    Matrix::from_fn(rows, cols, |_, _| rng::standard_normal(&mut r))
}

fn bench_encode_eval(c: &mut Criterion) {
    let dims = ModelDims::for_input(87);
    let params = model::init_params(&dims, 0.1, 1.0, true, 1);
    let batch = standardized_batch(128, 87, 2);
    c.bench_function("encode_eval_128x87", |b| {
        b.iter(|| model::encode_eval(black_box(&batch), &params).unwrap())
    });
}

fn bench_train_step(c: &mut Criterion) {
    let dims = ModelDims::for_input(87);
    let mut params = model::init_params(&dims, 0.1, 1.0, true, 3);
    let mut opt = OptimizerState::for_params(&mut params, false);
    let adam = AdamConfig::default();
    let batch = standardized_batch(128, 87, 4);
    let aug = AugmentConfig::default();
    let mut step = 0u64;
    c.bench_function("train_step_128x87", |b| {
        b.iter(|| {
            step += 1;
            let mut r = rng::derive(5, &[step]);
            let (xa, xp) = augment::make_views(&batch, &aug, &mut r).unwrap();
            let (ma, mp) = model::sample_view_masks(128, &params.encoder, true, &mut r);
            let (za, zp, trace) = model::forward_pair(&xa, &xp, &params, ma, mp, true).unwrap();
            let der = contrastive::sample_derangement(128, &mut r).unwrap();
            let tb = TripletBatch::new(za, zp, der, 1.0).unwrap();
            let (loss, ga, gp) = contrastive::batch_loss(&tb);
            let (grads, _, _) = model::backward_pair(&ga, &gp, &trace, &params);
            adam_step(&mut params, &grads, &mut opt, 1e-3, &adam, false);
            black_box(loss)
        })
    });
}

fn bench_roc_auc(c: &mut Criterion) {
    let mut r = rng::derive(7, &[]);
    let n = 10_000;
    let scores: Vec<f64> = (0..n).map(|_| rand::RngExt::random::<f64>(&mut r)).collect();
    let labels: Vec<Class> =
        (0..n).map(|i| if i % 2 == 0 { Class::Phishing } else { Class::Legitimate }).collect();
    c.bench_function("roc_auc_10k", |b| {
        b.iter(|| metrics::roc_auc(black_box(&scores), &labels).unwrap())
    });
}

fn bench_kmeans(c: &mut Criterion) {
    let x = standardized_batch(1000, 10, 9);
    c.bench_function("kmeans_fit_1000x10_k2", |b| {
        b.iter(|| phishssl::baselines::kmeans_fit(black_box(&x), 2, 11).unwrap())
    });
}

fn bench_extract(c: &mut Criterion) {
    let lex = LexiconConfig::default();
    let url = "https://ww3.secure-login.paypal.com.verify-account.example.tk:8080/webscr/login?cmd=update&id=1234567890";
    c.bench_function("extract_url_features", |b| {
        b.iter(|| extract_url_features(black_box(url), &lex).unwrap())
    });
}

criterion_group!(
    benches,
    bench_encode_eval,
    bench_train_step,
    bench_roc_auc,
    bench_kmeans,
    bench_extract
);
criterion_main!(benches);
