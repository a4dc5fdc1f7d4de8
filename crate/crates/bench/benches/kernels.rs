use adrc_bench::fixture;
use adrc_core::baselines::{bow_features, train_forest, train_logreg, LogRegOptions};
use adrc_core::embeddings::{train_skipgram, SkipgramConfig};
use adrc_core::ensemble::majority_vote;
use adrc_core::nn::{adam_step, AdamHyper, AdamState, CnnConfig, CnnModel, Mode};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

fn cnn_step(c: &mut Criterion) {
    let fx = fixture(400, 50);
    let data = fx.matrices();
    let batch: Vec<_> = data.iter().take(50).map(|(m, _)| m).collect();
    let labels: Vec<usize> = data.iter().take(50).map(|(_, y)| *y).collect();
    let mut group = c.benchmark_group("cnn");
    for (name, fc1, fc2) in [("step_fc1024", 1024, 256), ("step_fc128", 128, 32)] {
        let config = CnnConfig {
            filter_count: 100,
            filter_width: 5,
            embedding_dim: 50,
            fc1_units: fc1,
            fc2_units: fc2,
            ..Default::default()
        };
        let model = CnnModel::<f64>::new(config).unwrap();
        group.bench_function(name, |b| {
            b.iter_batched(
                || {
                    (
                        model.clone(),
                        AdamState::new(&model.params, AdamHyper::default()),
                    )
                },
                |(mut m, mut adam)| {
                    let fwd = m.forward_batch(&batch, Mode::Train, 7).unwrap();
                    let grads = m.backward(&fwd, &labels);
                    drop(fwd);
                    adam_step(&mut m, &grads, &mut adam, 1e-3);
                    m
                },
                BatchSize::LargeInput,
            )
        });
    }
    let model = CnnModel::<f64>::new(CnnConfig {
        filter_count: 100,
        filter_width: 5,
        embedding_dim: 50,
        fc1_units: 128,
        fc2_units: 32,
        ..Default::default()
    })
    .unwrap();
    group.bench_function("predict_50", |b| {
        b.iter(|| model.predict_proba(black_box(&batch)).unwrap())
    });
    group.finish();
}

fn skipgram(c: &mut Criterion) {
    let fx = fixture(400, 50);
    let config = SkipgramConfig {
        dim: 50,
        epochs: 1,
        ..Default::default()
    };
    c.bench_function("skipgram_epoch_400_reviews", |b| {
        b.iter(|| train_skipgram(black_box(&fx.encoded), &fx.vocab, &config).unwrap())
    });
}

fn voting(c: &mut Criterion) {
    let conf: Vec<Vec<f64>> = (0..21)
        .map(|i| vec![(i % 3) as f64 / 3.0, 1.0 - (i % 3) as f64 / 3.0])
        .collect();
    let votes: Vec<usize> = (0..21).map(|i| usize::from(i % 3 == 0)).collect();
    c.bench_function("majority_vote_21", |b| {
        b.iter(|| majority_vote(black_box(&votes), black_box(&conf)))
    });
}

fn baselines(c: &mut Criterion) {
    let fx = fixture(400, 20);
    let x: Vec<_> = fx
        .encoded
        .iter()
        .map(|e| bow_features(e, fx.vocab.len()))
        .collect();
    let mut group = c.benchmark_group("baselines");
    group.sample_size(10);
    group.bench_function("forest_50_trees", |b| {
        b.iter(|| train_forest(black_box(&x), &fx.labels, 50, 1).unwrap())
    });
    group.bench_function("logreg_bow", |b| {
        b.iter(|| train_logreg(black_box(&x), &fx.labels, LogRegOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, cnn_step, skipgram, voting, baselines);
criterion_main!(benches);
