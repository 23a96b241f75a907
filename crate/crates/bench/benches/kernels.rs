use std::time::Duration;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fairegm::autodiff::ScalarLoss;
use fairegm::graph::normalize_adjacency;
use fairegm::losses::{pos_weight, LinkDivergenceLoss, ReconstructionLoss};
use fairegm::metrics::dp_at_ks;
use fairegm::{joint_train, Embeddings, TrainConfig, Variant};
use fairegm_bench::{gaussian, planted};

fn linalg(c: &mut Criterion) {
    let mut group = c.benchmark_group("linalg");
    for n in [1000, 4000] {
        let g = planted(n, 5 * n, 8);
        let a = normalize_adjacency(&g);
        let x = gaussian(n, 32, 1);
        group.bench_with_input(BenchmarkId::new("spmm", n), &n, |b, _| b.iter(|| a.spmm(black_box(&x)).unwrap()));
    }
    let f = gaussian(2708, 1433, 2);
    let w = gaussian(1433, 32, 3);
    group.bench_function("matmul_2708x1433x32", |b| b.iter(|| f.matmul(black_box(&w)).unwrap()));
    group.finish();
}

fn losses(c: &mut Criterion) {
    let mut group = c.benchmark_group("losses");
    group.sample_size(10);
    for n in [500, 2000] {
        let g = planted(n, 4 * n, 8);
        let phi = gaussian(n, 16, 4).scale(0.3);
        let recon = ReconstructionLoss::new(&g, pos_weight(&g).unwrap());
        let div = LinkDivergenceLoss::new(&g);
        group.bench_with_input(BenchmarkId::new("reconstruction", n), &n, |b, _| {
            b.iter(|| recon.value_and_gradient(black_box(&phi)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("divergence", n), &n, |b, _| {
            b.iter(|| div.value_and_gradient(black_box(&phi)).unwrap())
        });
        let emb = Embeddings::new(phi.clone());
        group.bench_with_input(BenchmarkId::new("dp_at_k", n), &n, |b, _| {
            b.iter(|| dp_at_ks(black_box(&emb), &g, &[10, 20, 40]).unwrap())
        });
    }
    group.finish();
}

fn epochs(c: &mut Criterion) {
    let mut group = c.benchmark_group("epoch");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    let g = planted(1000, 4000, 64);
    for variant in [Variant::Base, Variant::Gfo, Variant::Cfo { c: 10 }, Variant::Few, Variant::Aug { lambda: 1.0 }] {
        let mut cfg = TrainConfig::new(variant);
        cfg.epochs = 1;
        cfg.threads = 1;
        group.bench_function(variant.to_string(), |b| b.iter(|| joint_train(black_box(&g), &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, linalg, losses, epochs);
criterion_main!(benches);
