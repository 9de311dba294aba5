use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use problabel::metrics::{expected_calibration_error, hosmer_lemeshow, roc_auc};
use problabel::trainers::{Network, NetworkSpec};
use problabel::Seed;

fn batch(net: &Network, size: usize, seed: Seed) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seed.rng();
    let k = net.num_classes();
    let inputs = (0..size * net.input_len()).map(|_| rng.uniform()).collect();
    let targets = (0..size)
        .flat_map(|_| {
            let p = rng.uniform();
            if k == 2 {
                vec![1.0 - p, p]
            } else {
                vec![1.0 / k as f64; k]
            }
        })
        .collect();
    (inputs, targets)
}

fn networks(c: &mut Criterion) {
    let cases = [
        ("logistic_2d", NetworkSpec::logistic(2)),
        ("cnn_32x32", NetworkSpec::reduced_cnn(32, 32)),
    ];
    let mut g = c.benchmark_group("network");
    for (name, spec) in cases {
        let net = Network::new(spec).unwrap();
        let params = net.init_params(Seed(1));
        let (inputs, targets) = batch(&net, 16, Seed(2));
        let one = &inputs[..net.input_len()];
        g.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| net.forward(black_box(&params), black_box(one)).unwrap())
        });
        g.bench_function(BenchmarkId::new("gradient_batch16", name), |b| {
            b.iter(|| {
                net.loss_and_gradient(
                    black_box(&params),
                    black_box(&inputs),
                    black_box(&targets),
                    None,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let mut rng = Seed(3).rng();
    let n = 100_000;
    let scores: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let labels: Vec<usize> = scores
        .iter()
        .map(|&s| usize::from(rng.bernoulli(s)))
        .collect();
    let mut g = c.benchmark_group("metrics_100k");
    g.bench_function("ece", |b| {
        b.iter(|| expected_calibration_error(black_box(&scores), black_box(&labels), 10).unwrap())
    });
    g.bench_function("auc", |b| {
        b.iter(|| roc_auc(black_box(&scores), black_box(&labels)).unwrap())
    });
    g.bench_function("hosmer_lemeshow", |b| {
        b.iter(|| hosmer_lemeshow(black_box(&scores), black_box(&labels), 10).unwrap())
    });
    g.finish();
}

criterion_group!(benches, networks, metrics);
criterion_main!(benches);
