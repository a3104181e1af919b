use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crowd_anomaly::cubes::extract_cubes_with;
use crowd_anomaly::evalharness::{evaluate_runs_with, RunSource};
use crowd_anomaly::frame_io::{generate_synthetic_sequence, SynthConfig};
use crowd_anomaly::gaussmodel::mahalanobis_batch;
use crowd_anomaly::pipeline::{cube_features, sequence_features, train_normalcy, PipelineConfig};
use crowd_anomaly::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_features(c: &mut Criterion) {
    let (seq, _) = generate_synthetic_sequence(&SynthConfig::default(), 0).unwrap();
    let cfg = PipelineConfig::default();
    let grid = extract_cubes_with(&seq, &cfg.cube, Execution::Sequential).unwrap();

    let mut group = c.benchmark_group("cube_features");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| cube_features(black_box(&grid), cfg.state_dim, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let (seq, _) = generate_synthetic_sequence(&SynthConfig::default(), 1).unwrap();
    let cfg = PipelineConfig::default();
    let (_, features) = sequence_features(&seq, &cfg, Execution::Parallel).unwrap();
    let (model, _) = train_normalcy(&features, cfg.percentile).unwrap();

    let mut group = c.benchmark_group("mahalanobis_batch");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mahalanobis_batch(&model, black_box(&features), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_eval(c: &mut Criterion) {
    let cfg = PipelineConfig::default();
    let source = RunSource::Synthetic(SynthConfig::default());

    let mut group = c.benchmark_group("evaluate_runs");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| evaluate_runs_with(&source, &cfg, 4, 0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_features, bench_scoring, bench_eval);
criterion_main!(benches);
