use std::f64::consts::FRAC_PI_2;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qdm_core::gate::RotationRequest;
use qdm_core::protocol::{
    run_and_measure, run_protocol, target_group, GateSet, GateSource, MeasurementChoice, Outcome,
    ProtocolConfig, Target,
};
use qdm_core::verify::cluster_state;
use qdm_core::{certify, QdmParams, QuantumState};

fn ideal_runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("ideal_cluster");
    for n in [4, 8, 12, 16] {
        let cfg = ProtocolConfig::new(Target::LinearCluster, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| {
            b.iter(|| {
                run_and_measure(black_box(cfg), MeasurementChoice::Forced(Outcome::Plus)).unwrap()
            })
        });
    }
    g.finish();
}

fn noisy_runs(c: &mut Criterion) {
    let gates = GateSet::simulated(&RotationRequest::new(FRAC_PI_2, QdmParams::default())).unwrap();
    let mut g = c.benchmark_group("simulated_gates_cluster");
    g.sample_size(10);
    for n in [2, 4, 6] {
        let mut cfg = ProtocolConfig::new(Target::LinearCluster, n);
        cfg.noise.gates = GateSource::Simulated(gates.clone());
        cfg.noise.cyclicity = 0.94;
        g.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| {
            b.iter(|| run_protocol(black_box(cfg)).unwrap())
        });
    }
    g.finish();
}

fn certification(c: &mut Criterion) {
    let mut g = c.benchmark_group("certify_cluster");
    for n in [4, 8, 12] {
        let state: QuantumState = cluster_state(n).into();
        let group = target_group(Target::LinearCluster, n).unwrap();
        g.bench_with_input(
            BenchmarkId::from_parameter(n),
            &(state, group),
            |b, (s, k)| b.iter(|| certify(black_box(s), black_box(k)).unwrap()),
        );
    }
    g.finish();
}

criterion_group!(benches, ideal_runs, noisy_runs, certification);
criterion_main!(benches);
