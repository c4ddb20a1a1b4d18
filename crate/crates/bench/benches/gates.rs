use std::f64::consts::{FRAC_PI_2, PI};

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qdm_core::gate::{modified_detuning, simulate_gate, RotationRequest};
use qdm_core::QdmParams;

fn gate_dynamics(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_gate");
    g.sample_size(10);
    for (name, phi) in [("half_pi", FRAC_PI_2), ("pi", PI)] {
        let req = RotationRequest::new(phi, QdmParams::default());
        g.bench_function(name, |b| b.iter(|| simulate_gate(black_box(&req)).unwrap()));
    }
    let lossless = RotationRequest {
        with_decay: false,
        ..RotationRequest::new(FRAC_PI_2, QdmParams::default())
    };
    g.bench_function("half_pi_unitary", |b| {
        b.iter(|| simulate_gate(black_box(&lossless)).unwrap())
    });
    g.finish();
}

fn detuning_formula(c: &mut Criterion) {
    c.bench_function("modified_detuning", |b| {
        b.iter(|| modified_detuning(black_box(FRAC_PI_2), black_box(0.5), black_box(0.02)).unwrap())
    });
}

criterion_group!(benches, gate_dynamics, detuning_formula);
criterion_main!(benches);
