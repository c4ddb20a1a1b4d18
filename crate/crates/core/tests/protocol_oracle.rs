//! The protocol engine against brute-force dense constructions.

use approx::assert_abs_diff_eq;
use qdm_core::gate::{ideal_rotation, QubitChannel};
use qdm_core::protocol::{
    conditional_fidelity, measure_spin, run_protocol, target_state, GateSet, GateSource,
    MeasurementChoice, Outcome, ProtocolConfig, Target,
};
use qdm_core::quantum::{CMatrix, CVector, C64};
use std::f64::consts::{FRAC_PI_2, PI};

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn eye(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Spin ⊗ 2N bins, all bins allocated empty up front; pumping bin `k` is a
/// CNOT from the spin (`⇓` = 1) onto it.
fn brute_force_raw(target: Target, n: usize) -> CVector {
    let q = 1 + 2 * n;
    let dim = 1 << q;
    let mut psi = CVector::zeros(dim);
    psi[0] = C64::from(1.0);
    let on_spin = |u: &CMatrix| kron(u, &eye(dim / 2));
    let cnot = |k: usize| {
        let mut m = CMatrix::zeros(dim, dim);
        for b in 0..dim {
            let spin = b >> (q - 1);
            let out = if spin == 1 { b ^ (1 << (q - 1 - k)) } else { b };
            m[(out, b)] = C64::from(1.0);
        }
        m
    };
    psi = on_spin(&ideal_rotation(FRAC_PI_2)) * psi;
    for r in 0..n {
        psi = cnot(2 * r + 1) * psi;
        psi = on_spin(&ideal_rotation(PI)) * psi;
        psi = cnot(2 * r + 2) * psi;
        let phi = match target {
            Target::Ghz => Some(PI),
            Target::LinearCluster if r + 1 < n => Some(FRAC_PI_2),
            _ => None,
        };
        if let Some(phi) = phi {
            psi = on_spin(&ideal_rotation(phi)) * psi;
        }
    }
    psi
}

/// Keeps patterns 01 → 0 and 10 → 1 for every bin pair.
fn encode_dense(raw: &CVector, n: usize) -> CVector {
    let mut out = CVector::zeros(1 << (n + 1));
    for (m, o) in out.iter_mut().enumerate() {
        let spin = m >> n;
        let mut src = spin;
        for p in 0..n {
            let logical = (m >> (n - 1 - p)) & 1;
            src = (src << 2) | if logical == 0 { 0b01 } else { 0b10 };
        }
        *o = raw[src];
    }
    out
}

#[test]
fn ideal_runs_match_dense_construction() {
    for target in [Target::Ghz, Target::LinearCluster] {
        for n in 1..=4 {
            let raw = brute_force_raw(target, n);
            let want = encode_dense(&raw, n);
            assert_abs_diff_eq!(want.norm(), 1.0, epsilon = 1e-12);
            for eager in [true, false] {
                let cfg = ProtocolConfig {
                    eager_encoding: eager,
                    ..ProtocolConfig::new(target, n)
                };
                let (st, _) = run_protocol(&cfg).unwrap();
                let got = match &st.state {
                    qdm_core::QuantumState::Pure(s) => s.amplitudes().clone(),
                    _ => unreachable!(),
                };
                assert!(
                    (got - &want).norm() < 1e-13,
                    "{target:?} N={n} eager={eager}"
                );
            }
        }
    }
}

#[test]
fn ghz_n3_is_ghz_before_measurement() {
    let cfg = ProtocolConfig::new(Target::Ghz, 3);
    let (st, _) = run_protocol(&cfg).unwrap();
    let ghz = qdm_core::verify::ghz_state(4);
    assert_abs_diff_eq!(
        conditional_fidelity(&st.state, &ghz).unwrap(),
        1.0,
        epsilon = 1e-12
    );
}

/// Logical-level model of one noisy round. The whole time-bin round acts on
/// the spin as `A_K = P_⇓ K P_⇑ ⊗ |0⟩ + P_⇑ K P_⇓ ⊗ |1⟩` for each Kraus
/// operator `K` of the π-gate; other bin patterns are discarded.
fn oracle_fidelity(gates: &GateSet, n: usize, outcome: Outcome) -> (f64, f64) {
    let run = |half: &QubitChannel, pi: &QubitChannel| -> CMatrix {
        let mut up = CMatrix::zeros(2, 2);
        up[(0, 0)] = C64::from(1.0);
        let mut rho = half.apply(&up);
        let mut d = 1; // photonic dimension so far
        for r in 0..n {
            let mut next = CMatrix::zeros(4 * d, 4 * d);
            for k in &pi.kraus_ops {
                // map spin ⊗ photons (2d) → spin ⊗ photons ⊗ new (4d)
                let mut m = CMatrix::zeros(4 * d, 2 * d);
                for s_in in 0..2 {
                    let s_out = 1 - s_in;
                    let logical = s_in; // ⇑ → 0, ⇓ → 1
                    for p in 0..d {
                        m[(s_out * 2 * d + 2 * p + logical, s_in * d + p)] = k[(s_out, s_in)];
                    }
                }
                next += &m * &rho * m.adjoint();
            }
            rho = next;
            d *= 2;
            if r + 1 < n {
                let mut acc = CMatrix::zeros(2 * d, 2 * d);
                for k in &half.kraus_ops {
                    let big = kron(k, &eye(d));
                    acc += &big * &rho * big.adjoint();
                }
                rho = acc;
            }
        }
        // ⟨±| on the spin
        let sg = if outcome == Outcome::Plus { 1.0 } else { -1.0 };
        let mut proj = CMatrix::zeros(d, 2 * d);
        for p in 0..d {
            proj[(p, p)] = C64::from(std::f64::consts::FRAC_1_SQRT_2);
            proj[(p, d + p)] = C64::from(sg * std::f64::consts::FRAC_1_SQRT_2);
        }
        &proj * rho * proj.adjoint()
    };
    let noisy = run(&gates.half_pi, &gates.pi);
    let ideal = run(
        &QubitChannel::from_unitary(ideal_rotation(FRAC_PI_2)),
        &QubitChannel::from_unitary(ideal_rotation(PI)),
    );
    // the ideal projected state is pure: take its leading eigenvector
    let eig = ((&ideal + ideal.adjoint()) * C64::from(0.5)).symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top).into_owned();
    let f = v.dotc(&(&noisy * &v)).re / noisy.trace().re;
    (f, noisy.trace().re)
}

fn damped(u: CMatrix, p: f64, z: f64) -> QubitChannel {
    // amplitude damping ⇓ → ⇑ followed by u, plus a weak phase flip
    let mut k0 = CMatrix::identity(2, 2);
    k0[(1, 1)] = C64::from((1.0 - p).sqrt());
    let mut k1 = CMatrix::zeros(2, 2);
    k1[(0, 1)] = C64::from(p.sqrt());
    let mut zz = CMatrix::identity(2, 2);
    zz[(1, 1)] = C64::from(-1.0);
    let a = (1.0 - z).sqrt();
    let b = z.sqrt();
    QubitChannel {
        kraus_ops: vec![
            &u * &k0 * C64::from(a),
            &u * &k1 * C64::from(a),
            &u * &zz * &k0 * C64::from(b),
            &u * &zz * &k1 * C64::from(b),
        ],
        leakage: 0.0,
    }
}

#[test]
fn noisy_cluster_matches_logical_oracle() {
    let gates = GateSet {
        half_pi: damped(ideal_rotation(FRAC_PI_2), 0.03, 0.01),
        pi: damped(ideal_rotation(PI), 0.05, 0.02),
    };
    for n in 1..=4 {
        for outcome in [Outcome::Plus, Outcome::Minus] {
            let mut cfg = ProtocolConfig::new(Target::LinearCluster, n);
            cfg.noise.gates = GateSource::Simulated(gates.clone());
            let (st, _) = run_protocol(&cfg).unwrap();
            let m = measure_spin(&st, &cfg, MeasurementChoice::Forced(outcome)).unwrap();
            let f = conditional_fidelity(&m.state.state, &target_state(cfg.target, n)).unwrap();
            let (want, _) = oracle_fidelity(&gates, n, outcome);
            assert_abs_diff_eq!(f, want, epsilon = 1e-10);
        }
    }
}
