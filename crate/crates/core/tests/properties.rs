//! Invariants over randomized inputs.

use proptest::prelude::*;
use qdm_core::gate::{ideal_rotation, simulate_gate, DetuningRule, QubitChannel, RotationRequest};
use qdm_core::model::{
    build_lambda_hamiltonian, cpt_basis_transform, LevelBasis, PulseSpec, QdmParams, TARGET,
};
use qdm_core::protocol::{
    conditional_fidelity, run_and_measure, run_protocol, target_group, target_state,
    MeasurementChoice, ProtocolConfig, Target,
};
use qdm_core::quantum::{
    hermitian_defect, partial_trace, state_fidelity, CMatrix, CVector, DensityMatrix, QuantumState,
    StateVector, C64,
};
use qdm_core::verify::{certify, expectation, Pauli, PauliString};
use std::f64::consts::{FRAC_PI_2, PI};

fn cvec(parts: &[(f64, f64)]) -> CVector {
    CVector::from_iterator(parts.len(), parts.iter().map(|&(r, i)| C64::new(r, i)))
}

fn pure_strategy(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n)
        .prop_filter_map("nonzero", move |v| {
            StateVector::normalized(cvec(&v), vec![2; n]).ok()
        })
}

fn random_density(n: usize, g: &[(f64, f64)]) -> DensityMatrix {
    let d = 1 << n;
    let a = CMatrix::from_iterator(d, d, g.iter().map(|&(r, i)| C64::new(r, i)));
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr, vec![2; n]).unwrap()
}

fn pauli_strategy(n: usize) -> impl Strategy<Value = PauliString> {
    (prop::collection::vec(0..4usize, n), any::<bool>()).prop_map(|(v, neg)| {
        let letters = v
            .into_iter()
            .map(|k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k])
            .collect();
        PauliString::new(letters, neg)
    })
}

fn gate_channel(eta: f64, gamma: f64, phi: f64) -> QubitChannel {
    let req = RotationRequest::new(
        phi,
        QdmParams {
            eta,
            gamma,
            ..QdmParams::default()
        },
    );
    simulate_gate(&req).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonians_are_hermitian(
        eta in 0.05..1.52f64, eps in 0.05..2.0f64, omega in 0.0..0.1f64,
        sigma in 0.005..0.1f64, delta in -1.0..1.0f64, t in 0.0..300.0f64,
        above in any::<bool>(), decoupled in any::<bool>(),
    ) {
        let params = QdmParams { eta, epsilon: eps, u_above_t: above, decouple_unwanted: decoupled, ..QdmParams::default() };
        let (d0, d1) = PulseSpec::balanced_pair(omega, sigma, delta, 150.0, 300.0);
        let h = build_lambda_hamiltonian(&params, &d0, &d1, t).unwrap();
        prop_assert!(hermitian_defect(&h) == 0.0);
    }

    #[test]
    fn dark_state_is_decoupled_from_target(
        eta in 0.05..1.52f64, omega in 0.0..0.1f64, delta in -1.0..1.0f64, t in 0.0..300.0f64,
    ) {
        let params = QdmParams { eta, ..QdmParams::default() };
        let (d0, d1) = PulseSpec::balanced_pair(omega, 0.02, delta, 150.0, 300.0);
        let h = build_lambda_hamiltonian(&params, &d0, &d1, t).unwrap();
        let w = cpt_basis_transform();
        let hd = w.adjoint() * h * &w;
        prop_assert!(hd[(TARGET, 0)].norm() < 1e-15);
        prop_assert!((hd[(TARGET, 1)].norm() - qdm_core::model::sech_envelope(t, &d0) * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn coupling_ratio_product_is_minus_one(eta in 0.01..1.56f64) {
        let b = LevelBasis::new(eta, false);
        prop_assert!((b.lambda0 * b.lambda1 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_expectation_in_range_and_matches_dense(psi in pure_strategy(3), p in pauli_strategy(3)) {
        let e = expectation(&psi.clone().into(), &p).unwrap();
        let dense = psi.amplitudes().dotc(&(p.matrix() * psi.amplitudes())).re;
        prop_assert!((-1.0..=1.0).contains(&e));
        prop_assert!((e - dense).abs() < 1e-12);
    }

    #[test]
    fn pauli_commutation_matches_matrices(a in pauli_strategy(3), b in pauli_strategy(3)) {
        let (ma, mb) = (a.matrix(), b.matrix());
        let comm = (&ma * &mb - &mb * &ma).norm();
        prop_assert_eq!(a.commutes(&b), comm < 1e-12);
        if let Ok(c) = a.multiply(&b) {
            prop_assert!((c.matrix() - &ma * &mb).norm() < 1e-12);
        }
    }

    #[test]
    fn witness_bound_never_exceeds_fidelity(
        n in 2..5usize, cluster in any::<bool>(), p in 0.0..1.0f64,
        g in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 256),
    ) {
        let target = if cluster { Target::LinearCluster } else { Target::Ghz };
        let ideal = target_state(target, n).to_density();
        let noise = random_density(n, &g[..(1 << (2 * n))]);
        let m = ideal.matrix() * C64::from(p) + noise.matrix() * C64::from(1.0 - p);
        let rho = QuantumState::from(DensityMatrix::new(m, vec![2; n]).unwrap());
        let bound = certify(&rho, &target_group(target, n).unwrap()).unwrap().fidelity_bound;
        let f = state_fidelity(&target_state(target, n).into(), &rho).unwrap();
        prop_assert!(bound <= f + 1e-9, "bound {bound} > fidelity {f}");
    }

    #[test]
    fn partial_trace_preserves_trace(
        g in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64), keep in 0..3usize,
    ) {
        let rho = random_density(3, &g);
        let red = partial_trace(&rho, &[keep]).unwrap();
        prop_assert!((red.trace() - 1.0).abs() < 1e-12);
        prop_assert_eq!(red.dims(), &[2usize][..]);
    }

    #[test]
    fn ideal_protocol_stays_pure(n in 1..7usize, cluster in any::<bool>(), eager in any::<bool>()) {
        let target = if cluster { Target::LinearCluster } else { Target::Ghz };
        let cfg = ProtocolConfig { eager_encoding: eager, ..ProtocolConfig::new(target, n) };
        let (st, _) = run_protocol(&cfg).unwrap();
        prop_assert!(st.is_pure());
        prop_assert!((st.success_probability() - 1.0).abs() < 1e-12);
        prop_assert_eq!(st.illegal_weight, 0.0);
    }

    #[test]
    fn ideal_protocol_certifies(n in 2..9usize, cluster in any::<bool>(), seed in any::<u64>()) {
        let target = if cluster { Target::LinearCluster } else { Target::Ghz };
        let cfg = ProtocolConfig::new(target, n);
        let run = run_and_measure(&cfg, MeasurementChoice::Seeded(seed)).unwrap();
        let r = certify(&run.measurement.state.state, &target_group(target, n).unwrap()).unwrap();
        prop_assert!(r.expectations.iter().all(|e| (e - 1.0).abs() < 1e-10));
        let f = conditional_fidelity(&run.measurement.state.state, &target_state(target, n)).unwrap();
        prop_assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn success_probability_is_product(
        n in 1..8usize, c in 0.5..1.0f64, l in 0.0..0.5f64, cluster in any::<bool>(),
    ) {
        let target = if cluster { Target::LinearCluster } else { Target::Ghz };
        let mut cfg = ProtocolConfig::new(target, n);
        cfg.noise.cyclicity = c;
        cfg.noise.photon_loss = l;
        let (st, _) = run_protocol(&cfg).unwrap();
        let want = (c * (1.0 - l)).powi(n as i32);
        prop_assert!((st.success_probability() - want).abs() < 1e-12);
        prop_assert!((st.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn record_replay_reproduces_state(
        n in 1..6usize, cluster in any::<bool>(), seed in any::<u64>(), eager in any::<bool>(),
    ) {
        let target = if cluster { Target::LinearCluster } else { Target::Ghz };
        let cfg = ProtocolConfig { eager_encoding: eager, ..ProtocolConfig::new(target, n) };
        let run = run_and_measure(&cfg, MeasurementChoice::Seeded(seed)).unwrap();
        prop_assert_eq!(run.record.replay().unwrap(), run.measurement.state);
    }
}

proptest! {
    // each case runs the full gate dynamics
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulated_channels_are_physical(eta in 0.2..1.37f64, half in any::<bool>()) {
        let phi = if half { FRAC_PI_2 } else { PI };
        let ch = gate_channel(eta, 1.0, phi);
        prop_assert!(ch.completeness_excess() < 1e-8);
        let e = ch.gate_error(&ideal_rotation(phi));
        prop_assert!((0.0..=1.0).contains(&e));
    }

    // Only where the rotation works: for badly leaking gates decay refills the
    // qubit subspace and can lower the error.
    #[test]
    fn error_grows_with_decay_rate(eta in 0.6..0.97f64, g1 in 0.0..2.0f64, dg in 0.1..2.0f64) {
        let a = gate_channel(eta, g1, FRAC_PI_2).gate_error(&ideal_rotation(FRAC_PI_2));
        let b = gate_channel(eta, g1 + dg, FRAC_PI_2).gate_error(&ideal_rotation(FRAC_PI_2));
        prop_assert!(a < b, "γ={g1}: {a} vs γ={}: {b}", g1 + dg);
    }

    #[test]
    fn composition_infidelity_bound(eta in 0.4..1.17f64) {
        // Bures-angle triangle inequality on process fidelities
        let a = gate_channel(eta, 1.0, FRAC_PI_2);
        let fa = a.process_fidelity(&ideal_rotation(FRAC_PI_2));
        let fab = a.then(&a).process_fidelity(&ideal_rotation(PI));
        let angle = |f: f64| f.clamp(0.0, 1.0).sqrt().acos();
        prop_assert!(angle(fab) <= 2.0 * angle(fa) + 1e-9);
    }

    #[test]
    fn detuning_choice_changes_error_smoothly(d in 0.45..0.56f64) {
        let req = RotationRequest { detuning: DetuningRule::Fixed(d), ..RotationRequest::new(FRAC_PI_2, QdmParams::default()) };
        let (ch, rep) = simulate_gate(&req).unwrap();
        prop_assert!(ch.completeness_excess() < 1e-8);
        prop_assert!(rep.error.is_finite());
    }
}
