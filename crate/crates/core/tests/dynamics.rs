//! Propagation checked against closed-form solutions.

use approx::assert_abs_diff_eq;
use qdm_core::gate::{simulate_gate, DetuningRule, RotationRequest};
use qdm_core::model::{QdmParams, UP};
use qdm_core::quantum::{
    outer_basis, propagate, propagate_state, CMatrix, Collapse, DensityMatrix, IntegratorOptions,
    StateVector, C64,
};
use qdm_core::units::HBAR_MEV_PS;

fn sx(omega: f64) -> CMatrix {
    let mut h = CMatrix::zeros(2, 2);
    h[(0, 1)] = C64::from(omega / 2.0);
    h[(1, 0)] = C64::from(omega / 2.0);
    h
}

#[test]
fn resonant_rabi_oscillation() {
    // H = Ω/2 σx, P₁(t) = sin²(Ωt/2)
    let omega = 0.37;
    let psi = StateVector::basis(vec![2], 0).unwrap();
    let opts = IntegratorOptions::with_tol(1e-11);
    for t in [0.5, 3.0, 11.0] {
        let (out, _) = propagate_state(|_| sx(omega), &psi, 0.0, t, &opts).unwrap();
        let p1 = out.amplitudes()[1].norm_sqr();
        assert_abs_diff_eq!(p1, (omega * t / 2.0).sin().powi(2), epsilon = 1e-9);
    }
}

#[test]
fn detuned_rabi_oscillation() {
    // H = Δ|1⟩⟨1| + Ω/2 σx, P₁ = Ω²/W² sin²(Wt/2), W = √(Ω² + Δ²)
    let (omega, det) = (0.3, 0.4);
    let mut h = sx(omega);
    h[(1, 1)] = C64::from(det);
    let w = (omega * omega + det * det).sqrt();
    let psi = StateVector::basis(vec![2], 0).unwrap();
    let (out, _) = propagate_state(
        |_| h.clone(),
        &psi,
        0.0,
        7.0,
        &IntegratorOptions::with_tol(1e-11),
    )
    .unwrap();
    let want = (omega / w).powi(2) * (w * 7.0 / 2.0).sin().powi(2);
    assert_abs_diff_eq!(out.amplitudes()[1].norm_sqr(), want, epsilon = 1e-9);
}

#[test]
fn amplitude_damping_coherence() {
    // L = |0⟩⟨1| at rate γ: ρ₁₁ = e^{−γt}, ρ₀₁ = e^{−γt/2}/2 from |+⟩
    let gamma = 0.8;
    let plus = StateVector::normalized(
        qdm_core::quantum::CVector::from_vec(vec![C64::from(1.0), C64::from(1.0)]),
        vec![2],
    )
    .unwrap();
    let c = [Collapse::new(outer_basis(2, 0, 1), gamma)];
    let zero = CMatrix::zeros(2, 2);
    let (rho, _) = propagate(
        |_| zero.clone(),
        &c,
        &plus.to_density(),
        0.0,
        2.5,
        &IntegratorOptions::with_tol(1e-11),
    )
    .unwrap();
    let m = rho.matrix();
    assert_abs_diff_eq!(m[(1, 1)].re, 0.5 * (-gamma * 2.5f64).exp(), epsilon = 1e-9);
    assert_abs_diff_eq!(
        m[(0, 1)].re,
        0.5 * (-gamma * 2.5 / 2.0f64).exp(),
        epsilon = 1e-9
    );
    assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-8);
}

#[test]
fn split_window_matches_single_window() {
    let h = |t: f64| {
        let mut m = sx(0.2 * (0.3 * t).cos());
        m[(1, 1)] = C64::from(0.05);
        m
    };
    let c = [Collapse::new(outer_basis(2, 0, 1), 0.1)];
    let rho0 = DensityMatrix::new(outer_basis(2, UP, UP), vec![2]).unwrap();
    let opts = IntegratorOptions::with_tol(1e-11);
    let (full, _) = propagate(h, &c, &rho0, 0.0, 10.0, &opts).unwrap();
    let (half, _) = propagate(h, &c, &rho0, 0.0, 4.0, &opts).unwrap();
    let (two, _) = propagate(h, &c, &half, 4.0, 10.0, &opts).unwrap();
    assert!((full.matrix() - two.matrix()).norm() < 1e-8);
}

#[test]
fn rosen_zener_phase_few_points() {
    let sigma = 0.02;
    let params = QdmParams {
        decouple_unwanted: true,
        gamma: 0.0,
        ..QdmParams::default()
    };
    for k in [0.5, 2.0, 7.0] {
        let delta = k * sigma;
        let req = RotationRequest {
            detuning: DetuningRule::Fixed(delta),
            with_decay: false,
            t_gate: 40.0 * HBAR_MEV_PS / sigma,
            ..RotationRequest::new(1.0, params)
        };
        let (ch, rep) = simulate_gate(&req).unwrap();
        assert!(rep.leakage < 1e-6);
        let u = &ch.kraus_ops[0];
        // ⟨B|U|B⟩/⟨D|U|D⟩ with D, B = (|⇑⟩ ∓ i|⇓⟩)/√2
        let i = C64::i();
        let dd = (u[(0, 0)] + u[(1, 1)] - i * u[(0, 1)] + i * u[(1, 0)]) / 2.0;
        let bb = (u[(0, 0)] + u[(1, 1)] + i * u[(0, 1)] - i * u[(1, 0)]) / 2.0;
        assert_abs_diff_eq!(
            (bb / dd).arg(),
            2.0 * (sigma / delta).atan(),
            epsilon = 1e-6
        );
    }
}
