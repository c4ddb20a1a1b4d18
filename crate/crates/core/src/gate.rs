//! Y-rotation gates from sech drives of the Λ-system.
//!
//! A transitionless sech pulse (peak coupling equal to its bandwidth) returns
//! each driven two-level block to its ground state with phase
//! `2·arctan(σ/Δ)`. At η = π/4 the bright state couples only to `|t⟩` and the
//! dark state only to `|u⟩`, so the relative phase of the two blocks sets the
//! rotation angle; [`modified_detuning`] picks the laser detuning that makes
//! that relative phase equal to the requested angle.
//!
//! Rotation sense: with `|D⟩ = (|⇑⟩ − i|⇓⟩)/√2`, a phase `φ` carried by `|D⟩`
//! relative to `|B⟩` is `exp(−iφY/2)` on `{⇑, ⇓}`. The corrected detuning
//! with `|u⟩` below `|t⟩` realizes exactly this sense.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{collapse_operators, LambdaHamiltonian, PulseSpec, QdmParams, DOWN, LEVELS, UP};
use crate::quantum::{
    outer_basis, propagate_operator, propagate_state, CMatrix, CVector, IntegratorOptions,
    StateVector, C64,
};

/// `exp(−iφY/2)` on `{⇑, ⇓}`.
pub fn ideal_rotation(phi: f64) -> CMatrix {
    let (s, c) = (phi / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c.into(), (-s).into(), s.into(), c.into()])
}

/// Uncorrected detuning `σ·cot(φ/2)` that imprints a bright-state phase `φ`
/// on an isolated two-level block.
pub fn two_level_detuning(phi: f64, sigma: f64) -> f64 {
    sigma / (phi / 2.0).tan()
}

/// Detuning that compensates the phase picked up through the unwanted
/// branch: `½(ε + √(ε² + 4εσ·cot(φ/2) − 4σ²))`.
pub fn modified_detuning(phi: f64, epsilon: f64, sigma: f64) -> Result<f64> {
    let cot = 1.0 / (phi / 2.0).tan();
    let disc = epsilon * epsilon + 4.0 * epsilon * sigma * cot - 4.0 * sigma * sigma;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant {
            discriminant: disc,
            phi,
            epsilon,
            sigma,
        });
    }
    Ok(0.5 * (epsilon + disc.sqrt()))
}

/// How the laser detuning is chosen for a requested rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetuningRule {
    /// [`modified_detuning`].
    Corrected,
    /// Isolated two-level rule with the rotation sense of this module, i.e.
    /// `two_level_detuning(2π − φ, σ)`.
    TwoLevel,
    /// Explicit detuning in meV.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationRequest {
    /// Target angle about Y, in (0, 2π).
    pub phi: f64,
    pub params: QdmParams,
    /// Bandwidth (meV).
    pub sigma: f64,
    pub with_decay: bool,
    /// Window length (ps); the pulse is centered in it.
    pub t_gate: f64,
    pub detuning: DetuningRule,
    /// Peak bright-state coupling (meV); `None` means the transitionless value σ.
    pub omega_eff: Option<f64>,
    pub integrator: IntegratorOptions,
}

impl RotationRequest {
    pub fn new(phi: f64, params: QdmParams) -> Self {
        Self {
            phi,
            params,
            sigma: 0.02,
            with_decay: true,
            t_gate: 300.0,
            detuning: DetuningRule::Corrected,
            omega_eff: None,
            integrator: IntegratorOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < TAU) {
            return Err(Error::InvalidArgument(format!(
                "rotation angle must lie in (0, 2π), got {}",
                self.phi
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.t_gate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_gate must be positive, got {}",
                self.t_gate
            )));
        }
        self.params.validate()
    }

    pub fn delta(&self) -> Result<f64> {
        match self.detuning {
            DetuningRule::Corrected => modified_detuning(self.phi, self.params.epsilon, self.sigma),
            DetuningRule::TwoLevel => Ok(two_level_detuning(TAU - self.phi, self.sigma)),
            DetuningRule::Fixed(d) => Ok(d),
        }
    }

    fn hamiltonian(&self, delta: f64) -> Result<LambdaHamiltonian> {
        let omega = self.omega_eff.unwrap_or(self.sigma);
        let (d0, d1) =
            PulseSpec::balanced_pair(omega, self.sigma, delta, self.t_gate / 2.0, self.t_gate);
        LambdaHamiltonian::new(&self.params, &d0, &d1)
    }
}

/// A completely positive, trace-non-increasing map on the qubit subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitChannel {
    pub kraus_ops: Vec<CMatrix>,
    /// Largest population left outside `{⇑, ⇓}` over the basis inputs.
    pub leakage: f64,
}

impl QubitChannel {
    pub fn from_unitary(u: CMatrix) -> Self {
        Self {
            kraus_ops: vec![u],
            leakage: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self::from_unitary(CMatrix::identity(2, 2))
    }

    /// Kraus form of a 2-qubit-dimensional Choi matrix
    /// `J = Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)`.
    pub fn from_choi(choi: &CMatrix, leakage: f64) -> Self {
        let herm = (choi + choi.adjoint()) * C64::from(0.5);
        let eig = herm.symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        let mut kraus_ops = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= 1e-14 * scale.max(1.0) {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            let w = lambda.sqrt();
            let mut op = CMatrix::zeros(2, 2);
            for i in 0..2 {
                for a in 0..2 {
                    op[(a, i)] = v[i * 2 + a] * w;
                }
            }
            kraus_ops.push(op);
        }
        Self { kraus_ops, leakage }
    }

    pub fn choi(&self) -> CMatrix {
        let mut j = CMatrix::zeros(4, 4);
        for k in &self.kraus_ops {
            let mut v = CVector::zeros(4);
            for i in 0..2 {
                for a in 0..2 {
                    v[i * 2 + a] = k[(a, i)];
                }
            }
            j += &v * v.adjoint();
        }
        j
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.kraus_ops
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, k| acc + k * rho * k.adjoint())
    }

    /// `other ∘ self`: this channel first, then `other`.
    pub fn then(&self, other: &QubitChannel) -> QubitChannel {
        let mut kraus_ops = Vec::with_capacity(self.kraus_ops.len() * other.kraus_ops.len());
        for b in &other.kraus_ops {
            for a in &self.kraus_ops {
                kraus_ops.push(b * a);
            }
        }
        QubitChannel {
            kraus_ops,
            leakage: 1.0 - (1.0 - self.leakage) * (1.0 - other.leakage),
        }
    }

    /// `Σ K†K`.
    pub fn completeness(&self) -> CMatrix {
        self.kraus_ops
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, k| acc + k.adjoint() * k)
    }

    /// Largest eigenvalue of `Σ K†K − I`; non-positive for a physical channel.
    pub fn completeness_excess(&self) -> f64 {
        let m = self.completeness() - CMatrix::identity(2, 2);
        let m = (&m + m.adjoint()) * C64::from(0.5);
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::MIN, f64::max)
    }

    /// `tr(Σ K†K)/2`.
    pub fn trace_retention(&self) -> f64 {
        self.completeness().trace().re / 2.0
    }

    /// `Σ_k |tr(U†K_k)|² / 4`.
    pub fn process_fidelity(&self, target: &CMatrix) -> f64 {
        let ud = target.adjoint();
        self.kraus_ops
            .iter()
            .map(|k| (&ud * k).trace().norm_sqr())
            .sum::<f64>()
            / 4.0
    }

    /// `(2·F_pro + p)/3` with `p` the trace retention, so lost population
    /// counts against the fidelity.
    pub fn average_gate_fidelity(&self, target: &CMatrix) -> f64 {
        (2.0 * self.process_fidelity(target) + self.trace_retention()) / 3.0
    }

    pub fn gate_error(&self, target: &CMatrix) -> f64 {
        (1.0 - self.average_gate_fidelity(target)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub phi: f64,
    pub delta_used: f64,
    /// 1 − average gate fidelity.
    pub error: f64,
    pub leakage: f64,
    /// Leakage above one half.
    pub pathological: bool,
    pub elapsed: Duration,
    pub rhs_evals: usize,
}

impl GateReport {
    pub fn fidelity(&self) -> f64 {
        1.0 - self.error
    }
}

/// Simulates the full four-level dynamics over `[0, t_gate]` and returns the
/// process restricted to the qubit subspace.
pub fn simulate_gate(req: &RotationRequest) -> Result<(QubitChannel, GateReport)> {
    req.validate()?;
    let start = Instant::now();
    let delta = req.delta()?;
    let ham = req.hamiltonian(delta)?;
    let h = |t: f64| ham.at_rad_per_ps(t);
    let collapse = collapse_operators(&QdmParams {
        gamma: if req.with_decay {
            req.params.gamma
        } else {
            0.0
        },
        ..req.params
    });

    let mut rhs_evals = 0;
    let channel = if collapse.is_empty() {
        let mut block = CMatrix::zeros(2, 2);
        let mut leakage = 0.0f64;
        for q in [UP, DOWN] {
            let psi = StateVector::basis(vec![LEVELS], q)?;
            let (out, stats) = propagate_state(h, &psi, 0.0, req.t_gate, &req.integrator)?;
            rhs_evals += stats.rhs_evals;
            let a = out.amplitudes();
            block[(UP, q)] = a[UP];
            block[(DOWN, q)] = a[DOWN];
            leakage = leakage.max(1.0 - a[UP].norm_sqr() - a[DOWN].norm_sqr());
        }
        QubitChannel {
            kraus_ops: vec![block],
            leakage: leakage.max(0.0),
        }
    } else {
        let mut choi = CMatrix::zeros(4, 4);
        let mut leakage = 0.0f64;
        for i in [UP, DOWN] {
            for j in [UP, DOWN] {
                let (out, stats) = propagate_operator(
                    h,
                    &collapse,
                    outer_basis(LEVELS, i, j),
                    vec![LEVELS],
                    0.0,
                    req.t_gate,
                    &req.integrator,
                )?;
                rhs_evals += stats.rhs_evals;
                for a in [UP, DOWN] {
                    for b in [UP, DOWN] {
                        choi[(i * 2 + a, j * 2 + b)] = out[(a, b)];
                    }
                }
                if i == j {
                    let inside = out[(UP, UP)].re + out[(DOWN, DOWN)].re;
                    leakage = leakage.max(out.trace().re - inside);
                }
            }
        }
        QubitChannel::from_choi(&choi, leakage.max(0.0))
    };

    let target = ideal_rotation(req.phi);
    let error = channel.gate_error(&target);
    let report = GateReport {
        phi: req.phi,
        delta_used: delta,
        error,
        leakage: channel.leakage,
        pathological: channel.leakage > 0.5,
        elapsed: start.elapsed(),
        rhs_evals,
    };
    Ok((channel, report))
}

/// One row of a sweep; failures are kept with their message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub param: f64,
    pub outcome: std::result::Result<GateReport, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn errors(&self) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| p.outcome.as_ref().ok().map(|r| r.error))
            .collect()
    }

    /// Index and parameter of the smallest successful error.
    pub fn argmin(&self) -> Option<(usize, f64)> {
        self.points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.outcome.as_ref().ok().map(|r| (i, p.param, r.error)))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(i, param, _)| (i, param))
    }

    /// CSV with header `param,error,leakage,delta_meV`; failed points are
    /// written as `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,error,leakage,delta_meV\n");
        for p in &self.points {
            match &p.outcome {
                Ok(r) => out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_full(p.param),
                    fmt_full(r.error),
                    fmt_full(r.leakage),
                    fmt_full(r.delta_used)
                )),
                Err(_) => out.push_str(&format!("{},nan,nan,nan\n", fmt_full(p.param))),
            }
        }
        out
    }
}

/// 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

fn run_sweep<F>(grid: &[f64], make: F) -> SweepTable
where
    F: Fn(f64) -> RotationRequest + Sync,
{
    let points = grid
        .par_iter()
        .map(|&param| SweepPoint {
            param,
            outcome: simulate_gate(&make(param)).map(|(_, r)| r),
        })
        .collect();
    SweepTable { points }
}

/// Gate error across mixing angles, all other settings taken from `base`.
pub fn sweep_eta(phi: f64, grid: &[f64], base: &RotationRequest) -> Result<SweepTable> {
    if let Some(&bad) = grid.iter().find(|&&e| !(e > 0.0 && e < PI / 2.0)) {
        return Err(Error::InvalidArgument(format!(
            "eta grid point {bad} outside (0, π/2)"
        )));
    }
    Ok(run_sweep(grid, |eta| RotationRequest {
        phi,
        params: QdmParams { eta, ..base.params },
        ..*base
    }))
}

/// Gate error across explicit detunings (meV).
pub fn sweep_delta(phi: f64, grid: &[f64], base: &RotationRequest) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("detuning grid is empty".into()));
    }
    Ok(run_sweep(grid, |delta| RotationRequest {
        phi,
        detuning: DetuningRule::Fixed(delta),
        ..*base
    }))
}
