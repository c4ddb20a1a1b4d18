//! Four-level hole-spin molecule: qubit states, the two excited molecular
//! branches, sech drives and the dark/bright basis.
//!
//! Level order is `{⇑, ⇓, t, u}`. The Hamiltonian is written in a frame
//! rotating at the laser carriers, so the qubit states sit at zero and the
//! excited branches carry the residual detunings on the diagonal.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use crate::error::{Error, Result};
use crate::quantum::{outer_basis, CMatrix, Collapse, C64, I, ONE, ZERO};
use crate::units::{mev_to_rad_per_ps, per_ns_to_per_ps, HBAR_MEV_PS};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const TARGET: usize = 2;
pub const UNWANTED: usize = 3;
pub const LEVELS: usize = 4;

/// Physical parameters of one molecule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdmParams {
    /// Hole-spin mixing angle (rad), in (0, π/2).
    pub eta: f64,
    /// Splitting between the two excited branches (meV).
    pub epsilon: f64,
    /// Radiative decay rate of each excited branch (1/ns).
    pub gamma: f64,
    /// Pure dephasing rate of the qubit coherence (1/ns).
    pub dephasing: f64,
    /// Place `|u⟩` at `+ε` above `|t⟩` instead of `−ε` below.
    pub u_above_t: bool,
    /// Zero the optical couplings of `|u⟩` (isolated Λ-system).
    pub decouple_unwanted: bool,
}

impl Default for QdmParams {
    fn default() -> Self {
        Self {
            eta: std::f64::consts::FRAC_PI_4,
            epsilon: 0.5,
            gamma: 1.0,
            dephasing: 0.0,
            u_above_t: false,
            decouple_unwanted: false,
        }
    }
}

impl QdmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!(
                "eta must lie in (0, π/2), got {}",
                self.eta
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if !(self.dephasing >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dephasing must be non-negative, got {}",
                self.dephasing
            )));
        }
        Ok(())
    }

    pub fn basis(&self) -> LevelBasis {
        LevelBasis::new(self.eta, self.decouple_unwanted)
    }

    /// Diagonal offset of `|u⟩` relative to `|t⟩` (meV).
    pub fn unwanted_offset(&self) -> f64 {
        if self.u_above_t {
            self.epsilon
        } else {
            -self.epsilon
        }
    }
}

/// Relative optical couplings of the unwanted branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelBasis {
    /// Coupling of `|u⟩` to `|⇑⟩` relative to that of `|t⟩`: −tan η.
    pub lambda0: f64,
    /// Coupling of `|u⟩` to `|⇓⟩` relative to that of `|t⟩`: cot η.
    pub lambda1: f64,
}

impl LevelBasis {
    pub fn new(eta: f64, decoupled: bool) -> Self {
        if decoupled {
            Self {
                lambda0: 0.0,
                lambda1: 0.0,
            }
        } else {
            Self {
                lambda0: -eta.tan(),
                lambda1: 1.0 / eta.tan(),
            }
        }
    }

    pub fn lambda(&self, qubit: usize) -> f64 {
        if qubit == UP {
            self.lambda0
        } else {
            self.lambda1
        }
    }
}

/// One sech drive on a qubit-to-excited transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    /// Peak Rabi rate (meV).
    pub omega_eff: f64,
    /// Bandwidth (meV).
    pub sigma: f64,
    /// Detuning from the `|t⟩` transition (meV); positive puts the laser below.
    pub delta: f64,
    /// Carrier phase (rad).
    pub phase: f64,
    /// Envelope center (ps).
    pub t_center: f64,
    /// Window length (ps).
    pub t_gate: f64,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pulse bandwidth must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.t_gate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gate window must be positive, got {}",
                self.t_gate
            )));
        }
        Ok(())
    }

    /// Bandwidth as an inverse time (1/ps).
    pub fn sigma_per_ps(&self) -> f64 {
        mev_to_rad_per_ps(self.sigma)
    }

    /// Two drives with equal envelopes whose bright combination has peak
    /// coupling `omega_eff` to `|t⟩`; the `|⇓⟩` drive lags by π/2 so that
    /// `(|⇑⟩ − i|⇓⟩)/√2` is dark.
    pub fn balanced_pair(
        omega_eff: f64,
        sigma: f64,
        delta: f64,
        t_center: f64,
        t_gate: f64,
    ) -> (PulseSpec, PulseSpec) {
        let each = omega_eff * FRAC_1_SQRT_2;
        let d0 = PulseSpec {
            omega_eff: each,
            sigma,
            delta,
            phase: 0.0,
            t_center,
            t_gate,
        };
        let d1 = PulseSpec {
            phase: -FRAC_PI_2,
            ..d0
        };
        (d0, d1)
    }
}

/// `Ω·sech(σ(t − t_c))` with σ converted to 1/ps.
pub fn sech_envelope(t: f64, pulse: &PulseSpec) -> f64 {
    let x = pulse.sigma_per_ps() * (t - pulse.t_center);
    // 1/cosh underflows cleanly to 0 for |x| > ~710
    pulse.omega_eff / x.cosh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpinState {
    Up,
    Down,
}

impl SpinState {
    pub fn index(self) -> usize {
        match self {
            SpinState::Up => UP,
            SpinState::Down => DOWN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhotonEnergy {
    OmegaPlus,
    OmegaMinus,
}

/// A closed optical transition used for emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CyclingTransition {
    pub polarization: Polarization,
    pub coupled_spin: SpinState,
    pub photon_energy: PhotonEnergy,
}

impl CyclingTransition {
    /// The σ⁺ transition; it cycles on `|⇓⟩`.
    pub const SIGMA_PLUS: CyclingTransition = CyclingTransition {
        polarization: Polarization::SigmaPlus,
        coupled_spin: SpinState::Down,
        photon_energy: PhotonEnergy::OmegaPlus,
    };
    /// The σ⁻ transition; it cycles on `|⇑⟩`.
    pub const SIGMA_MINUS: CyclingTransition = CyclingTransition {
        polarization: Polarization::SigmaMinus,
        coupled_spin: SpinState::Up,
        photon_energy: PhotonEnergy::OmegaMinus,
    };

    pub fn for_spin(spin: SpinState) -> CyclingTransition {
        match spin {
            SpinState::Up => Self::SIGMA_MINUS,
            SpinState::Down => Self::SIGMA_PLUS,
        }
    }
}

/// Validated drive configuration; evaluates H(t) without re-checking inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaHamiltonian {
    params: QdmParams,
    basis: LevelBasis,
    drives: [PulseSpec; 2],
    carriers: [C64; 2],
}

impl LambdaHamiltonian {
    pub fn new(params: &QdmParams, drive0: &PulseSpec, drive1: &PulseSpec) -> Result<Self> {
        params.validate()?;
        drive0.validate()?;
        drive1.validate()?;
        if drive0.sigma != drive1.sigma {
            return Err(Error::InvalidArgument(format!(
                "drives must share one bandwidth ({} vs {} meV)",
                drive0.sigma, drive1.sigma
            )));
        }
        if drive0.delta != drive1.delta || drive0.t_center != drive1.t_center {
            return Err(Error::InvalidArgument(
                "drives must share detuning and envelope center".into(),
            ));
        }
        Ok(Self {
            params: *params,
            basis: params.basis(),
            drives: [*drive0, *drive1],
            carriers: [
                C64::from_polar(1.0, drive0.phase),
                C64::from_polar(1.0, drive1.phase),
            ],
        })
    }

    pub fn drives(&self) -> &[PulseSpec; 2] {
        &self.drives
    }

    /// H(t) in meV.
    pub fn at(&self, t: f64) -> CMatrix {
        let mut h = CMatrix::zeros(LEVELS, LEVELS);
        let delta = self.drives[0].delta;
        h[(TARGET, TARGET)] = C64::from(delta);
        h[(UNWANTED, UNWANTED)] = C64::from(delta + self.params.unwanted_offset());
        for q in [UP, DOWN] {
            let c = self.carriers[q] * sech_envelope(t, &self.drives[q]);
            let cu = c * self.basis.lambda(q);
            h[(TARGET, q)] = c;
            h[(q, TARGET)] = c.conj();
            h[(UNWANTED, q)] = cu;
            h[(q, UNWANTED)] = cu.conj();
        }
        h
    }

    /// H(t)/ħ in rad/ps, ready for the integrator.
    pub fn at_rad_per_ps(&self, t: f64) -> CMatrix {
        self.at(t) / C64::from(HBAR_MEV_PS)
    }
}

/// Rotating-frame Hamiltonian (meV) at time `t` for the given pair of drives.
pub fn build_lambda_hamiltonian(
    params: &QdmParams,
    drive0: &PulseSpec,
    drive1: &PulseSpec,
    t: f64,
) -> Result<CMatrix> {
    Ok(LambdaHamiltonian::new(params, drive0, drive1)?.at(t))
}

/// Branching weights `[excited][qubit]` for radiative decay: proportional to
/// the squared optical couplings, normalized per excited level.
pub fn branching_weights(params: &QdmParams) -> [[f64; 2]; 2] {
    // the physical couplings set branching even when the drive to |u⟩ is
    // switched off
    let b = LevelBasis::new(params.eta, false);
    let (l0, l1) = (b.lambda0 * b.lambda0, b.lambda1 * b.lambda1);
    [[0.5, 0.5], [l0 / (l0 + l1), l1 / (l0 + l1)]]
}

/// Jump operators with rates in 1/ps: one per decay path `{t, u} → {⇑, ⇓}`,
/// plus `Z` on the qubit subspace when dephasing is configured.
pub fn collapse_operators(params: &QdmParams) -> Vec<Collapse> {
    let mut out = Vec::new();
    let gamma = per_ns_to_per_ps(params.gamma);
    if gamma > 0.0 {
        let w = branching_weights(params);
        for (e, level) in [TARGET, UNWANTED].into_iter().enumerate() {
            for q in [UP, DOWN] {
                if w[e][q] > 0.0 {
                    out.push(Collapse::new(
                        outer_basis(LEVELS, q, level),
                        gamma * w[e][q],
                    ));
                }
            }
        }
    }
    let dephasing = per_ns_to_per_ps(params.dephasing);
    if dephasing > 0.0 {
        let mut z = CMatrix::zeros(LEVELS, LEVELS);
        z[(UP, UP)] = ONE;
        z[(DOWN, DOWN)] = -ONE;
        // L = Z at rate r damps the qubit coherence at 2r
        out.push(Collapse::new(z, dephasing / 2.0));
    }
    out
}

/// Columns are `|D⟩, |B⟩, |t⟩, |u⟩` in the `{⇑, ⇓, t, u}` basis, with
/// `|D⟩ = (|⇑⟩ − i|⇓⟩)/√2` and `|B⟩ = (|⇑⟩ + i|⇓⟩)/√2`.
/// Operators transform as `W† H W`.
pub fn cpt_basis_transform() -> CMatrix {
    let h = C64::from(FRAC_1_SQRT_2);
    let mut w = CMatrix::zeros(LEVELS, LEVELS);
    w[(UP, 0)] = h;
    w[(DOWN, 0)] = -I * h;
    w[(UP, 1)] = h;
    w[(DOWN, 1)] = I * h;
    w[(TARGET, 2)] = ONE;
    w[(UNWANTED, 3)] = ONE;
    debug_assert!(w[(TARGET, 0)] == ZERO);
    w
}
