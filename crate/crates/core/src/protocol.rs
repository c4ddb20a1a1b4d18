//! Pump/rotate photon generation on a growing spin ⊗ photons register.
//!
//! The spin is subsystem 0; photonic qubits are appended on the right in
//! emission order. In the time-bin scheme each pump appends one occupation
//! qubit (a time bin). Adjacent bins `(0,1)` and `(1,0)` are then merged into
//! logical `|0⟩` and `|1⟩`; the other two patterns are dropped and their
//! weight is recorded. Heralded failures (non-cyclic emission, photon loss)
//! are removed from the state and tallied, so the remaining weight is the
//! success probability.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gate::{ideal_rotation, simulate_gate, QubitChannel, RotationRequest};
use crate::model::{CyclingTransition, PhotonEnergy, Polarization, SpinState, DOWN, UP};
use crate::quantum::{CMatrix, CVector, DensityMatrix, QuantumState, StateVector, C64};
use crate::verify::{
    apply_pauli, cluster_stabilizers, cluster_state, expectation, ghz_stabilizers, ghz_state,
    graph_stabilizers, graph_state, PauliString, StabilizerGroup,
};

/// Largest photon count on the state-vector path.
pub const MAX_PURE_PHOTONS: usize = 16;
/// Largest photon count on the density-matrix path.
pub const MAX_MIXED_PHOTONS: usize = 10;
// Peak register sizes: N logical photons plus spin plus one raw pair.
const MAX_PURE_QUBITS: usize = MAX_PURE_PHOTONS + 2;
const MAX_MIXED_QUBITS: usize = MAX_MIXED_PHOTONS + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Ghz,
    LinearCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoding {
    TimeBin,
    PolarizationEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Outcome::Plus => "+",
            Outcome::Minus => "-",
        }
    }
}

/// Channels for the two rotation angles the protocol uses.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSet {
    pub half_pi: QubitChannel,
    pub pi: QubitChannel,
}

impl GateSet {
    pub fn ideal() -> Self {
        Self {
            half_pi: QubitChannel::from_unitary(ideal_rotation(FRAC_PI_2)),
            pi: QubitChannel::from_unitary(ideal_rotation(PI)),
        }
    }

    /// Runs the full gate dynamics for `R_Y(π/2)` and `R_Y(π)` using `base`
    /// for everything except the angle.
    pub fn simulated(base: &RotationRequest) -> Result<Self> {
        let with_phi = |phi| RotationRequest { phi, ..*base };
        let (a, b) = rayon::join(
            || simulate_gate(&with_phi(FRAC_PI_2)),
            || simulate_gate(&with_phi(PI)),
        );
        Ok(Self {
            half_pi: a?.0,
            pi: b?.0,
        })
    }

    fn channel_for(&self, phi: f64) -> Option<&QubitChannel> {
        if (phi - FRAC_PI_2).abs() < 1e-12 {
            Some(&self.half_pi)
        } else if (phi - PI).abs() < 1e-12 {
            Some(&self.pi)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateSource {
    Ideal,
    Simulated(GateSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub gates: GateSource,
    /// Probability that a pumped emission returns the spin correctly.
    pub cyclicity: f64,
    pub photon_loss: f64,
    /// Phase-flip probability applied to the spin after every pump, emission
    /// or rotation.
    pub spin_dephasing_per_step: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            gates: GateSource::Ideal,
            cyclicity: 1.0,
            photon_loss: 0.0,
            spin_dephasing_per_step: 0.0,
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        check_probability("cyclicity", self.cyclicity)?;
        check_probability("photon_loss", self.photon_loss)?;
        check_probability("spin_dephasing_per_step", self.spin_dephasing_per_step)
    }

    fn emission_amplitude(&self) -> f64 {
        (self.cyclicity * (1.0 - self.photon_loss)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub target: Target,
    pub encoding: Encoding,
    pub n_photons: usize,
    pub noise: NoiseModel,
    /// Use a density matrix even when the state stays pure.
    pub force_density: bool,
    /// Merge each time-bin pair as soon as its late bin is emitted.
    pub eager_encoding: bool,
}

impl ProtocolConfig {
    /// Ideal time-bin run with eager encoding.
    pub fn new(target: Target, n_photons: usize) -> Self {
        Self {
            target,
            encoding: Encoding::TimeBin,
            n_photons,
            noise: NoiseModel::default(),
            force_density: false,
            eager_encoding: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_photons == 0 {
            return Err(Error::InvalidArgument(
                "n_photons must be at least 1".into(),
            ));
        }
        self.noise.validate()?;
        let raw_bins = self.encoding == Encoding::TimeBin && !self.eager_encoding;
        let (max, max_qubits) = if self.force_density {
            (MAX_MIXED_PHOTONS, MAX_MIXED_QUBITS)
        } else {
            (MAX_PURE_PHOTONS, MAX_PURE_QUBITS)
        };
        if self.n_photons > max {
            return Err(Error::CapExceeded {
                what: "photons",
                requested: self.n_photons,
                max,
            });
        }
        if raw_bins && 2 * self.n_photons + 1 > max_qubits {
            return Err(Error::CapExceeded {
                what: "photons with deferred time-bin encoding",
                requested: self.n_photons,
                max: (max_qubits - 1) / 2,
            });
        }
        Ok(())
    }

    fn ideal_counterpart(&self) -> Self {
        Self {
            noise: NoiseModel::default(),
            force_density: false,
            eager_encoding: true,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonLabel {
    /// Raw occupation of time bin `tau` (1-based).
    Bin { tau: usize },
    /// Logical qubit from bins `early` and `late`.
    TimeBinPair { early: usize, late: usize },
    /// Photon `round` of the polarization scheme; logical `|0⟩` and `|1⟩`
    /// carry the listed (polarization, energy) labels.
    Polarized {
        round: usize,
        zero: (Polarization, PhotonEnergy),
        one: (Polarization, PhotonEnergy),
    },
}

/// Spin ⊗ photons together with the weight bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub state: QuantumState,
    pub labels: Vec<PhotonLabel>,
    /// Weight removed by non-cyclic emissions.
    pub failure_weight: f64,
    /// Weight removed by photon loss, per photonic subsystem.
    pub loss_flags: Vec<f64>,
    /// Weight dropped when merging bins with patterns `00` or `11`.
    pub illegal_weight: f64,
    /// Weight lost to gate leakage out of the qubit subspace.
    pub leaked_weight: f64,
    /// Whether subsystem 0 is still the spin.
    pub has_spin: bool,
}

impl HybridState {
    fn spin_only(state: QuantumState) -> Self {
        Self {
            state,
            labels: Vec::new(),
            failure_weight: 0.0,
            loss_flags: Vec::new(),
            illegal_weight: 0.0,
            leaked_weight: 0.0,
            has_spin: true,
        }
    }

    pub fn n_photons(&self) -> usize {
        self.labels.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.state.dims().len()
    }

    /// Weight still in the state, i.e. the heralded success probability.
    pub fn success_probability(&self) -> f64 {
        self.state.weight()
    }

    pub fn loss_weight(&self) -> f64 {
        self.loss_flags.iter().sum()
    }

    /// Sum of the retained and every recorded weight; one up to gate
    /// imperfections that are not tracked.
    pub fn total_weight(&self) -> f64 {
        self.success_probability()
            + self.failure_weight
            + self.loss_weight()
            + self.illegal_weight
            + self.leaked_weight
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.state, QuantumState::Pure(_))
    }

    fn ensure_mixed(&mut self) {
        if let QuantumState::Pure(s) = &self.state {
            self.state = QuantumState::Mixed(s.to_density());
        }
    }

    fn require_spin(&self) -> Result<()> {
        if self.has_spin {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "the spin has already been measured".into(),
            ))
        }
    }

    fn check_room(&self) -> Result<()> {
        let (max, what) = if self.is_pure() {
            (MAX_PURE_QUBITS, "qubits in a state vector")
        } else {
            (MAX_MIXED_QUBITS, "qubits in a density matrix")
        };
        if self.n_qubits() + 1 > max {
            return Err(Error::CapExceeded {
                what,
                requested: self.n_qubits() + 1,
                max,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Initialize,
    Pump {
        tau: usize,
    },
    Emit {
        round: usize,
    },
    Rotate {
        phi: f64,
    },
    Encode,
    FrameCorrection {
        pauli: PauliString,
    },
    Measure {
        outcome: Outcome,
        correction: PauliString,
    },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Initialize => write!(f, "initialize R_Y(pi/2)|up>"),
            Step::Pump { tau } => write!(f, "pump tau={tau}"),
            Step::Emit { round } => write!(f, "emit round={round}"),
            Step::Rotate { phi } => write!(f, "rotate phi={phi:.16e}"),
            Step::Encode => write!(f, "encode time-bin pairs"),
            Step::FrameCorrection { pauli } => write!(f, "frame correction {pauli}"),
            Step::Measure {
                outcome,
                correction,
            } => write!(
                f,
                "measure spin outcome={} correction={correction}",
                outcome.name()
            ),
        }
    }
}

/// Ordered steps of one run together with the configuration they ran under.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRecord {
    pub config: ProtocolConfig,
    /// Wrong-polarization amplitude of a polarization run; zero otherwise.
    pub cross_amplitude: f64,
    pub steps: Vec<Step>,
}

impl ProtocolRecord {
    fn new(config: &ProtocolConfig, cross_amplitude: f64) -> Self {
        Self {
            config: config.clone(),
            cross_amplitude,
            steps: Vec::new(),
        }
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.steps.iter().find_map(|s| match s {
            Step::Measure { outcome, .. } => Some(*outcome),
            _ => None,
        })
    }

    pub fn correction(&self) -> Option<&PauliString> {
        self.steps.iter().find_map(|s| match s {
            Step::Measure { correction, .. } => Some(correction),
            _ => None,
        })
    }

    /// Re-executes every step from scratch.
    pub fn replay(&self) -> Result<HybridState> {
        let cfg = &self.config;
        let mut st = initialize(cfg)?;
        for step in &self.steps {
            match step {
                Step::Initialize => st = initialize(cfg)?,
                Step::Pump { tau } => pump_time_bin(&mut st, *tau, &cfg.noise)?,
                Step::Emit { round } => {
                    emit_polarized(&mut st, *round, self.cross_amplitude, &cfg.noise)?
                }
                Step::Rotate { phi } => apply_spin_rotation(&mut st, *phi, &cfg.noise)?,
                Step::Encode => encode_time_bins(&mut st)?,
                Step::FrameCorrection { pauli } => st.state = apply_pauli(&st.state, pauli)?,
                Step::Measure {
                    outcome,
                    correction,
                } => {
                    st = project_spin(&st, *outcome)?.0;
                    st.state = apply_pauli(&st.state, correction)?;
                }
            }
        }
        Ok(st)
    }
}

impl fmt::Display for ProtocolRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "# target={:?} encoding={:?} n_photons={} cyclicity={} photon_loss={} dephasing={} cross={}",
            c.target,
            c.encoding,
            c.n_photons,
            c.noise.cyclicity,
            c.noise.photon_loss,
            c.noise.spin_dephasing_per_step,
            self.cross_amplitude
        )?;
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "{i:4} {s}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// register-level kernels

fn spin_down_weight(state: &QuantumState) -> f64 {
    let h = state.dim() / 2;
    match state {
        QuantumState::Pure(s) => s.amplitudes().iter().skip(h).map(|a| a.norm_sqr()).sum(),
        QuantumState::Mixed(r) => (h..2 * h).map(|i| r.matrix()[(i, i)].re).sum(),
    }
}

/// Appends a photonic qubit set to `|1⟩` exactly when the spin is `⇓`.
/// Amplitudes of the `⇑`/`⇓` halves are scaled by `scale`; with probability
/// `cross` the photon bit is flipped instead (density matrices only).
fn append_photon(state: &QuantumState, scale: [f64; 2], cross: f64) -> QuantumState {
    let d = state.dim();
    let h = d / 2;
    let mut dims = state.dims().to_vec();
    dims.push(2);
    let bit = |i: usize| usize::from(i >= h);
    let s = |i: usize| scale[bit(i)];
    match state {
        QuantumState::Pure(psi) => {
            debug_assert!(cross == 0.0);
            let a = psi.amplitudes();
            let mut out = CVector::zeros(2 * d);
            for i in 0..d {
                out[2 * i + bit(i)] = a[i] * s(i);
            }
            StateVector::new(out, dims).expect("dims match").into()
        }
        QuantumState::Mixed(rho) => {
            let m = rho.matrix();
            let mut out = CMatrix::zeros(2 * d, 2 * d);
            for (w, flip) in [(1.0 - cross, 0), (cross, 1)] {
                if w == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let cj = 2 * j + (bit(j) ^ flip);
                    for i in 0..d {
                        let ri = 2 * i + (bit(i) ^ flip);
                        out[(ri, cj)] += m[(i, j)] * (w * s(i) * s(j));
                    }
                }
            }
            DensityMatrix::new_unchecked(out, dims).into()
        }
    }
}

/// Replaces qubits `k, k+1` by one qubit holding `0` for pattern `01` and `1`
/// for `10`; everything else is discarded.
fn merge_pair(state: &QuantumState, k: usize) -> QuantumState {
    let n = state.dims().len();
    let right = 1usize << (n - k - 2);
    let left = 1usize << k;
    let new_dim = left * 2 * right;
    let src: Vec<usize> = (0..new_dim)
        .map(|m| {
            let r = m % right;
            let logical = (m / right) % 2;
            let l = m / (2 * right);
            let pattern = if logical == 0 { 0b01 } else { 0b10 };
            (l * 4 + pattern) * right + r
        })
        .collect();
    let mut dims = state.dims().to_vec();
    dims.remove(k + 1);
    match state {
        QuantumState::Pure(psi) => {
            let a = psi.amplitudes();
            let out = CVector::from_iterator(new_dim, src.iter().map(|&i| a[i]));
            StateVector::new(out, dims).expect("dims match").into()
        }
        QuantumState::Mixed(rho) => {
            let m = rho.matrix();
            let out = CMatrix::from_fn(new_dim, new_dim, |i, j| m[(src[i], src[j])]);
            DensityMatrix::new_unchecked(out, dims).into()
        }
    }
}

fn dephase(st: &mut HybridState, p: f64) -> Result<()> {
    if p == 0.0 {
        return Ok(());
    }
    st.ensure_mixed();
    let id = CMatrix::identity(2, 2) * C64::from((1.0 - p).sqrt());
    let mut z = CMatrix::identity(2, 2) * C64::from(p.sqrt());
    z[(1, 1)] = -z[(1, 1)];
    if let QuantumState::Mixed(r) = &mut st.state {
        r.apply_local_kraus(0, &[id, z])?;
    }
    Ok(())
}

fn apply_channel(st: &mut HybridState, ch: &QubitChannel) -> Result<()> {
    let before = st.state.weight();
    if ch.kraus_ops.len() == 1 {
        st.state.apply_local(0, &ch.kraus_ops[0])?;
    } else {
        st.ensure_mixed();
        if let QuantumState::Mixed(r) = &mut st.state {
            r.apply_local_kraus(0, &ch.kraus_ops)?;
        }
    }
    st.leaked_weight += (before - st.state.weight()).max(0.0);
    Ok(())
}

// ---------------------------------------------------------------------------
// protocol steps

/// Spin in `R_Y(π/2)|⇑⟩`, or the configured `π/2` channel applied to `|⇑⟩`.
pub fn initialize(config: &ProtocolConfig) -> Result<HybridState> {
    config.validate()?;
    let up = StateVector::basis(vec![2], UP)?;
    let mut st = HybridState::spin_only(up.into());
    match &config.noise.gates {
        GateSource::Ideal => st.state.apply_local(0, &ideal_rotation(FRAC_PI_2))?,
        GateSource::Simulated(g) => apply_channel(&mut st, &g.half_pi)?,
    }
    if config.force_density {
        st.ensure_mixed();
    }
    Ok(st)
}

/// Drives the σ⁺ cycling transition once: the `⇓` component occupies time
/// bin `tau`, the `⇑` component leaves it empty.
pub fn pump_time_bin(st: &mut HybridState, tau: usize, noise: &NoiseModel) -> Result<()> {
    st.require_spin()?;
    if st
        .labels
        .iter()
        .any(|l| matches!(l, PhotonLabel::Polarized { .. }))
    {
        return Err(Error::WrongEncoding {
            expected: "time_bin",
        });
    }
    st.check_room()?;
    let p_down = spin_down_weight(&st.state);
    let (c, l) = (noise.cyclicity, noise.photon_loss);
    st.state = append_photon(&st.state, [1.0, noise.emission_amplitude()], 0.0);
    st.failure_weight += (1.0 - c) * p_down;
    st.loss_flags.push(c * l * p_down);
    st.labels.push(PhotonLabel::Bin { tau });
    debug_assert_eq!(CyclingTransition::SIGMA_PLUS.coupled_spin.index(), DOWN);
    dephase(st, noise.spin_dephasing_per_step)
}

/// `R_Y(φ)` on the spin, ideal or through the configured channel.
pub fn apply_spin_rotation(st: &mut HybridState, phi: f64, noise: &NoiseModel) -> Result<()> {
    st.require_spin()?;
    match &noise.gates {
        GateSource::Ideal => st.state.apply_local(0, &ideal_rotation(phi))?,
        GateSource::Simulated(g) => match g.channel_for(phi) {
            Some(ch) => apply_channel(st, ch)?,
            None if phi == 0.0 => {}
            None => return Err(Error::MissingChannel { phi }),
        },
    }
    dephase(st, noise.spin_dephasing_per_step)
}

/// Merges every complete pair of raw bins `(τ, τ+1)` into a logical qubit.
pub fn encode_time_bins(st: &mut HybridState) -> Result<()> {
    let offset = usize::from(st.has_spin);
    let mut i = 0;
    while i + 1 < st.labels.len() {
        match (st.labels[i], st.labels[i + 1]) {
            (PhotonLabel::Bin { tau: early }, PhotonLabel::Bin { tau: late })
                if late == early + 1 =>
            {
                let before = st.state.weight();
                st.state = merge_pair(&st.state, offset + i);
                st.illegal_weight += (before - st.state.weight()).max(0.0);
                st.labels[i] = PhotonLabel::TimeBinPair { early, late };
                st.labels.remove(i + 1);
                let lost = st.loss_flags.remove(i + 1);
                st.loss_flags[i] += lost;
                i += 1;
            }
            (PhotonLabel::Polarized { .. }, _) => {
                return Err(Error::WrongEncoding {
                    expected: "time_bin",
                })
            }
            _ => i += 1,
        }
    }
    Ok(())
}

/// One polarization-scheme emission: `⇑` emits `(σ⁻, ω⁻)` as `|0⟩` and `⇓`
/// emits `(σ⁺, ω⁺)` as `|1⟩`. With probability `cross²/2` the photon carries
/// the other polarization.
pub fn emit_polarized(
    st: &mut HybridState,
    round: usize,
    cross: f64,
    noise: &NoiseModel,
) -> Result<()> {
    st.require_spin()?;
    if !(0.0..=1.0).contains(&cross) {
        return Err(Error::InvalidArgument(format!(
            "cross_amplitude must lie in [0, 1], got {cross}"
        )));
    }
    if st
        .labels
        .iter()
        .any(|l| !matches!(l, PhotonLabel::Polarized { .. }))
    {
        return Err(Error::WrongEncoding {
            expected: "polarization_energy",
        });
    }
    let p_cross = cross * cross / 2.0;
    if p_cross > 0.0 {
        st.ensure_mixed();
    }
    st.check_room()?;
    let w = st.state.weight();
    let (c, l) = (noise.cyclicity, noise.photon_loss);
    let a = noise.emission_amplitude();
    st.state = append_photon(&st.state, [a, a], p_cross);
    st.failure_weight += (1.0 - c) * w;
    st.loss_flags.push(c * l * w);
    let label = |s: SpinState| {
        let t = CyclingTransition::for_spin(s);
        (t.polarization, t.photon_energy)
    };
    st.labels.push(PhotonLabel::Polarized {
        round,
        zero: label(SpinState::Up),
        one: label(SpinState::Down),
    });
    dephase(st, noise.spin_dephasing_per_step)
}

/// Steps 0 to 5: `N` rounds of pump, `R_Y(π)`, pump, then `R_Y(π)` (GHZ) or
/// `R_Y(π/2)` (linear cluster, skipped in the last round). Stops before the
/// spin measurement.
pub fn run_protocol(config: &ProtocolConfig) -> Result<(HybridState, ProtocolRecord)> {
    if config.encoding != Encoding::TimeBin {
        return Err(Error::WrongEncoding {
            expected: "time_bin",
        });
    }
    let mut st = initialize(config)?;
    let mut rec = ProtocolRecord::new(config, 0.0);
    rec.steps.push(Step::Initialize);
    let noise = &config.noise;
    let n = config.n_photons;
    for round in 1..=n {
        let early = 2 * round - 1;
        pump_time_bin(&mut st, early, noise)?;
        apply_spin_rotation(&mut st, PI, noise)?;
        pump_time_bin(&mut st, early + 1, noise)?;
        rec.steps.extend([
            Step::Pump { tau: early },
            Step::Rotate { phi: PI },
            Step::Pump { tau: early + 1 },
        ]);
        if config.eager_encoding {
            encode_time_bins(&mut st)?;
            rec.steps.push(Step::Encode);
        }
        let phi = match config.target {
            Target::Ghz => Some(PI),
            Target::LinearCluster if round < n => Some(FRAC_PI_2),
            Target::LinearCluster => None,
        };
        if let Some(phi) = phi {
            apply_spin_rotation(&mut st, phi, noise)?;
            rec.steps.push(Step::Rotate { phi });
        }
    }
    if !config.eager_encoding {
        encode_time_bins(&mut st)?;
        rec.steps.push(Step::Encode);
    }
    Ok((st, rec))
}

fn lr_sequence(config: &ProtocolConfig, cross: f64) -> Result<(HybridState, ProtocolRecord)> {
    if config.encoding != Encoding::PolarizationEnergy {
        return Err(Error::WrongEncoding {
            expected: "polarization_energy",
        });
    }
    let mut st = initialize(config)?;
    let mut rec = ProtocolRecord::new(config, cross);
    rec.steps.push(Step::Initialize);
    for round in 1..=config.n_photons {
        emit_polarized(&mut st, round, cross, &config.noise)?;
        rec.steps.push(Step::Emit { round });
        if config.target == Target::LinearCluster {
            apply_spin_rotation(&mut st, FRAC_PI_2, &config.noise)?;
            rec.steps.push(Step::Rotate { phi: FRAC_PI_2 });
        }
    }
    Ok((st, rec))
}

/// Polarization-scheme reference run on spin + `N` photons. GHZ emits
/// without rotations; the linear cluster interleaves `R_Y(π/2)` after every
/// emission. A fixed Pauli frame correction (taken from the ideal run) maps
/// the result onto [`lr_target_state`].
pub fn run_lr_polarization(
    config: &ProtocolConfig,
    cross_amplitude: f64,
) -> Result<(HybridState, ProtocolRecord)> {
    let (mut st, mut rec) = lr_sequence(config, cross_amplitude)?;
    let (ideal, _) = lr_sequence(&config.ideal_counterpart(), 0.0)?;
    let group = lr_target_group(config.target, config.n_photons)?;
    let flips = frame_flips(&ideal.state, &group)?;
    let pauli = group.correction(&flips)?;
    st.state = apply_pauli(&st.state, &pauli)?;
    rec.steps.push(Step::FrameCorrection { pauli });
    Ok((st, rec))
}

/// Edges of the polarization-scheme cluster on `[spin, photon 1, …, photon N]`:
/// a path spin – N – (N−1) – … – 1.
pub fn lr_edges(n_photons: usize) -> Vec<(usize, usize)> {
    let mut e = vec![(0, n_photons)];
    e.extend((2..=n_photons).rev().map(|k| (k, k - 1)));
    e
}

pub fn lr_target_group(target: Target, n_photons: usize) -> Result<StabilizerGroup> {
    match target {
        Target::Ghz => ghz_stabilizers(n_photons + 1),
        Target::LinearCluster => graph_stabilizers(n_photons + 1, &lr_edges(n_photons)),
    }
}

pub fn lr_target_state(target: Target, n_photons: usize) -> StateVector {
    match target {
        Target::Ghz => ghz_state(n_photons + 1),
        Target::LinearCluster => graph_state(n_photons + 1, &lr_edges(n_photons)),
    }
}

/// Stabilizers of the canonical `n`-photon target; a single photon is
/// certified by `X` alone.
pub fn target_group(target: Target, n: usize) -> Result<StabilizerGroup> {
    match (target, n) {
        (_, 1) => graph_stabilizers(1, &[]),
        (Target::Ghz, _) => ghz_stabilizers(n),
        (Target::LinearCluster, _) => cluster_stabilizers(n),
    }
}

pub fn target_state(target: Target, n: usize) -> StateVector {
    match target {
        Target::Ghz => ghz_state(n),
        Target::LinearCluster => cluster_state(n),
    }
}

fn frame_flips(state: &QuantumState, group: &StabilizerGroup) -> Result<Vec<bool>> {
    group
        .generators()
        .iter()
        .map(|g| {
            let e = expectation(state, g)?;
            if (e.abs() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "ideal state is not an eigenstate of {g} (expectation {e})"
                )));
            }
            Ok(e < 0.0)
        })
        .collect()
}

/// Projects the spin onto `|±⟩ = (|⇑⟩ ± |⇓⟩)/√2` and drops it. Returns the
/// renormalized photonic state and the outcome probability.
pub fn project_spin(st: &HybridState, outcome: Outcome) -> Result<(HybridState, f64)> {
    st.require_spin()?;
    let h = st.state.dim() / 2;
    let sg = outcome.sign();
    let dims = st.state.dims()[1..].to_vec();
    let total = st.state.weight();
    let projected: QuantumState = match &st.state {
        QuantumState::Pure(psi) => {
            let a = psi.amplitudes();
            let v = CVector::from_fn(h, |i, _| {
                (a[i] + a[h + i] * sg) * std::f64::consts::FRAC_1_SQRT_2
            });
            StateVector::new(v, dims)?.into()
        }
        QuantumState::Mixed(rho) => {
            let m = rho.matrix();
            let out = CMatrix::from_fn(h, h, |i, j| {
                (m[(i, j)] + (m[(i, h + j)] + m[(h + i, j)]) * sg + m[(h + i, h + j)]) * 0.5
            });
            DensityMatrix::new_unchecked(out, dims).into()
        }
    };
    let w = projected.weight();
    if !(total > 0.0) || w / total < 1e-14 {
        return Err(Error::ZeroProbabilityOutcome {
            outcome: outcome.name(),
        });
    }
    let normalized = match projected {
        QuantumState::Pure(s) => {
            let scale = C64::from(w.sqrt().recip());
            let dims = s.dims().to_vec();
            StateVector::new(s.amplitudes() * scale, dims)?.into()
        }
        QuantumState::Mixed(r) => {
            let dims = r.dims().to_vec();
            DensityMatrix::new_unchecked(r.matrix() / C64::from(w), dims).into()
        }
    };
    let out = HybridState {
        state: normalized,
        has_spin: false,
        ..st.clone()
    };
    Ok((out, w / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementChoice {
    Forced(Outcome),
    /// Born-rule sampling from a generator seeded with this value.
    Seeded(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// Photonic state after projection and correction.
    pub state: HybridState,
    pub outcome: Outcome,
    pub probability: f64,
    pub correction: PauliString,
}

/// Pauli fix-ups for outcomes `+` and `−` that map the ideal projected
/// photonic state of `config` onto [`target_state`].
pub fn correction_table(config: &ProtocolConfig) -> Result<[PauliString; 2]> {
    let (ideal, _) = run_protocol(&config.ideal_counterpart())?;
    let group = target_group(config.target, config.n_photons)?;
    let fix = |o| -> Result<PauliString> {
        let (proj, _) = project_spin(&ideal, o)?;
        group.correction(&frame_flips(&proj.state, &group)?)
    };
    Ok([fix(Outcome::Plus)?, fix(Outcome::Minus)?])
}

/// Step 6: measures the spin in the `|±⟩` basis and applies the tabulated
/// correction to the photons.
pub fn measure_spin(
    st: &HybridState,
    config: &ProtocolConfig,
    choice: MeasurementChoice,
) -> Result<Measurement> {
    if st.labels.len() != config.n_photons
        || st
            .labels
            .iter()
            .any(|l| !matches!(l, PhotonLabel::TimeBinPair { .. }))
    {
        return Err(Error::WrongEncoding {
            expected: "encoded time-bin photons",
        });
    }
    let outcome = match choice {
        MeasurementChoice::Forced(o) => o,
        MeasurementChoice::Seeded(seed) => {
            let (_, p_plus) = project_spin(st, Outcome::Plus).unwrap_or((st.clone(), 0.0));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if rng.random::<f64>() < p_plus {
                Outcome::Plus
            } else {
                Outcome::Minus
            }
        }
    };
    let (mut projected, probability) = project_spin(st, outcome)?;
    let table = correction_table(config)?;
    let correction = match outcome {
        Outcome::Plus => table[0].clone(),
        Outcome::Minus => table[1].clone(),
    };
    projected.state = apply_pauli(&projected.state, &correction)?;
    Ok(Measurement {
        state: projected,
        outcome,
        probability,
        correction,
    })
}

/// A full run with measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    /// Spin ⊗ photons just before the measurement.
    pub before_measurement: HybridState,
    pub measurement: Measurement,
    pub record: ProtocolRecord,
}

pub fn run_and_measure(config: &ProtocolConfig, choice: MeasurementChoice) -> Result<ProtocolRun> {
    let (before, mut record) = run_protocol(config)?;
    let measurement = measure_spin(&before, config, choice)?;
    record.steps.push(Step::Measure {
        outcome: measurement.outcome,
        correction: measurement.correction.clone(),
    });
    Ok(ProtocolRun {
        before_measurement: before,
        measurement,
        record,
    })
}

/// `⟨t|ρ|t⟩ / tr ρ`.
pub fn conditional_fidelity(state: &QuantumState, target: &StateVector) -> Result<f64> {
    if state.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: state.dim(),
        });
    }
    let t = target.amplitudes();
    let w = state.weight();
    if !(w > 0.0) {
        return Err(Error::ZeroProbabilityOutcome {
            outcome: "empty state",
        });
    }
    let num = match state {
        QuantumState::Pure(s) => t.dotc(s.amplitudes()).norm_sqr(),
        QuantumState::Mixed(r) => t.dotc(&(r.matrix() * t)).re,
    };
    Ok((num / w).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2 as R;

    fn amps(st: &HybridState) -> Vec<C64> {
        match &st.state {
            QuantumState::Pure(s) => s.amplitudes().iter().copied().collect(),
            _ => panic!("expected a pure state"),
        }
    }

    fn assert_ket(st: &HybridState, nonzero: &[(usize, f64)]) {
        let a = amps(st);
        for (i, z) in a.iter().enumerate() {
            let want = nonzero
                .iter()
                .find(|(j, _)| *j == i)
                .map_or(0.0, |(_, v)| *v);
            assert!(
                (z - C64::from(want)).norm() < 1e-15,
                "index {i}: {z} vs {want}"
            );
        }
    }

    fn raw(target: Target, n: usize) -> ProtocolConfig {
        ProtocolConfig {
            eager_encoding: false,
            ..ProtocolConfig::new(target, n)
        }
    }

    #[test]
    fn printed_kets_steps_zero_to_four() {
        let cfg = raw(Target::Ghz, 2);
        let noise = NoiseModel::default();
        let mut st = initialize(&cfg).unwrap();
        assert_ket(&st, &[(0, R), (1, R)]);
        // |⇑⟩|0₁⟩ + |⇓⟩|1₁⟩
        pump_time_bin(&mut st, 1, &noise).unwrap();
        assert_ket(&st, &[(0b00, R), (0b11, R)]);
        // |⇓⟩|0₁⟩ − |⇑⟩|1₁⟩
        apply_spin_rotation(&mut st, PI, &noise).unwrap();
        assert_ket(&st, &[(0b10, R), (0b01, -R)]);
        // |⇓⟩|0₁1₂⟩ − |⇑⟩|1₁0₂⟩
        pump_time_bin(&mut st, 2, &noise).unwrap();
        assert_ket(&st, &[(0b101, R), (0b010, -R)]);
        let step3 = st.clone();
        // −|⇑⟩|0₁1₂⟩ − |⇓⟩|1₁0₂⟩
        apply_spin_rotation(&mut st, PI, &noise).unwrap();
        assert_ket(&st, &[(0b001, -R), (0b110, -R)]);

        // encoding the Step-3 ket: |⇓⟩|0_L⟩ − |⇑⟩|1_L⟩
        let mut enc = step3;
        encode_time_bins(&mut enc).unwrap();
        assert_ket(&enc, &[(0b10, R), (0b01, -R)]);
        assert_eq!(
            enc.labels,
            vec![PhotonLabel::TimeBinPair { early: 1, late: 2 }]
        );
        assert_eq!(enc.illegal_weight, 0.0);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let cfg = ProtocolConfig::new(Target::Ghz, 1);
        let mut st = initialize(&cfg).unwrap();
        pump_time_bin(&mut st, 1, &cfg.noise).unwrap();
        let before = st.clone();
        apply_spin_rotation(&mut st, 0.0, &cfg.noise).unwrap();
        assert_eq!(st, before);
    }

    #[test]
    fn ghz_three_rounds_is_four_qubit_ghz() {
        let (st, _) = run_protocol(&ProtocolConfig::new(Target::Ghz, 3)).unwrap();
        assert_eq!(st.n_qubits(), 4);
        let f = conditional_fidelity(&st.state, &ghz_state(4)).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
        assert_eq!(st.illegal_weight, 0.0);
    }

    #[test]
    fn single_round_cluster_is_bell_like() {
        let (st, _) = run_protocol(&ProtocolConfig::new(Target::LinearCluster, 1)).unwrap();
        let g = graph_stabilizers(2, &[(0, 1)]).unwrap();
        let ghz = ghz_stabilizers(2).unwrap();
        // maximally entangled: |⟨XX⟩| = |⟨ZZ⟩| = 1
        for p in ghz.generators() {
            assert_abs_diff_eq!(
                expectation(&st.state, p).unwrap().abs(),
                1.0,
                epsilon = 1e-12
            );
        }
        assert!(g
            .generators()
            .iter()
            .all(|p| expectation(&st.state, p).unwrap().abs() < 1e-12));
    }

    #[test]
    fn eager_and_deferred_encoding_agree() {
        for target in [Target::Ghz, Target::LinearCluster] {
            let (a, _) = run_protocol(&ProtocolConfig::new(target, 4)).unwrap();
            let (b, _) = run_protocol(&raw(target, 4)).unwrap();
            assert_eq!(a.labels, b.labels);
            let d = amps(&a)
                .iter()
                .zip(amps(&b))
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(d < 1e-15);
        }
    }

    #[test]
    fn measurement_yields_canonical_states() {
        for target in [Target::Ghz, Target::LinearCluster] {
            for n in 1..=5 {
                let cfg = ProtocolConfig::new(target, n);
                let (st, _) = run_protocol(&cfg).unwrap();
                let mut total = 0.0;
                for o in [Outcome::Plus, Outcome::Minus] {
                    let m = measure_spin(&st, &cfg, MeasurementChoice::Forced(o)).unwrap();
                    total += m.probability;
                    let f = conditional_fidelity(&m.state.state, &target_state(target, n)).unwrap();
                    assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
                }
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn density_path_matches_state_vector_path() {
        for target in [Target::Ghz, Target::LinearCluster] {
            let cfg = ProtocolConfig::new(target, 3);
            let dense = ProtocolConfig {
                force_density: true,
                ..cfg.clone()
            };
            let (a, _) = run_protocol(&cfg).unwrap();
            let (b, _) = run_protocol(&dense).unwrap();
            let d = a.state.to_density().matrix() - b.state.to_density().matrix();
            assert!(d.camax() < 1e-12);
        }
    }

    #[test]
    fn record_replay_is_exact() {
        let cfg = ProtocolConfig::new(Target::LinearCluster, 4);
        let run = run_and_measure(&cfg, MeasurementChoice::Seeded(7)).unwrap();
        let again = run.record.replay().unwrap();
        assert_eq!(again, run.measurement.state);
        assert!(run.record.to_string().contains("measure spin"));
    }

    #[test]
    fn seeded_measurement_is_reproducible() {
        let cfg = ProtocolConfig::new(Target::Ghz, 3);
        let (st, _) = run_protocol(&cfg).unwrap();
        let outcomes: Vec<_> = (0..16)
            .map(|s| {
                measure_spin(&st, &cfg, MeasurementChoice::Seeded(s))
                    .unwrap()
                    .outcome
            })
            .collect();
        let again: Vec<_> = (0..16)
            .map(|s| {
                measure_spin(&st, &cfg, MeasurementChoice::Seeded(s))
                    .unwrap()
                    .outcome
            })
            .collect();
        assert_eq!(outcomes, again);
        assert!(outcomes.contains(&Outcome::Plus) && outcomes.contains(&Outcome::Minus));
    }

    #[test]
    fn cyclicity_and_loss_bookkeeping() {
        let mut cfg = ProtocolConfig::new(Target::LinearCluster, 5);
        cfg.noise.cyclicity = 0.94;
        cfg.noise.photon_loss = 0.1;
        let (st, _) = run_protocol(&cfg).unwrap();
        let want = (0.94f64 * 0.9).powi(5);
        assert_abs_diff_eq!(st.success_probability(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(st.total_weight(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn forced_zero_probability_outcome_is_rejected() {
        let cfg = ProtocolConfig::new(Target::Ghz, 1);
        let (mut st, _) = run_protocol(&cfg).unwrap();
        // spin in |+⟩, photon in |0⟩: outcome "−" is impossible
        let z = C64::from(0.0);
        st.state = StateVector::from_slice(&[C64::from(R), z, C64::from(R), z], vec![2, 2])
            .unwrap()
            .into();
        assert!(matches!(
            project_spin(&st, Outcome::Minus),
            Err(Error::ZeroProbabilityOutcome { .. })
        ));
    }

    #[test]
    fn caps_are_enforced() {
        let cfg = ProtocolConfig::new(Target::Ghz, MAX_PURE_PHOTONS + 1);
        assert!(matches!(run_protocol(&cfg), Err(Error::CapExceeded { .. })));
        let cfg = ProtocolConfig {
            force_density: true,
            ..ProtocolConfig::new(Target::Ghz, MAX_MIXED_PHOTONS + 1)
        };
        assert!(matches!(run_protocol(&cfg), Err(Error::CapExceeded { .. })));
        assert!(run_protocol(&ProtocolConfig::new(Target::Ghz, 0)).is_err());
    }

    #[test]
    fn pump_rejects_polarization_state() {
        let cfg = ProtocolConfig {
            encoding: Encoding::PolarizationEnergy,
            ..ProtocolConfig::new(Target::Ghz, 1)
        };
        let (mut st, _) = lr_sequence(&cfg, 0.0).unwrap();
        assert!(matches!(
            pump_time_bin(&mut st, 1, &cfg.noise),
            Err(Error::WrongEncoding { .. })
        ));
        assert!(run_protocol(&cfg).is_err());
    }

    #[test]
    fn polarization_scheme_examples() {
        let cfg = ProtocolConfig {
            encoding: Encoding::PolarizationEnergy,
            ..ProtocolConfig::new(Target::Ghz, 1)
        };
        // |⇑⟩|σ⁻,ω⁻⟩ + |⇓⟩|σ⁺,ω⁺⟩
        let (st, _) = run_lr_polarization(&cfg, 0.0).unwrap();
        assert_ket(&st, &[(0b00, R), (0b11, R)]);
        match st.labels[0] {
            PhotonLabel::Polarized { zero, one, .. } => {
                assert_eq!(zero, (Polarization::SigmaMinus, PhotonEnergy::OmegaMinus));
                assert_eq!(one, (Polarization::SigmaPlus, PhotonEnergy::OmegaPlus));
            }
            _ => unreachable!(),
        }
        let (mixed, _) = run_lr_polarization(&cfg, 1.0).unwrap();
        let f = conditional_fidelity(&mixed.state, &lr_target_state(Target::Ghz, 1)).unwrap();
        assert_abs_diff_eq!(f, 0.5, epsilon = 1e-12);

        for n in 1..=5 {
            let cfg = ProtocolConfig {
                encoding: Encoding::PolarizationEnergy,
                ..ProtocolConfig::new(Target::LinearCluster, n)
            };
            let (st, rec) = run_lr_polarization(&cfg, 0.0).unwrap();
            let f = conditional_fidelity(&st.state, &lr_target_state(Target::LinearCluster, n))
                .unwrap();
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
            assert_eq!(rec.replay().unwrap(), st);
        }
    }
}
