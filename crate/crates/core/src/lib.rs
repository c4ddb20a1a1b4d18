//! Simulation of a hole-spin quantum dot molecule as a deterministic source
//! of entangled photons.
//!
//! * [`quantum`]: dense states, Lindblad propagation, fidelities.
//! * [`model`]: the four-level molecule, sech drives, dark/bright basis.
//! * [`gate`]: CPT Y-rotations, detuning correction, gate error.
//! * [`protocol`]: time-bin and polarization pump/rotate sequences.
//! * [`verify`]: stabilizer certification of GHZ and linear cluster states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gate;
pub mod model;
pub mod protocol;
pub mod quantum;
pub mod units;
pub mod verify;

pub use error::{Error, Result};
pub use gate::{
    ideal_rotation, modified_detuning, simulate_gate, sweep_delta, sweep_eta, two_level_detuning,
    DetuningRule, GateReport, QubitChannel, RotationRequest, SweepTable,
};
pub use model::{PulseSpec, QdmParams};

pub use protocol::{
    run_and_measure, run_lr_polarization, run_protocol, Encoding, GateSet, HybridState,
    MeasurementChoice, NoiseModel, Outcome, ProtocolConfig, ProtocolRecord, Target,
};
pub use quantum::{DensityMatrix, QuantumState, StateVector};
pub use verify::{certify, expectation, CertificationReport, PauliString, StabilizerGroup};
