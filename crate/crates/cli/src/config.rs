//! Run configuration: TOML with sections, environment overrides, validation.
//!
//! Every key `key` in section `[section]` can be overridden by the
//! environment variable `QDMSIM_<SECTION>_<KEY>` (upper case), e.g.
//! `QDMSIM_PHYSICS_ETA=0.7` or `QDMSIM_PROTOCOL_N_MAX=6`. Values are parsed
//! as TOML scalars; anything that does not parse is taken as a string.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use qdm_core::gate::RotationRequest;
use qdm_core::protocol::{Encoding, Target, MAX_MIXED_PHOTONS, MAX_PURE_PHOTONS};
use qdm_core::quantum::IntegratorOptions;
use qdm_core::QdmParams;

use crate::error::ConfigError;

pub const ENV_PREFIX: &str = "QDMSIM_";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub eta: f64,
    pub epsilon_mev: f64,
    pub sigma_mev: f64,
    pub gamma_per_ns: f64,
    pub dephasing_per_ns: f64,
    pub t_gate_ps: f64,
    pub u_above_t: bool,
    pub decouple_unwanted: bool,
    pub tolerance: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            eta: FRAC_PI_4,
            epsilon_mev: 0.5,
            sigma_mev: 0.02,
            gamma_per_ns: 1.0,
            dephasing_per_ns: 0.0,
            t_gate_ps: 300.0,
            u_above_t: false,
            decouple_unwanted: false,
            tolerance: 1e-9,
        }
    }
}

impl PhysicsSection {
    pub fn params(&self) -> QdmParams {
        QdmParams {
            eta: self.eta,
            epsilon: self.epsilon_mev,
            gamma: self.gamma_per_ns,
            dephasing: self.dephasing_per_ns,
            u_above_t: self.u_above_t,
            decouple_unwanted: self.decouple_unwanted,
        }
    }

    /// Gate request for angle `phi` with the corrected detuning.
    pub fn rotation(&self, phi: f64) -> RotationRequest {
        RotationRequest {
            sigma: self.sigma_mev,
            t_gate: self.t_gate_ps,
            with_decay: self.gamma_per_ns > 0.0,
            integrator: IntegratorOptions::with_tol(self.tolerance),
            ..RotationRequest::new(phi, self.params())
        }
    }
}

/// Mixing-angle grid for `gate-sweep`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            parameter: "eta".into(),
            start: 0.1,
            stop: FRAC_PI_2 - 0.1,
            points: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    Ghz,
    LinearCluster,
}

impl From<TargetName> for Target {
    fn from(t: TargetName) -> Self {
        match t {
            TargetName::Ghz => Target::Ghz,
            TargetName::LinearCluster => Target::LinearCluster,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingName {
    TimeBin,
    PolarizationEnergy,
}

impl From<EncodingName> for Encoding {
    fn from(e: EncodingName) -> Self {
        match e {
            EncodingName::TimeBin => Encoding::TimeBin,
            EncodingName::PolarizationEnergy => Encoding::PolarizationEnergy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateChoice {
    Ideal,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeChoice {
    Sampled,
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub target: TargetName,
    pub encoding: EncodingName,
    pub n_max: usize,
    pub gates: GateChoice,
    pub cyclicity: f64,
    pub photon_loss: f64,
    pub spin_dephasing_per_step: f64,
    /// Wrong-polarization amplitude; polarization encoding only.
    pub cross_amplitude: f64,
    /// Cyclicity of the comparison column next to cyclicity 1.
    pub compare_cyclicity: f64,
    pub outcome: OutcomeChoice,
    pub force_density: bool,
    pub eager_encoding: bool,
    pub dump_state: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            target: TargetName::LinearCluster,
            encoding: EncodingName::TimeBin,
            n_max: 8,
            gates: GateChoice::Ideal,
            cyclicity: 1.0,
            photon_loss: 0.0,
            spin_dephasing_per_step: 0.0,
            cross_amplitude: 0.0,
            compare_cyclicity: 0.94,
            outcome: OutcomeChoice::Sampled,
            force_density: false,
            eager_encoding: true,
            dump_state: false,
        }
    }
}

/// Detuning grids for `detuning-check` (meV).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetuningSection {
    /// Rotation angle in units of π.
    pub phi_over_pi: f64,
    pub start_mev: f64,
    pub stop_mev: f64,
    pub step_mev: f64,
    pub decoupled_start_mev: f64,
    pub decoupled_stop_mev: f64,
}

impl Default for DetuningSection {
    fn default() -> Self {
        Self {
            phi_over_pi: 0.5,
            start_mev: 0.480,
            stop_mev: 0.540,
            step_mev: 0.001,
            decoupled_start_mev: 0.005,
            decoupled_stop_mev: 0.035,
        }
    }
}

impl DetuningSection {
    pub fn phi(&self) -> f64 {
        self.phi_over_pi * PI
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Amplitude dump (`index,re,im`) to certify instead of a fresh run.
    pub state_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub physics: PhysicsSection,
    pub sweep: SweepSection,
    pub protocol: ProtocolSection,
    pub detuning: DetuningSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

const SECTIONS: [&str; 7] = [
    "run", "physics", "sweep", "protocol", "detuning", "verify", "output",
];

impl RunConfig {
    /// Parses TOML text and applies `QDMSIM_*` overrides from `vars`.
    /// Validation is left to the caller so later overrides can still apply.
    pub fn from_toml_with_env<I>(text: &str, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("file", e.message().to_string()))?;
        let mut overrides: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (var, raw) in overrides {
            let rest = var[ENV_PREFIX.len()..].to_ascii_lowercase();
            let (section, key) = rest
                .split_once('_')
                .filter(|(s, k)| SECTIONS.contains(s) && !k.is_empty())
                .ok_or_else(|| ConfigError::new(&var, "not a known <SECTION>_<KEY> override"))?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => {
                    t.insert(key.to_string(), parse_scalar(&raw));
                }
                _ => return Err(ConfigError::new(section, "expected a section")),
            }
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::new("file", e.message().to_string()))?;
        Ok(cfg)
    }

    /// Reads `path` (or starts from defaults) and applies the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new("--config", format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.physics;
        check(
            p.eta > 0.0 && p.eta < FRAC_PI_2,
            "physics.eta",
            "must lie in (0, π/2)",
        )?;
        check(
            p.epsilon_mev > 0.0,
            "physics.epsilon_mev",
            "must be positive",
        )?;
        check(p.sigma_mev > 0.0, "physics.sigma_mev", "must be positive")?;
        check(
            p.gamma_per_ns >= 0.0,
            "physics.gamma_per_ns",
            "must be non-negative",
        )?;
        check(
            p.dephasing_per_ns >= 0.0,
            "physics.dephasing_per_ns",
            "must be non-negative",
        )?;
        check(p.t_gate_ps > 0.0, "physics.t_gate_ps", "must be positive")?;
        check(
            p.tolerance > 0.0 && p.tolerance < 1e-2,
            "physics.tolerance",
            "must lie in (0, 0.01)",
        )?;

        let s = &self.sweep;
        check(
            s.parameter == "eta",
            "sweep.parameter",
            "only \"eta\" is supported",
        )?;
        check(s.points >= 1, "sweep.points", "must be at least 1")?;
        for (v, name) in [(s.start, "sweep.start"), (s.stop, "sweep.stop")] {
            check(v > 0.0 && v < FRAC_PI_2, name, "must lie in (0, π/2)")?;
        }
        check(
            s.stop >= s.start,
            "sweep.stop",
            "must not be below sweep.start",
        )?;

        let q = &self.protocol;
        let cap = if q.force_density || q.needs_density() {
            MAX_MIXED_PHOTONS
        } else {
            MAX_PURE_PHOTONS
        };
        check(q.n_max >= 1, "protocol.n_max", "must be at least 1")?;
        if q.n_max > cap {
            return Err(ConfigError::new(
                "protocol.n_max",
                format!(
                    "{} exceeds the cap of {cap} photons for this state representation",
                    q.n_max
                ),
            ));
        }
        if !q.eager_encoding && q.encoding == EncodingName::TimeBin {
            let raw_cap = cap.div_ceil(2);
            if q.n_max > raw_cap {
                return Err(ConfigError::new(
                    "protocol.n_max",
                    format!("deferred encoding holds 2N bins; N is capped at {raw_cap}"),
                ));
            }
        }
        for (v, name) in [
            (q.cyclicity, "protocol.cyclicity"),
            (q.photon_loss, "protocol.photon_loss"),
            (
                q.spin_dephasing_per_step,
                "protocol.spin_dephasing_per_step",
            ),
            (q.cross_amplitude, "protocol.cross_amplitude"),
            (q.compare_cyclicity, "protocol.compare_cyclicity"),
        ] {
            check((0.0..=1.0).contains(&v), name, "must lie in [0, 1]")?;
        }
        if q.outcome == OutcomeChoice::Sampled && self.run.seed.is_none() {
            return Err(ConfigError::new(
                "run.seed",
                "required when protocol.outcome = \"sampled\"",
            ));
        }

        let d = &self.detuning;
        check(
            d.phi_over_pi > 0.0 && d.phi_over_pi < 2.0,
            "detuning.phi_over_pi",
            "must lie in (0, 2)",
        )?;
        check(d.step_mev > 0.0, "detuning.step_mev", "must be positive")?;
        check(d.start_mev > 0.0, "detuning.start_mev", "must be positive")?;
        check(
            d.stop_mev >= d.start_mev,
            "detuning.stop_mev",
            "must not be below detuning.start_mev",
        )?;
        check(
            d.decoupled_start_mev > 0.0,
            "detuning.decoupled_start_mev",
            "must be positive",
        )?;
        check(
            d.decoupled_stop_mev >= d.decoupled_start_mev,
            "detuning.decoupled_stop_mev",
            "must not be below detuning.decoupled_start_mev",
        )?;
        Ok(())
    }
}

impl ProtocolSection {
    pub fn needs_density(&self) -> bool {
        self.gates == GateChoice::Simulated
            || self.spin_dephasing_per_step > 0.0
            || (self.encoding == EncodingName::PolarizationEnergy && self.cross_amplitude > 0.0)
    }
}

fn check(ok: bool, field: &str, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(field, msg))
    }
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Grid from `start` in steps of `step` up to `stop` (inclusive within half
/// a step).
pub fn stepped(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 0.5).floor() as usize + 1;
    (0..n).map(|k| start + step * k as f64).collect()
}
