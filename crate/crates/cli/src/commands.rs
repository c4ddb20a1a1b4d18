//! Subcommand implementations. Each computes everything first and then
//! writes its files in grid order.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use qdm_core::gate::{fmt_full, modified_detuning, sweep_delta, sweep_eta, two_level_detuning};
use qdm_core::gate::{DetuningRule, RotationRequest, SweepTable};
use qdm_core::protocol::{
    conditional_fidelity, lr_target_group, lr_target_state, run_and_measure, run_lr_polarization,
    run_protocol, target_group, target_state, GateSet, GateSource, MeasurementChoice, NoiseModel,
    Outcome, ProtocolConfig, ProtocolRecord,
};
use qdm_core::verify::StabilizerGroup;
use qdm_core::{certify, CertificationReport, QdmParams, QuantumState, StateVector};

use crate::config::{linspace, stepped, EncodingName, GateChoice, OutcomeChoice, RunConfig};
use crate::error::{CliError, ConfigError};

pub type CliResult<T> = Result<T, CliError>;

/// Files written and a human-readable summary for stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), fmt_full)
}

// ---------------------------------------------------------------------------
// gate-sweep

pub const GATE_SWEEP_HEADER: &str =
    "eta,error_pi_half,error_pi,leakage_pi_half,leakage_pi,delta_pi_half_meV,delta_pi_meV";

/// Error of `R_Y(π/2)` and `R_Y(π)` across the configured η grid.
pub fn cmd_gate_sweep(cfg: &RunConfig, out: &Path) -> CliResult<CommandOutput> {
    let grid = linspace(cfg.sweep.start, cfg.sweep.stop, cfg.sweep.points);
    let base = cfg.physics.rotation(FRAC_PI_2);
    let (half, full) = rayon::join(
        || sweep_eta(FRAC_PI_2, &grid, &base),
        || sweep_eta(PI, &grid, &base),
    );
    let (half, full) = (half?, full?);

    let mut csv = format!("{GATE_SWEEP_HEADER}\n");
    let mut failures = 0;
    for (a, b) in half.points.iter().zip(&full.points) {
        let ra = a.outcome.as_ref().ok();
        let rb = b.outcome.as_ref().ok();
        failures += usize::from(ra.is_none()) + usize::from(rb.is_none());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_full(a.param),
            opt(ra.map(|r| r.error)),
            opt(rb.map(|r| r.error)),
            opt(ra.map(|r| r.leakage)),
            opt(rb.map(|r| r.leakage)),
            opt(ra.map(|r| r.delta_used)),
            opt(rb.map(|r| r.delta_used)),
        );
    }
    let mut files = Vec::new();
    write_file(out, "gate_sweep.csv", &csv, &mut files)?;

    let mut summary = format!("gate-sweep: {} eta points, {failures} failed", grid.len());
    for (name, t) in [("pi/2", &half), ("pi", &full)] {
        if let Some((i, eta)) = t.argmin() {
            let e = t.errors()[i].unwrap_or(f64::NAN);
            let _ = write!(summary, "\n  {name}: min error {e:.6} at eta = {eta:.6}");
        }
    }
    Ok(CommandOutput { files, summary })
}

// ---------------------------------------------------------------------------
// protocol

pub const PROTOCOL_HEADER: &str = "N,fidelity,witness_bound,success_prob";

/// Result of one protocol run of `n` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRow {
    pub n: usize,
    pub fidelity: f64,
    pub witness_bound: f64,
    pub success_prob: f64,
    pub record: ProtocolRecord,
    pub state: QuantumState,
}

/// Gate channels for the protocol runs; simulated channels use the physics
/// section as configured.
pub fn gate_source(cfg: &RunConfig) -> CliResult<GateSource> {
    Ok(match cfg.protocol.gates {
        GateChoice::Ideal => GateSource::Ideal,
        GateChoice::Simulated => {
            GateSource::Simulated(GateSet::simulated(&cfg.physics.rotation(FRAC_PI_2))?)
        }
    })
}

fn protocol_config(
    cfg: &RunConfig,
    gates: &GateSource,
    n: usize,
    cyclicity: f64,
) -> ProtocolConfig {
    let p = &cfg.protocol;
    ProtocolConfig {
        target: p.target.into(),
        encoding: p.encoding.into(),
        n_photons: n,
        noise: NoiseModel {
            gates: gates.clone(),
            cyclicity,
            photon_loss: p.photon_loss,
            spin_dephasing_per_step: p.spin_dephasing_per_step,
        },
        force_density: p.force_density,
        eager_encoding: p.eager_encoding,
    }
}

/// Seed of the measurement sampler for the `n`-photon run.
pub fn run_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(n as u64)
}

/// Runs, measures (time-bin only) and certifies one `n`-photon state.
pub fn protocol_row(
    cfg: &RunConfig,
    gates: &GateSource,
    n: usize,
    cyclicity: f64,
) -> CliResult<ProtocolRow> {
    let pc = protocol_config(cfg, gates, n, cyclicity);
    let (state, success_prob, record, target, group) = match cfg.protocol.encoding {
        EncodingName::TimeBin => {
            let choice = match cfg.protocol.outcome {
                OutcomeChoice::Plus => MeasurementChoice::Forced(Outcome::Plus),
                OutcomeChoice::Minus => MeasurementChoice::Forced(Outcome::Minus),
                OutcomeChoice::Sampled => {
                    let seed = cfg.run.seed.ok_or_else(|| {
                        ConfigError::new("run.seed", "required when protocol.outcome = \"sampled\"")
                    })?;
                    MeasurementChoice::Seeded(run_seed(seed, n))
                }
            };
            let run = run_and_measure(&pc, choice)?;
            (
                run.measurement.state.state,
                run.before_measurement.success_probability(),
                run.record,
                target_state(pc.target, n),
                target_group(pc.target, n)?,
            )
        }
        EncodingName::PolarizationEnergy => {
            let (st, record) = run_lr_polarization(&pc, cfg.protocol.cross_amplitude)?;
            (
                st.state.clone(),
                st.success_probability(),
                record,
                lr_target_state(pc.target, n),
                lr_target_group(pc.target, n)?,
            )
        }
    };
    let fidelity = conditional_fidelity(&state, &target)?;
    let witness_bound = certify(&state, &group)?.fidelity_bound;
    Ok(ProtocolRow {
        n,
        fidelity,
        witness_bound,
        success_prob,
        record,
        state,
    })
}

/// Heralded success probability before the measurement.
pub fn success_probability(
    cfg: &RunConfig,
    gates: &GateSource,
    n: usize,
    cyclicity: f64,
) -> CliResult<f64> {
    let pc = protocol_config(cfg, gates, n, cyclicity);
    let st = match cfg.protocol.encoding {
        EncodingName::TimeBin => run_protocol(&pc)?.0,
        EncodingName::PolarizationEnergy => {
            run_lr_polarization(&pc, cfg.protocol.cross_amplitude)?.0
        }
    };
    Ok(st.success_probability())
}

fn state_dump(state: &QuantumState) -> String {
    let mut s = String::new();
    match state {
        QuantumState::Pure(psi) => {
            s.push_str("index,re,im\n");
            for (i, a) in psi.amplitudes().iter().enumerate() {
                let _ = writeln!(s, "{i},{:.16e},{:.16e}", a.re, a.im);
            }
        }
        QuantumState::Mixed(rho) => {
            s.push_str("row,col,re,im\n");
            let m = rho.matrix();
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let z = m[(i, j)];
                    let _ = writeln!(s, "{i},{j},{:.16e},{:.16e}", z.re, z.im);
                }
            }
        }
    }
    s
}

/// Protocol for `N = 1..n_max`, the cyclicity comparison and the step log.
pub fn cmd_protocol(cfg: &RunConfig, out: &Path) -> CliResult<CommandOutput> {
    let p = &cfg.protocol;
    let gates = gate_source(cfg)?;
    let ns: Vec<usize> = (1..=p.n_max).collect();
    let rows = ns
        .par_iter()
        .map(|&n| protocol_row(cfg, &gates, n, p.cyclicity))
        .collect::<CliResult<Vec<_>>>()?;
    let comparison = ns
        .par_iter()
        .map(|&n| {
            Ok((
                success_probability(cfg, &gates, n, 1.0)?,
                success_probability(cfg, &gates, n, p.compare_cyclicity)?,
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut csv = format!("{PROTOCOL_HEADER}\n");
    let mut log = String::new();
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.n,
            fmt_full(r.fidelity),
            fmt_full(r.witness_bound),
            fmt_full(r.success_prob)
        );
        let _ = writeln!(log, "{}", r.record);
    }
    let mut table = format!(
        "N,success_prob_cyclicity_1,success_prob_cyclicity_{}\n",
        p.compare_cyclicity
    );
    for (n, (one, other)) in ns.iter().zip(&comparison) {
        let _ = writeln!(table, "{n},{},{}", fmt_full(*one), fmt_full(*other));
    }

    let mut files = Vec::new();
    write_file(out, "protocol.csv", &csv, &mut files)?;
    write_file(out, "cyclicity_comparison.csv", &table, &mut files)?;
    write_file(out, "protocol_record.log", &log, &mut files)?;
    if p.dump_state {
        if let Some(last) = rows.last() {
            let name = format!("state_N{}.csv", last.n);
            write_file(out, &name, &state_dump(&last.state), &mut files)?;
        }
    }

    let mut summary = format!(
        "protocol: {:?} {:?}, N = 1..{}",
        p.target, p.encoding, p.n_max
    );
    for r in &rows {
        let _ = write!(
            summary,
            "\n  N={:2} fidelity={:.10} witness={:.10} success={:.10}",
            r.n, r.fidelity, r.witness_bound, r.success_prob
        );
    }
    Ok(CommandOutput { files, summary })
}

// ---------------------------------------------------------------------------
// detuning-check

pub const DETUNING_CHECK_HEADER: &str =
    "convention,phi,formula_delta_meV,argmin_delta_meV,min_error,discrepancy_meV,grid_step_meV,grid_points,status";

/// Outcome of one sweep against its formula value.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningCheckRow {
    pub convention: &'static str,
    pub phi: f64,
    pub formula: Option<f64>,
    pub argmin: Option<f64>,
    pub min_error: Option<f64>,
    pub step: f64,
    pub points: usize,
    pub table: SweepTable,
}

impl DetuningCheckRow {
    pub fn discrepancy(&self) -> Option<f64> {
        Some((self.argmin? - self.formula?).abs())
    }

    /// `degenerate_grid` for one point, `ok` when the argmin lies within one
    /// grid step of the formula, `discrepancy` otherwise.
    pub fn status(&self) -> &'static str {
        if self.points < 2 {
            return "degenerate_grid";
        }
        match (self.formula, self.argmin) {
            (None, _) => "no_formula",
            (_, None) => "sweep_failed",
            _ if self.discrepancy().unwrap_or(f64::INFINITY) <= self.step * (1.0 + 1e-9) => "ok",
            _ => "discrepancy",
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.convention,
            fmt_full(self.phi),
            opt(self.formula),
            opt(self.argmin),
            opt(self.min_error),
            opt(self.discrepancy()),
            fmt_full(self.step),
            self.points,
            self.status()
        )
    }
}

struct SweepJob<'a> {
    convention: &'static str,
    phi: f64,
    formula: Option<f64>,
    grid: &'a [f64],
    base: RotationRequest,
}

fn check_row(
    convention: &'static str,
    phi: f64,
    formula: Option<f64>,
    grid: &[f64],
    step: f64,
    base: &RotationRequest,
) -> CliResult<DetuningCheckRow> {
    let table = sweep_delta(phi, grid, base)?;
    let best = table.argmin();
    Ok(DetuningCheckRow {
        convention,
        phi,
        formula,
        argmin: best.map(|(_, d)| d),
        min_error: best.and_then(|(i, _)| table.errors()[i]),
        step,
        points: grid.len(),
        table,
    })
}

/// Sweeps the detuning under both orderings of the unwanted level and with
/// the unwanted level decoupled (γ = 0), and compares each argmin with its
/// closed-form value.
pub fn detuning_check_rows(cfg: &RunConfig) -> CliResult<Vec<DetuningCheckRow>> {
    let d = &cfg.detuning;
    let ph = &cfg.physics;
    let phi = d.phi();
    let grid = stepped(d.start_mev, d.stop_mev, d.step_mev);
    let decoupled_grid = stepped(d.decoupled_start_mev, d.decoupled_stop_mev, d.step_mev);
    let formula = modified_detuning(phi, ph.epsilon_mev, ph.sigma_mev).ok();

    let request = |params: QdmParams, with_decay: bool| RotationRequest {
        params,
        with_decay,
        detuning: DetuningRule::Fixed(0.0),
        ..ph.rotation(phi)
    };
    let below = request(
        QdmParams {
            u_above_t: false,
            ..ph.params()
        },
        ph.gamma_per_ns > 0.0,
    );
    let above = request(
        QdmParams {
            u_above_t: true,
            ..ph.params()
        },
        ph.gamma_per_ns > 0.0,
    );
    let decoupled = request(
        QdmParams {
            decouple_unwanted: true,
            gamma: 0.0,
            dephasing: 0.0,
            ..ph.params()
        },
        false,
    );
    // Decoupled: a detuning of +σ cot(φ/2) realizes R_Y(2π − φ).
    let jobs = [
        SweepJob {
            convention: "u_below_t",
            phi,
            formula,
            grid: &grid,
            base: below,
        },
        SweepJob {
            convention: "u_above_t",
            phi,
            formula,
            grid: &grid,
            base: above,
        },
        SweepJob {
            convention: "decoupled",
            phi: TAU - phi,
            formula: Some(two_level_detuning(phi, ph.sigma_mev)),
            grid: &decoupled_grid,
            base: decoupled,
        },
    ];
    jobs.par_iter()
        .map(|j| check_row(j.convention, j.phi, j.formula, j.grid, d.step_mev, &j.base))
        .collect()
}

pub fn cmd_detuning_check(cfg: &RunConfig, out: &Path) -> CliResult<CommandOutput> {
    let rows = detuning_check_rows(cfg)?;
    let mut csv = format!("{DETUNING_CHECK_HEADER}\n");
    let mut curves = String::from("convention,delta_meV,error,leakage\n");
    for r in &rows {
        let _ = writeln!(csv, "{}", r.csv_line());
        for p in &r.table.points {
            let rep = p.outcome.as_ref().ok();
            let _ = writeln!(
                curves,
                "{},{},{},{}",
                r.convention,
                fmt_full(p.param),
                opt(rep.map(|x| x.error)),
                opt(rep.map(|x| x.leakage))
            );
        }
    }
    let mut files = Vec::new();
    write_file(out, "detuning_check.csv", &csv, &mut files)?;
    write_file(out, "detuning_sweep.csv", &curves, &mut files)?;

    let mut summary = String::from("detuning-check:");
    for r in &rows {
        let _ = write!(
            summary,
            "\n  {:10} formula={} argmin={} status={}",
            r.convention,
            r.formula.map_or("n/a".into(), |x| format!("{x:.6}")),
            r.argmin.map_or("n/a".into(), |x| format!("{x:.6}")),
            r.status()
        );
    }
    Ok(CommandOutput { files, summary })
}

// ---------------------------------------------------------------------------
// verify

/// Reads an `index,re,im` amplitude dump. The length must be a power of two.
pub fn read_state_dump(text: &str) -> Result<StateVector, ConfigError> {
    let field = "verify.state_file";
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match parts.as_slice() {
            [i, re, im] => i
                .parse::<usize>()
                .ok()
                .zip(re.parse::<f64>().ok())
                .zip(im.parse::<f64>().ok())
                .map(|((i, re), im)| (i, re, im)),
            _ => None,
        };
        let e = parsed.ok_or_else(|| {
            ConfigError::new(field, format!("line {}: expected index,re,im", lineno + 1))
        })?;
        entries.push(e);
    }
    let dim = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    if dim < 2 || !dim.is_power_of_two() {
        return Err(ConfigError::new(
            field,
            format!("dimension {dim} is not a power of two ≥ 2"),
        ));
    }
    let mut amps = vec![qdm_core::quantum::C64::new(0.0, 0.0); dim];
    for (i, re, im) in entries {
        amps[i] = qdm_core::quantum::C64::new(re, im);
    }
    let n = dim.trailing_zeros() as usize;
    StateVector::from_slice(&amps, vec![2; n]).map_err(|e| ConfigError::new(field, e.to_string()))
}

fn verify_group(cfg: &RunConfig, n_qubits: usize) -> CliResult<StabilizerGroup> {
    let target = cfg.protocol.target.into();
    Ok(match cfg.protocol.encoding {
        EncodingName::TimeBin => target_group(target, n_qubits)?,
        EncodingName::PolarizationEnergy => {
            if n_qubits < 2 {
                return Err(ConfigError::new(
                    "verify.state_file",
                    "need spin plus at least one photon",
                )
                .into());
            }
            lr_target_group(target, n_qubits - 1)?
        }
    })
}

/// Stabilizer certification of a dumped state, or of a fresh run at
/// `n_max` photons.
pub fn certification(cfg: &RunConfig) -> CliResult<CertificationReport> {
    let state: QuantumState = match &cfg.verify.state_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                ConfigError::new("verify.state_file", format!("{}: {e}", path.display()))
            })?;
            read_state_dump(&text)?.into()
        }
        None => {
            let gates = gate_source(cfg)?;
            protocol_row(cfg, &gates, cfg.protocol.n_max, cfg.protocol.cyclicity)?.state
        }
    };
    let group = verify_group(cfg, state.dims().len())?;
    Ok(certify(&state, &group)?)
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> CliResult<CommandOutput> {
    let report = certification(cfg)?;
    let mut files = Vec::new();
    write_file(out, "verify.csv", &report.to_csv(), &mut files)?;
    Ok(CommandOutput {
        files,
        summary: format!("verify: {}", report.summary()),
    })
}
