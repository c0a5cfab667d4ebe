//! Hadamard-test measurement of `Re <q~|psi>` and the moment estimators built
//! on it.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;

use super::compile::{compile_phase_unitary, DiagonalPhaseProgram, ProgramMode};
use super::interp::{exact_alpha, fit_beta};
use super::phase::phase_profile;
use crate::error::{Error, Result};
use crate::qsim::{new_state, Circuit, Gate, QuantumState};

/// Denominators below this are treated as a block with no mass.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

const ANCILLA: usize = 0;

/// Restrict the statistic to one time block of a history state.
///
/// The system register is `time_qubits` time-index qubits (most significant)
/// followed by the program's register. Off-block cells get phase `pi/2`,
/// i.e. statistic value 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSelection {
    pub time_qubits: usize,
    pub block: usize,
}

/// Build the measurement circuit on `1 + n` qubits (ancilla first).
///
/// Gate order: `H` on the ancilla, controlled preparation of `psi`, `X` on the
/// ancilla, controlled `H` on every system qubit, controlled `U`, `H` on the
/// ancilla. Reading `<Z>` on the ancilla gives `Re <q~|psi>` with
/// `|q~> = U H^n |0>`.
pub fn build_measurement_circuit(
    psi: &QuantumState,
    program: &DiagonalPhaseProgram,
    selection: Option<BlockSelection>,
) -> Result<Circuit> {
    let n = psi.n_qubits();
    let time_qubits = selection.map_or(0, |s| s.time_qubits);
    if time_qubits + program.n_qubits != n {
        return Err(Error::DimensionMismatch(format!(
            "state on {n} qubits, program on {} plus {time_qubits} time qubits",
            program.n_qubits
        )));
    }
    if let Some(s) = selection {
        if s.block >= 1 << s.time_qubits {
            return Err(Error::Index {
                index: s.block,
                len: 1 << s.time_qubits,
            });
        }
    }
    let system: Vec<usize> = (1..=n).collect();
    let mut c = Circuit::new(n + 1);
    c.push(Gate::h(ANCILLA))?;
    c.push(Gate::prepared(system.clone(), "psi", psi).controlled_by(&[ANCILLA]))?;
    c.push(Gate::x(ANCILLA))?;
    for &q in &system {
        c.push(Gate::h(q).controlled_by(&[ANCILLA]))?;
    }
    match selection {
        None => program.append_controlled(&mut c, &system, &[ANCILLA], 0.0)?,
        Some(s) => {
            let time = &system[..s.time_qubits];
            let flips: Vec<usize> = time
                .iter()
                .enumerate()
                .filter(|&(i, _)| s.block >> (s.time_qubits - 1 - i) & 1 == 0)
                .map(|(_, &q)| q)
                .collect();
            let mut controls = vec![ANCILLA];
            controls.extend_from_slice(time);
            c.push(Gate::phase(ANCILLA, FRAC_PI_2))?;
            for &q in &flips {
                c.push(Gate::x(q))?;
            }
            program.append_controlled(&mut c, &system[s.time_qubits..], &controls, -FRAC_PI_2)?;
            for &q in &flips {
                c.push(Gate::x(q))?;
            }
        }
    }
    c.push(Gate::h(ANCILLA))?;
    Ok(c)
}

/// How the ancilla `<Z>` is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Exact,
    Shots(u64),
}

/// Run the measurement circuit from `|0...0>` and read the ancilla.
pub fn run_measurement<R: Rng + ?Sized>(
    circuit: &Circuit,
    readout: Readout,
    rng: &mut R,
) -> Result<f64> {
    let mut state = new_state(circuit.n_qubits())?;
    circuit.run(&mut state)?;
    match readout {
        Readout::Exact => state.expectation_z(ANCILLA),
        Readout::Shots(shots) => state.sample_expectation_z(ANCILLA, shots, rng),
    }
}

/// Diagonal program for a statistic on one register.
pub fn statistic_program(q_values: &[f64], mode: ProgramMode) -> Result<DiagonalPhaseProgram> {
    let profile = phase_profile(q_values, "q")?;
    let n = profile.len().trailing_zeros() as usize;
    let poly = match mode {
        ProgramMode::Exact => exact_alpha(&profile)?,
        ProgramMode::Approx(m) => fit_beta(&profile, m)?,
    };
    compile_phase_unitary(&poly, mode, n)
}

/// Ratio of two measurement runs with `q` and the block indicator:
/// `sum_block q_j f_j / sum_block f_j`.
pub fn estimate_statistic(
    psi: &QuantumState,
    q_values: &[f64],
    selection: Option<BlockSelection>,
    mode: ProgramMode,
) -> Result<f64> {
    let numerator = statistic_program(q_values, mode)?;
    let indicator = statistic_program(&vec![1.0; q_values.len()], ProgramMode::Exact)?;
    let mut rng = rand::rng();
    let psi = real_state(psi);
    let num = run_measurement(
        &build_measurement_circuit(&psi, &numerator, selection)?,
        Readout::Exact,
        &mut rng,
    )?;
    let den = run_measurement(
        &build_measurement_circuit(&psi, &indicator, selection)?,
        Readout::Exact,
        &mut rng,
    )?;
    ratio(num, den)
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if !(den.abs() >= DENOMINATOR_FLOOR) {
        return Err(Error::DivisionUnderflow { value: den });
    }
    Ok(num / den)
}

fn real_state(psi: &QuantumState) -> QuantumState {
    let mut s = psi.clone();
    s.remove_global_phase();
    s
}

/// Mean and variance of the composition in one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Programs for `q = phi`, `q = phi^2` and the indicator on a composition
/// grid, compiled once and reused for every block.
#[derive(Debug, Clone)]
pub struct MomentEstimator {
    pub mode: ProgramMode,
    pub first: DiagonalPhaseProgram,
    pub second: DiagonalPhaseProgram,
    pub indicator: DiagonalPhaseProgram,
}

impl MomentEstimator {
    pub fn new(centers: &[f64], mode: ProgramMode) -> Result<Self> {
        let sq: Vec<f64> = centers.iter().map(|x| x * x).collect();
        Ok(Self {
            mode,
            first: statistic_program(centers, mode)?,
            second: statistic_program(&sq, mode)?,
            indicator: statistic_program(&vec![1.0; centers.len()], ProgramMode::Exact)?,
        })
    }

    /// `E[phi]` and `E[phi^2] - E[phi]^2` over the selected block.
    pub fn block_moments<R: Rng + ?Sized>(
        &self,
        psi: &QuantumState,
        selection: Option<BlockSelection>,
        readout: Readout,
        rng: &mut R,
    ) -> Result<BlockMoments> {
        let psi = real_state(psi);
        let mut measure = |p: &DiagonalPhaseProgram| {
            run_measurement(
                &build_measurement_circuit(&psi, p, selection)?,
                readout,
                rng,
            )
        };
        let den = measure(&self.indicator)?;
        let m1 = ratio(measure(&self.first)?, den)?;
        let m2 = ratio(measure(&self.second)?, den)?;
        Ok(BlockMoments {
            mean: m1,
            variance: m2 - m1 * m1,
        })
    }
}
