//! Harrow-Hassidim-Lloyd solver on the statevector simulator.
//!
//! Register layout (qubit 0 most significant):
//!
//! ```text
//! 0            rotation ancilla
//! 1..=c        clock, most significant first
//! c + 1        dilation qubit
//! c + 2..      system register
//! ```
//!
//! The non-symmetric `A` is embedded in `H = [[0, A], [A^T, 0]]`. Controlled
//! powers of `exp(i H t0)` are applied as exact dense unitaries from the
//! eigendecomposition of `H`. Clock values are read in two's complement, so
//! the window of resolvable eigenvalues is `|lambda| t0 / 2pi < 1/2`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::history_state::{solve_ideal, HistoryLinearSystem};
use crate::linalg::csr_to_dense;
use crate::qsim::{
    append_qft, new_state, prepare_real, Circuit, Gate, QuantumState, C64, MAX_QUBITS,
};

pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-8;

/// Fraction of the clock's half-window occupied by the largest eigenvalue
/// under the default evolution time.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.375;

pub const DEFAULT_C_FACTOR: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct HhlConfig {
    pub clock_qubits: usize,
    /// Evolution time. Defaults to `2 pi * 3/8 / lambda_max`.
    pub t0: Option<f64>,
    /// Inversion constant. Defaults to `0.9 * lambda_min`.
    pub c: Option<f64>,
    /// Ancilla shots used to estimate the success probability; 0 for none.
    pub shots: u64,
    pub seed: u64,
}

impl Default for HhlConfig {
    fn default() -> Self {
        Self {
            clock_qubits: 8,
            t0: None,
            c: None,
            shots: 0,
            seed: 0,
        }
    }
}

impl HhlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clock_qubits < 2 {
            return Err(Error::Range {
                what: "clock_qubits",
                value: self.clock_qubits as i64,
                min: 2,
                max: MAX_QUBITS as i64,
            });
        }
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0) || !t0.is_finite() {
                return Err(Error::Domain {
                    what: "t0",
                    value: t0,
                    domain: "(0, inf)",
                });
            }
        }
        if let Some(c) = self.c {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Domain {
                    what: "c",
                    value: c,
                    domain: "(0, inf)",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HhlResult {
    /// Post-selected, renormalized state of the system register.
    pub solution_state: QuantumState,
    /// Probability of reading 1 on the rotation ancilla.
    pub success_probability: f64,
    /// Shot estimate of the same, when shots were requested.
    pub sampled_success_probability: Option<f64>,
    /// Squared norm of the ancilla-1 branch of the final state.
    pub branch_norm_sq: f64,
    pub fidelity_vs_reference: f64,
    pub clock_qubits: usize,
    pub t0: f64,
    pub c: f64,
    /// Largest and smallest `|eigenvalue|` of the dilation.
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub total_qubits: usize,
    pub circuit_length: usize,
}

/// `H = [[0, A], [A^T, 0]]` and `b' = (b, 0)`.
pub fn hermitian_dilation(a: &DMatrix<f64>, b: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, b has {} entries",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, n), (n, n)).copy_from(a);
    h.view_mut((n, 0), (n, n)).copy_from(&a.transpose());
    let mut bp = b.to_vec();
    bp.resize(2 * n, 0.0);
    Ok((h, bp))
}

/// `|<a|ref>|^2` with `ref` normalized.
pub fn fidelity(a: &QuantumState, reference: &[f64]) -> Result<f64> {
    if a.dim() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} amplitudes, reference {}",
            a.dim(),
            reference.len()
        )));
    }
    let r = prepare_real(reference)?;
    let overlap: C64 = a
        .amplitudes()
        .iter()
        .zip(r.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(overlap.norm_sqr() / a.norm().powi(2))
}

/// HHL on a history system, scored against `solve_ideal`.
pub fn hhl_solve(sys: &HistoryLinearSystem, cfg: &HhlConfig) -> Result<HhlResult> {
    let reference = solve_ideal(sys)?;
    hhl_solve_dense(
        &csr_to_dense(&sys.matrix),
        &sys.rhs,
        Some(&reference.values),
        cfg,
    )
}

/// HHL on a dense system. Without a reference, `A^{-1} b` from a dense LU is
/// used.
pub fn hhl_solve_dense(
    a: &DMatrix<f64>,
    b: &[f64],
    reference: Option<&[f64]>,
    cfg: &HhlConfig,
) -> Result<HhlResult> {
    cfg.validate()?;
    let dim = a.nrows();
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "system dimension {dim} is not a power of two >= 2"
        )));
    }
    let n_sys = dim.trailing_zeros() as usize;
    let clock = cfg.clock_qubits;
    let total = n_sys + clock + 2;
    if total > MAX_QUBITS {
        return Err(Error::QubitBudget {
            required: total,
            limit: MAX_QUBITS,
        });
    }
    let (h, bp) = hermitian_dilation(a, b)?;
    let reference = match reference {
        Some(r) => r.to_vec(),
        None => a
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(b))
            .ok_or(Error::Singular { row: 0 })?
            .as_slice()
            .to_vec(),
    };

    let eig = SymmetricEigen::new(h);
    let abs_eigs: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
    let lambda_max = abs_eigs.iter().copied().fold(0.0, f64::max);
    let lambda_min = abs_eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lambda_min > 0.0) {
        return Err(Error::Singular { row: 0 });
    }
    let t0 = cfg
        .t0
        .unwrap_or(2.0 * PI * DEFAULT_WINDOW_FRACTION / lambda_max);
    let c = cfg.c.unwrap_or(DEFAULT_C_FACTOR * lambda_min);

    let clock_reg: Vec<usize> = (1..=clock).collect();
    let work: Vec<usize> = (clock + 1..total).collect();
    let powers: Vec<Arc<DMatrix<C64>>> = (0..clock)
        .map(|i| Arc::new(evolution(&eig, t0 * (1u64 << (clock - 1 - i)) as f64)))
        .collect();
    let inverse_powers: Vec<Arc<DMatrix<C64>>> =
        powers.iter().map(|u| Arc::new(u.adjoint())).collect();

    let mut circuit = Circuit::new(total);
    circuit.push(Gate::prepared(work.clone(), "b", &prepare_real(&bp)?))?;
    for &q in &clock_reg {
        circuit.push(Gate::h(q))?;
    }
    for (i, &q) in clock_reg.iter().enumerate() {
        circuit
            .push(Gate::unitary(work.clone(), "exp(iHt)", powers[i].clone()).controlled_by(&[q]))?;
    }
    append_qft(&mut circuit, &clock_reg, true)?;
    circuit.push(Gate::multiplexed_ry(
        0,
        clock_reg.clone(),
        inversion_angles(clock, t0, c),
    ))?;
    append_qft(&mut circuit, &clock_reg, false)?;
    for (i, &q) in clock_reg.iter().enumerate().rev() {
        circuit.push(
            Gate::unitary(work.clone(), "exp(-iHt)", inverse_powers[i].clone()).controlled_by(&[q]),
        )?;
    }
    for &q in &clock_reg {
        circuit.push(Gate::h(q))?;
    }

    let mut state = new_state(total)?;
    circuit.run(&mut state)?;
    let success_probability = (1.0 - state.expectation_z(0)?) / 2.0;
    let sampled_success_probability = if cfg.shots > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Some((1.0 - state.sample_expectation_z(0, cfg.shots, &mut rng)?) / 2.0)
    } else {
        None
    };
    if !(success_probability >= MIN_SUCCESS_PROBABILITY) {
        return Err(Error::PostSelection {
            probability: success_probability,
            threshold: MIN_SUCCESS_PROBABILITY,
        });
    }

    let half = state.dim() / 2;
    let branch_norm_sq = state.amplitudes()[half..]
        .iter()
        .map(|a| a.norm_sqr())
        .sum();

    // Ancilla 1, clock 0, dilation 1.
    let base = (1usize << (total - 1)) | (1usize << n_sys);
    let branch: Vec<C64> = state.amplitudes()[base..base + dim].to_vec();
    let mut solution_state = crate::qsim::prepare_amplitudes(&branch)?;
    solution_state.remove_global_phase();
    let fidelity_vs_reference = fidelity(&solution_state, &reference)?;

    Ok(HhlResult {
        solution_state,
        success_probability,
        sampled_success_probability,
        branch_norm_sq,
        fidelity_vs_reference,
        clock_qubits: clock,
        t0,
        c,
        lambda_max,
        lambda_min,
        total_qubits: total,
        circuit_length: circuit.len(),
    })
}

/// `exp(i H t)` from the eigendecomposition of `H`.
fn evolution(eig: &SymmetricEigen<f64, nalgebra::Dyn>, t: f64) -> DMatrix<C64> {
    let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, l * t)));
    &v * d * v.transpose()
}

/// `2 arcsin(c / lambda_hat(x))` for every clock value, with
/// `lambda_hat(x) = 2 pi signed(x) / (2^clock t0)` and angle 0 at `x = 0`.
fn inversion_angles(clock: usize, t0: f64, c: f64) -> Vec<f64> {
    let size = 1i64 << clock;
    (0..size)
        .map(|x| {
            let signed = if x >= size / 2 { x - size } else { x };
            if signed == 0 {
                return 0.0;
            }
            let lambda = 2.0 * PI * signed as f64 / (size as f64 * t0);
            2.0 * (c / lambda).clamp(-1.0, 1.0).asin()
        })
        .collect()
}
