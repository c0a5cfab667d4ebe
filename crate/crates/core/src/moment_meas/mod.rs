//! Moment measurement through diagonal phase unitaries.
//!
//! A bounded statistic `q` is stored in the phases `theta_j = arccos q_j` of a
//! diagonal unitary `U`. `U` is written as `exp(i p(D))` with `D` the
//! counting operator, expanded into commuting Pauli-Z strings, and compiled to
//! CNOT and Rz gates. A Hadamard-test circuit then reads `Re <q~|psi>`, which
//! is proportional to `sum_j q_j f_j` for a real state `psi ~ f`.

mod circuit;
mod compile;
mod gate_count;
mod interp;
mod phase;
mod zstring;

pub use circuit::{
    build_measurement_circuit, estimate_statistic, run_measurement, statistic_program,
    BlockMoments, BlockSelection, MomentEstimator, Readout, DENOMINATOR_FLOOR,
};
pub use compile::{
    compile_phase_unitary, compile_zstrings, compiled_diagonal, diagonal_deviation,
    walsh_coefficients, DiagonalPhaseProgram, ProgramMode, MAX_VERIFIED_QUBITS,
    VERIFICATION_TOLERANCE,
};
pub use gate_count::{gate_count, log_log_slope, CountMode, MAX_COUNT_QUBITS};
pub use interp::{
    exact_alpha, exact_alpha_up_to, fit_beta, max_residual, IndexPolynomial,
    DEFAULT_EXACT_MAX_QUBITS, INTERPOLATION_TOLERANCE,
};
pub use phase::{phase_profile, PhaseProfile, CLIP_TOLERANCE};
pub use zstring::{
    pauli_decompose_d, zstring_power, Coefficient, ZStringPolynomial, MAX_ZSTRING_QUBITS,
};
