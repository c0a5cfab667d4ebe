use std::fmt;

use num_complex::Complex64;

use super::interp::IndexPolynomial;
use super::zstring::{Coefficient, ZStringPolynomial};
use crate::error::{Error, Result};
use crate::qsim::{new_state, Circuit, Gate};

/// Registers up to this size are checked against the target diagonal after
/// compilation.
pub const MAX_VERIFIED_QUBITS: usize = 10;

pub const VERIFICATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramMode {
    Exact,
    Approx(usize),
}

impl fmt::Display for ProgramMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProgramMode::Exact => write!(f, "exact"),
            ProgramMode::Approx(m) => write!(f, "approx(m={m})"),
        }
    }
}

/// Compiled diagonal unitary `sum_j e^{i p(j)} |j><j|`.
#[derive(Debug, Clone)]
pub struct DiagonalPhaseProgram {
    pub mode: ProgramMode,
    pub n_qubits: usize,
    pub polynomial: IndexPolynomial,
    /// Z-string coefficients `c_s` with `p(D) = sum_s c_s Z_s`.
    pub zstrings: ZStringPolynomial<f64>,
    /// Identity coefficient, applied as a global phase.
    pub global_phase: f64,
    /// CNOT/Rz circuit on qubits `0..n_qubits`, equal to the diagonal up to
    /// `global_phase`.
    pub circuit: Circuit,
}

impl DiagonalPhaseProgram {
    /// Target phases `p(j)` on every basis state.
    pub fn target_phases(&self) -> Vec<f64> {
        (0..1u64 << self.n_qubits)
            .map(|j| self.polynomial.evaluate(j))
            .collect()
    }

    pub fn cnot_count(&self) -> usize {
        self.circuit.count("cnot")
    }

    pub fn rz_count(&self) -> usize {
        self.circuit.count("rz")
    }

    /// Append the program on `register`, conditioned on all `controls`.
    ///
    /// Only the `Rz` gates carry the controls; the parity ladders around
    /// them cancel when the controls are off. The global phase (shifted by
    /// `extra_phase`) becomes a relative phase on the control register and
    /// is dropped when there are no controls.
    pub fn append_controlled(
        &self,
        circuit: &mut Circuit,
        register: &[usize],
        controls: &[usize],
        extra_phase: f64,
    ) -> Result<()> {
        if register.len() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "program on {} qubits, register of {}",
                self.n_qubits,
                register.len()
            )));
        }
        for g in self.circuit.gates() {
            let mut mapped = g.clone();
            mapped.targets = g.targets.iter().map(|&q| register[q]).collect();
            mapped.controls = g.controls.iter().map(|&q| register[q]).collect();
            if mapped.kind.name() == "rz" {
                mapped = mapped.controlled_by(controls);
            }
            circuit.push(mapped)?;
        }
        let phase = self.global_phase + extra_phase;
        if let Some((&first, rest)) = controls.split_first() {
            if phase != 0.0 {
                circuit.push(Gate::phase(first, phase).controlled_by(rest))?;
            }
        }
        Ok(())
    }
}

/// Circuit for `exp(i sum_s c_s Z_s)` without the identity term.
///
/// Each string is a CNOT ladder from its lower support qubits onto the
/// highest-index one, `Rz(-2 c_s)` there, and the reverse ladder.
pub fn compile_zstrings(zs: &ZStringPolynomial<f64>) -> Result<Circuit> {
    let n = zs.n_qubits();
    let mut circuit = Circuit::new(n);
    for (&support, &c) in zs.terms() {
        if support == 0 {
            continue;
        }
        let qubits: Vec<usize> = (0..n)
            .filter(|&q| support >> (n - 1 - q) & 1 == 1)
            .collect();
        let (&last, rest) = qubits.split_last().expect("non-empty support");
        for &q in rest {
            circuit.push(Gate::cnot(q, last))?;
        }
        circuit.push(Gate::rz(last, -2.0 * c))?;
        for &q in rest.iter().rev() {
            circuit.push(Gate::cnot(q, last))?;
        }
    }
    Ok(circuit)
}

/// Compile the diagonal unitary with phases `p(j)` for the given polynomial.
pub fn compile_phase_unitary(
    poly: &IndexPolynomial,
    mode: ProgramMode,
    n: usize,
) -> Result<DiagonalPhaseProgram> {
    let exact = poly.zstring_expansion(n)?;
    let mut zstrings = ZStringPolynomial::zero(n);
    for (&s, c) in exact.terms() {
        let v = c.to_f64();
        if !v.is_finite() {
            return Err(Error::Overflow);
        }
        zstrings.add_term(s, v);
    }
    let global_phase = zstrings.terms().get(&0).copied().unwrap_or(0.0);
    let circuit = compile_zstrings(&zstrings)?;
    let program = DiagonalPhaseProgram {
        mode,
        n_qubits: n,
        polynomial: poly.clone(),
        zstrings,
        global_phase,
        circuit,
    };
    if n <= MAX_VERIFIED_QUBITS {
        let deviation = diagonal_deviation(&program)?;
        if !(deviation < VERIFICATION_TOLERANCE) {
            return Err(Error::Verification { deviation });
        }
    }
    Ok(program)
}

/// Diagonal of the compiled circuit times the global phase, read off by
/// running it on the uniform superposition.
pub fn compiled_diagonal(program: &DiagonalPhaseProgram) -> Result<Vec<Complex64>> {
    let n = program.n_qubits;
    let mut state = new_state(n)?;
    for q in 0..n {
        state.apply(&Gate::h(q))?;
    }
    program.circuit.run(&mut state)?;
    let scale = ((1u64 << n) as f64).sqrt();
    let g = Complex64::from_polar(scale, program.global_phase);
    Ok(state.amplitudes().iter().map(|a| a * g).collect())
}

/// Largest `|d_j - e^{i p(j)}|` between the compiled and target diagonals.
pub fn diagonal_deviation(program: &DiagonalPhaseProgram) -> Result<f64> {
    let diag = compiled_diagonal(program)?;
    Ok(diag
        .iter()
        .zip(program.target_phases())
        .map(|(d, p)| (d - Complex64::from_polar(1.0, p)).norm())
        .fold(0.0, f64::max))
}

/// Z-string coefficients of an arbitrary diagonal `diag(values)` by the
/// Walsh-Hadamard transform: `c_s = 2^{-n} sum_j values_j (-1)^{|j & s|}`.
pub fn walsh_coefficients(values: &[f64]) -> Result<ZStringPolynomial<f64>> {
    let len = values.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "diagonal length {len} is not a power of two >= 2"
        )));
    }
    let n = len.trailing_zeros() as usize;
    let mut a = values.to_vec();
    let mut h = 1;
    while h < len {
        for i in (0..len).step_by(2 * h) {
            for j in i..i + h {
                let (x, y) = (a[j], a[j + h]);
                a[j] = x + y;
                a[j + h] = x - y;
            }
        }
        h *= 2;
    }
    let mut zs = ZStringPolynomial::zero(n);
    for (s, v) in a.into_iter().enumerate() {
        zs.add_term(s as u64, v / len as f64);
    }
    Ok(zs)
}

#[cfg(test)]
mod tests {
    use super::super::interp::{exact_alpha, fit_beta};
    use super::super::phase::phase_profile;
    use super::super::zstring::pauli_decompose_d;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn phi_values(n: usize) -> Vec<f64> {
        let big_n = 1usize << n;
        (0..big_n)
            .map(|j| (j as f64 + 0.5) / big_n as f64)
            .collect()
    }

    #[test]
    fn single_z_term_is_rz() {
        let mut zs = ZStringPolynomial::zero(1);
        zs.add_term(1, 0.3);
        let c = compile_zstrings(&zs).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.gates()[0], Gate::rz(0, -0.6));
        let mut s = new_state(1).unwrap();
        c.run(&mut s).unwrap();
        assert!((s.amplitudes()[0] - Complex64::from_polar(1.0, 0.3)).norm() < 1e-15);
        let mut s = new_state(1).unwrap();
        s.apply(&Gate::x(0)).unwrap();
        c.run(&mut s).unwrap();
        assert!((s.amplitudes()[1] - Complex64::from_polar(1.0, -0.3)).norm() < 1e-15);
    }

    #[test]
    fn compiling_d_gives_linear_phases() {
        let poly = IndexPolynomial::from_f64(&[0.0, 1.0]).unwrap();
        let prog = compile_phase_unitary(&poly, ProgramMode::Exact, 2).unwrap();
        let diag = compiled_diagonal(&prog).unwrap();
        for (j, d) in diag.iter().enumerate() {
            assert!((d - Complex64::from_polar(1.0, j as f64)).norm() < 1e-12);
        }
        assert_eq!(prog.global_phase, 1.5);
        assert_eq!(prog.cnot_count(), 0);
        assert_eq!(prog.rz_count(), 2);
    }

    #[test]
    fn exact_program_for_phi_on_three_qubits() {
        let p = phase_profile(&phi_values(3), "phi").unwrap();
        let prog = compile_phase_unitary(&exact_alpha(&p).unwrap(), ProgramMode::Exact, 3).unwrap();
        let diag = compiled_diagonal(&prog).unwrap();
        for (d, &t) in diag.iter().zip(&p.theta) {
            assert!((d - Complex64::from_polar(1.0, t)).norm() < 1e-8);
        }
    }

    #[test]
    fn expansion_matches_walsh_transform() {
        for n in 1..=5 {
            let p = phase_profile(&phi_values(n), "phi").unwrap();
            let prog =
                compile_phase_unitary(&exact_alpha(&p).unwrap(), ProgramMode::Exact, n).unwrap();
            let oracle = walsh_coefficients(&p.theta).unwrap();
            for s in 0..1u64 << n {
                let a = prog.zstrings.terms().get(&s).copied().unwrap_or(0.0);
                let b = oracle.terms().get(&s).copied().unwrap_or(0.0);
                assert!((a - b).abs() < 1e-12, "n={n} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn walsh_of_counting_diagonal_is_d() {
        let values: Vec<f64> = (0..8).map(|j| j as f64).collect();
        assert_eq!(
            walsh_coefficients(&values).unwrap(),
            pauli_decompose_d::<f64>(3).unwrap()
        );
    }

    #[test]
    fn random_profiles_compile_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50 {
            let n = 1 + trial % 5;
            let q: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let p = phase_profile(&q, "random").unwrap();
            let prog =
                compile_phase_unitary(&exact_alpha(&p).unwrap(), ProgramMode::Exact, n).unwrap();
            let diag = compiled_diagonal(&prog).unwrap();
            for (d, &t) in diag.iter().zip(&p.theta) {
                assert!((d - Complex64::from_polar(1.0, t)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn approximate_program_matches_fitted_polynomial() {
        let p = phase_profile(&phi_values(6), "phi").unwrap();
        for m in [2, 4, 6] {
            let beta = fit_beta(&p, m).unwrap();
            let prog = compile_phase_unitary(&beta, ProgramMode::Approx(m), 6).unwrap();
            assert!(diagonal_deviation(&prog).unwrap() < 1e-8);
            // Degree-m polynomials in D only reach strings of weight <= m.
            assert!(prog
                .zstrings
                .terms()
                .keys()
                .all(|s| s.count_ones() as usize <= m));
        }
    }

    #[test]
    fn ladder_cost_per_string() {
        let mut zs = ZStringPolynomial::zero(4);
        zs.add_term(0b1011, 0.2);
        let c = compile_zstrings(&zs).unwrap();
        assert_eq!(c.count("cnot"), 4);
        assert_eq!(c.count("rz"), 1);
    }

    #[test]
    fn controlled_program_acts_only_when_controls_set() {
        let p = phase_profile(&phi_values(2), "phi").unwrap();
        let prog = compile_phase_unitary(&exact_alpha(&p).unwrap(), ProgramMode::Exact, 2).unwrap();
        let mut circuit = Circuit::new(3);
        prog.append_controlled(&mut circuit, &[1, 2], &[0], 0.0)
            .unwrap();
        for ctrl in [0usize, 1] {
            for j in 0..4usize {
                let mut s = new_state(3).unwrap();
                let idx = ctrl << 2 | j;
                for q in 0..3 {
                    if idx >> (2 - q) & 1 == 1 {
                        s.apply(&Gate::x(q)).unwrap();
                    }
                }
                circuit.run(&mut s).unwrap();
                let expected = if ctrl == 1 {
                    Complex64::from_polar(1.0, p.theta[j])
                } else {
                    Complex64::new(1.0, 0.0)
                };
                assert!((s.amplitudes()[idx] - expected).norm() < 1e-12);
            }
        }
    }
}
