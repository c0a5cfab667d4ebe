//! Dense statevector simulator.
//!
//! Qubit `0` is the most significant bit of a basis-state label: on `n`
//! qubits, qubit `q` corresponds to bit `n - 1 - q` of the amplitude index.
//! Multi-qubit gate payloads (diagonal phases, prepared amplitudes, dense
//! unitaries) are indexed the same way over their target list, with
//! `targets[0]` as the most significant bit.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amps: Vec<C64>,
}

/// `|0...0>` on `n_qubits` qubits.
pub fn new_state(n_qubits: usize) -> Result<QuantumState> {
    check_width(n_qubits)?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
    amps[0] = C64::new(1.0, 0.0);
    Ok(QuantumState { n_qubits, amps })
}

fn check_width(n_qubits: usize) -> Result<()> {
    if !(1..=MAX_QUBITS).contains(&n_qubits) {
        return Err(Error::Range {
            what: "n_qubits",
            value: n_qubits as i64,
            min: 1,
            max: MAX_QUBITS as i64,
        });
    }
    Ok(())
}

fn width_of(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "amplitude vector length {len} is not a power of two >= 2"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Normalized copy of `target` as a state (exact amplitude loading).
pub fn prepare_amplitudes(target: &[C64]) -> Result<QuantumState> {
    let n_qubits = width_of(target.len())?;
    check_width(n_qubits)?;
    let norm = target.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(QuantumState {
        n_qubits,
        amps: target.iter().map(|a| a / norm).collect(),
    })
}

pub fn prepare_real(target: &[f64]) -> Result<QuantumState> {
    let c: Vec<C64> = target.iter().map(|&x| C64::new(x, 0.0)).collect();
    prepare_amplitudes(&c)
}

/// `<a|b>`.
pub fn inner_product(a: &QuantumState, b: &QuantumState) -> Result<C64> {
    if a.amps.len() != b.amps.len() {
        return Err(Error::DimensionMismatch(format!(
            "states on {} and {} qubits",
            a.n_qubits, b.n_qubits
        )));
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

impl QuantumState {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::Index {
                index: qubit,
                len: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Exact `<Z>` on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let m = self.mask(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & m == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum())
    }

    /// Finite-shot estimate of `<Z>`: draws the number of `1` outcomes from a
    /// binomial with the exact outcome probability.
    pub fn sample_expectation_z<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        shots: u64,
        rng: &mut R,
    ) -> Result<f64> {
        if shots == 0 {
            return self.expectation_z(qubit);
        }
        let z = self.expectation_z(qubit)?;
        let p1 = ((1.0 - z) / 2.0).clamp(0.0, 1.0);
        let ones = Binomial::new(shots, p1)
            .map_err(|e| Error::InvalidGate(e.to_string()))?
            .sample(rng);
        Ok(1.0 - 2.0 * ones as f64 / shots as f64)
    }

    /// Multiply by a global phase so the largest-magnitude amplitude is real
    /// and positive. Returns the phase that was removed.
    pub fn remove_global_phase(&mut self) -> f64 {
        let mut best = 0;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() > self.amps[best].norm_sqr() {
                best = i;
            }
        }
        let phase = self.amps[best].arg();
        let rot = C64::from_polar(1.0, -phase);
        self.amps.iter_mut().for_each(|a| *a *= rot);
        phase
    }

    /// Real parts of the amplitudes.
    pub fn real_parts(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.re).collect()
    }

    /// Debug dump as `index,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "re", "im"])?;
        for (i, a) in self.amps.iter().enumerate() {
            w.write_record([i.to_string(), a.re.to_string(), a.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let cmask: usize = gate.controls.iter().map(|&q| self.mask(q)).sum();
        match &gate.kind {
            GateKind::H => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q([[h, h], [h, -h]], gate.targets[0], cmask);
            }
            GateKind::X | GateKind::Cnot => self.apply_x(gate.targets[0], cmask),
            GateKind::Z => {
                let one = C64::new(1.0, 0.0);
                self.apply_diag_1q(one, -one, gate.targets[0], cmask);
            }
            GateKind::Rz(theta) => {
                let a = C64::from_polar(1.0, -theta / 2.0);
                let b = C64::from_polar(1.0, theta / 2.0);
                self.apply_diag_1q(a, b, gate.targets[0], cmask);
            }
            GateKind::Ry(theta) => {
                let (s, c) = (theta / 2.0).sin_cos();
                let (c, s) = (C64::new(c, 0.0), C64::new(s, 0.0));
                self.apply_1q([[c, -s], [s, c]], gate.targets[0], cmask);
            }
            GateKind::Diagonal(phases) => {
                let factors: Vec<C64> = phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
                self.for_each_block(&gate.targets, cmask, |block| {
                    for (a, f) in block.iter_mut().zip(&factors) {
                        *a *= f;
                    }
                });
            }
            GateKind::Prepared { amplitudes, .. } => {
                let refl = Householder::mapping_zero_to(amplitudes);
                self.for_each_block(&gate.targets, cmask, |block| refl.apply(block));
            }
            GateKind::Unitary { matrix, .. } => {
                let dim = matrix.nrows();
                let mut tmp = vec![C64::new(0.0, 0.0); dim];
                self.for_each_block(&gate.targets, cmask, |block| {
                    for (r, t) in tmp.iter_mut().enumerate() {
                        *t = (0..dim).map(|c| matrix[(r, c)] * block[c]).sum();
                    }
                    block.copy_from_slice(&tmp);
                });
            }
            GateKind::MultiplexedRy { selectors, angles } => {
                let tmask = self.mask(gate.targets[0]);
                let sel_masks: Vec<usize> = selectors.iter().map(|&q| self.mask(q)).collect();
                let rots: Vec<(f64, f64)> = angles.iter().map(|a| (a / 2.0).sin_cos()).collect();
                for i in 0..self.amps.len() {
                    if i & tmask != 0 || i & cmask != cmask {
                        continue;
                    }
                    let sel = sel_masks
                        .iter()
                        .fold(0usize, |acc, &m| (acc << 1) | usize::from(i & m != 0));
                    let (s, c) = rots[sel];
                    let j = i | tmask;
                    let (a0, a1) = (self.amps[i], self.amps[j]);
                    self.amps[i] = a0 * c - a1 * s;
                    self.amps[j] = a0 * s + a1 * c;
                }
            }
        }
        Ok(())
    }

    fn apply_1q(&mut self, m: [[C64; 2]; 2], target: usize, cmask: usize) {
        let tmask = self.mask(target);
        for i in 0..self.amps.len() {
            if i & tmask != 0 || i & cmask != cmask {
                continue;
            }
            let j = i | tmask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_x(&mut self, target: usize, cmask: usize) {
        let tmask = self.mask(target);
        for i in 0..self.amps.len() {
            if i & tmask == 0 && i & cmask == cmask {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    fn apply_diag_1q(&mut self, d0: C64, d1: C64, target: usize, cmask: usize) {
        let tmask = self.mask(target);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & cmask == cmask {
                *a *= if i & tmask == 0 { d0 } else { d1 };
            }
        }
    }

    /// Gather the target-register amplitudes for every base index whose
    /// control bits are set, hand them to `f`, and scatter back.
    fn for_each_block(&mut self, targets: &[usize], cmask: usize, mut f: impl FnMut(&mut [C64])) {
        let k = targets.len();
        let masks: Vec<usize> = targets.iter().map(|&q| self.mask(q)).collect();
        let tmask_all: usize = masks.iter().sum();
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|s| {
                (0..k)
                    .filter(|b| (s >> (k - 1 - b)) & 1 == 1)
                    .map(|b| masks[b])
                    .sum()
            })
            .collect();
        let mut block = vec![C64::new(0.0, 0.0); 1 << k];
        for base in 0..self.amps.len() {
            if base & tmask_all != 0 || base & cmask != cmask {
                continue;
            }
            for (b, &o) in block.iter_mut().zip(&offsets) {
                *b = self.amps[base | o];
            }
            f(&mut block);
            for (b, &o) in block.iter().zip(&offsets) {
                self.amps[base | o] = *b;
            }
        }
    }
}

/// Unitary reflection (times a phase) sending `|0>` to a given unit vector.
struct Householder {
    phase: C64,
    w: Option<Vec<C64>>,
}

impl Householder {
    fn mapping_zero_to(psi: &[C64]) -> Self {
        let phase = if psi[0].norm() > 0.0 {
            C64::from_polar(1.0, psi[0].arg())
        } else {
            C64::new(1.0, 0.0)
        };
        // psi' = conj(phase) psi has a real, non-negative first entry.
        let mut w: Vec<C64> = psi.iter().map(|a| -a * phase.conj()).collect();
        w[0] += 1.0;
        let n = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n < 1e-300 {
            return Self { phase, w: None };
        }
        w.iter_mut().for_each(|a| *a /= n);
        Self { phase, w: Some(w) }
    }

    fn apply(&self, x: &mut [C64]) {
        if let Some(w) = &self.w {
            let proj: C64 = w.iter().zip(x.iter()).map(|(wi, xi)| wi.conj() * xi).sum();
            for (xi, wi) in x.iter_mut().zip(w) {
                *xi -= 2.0 * wi * proj;
            }
        }
        x.iter_mut().for_each(|a| *a *= self.phase);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    H,
    X,
    Z,
    /// `diag(e^{-i theta/2}, e^{i theta/2})`.
    Rz(f64),
    /// Real rotation `[[cos, -sin], [sin, cos]]` of half-angle `theta/2`.
    Ry(f64),
    Cnot,
    /// `diag(e^{i phases[s]})` over the target register.
    Diagonal(Vec<f64>),
    /// Unitary sending `|0...0>` to `amplitudes` (exact state loading).
    Prepared {
        label: String,
        amplitudes: Arc<Vec<C64>>,
    },
    /// Dense unitary on the target register.
    Unitary {
        label: String,
        matrix: Arc<DMatrix<C64>>,
    },
    /// Ry on the single target with an angle selected by the basis value of
    /// the selector register.
    MultiplexedRy {
        selectors: Vec<usize>,
        angles: Vec<f64>,
    },
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::Rz(_) => "rz",
            GateKind::Ry(_) => "ry",
            GateKind::Cnot => "cnot",
            GateKind::Diagonal(_) => "diagonal",
            GateKind::Prepared { .. } => "prepared",
            GateKind::Unitary { .. } => "unitary",
            GateKind::MultiplexedRy { .. } => "multiplexed_ry",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<usize>,
}

impl Gate {
    fn single(kind: GateKind, q: usize) -> Self {
        Self {
            kind,
            targets: vec![q],
            controls: Vec::new(),
        }
    }

    pub fn h(q: usize) -> Self {
        Self::single(GateKind::H, q)
    }

    pub fn x(q: usize) -> Self {
        Self::single(GateKind::X, q)
    }

    pub fn z(q: usize) -> Self {
        Self::single(GateKind::Z, q)
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        Self::single(GateKind::Rz(theta), q)
    }

    pub fn ry(q: usize, theta: f64) -> Self {
        Self::single(GateKind::Ry(theta), q)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            targets: vec![target],
            controls: vec![control],
        }
    }

    pub fn diagonal(targets: Vec<usize>, phases: Vec<f64>) -> Self {
        Self {
            kind: GateKind::Diagonal(phases),
            targets,
            controls: Vec::new(),
        }
    }

    /// Controlled phase `e^{i phi}` on `|1>` of `q`.
    pub fn phase(q: usize, phi: f64) -> Self {
        Self::diagonal(vec![q], vec![0.0, phi])
    }

    pub fn prepared(targets: Vec<usize>, label: impl Into<String>, state: &QuantumState) -> Self {
        Self {
            kind: GateKind::Prepared {
                label: label.into(),
                amplitudes: Arc::new(state.amplitudes().to_vec()),
            },
            targets,
            controls: Vec::new(),
        }
    }

    pub fn unitary(
        targets: Vec<usize>,
        label: impl Into<String>,
        matrix: Arc<DMatrix<C64>>,
    ) -> Self {
        Self {
            kind: GateKind::Unitary {
                label: label.into(),
                matrix,
            },
            targets,
            controls: Vec::new(),
        }
    }

    pub fn multiplexed_ry(target: usize, selectors: Vec<usize>, angles: Vec<f64>) -> Self {
        Self {
            kind: GateKind::MultiplexedRy { selectors, angles },
            targets: vec![target],
            controls: Vec::new(),
        }
    }

    /// Add control qubits (all conditioned on `|1>`).
    pub fn controlled_by(mut self, controls: &[usize]) -> Self {
        self.controls.extend_from_slice(controls);
        self
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let mut used = vec![false; n_qubits];
        let selectors: &[usize] = match &self.kind {
            GateKind::MultiplexedRy { selectors, .. } => selectors,
            _ => &[],
        };
        for &q in self.targets.iter().chain(&self.controls).chain(selectors) {
            if q >= n_qubits {
                return Err(Error::Index {
                    index: q,
                    len: n_qubits,
                });
            }
            if used[q] {
                return Err(Error::InvalidGate(format!(
                    "qubit {q} used twice in {} gate",
                    self.kind.name()
                )));
            }
            used[q] = true;
        }
        let k = self.targets.len();
        let single = matches!(
            self.kind,
            GateKind::H
                | GateKind::X
                | GateKind::Z
                | GateKind::Rz(_)
                | GateKind::Ry(_)
                | GateKind::Cnot
                | GateKind::MultiplexedRy { .. }
        );
        if single && k != 1 {
            return Err(Error::InvalidGate(format!(
                "{} gate needs exactly one target",
                self.kind.name()
            )));
        }
        match &self.kind {
            GateKind::Cnot if self.controls.is_empty() => {
                return Err(Error::InvalidGate("cnot without control".into()))
            }
            GateKind::Diagonal(p) if p.len() != 1 << k || k == 0 => {
                return Err(Error::InvalidGate(format!(
                    "diagonal on {k} qubits needs {} phases, got {}",
                    1usize << k,
                    p.len()
                )))
            }
            GateKind::Prepared { amplitudes, .. } if amplitudes.len() != 1 << k || k == 0 => {
                return Err(Error::InvalidGate("prepared state size mismatch".into()))
            }
            GateKind::Unitary { matrix, .. }
                if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k || k == 0 =>
            {
                return Err(Error::InvalidGate("unitary size mismatch".into()))
            }
            GateKind::MultiplexedRy { selectors, angles }
                if angles.len() != 1 << selectors.len() =>
            {
                return Err(Error::InvalidGate(
                    "multiplexed rotation angle count mismatch".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Ordered gate list over a fixed register width, with a per-kind tally.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    tally: BTreeMap<&'static str, usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            tally: BTreeMap::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        *self.tally.entry(gate.kind.name()).or_insert(0) += 1;
        self.gates.push(gate);
        Ok(())
    }

    pub fn tally(&self) -> &BTreeMap<&'static str, usize> {
        &self.tally
    }

    pub fn count(&self, kind: &str) -> usize {
        self.tally.get(kind).copied().unwrap_or(0)
    }

    pub fn run(&self, state: &mut QuantumState) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "circuit on {} qubits, state on {}",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        for g in &self.gates {
            state.apply(g)?;
        }
        Ok(())
    }
}

/// Quantum Fourier transform on `register` (`register[0]` most significant):
/// `|x> -> 2^{-t/2} sum_y exp(2 pi i x y / 2^t) |y>`.
pub fn append_qft(circuit: &mut Circuit, register: &[usize], inverse: bool) -> Result<()> {
    let t = register.len();
    let mut gates = Vec::new();
    for i in 0..t {
        gates.push(Gate::h(register[i]));
        for j in i + 1..t {
            let angle = std::f64::consts::PI / (1u64 << (j - i)) as f64;
            gates.push(Gate::phase(register[i], angle).controlled_by(&[register[j]]));
        }
    }
    for i in 0..t / 2 {
        gates.extend(swap(register[i], register[t - 1 - i]));
    }
    if inverse {
        gates.reverse();
        for g in &mut gates {
            if let GateKind::Diagonal(p) = &mut g.kind {
                p.iter_mut().for_each(|a| *a = -*a);
            }
        }
    }
    for g in gates {
        circuit.push(g)?;
    }
    Ok(())
}

fn swap(a: usize, b: usize) -> [Gate; 3] {
    [Gate::cnot(a, b), Gate::cnot(b, a), Gate::cnot(a, b)]
}
