//! Commutative algebra of Pauli-Z strings.
//!
//! A Z-string is identified by its support, stored as a bitmask laid out like
//! a basis-state label (qubit `q` of `n` is bit `n - 1 - q`). Products follow
//! `Z^2 = I`: supports combine by XOR and coefficients multiply. On basis
//! state `|j>` the string with support `s` has eigenvalue
//! `(-1)^popcount(j & s)`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub const MAX_ZSTRING_QUBITS: usize = 12;

/// Scalar field for Z-string coefficients.
pub trait Coefficient:
    Clone + PartialEq + Zero + One + Add<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// Exact conversion of a finite double.
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn overflowed(&self) -> bool {
        false
    }
}

impl Coefficient for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn overflowed(&self) -> bool {
        !self.is_finite() || self.abs() > 1e300
    }
}

impl Coefficient for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite coefficient")
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZStringPolynomial<T = f64> {
    n_qubits: usize,
    terms: BTreeMap<u64, T>,
}

impl<T: Coefficient> ZStringPolynomial<T> {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut p = Self::zero(n_qubits);
        p.terms.insert(0, T::one());
        p
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &BTreeMap<u64, T> {
        &self.terms
    }

    /// Coefficient of the string on the given qubits (0-indexed).
    pub fn coefficient(&self, qubits: &[usize]) -> T {
        let mask = qubits
            .iter()
            .fold(0u64, |m, &q| m | (1 << (self.n_qubits - 1 - q)));
        self.terms.get(&mask).cloned().unwrap_or_else(T::zero)
    }

    pub fn add_term(&mut self, support: u64, c: T) {
        let entry = self.terms.entry(support).or_insert_with(T::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&support);
        }
    }

    pub fn scaled(&self, c: &T) -> Self {
        let mut out = Self::zero(self.n_qubits);
        for (&s, v) in &self.terms {
            out.add_term(s, v.clone() * c.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&s, v) in &other.terms {
            out.add_term(s, v.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "Z-string polynomials on {} and {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        let mut out = Self::zero(self.n_qubits);
        for (&s1, c1) in &self.terms {
            for (&s2, c2) in &other.terms {
                out.add_term(s1 ^ s2, c1.clone() * c2.clone());
            }
        }
        if out.terms.values().any(|c| c.overflowed()) {
            return Err(Error::Overflow);
        }
        Ok(out)
    }

    /// Diagonal entry on basis state `|j>`.
    pub fn evaluate(&self, j: u64) -> T {
        let mut acc = T::zero();
        for (&s, c) in &self.terms {
            if (j & s).count_ones().is_multiple_of(2) {
                acc = acc + c.clone();
            } else {
                acc = acc + (-c.clone());
            }
        }
        acc
    }
}

/// `D = diag(0, 1, ..., 2^n - 1)` as
/// `((2^n - 1) I - sum_q 2^{n-1-q} Z_q) / 2` with qubit `q` 0-indexed.
pub fn pauli_decompose_d<T: Coefficient>(n: usize) -> Result<ZStringPolynomial<T>> {
    if !(1..=MAX_ZSTRING_QUBITS).contains(&n) {
        return Err(Error::Range {
            what: "n",
            value: n as i64,
            min: 1,
            max: MAX_ZSTRING_QUBITS as i64,
        });
    }
    let mut d = ZStringPolynomial::zero(n);
    d.add_term(0, T::from_f64(((1u64 << n) - 1) as f64 / 2.0));
    for q in 0..n {
        let weight = 1u64 << (n - 1 - q);
        d.add_term(weight, T::from_f64(-(weight as f64) / 2.0));
    }
    Ok(d)
}

/// `base^k` in the Z-string algebra.
pub fn zstring_power<T: Coefficient>(
    base: &ZStringPolynomial<T>,
    k: usize,
) -> Result<ZStringPolynomial<T>> {
    let mut acc = ZStringPolynomial::identity(base.n_qubits);
    for _ in 0..k {
        acc = acc.mul(base)?;
    }
    Ok(acc)
}
