//! Polynomial representations of a phase profile as a function of the basis
//! index `j`.
//!
//! Coefficients are kept as exact rationals. The monomial coefficients of a
//! high-degree interpolant alternate in sign and span many orders of
//! magnitude, so evaluating or expanding them in double precision loses all
//! accuracy well before `N = 32`; doing the algebra exactly and rounding only
//! the final Z-string coefficients avoids that.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::phase::PhaseProfile;
use super::zstring::{pauli_decompose_d, Coefficient, ZStringPolynomial};
use crate::error::{Error, Result};

/// Largest register for which `exact_alpha` runs by default.
pub const DEFAULT_EXACT_MAX_QUBITS: usize = 5;

pub const INTERPOLATION_TOLERANCE: f64 = 1e-8;

/// Relative singular-value cutoff for the least-squares fit.
const RANK_TOLERANCE: f64 = 1e-12;

/// `p(j) = sum_k coeffs[k] j^k` with exact coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPolynomial {
    coeffs: Vec<BigRational>,
}

impl IndexPolynomial {
    pub fn new(coeffs: Vec<BigRational>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    /// Exact conversion of double-precision coefficients.
    pub fn from_f64(coeffs: &[f64]) -> Result<Self> {
        let mut out = Vec::with_capacity(coeffs.len());
        for &c in coeffs {
            if !c.is_finite() {
                return Err(Error::Domain {
                    what: "polynomial coefficient",
                    value: c,
                    domain: "finite reals",
                });
            }
            out.push(BigRational::from_f64(c));
        }
        Ok(Self::new(out))
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(BigRational::zero());
        }
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Coefficients rounded to double precision.
    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(Coefficient::to_f64).collect()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn evaluate_exact(&self, j: u64) -> BigRational {
        let x = BigRational::from_integer(BigInt::from(j));
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * &x + c)
    }

    /// `p(j)` evaluated exactly, then rounded.
    pub fn evaluate(&self, j: u64) -> f64 {
        Coefficient::to_f64(&self.evaluate_exact(j))
    }

    /// `p(D)` on `n` qubits, expanded in Z-strings by Horner's rule.
    pub fn zstring_expansion(&self, n: usize) -> Result<ZStringPolynomial<BigRational>> {
        let d = pauli_decompose_d::<BigRational>(n)?;
        let mut acc = ZStringPolynomial::zero(n);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&d)?;
            acc.add_term(0, c.clone());
        }
        Ok(acc)
    }
}

fn check_register(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "phase profile length {len} is not a power of two >= 2"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Interpolating polynomial through `(j, theta_j)`, `j = 0..N-1`.
pub fn exact_alpha(profile: &PhaseProfile) -> Result<IndexPolynomial> {
    exact_alpha_up_to(profile, DEFAULT_EXACT_MAX_QUBITS)
}

/// `exact_alpha` with an explicit register-size limit.
///
/// Uses Newton divided differences on the integer nodes, where
/// `x_i - x_{i-k} = k`, followed by conversion to monomials.
pub fn exact_alpha_up_to(profile: &PhaseProfile, max_qubits: usize) -> Result<IndexPolynomial> {
    let n = check_register(profile.len())?;
    if n > max_qubits {
        return Err(Error::Range {
            what: "exact interpolation register size",
            value: n as i64,
            min: 1,
            max: max_qubits as i64,
        });
    }
    let big_n = profile.len();
    let mut dd: Vec<BigRational> = profile
        .theta
        .iter()
        .map(|&t| BigRational::from_f64(t))
        .collect();
    let mut newton = Vec::with_capacity(big_n);
    newton.push(dd[0].clone());
    for k in 1..big_n {
        let inv_k = BigRational::new(BigInt::one(), BigInt::from(k));
        for i in (k..big_n).rev() {
            dd[i] = (&dd[i] - &dd[i - 1]) * &inv_k;
        }
        newton.push(dd[k].clone());
    }

    // p(x) = c_0 + (x - 0)(c_1 + (x - 1)(c_2 + ...)).
    let mut mono = vec![newton[big_n - 1].clone()];
    for k in (0..big_n - 1).rev() {
        let shift = BigRational::from_integer(BigInt::from(k));
        let mut next = vec![BigRational::zero(); mono.len() + 1];
        for (i, c) in mono.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * &shift;
        }
        next[0] += &newton[k];
        mono = next;
    }

    let poly = IndexPolynomial::new(mono);
    let residual = (0..big_n)
        .map(|j| (poly.evaluate(j as u64) - profile.theta[j]).abs())
        .fold(0.0, f64::max);
    if !(residual < INTERPOLATION_TOLERANCE) {
        return Err(Error::Conditioning {
            residual,
            tolerance: INTERPOLATION_TOLERANCE,
        });
    }
    Ok(poly)
}

/// Degree-`m` least-squares fit of `theta_j` against `j`.
///
/// The fit is solved in the Chebyshev basis on `x = 2j/(N-1) - 1` and then
/// re-expanded exactly in monomials of `j`.
pub fn fit_beta(profile: &PhaseProfile, m: usize) -> Result<IndexPolynomial> {
    check_register(profile.len())?;
    let big_n = profile.len();
    if m >= big_n {
        return Err(Error::RankDeficient {
            degree: m,
            points: big_n,
        });
    }
    let span = (big_n - 1) as f64;
    let basis = DMatrix::from_fn(big_n, m + 1, |j, k| {
        let x = 2.0 * j as f64 / span - 1.0;
        chebyshev(k, x)
    });
    let rhs = nalgebra::DVector::from_column_slice(&profile.theta);
    let svd = basis.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= RANK_TOLERANCE * smax {
        return Err(Error::RankDeficient {
            degree: m,
            points: big_n,
        });
    }
    let cheb = svd
        .solve(&rhs, RANK_TOLERANCE * smax)
        .map_err(|_| Error::RankDeficient {
            degree: m,
            points: big_n,
        })?;

    // x(j) = a j + b with a = 2/(N-1), b = -1.
    let a = BigRational::new(BigInt::from(2), BigInt::from(big_n - 1));
    let y = vec![-BigRational::one(), a];
    let mut t_prev = vec![BigRational::one()];
    let mut t_cur = y.clone();
    let mut mono = vec![BigRational::zero(); m + 1];
    for (k, &c) in cheb.iter().enumerate() {
        let ck = BigRational::from_f64(c);
        let tk = match k {
            0 => t_prev.clone(),
            1 => t_cur.clone(),
            _ => {
                let next = chebyshev_step(&y, &t_cur, &t_prev);
                t_prev = std::mem::replace(&mut t_cur, next);
                t_cur.clone()
            }
        };
        for (i, t) in tk.iter().enumerate() {
            mono[i] += &ck * t;
        }
    }
    Ok(IndexPolynomial::new(mono))
}

fn chebyshev(k: usize, x: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, x);
    match k {
        0 => t0,
        _ => {
            for _ in 1..k {
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            t1
        }
    }
}

/// `2 y T_k - T_{k-1}` on monomial coefficient vectors.
fn chebyshev_step(y: &[BigRational], tk: &[BigRational], tkm1: &[BigRational]) -> Vec<BigRational> {
    let two = BigRational::from_integer(BigInt::from(2));
    let mut out = vec![BigRational::zero(); tk.len() + y.len() - 1];
    for (i, a) in tk.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            out[i + j] += &two * a * b;
        }
    }
    for (i, c) in tkm1.iter().enumerate() {
        out[i] -= c;
    }
    out
}

/// Largest `|p(j) - theta_j|` over the profile.
pub fn max_residual(poly: &IndexPolynomial, profile: &PhaseProfile) -> f64 {
    profile
        .theta
        .iter()
        .enumerate()
        .map(|(j, &t)| (poly.evaluate(j as u64) - t).abs())
        .fold(0.0, f64::max)
}
