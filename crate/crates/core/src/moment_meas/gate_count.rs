//! Closed-form CNOT plus Rz counts for diagonal phase programs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// All `N` terms of the exact expansion.
    Exact,
    /// The single term `D^k`.
    Term(usize),
    /// Terms `D^1 ... D^m` of a degree-`m` polynomial.
    Approx(usize),
}

/// Largest `n` whose exact count fits comfortably in `u128`.
pub const MAX_COUNT_QUBITS: usize = 100;

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// `sum_{j=1}^{min(k, n)} C(k, j) (2j + 1)`.
fn term_count(k: usize, n: usize) -> u128 {
    (1..=k.min(n) as u128)
        .map(|j| binomial(k as u128, j) * (2 * j + 1))
        .sum()
}

pub fn gate_count(n: usize, mode: CountMode) -> Result<u128> {
    if !(1..=MAX_COUNT_QUBITS).contains(&n) {
        return Err(Error::Range {
            what: "n",
            value: n as i64,
            min: 1,
            max: MAX_COUNT_QUBITS as i64,
        });
    }
    Ok(match mode {
        CountMode::Exact => {
            let n = n as u128;
            (1u128 << (n - 1)) * (n * n + 2 * n + 2) - (n + 1)
        }
        CountMode::Term(k) => {
            if k > n {
                return Err(Error::Range {
                    what: "k",
                    value: k as i64,
                    min: 0,
                    max: n as i64,
                });
            }
            term_count(k, n)
        }
        CountMode::Approx(m) => (1..=m).map(|k| term_count(k, n)).sum(),
    })
}

/// Least-squares slope of `ln count` against `ln n`.
pub fn log_log_slope(points: &[(usize, u128)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, c)| (c as f64).ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
