//! All-at-once time integration.
//!
//! Every backward-Euler step is stacked into one block lower-bidiagonal
//! system `A psi = b`:
//!
//! ```text
//! [ I                ] [f^0]   [f0]
//! [-I  I-dtL         ] [f^1]   [ 0]
//! [   -I  I-dtL      ] [f^2] = [ 0]
//! [        ...   ... ] [...]   [..]
//! ```
//!
//! With `2^n_t` blocks of `2^n_phi` cells the unknown vector spans exactly
//! `n_t + n_phi` qubits.

use std::io::Write;

use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fokker_planck::{DiscretePdf, TransportOperator};
use crate::linalg::{csr_from_triplets, csr_matvec, BandedLu};

pub const MAX_HISTORY_QUBITS: usize = 14;

#[derive(Debug, Clone)]
pub struct HistoryLinearSystem {
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub n_t_qubits: usize,
    pub n_phi_qubits: usize,
    pub dt: f64,
}

impl HistoryLinearSystem {
    pub fn n_cells(&self) -> usize {
        1 << self.n_phi_qubits
    }

    pub fn n_blocks(&self) -> usize {
        1 << self.n_t_qubits
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_t_qubits + self.n_phi_qubits
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Fraction of stored entries.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.dim() as f64 * self.dim() as f64)
    }

    pub fn max_row_nnz(&self) -> usize {
        self.matrix.row_iter().map(|r| r.nnz()).max().unwrap_or(0)
    }

    /// Coordinate text export: header `N_total nnz`, then `row col value`.
    pub fn write_matrix<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.dim(), self.nnz())?;
        for (r, c, v) in self.matrix.triplet_iter() {
            writeln!(out, "{r} {c} {v}")?;
        }
        Ok(())
    }

    /// Right-hand side in the same coordinate format (column index 0).
    pub fn write_rhs<W: Write>(&self, mut out: W) -> Result<()> {
        let nz: Vec<(usize, f64)> = self
            .rhs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        writeln!(out, "{} {}", self.dim(), nz.len())?;
        for (r, v) in nz {
            writeln!(out, "{r} 0 {v}")?;
        }
        Ok(())
    }
}

pub fn assemble_history_system(
    op: &TransportOperator,
    f0: &DiscretePdf,
    dt: f64,
    n_t_qubits: usize,
) -> Result<HistoryLinearSystem> {
    let n_cells = op.dim();
    if f0.len() != n_cells {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} cells, initial pdf has {}",
            n_cells,
            f0.len()
        )));
    }
    if !n_cells.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "cell count {n_cells} is not a power of two"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain {
            what: "dt",
            value: dt,
            domain: "(0, inf)",
        });
    }
    let n_phi_qubits = n_cells.trailing_zeros() as usize;
    if n_t_qubits + n_phi_qubits > MAX_HISTORY_QUBITS {
        return Err(Error::DimensionMismatch(format!(
            "{} time + {} composition qubits exceeds {}",
            n_t_qubits, n_phi_qubits, MAX_HISTORY_QUBITS
        )));
    }
    let n_blocks = 1usize << n_t_qubits;
    let dim = n_blocks * n_cells;

    let mut triplets = Vec::with_capacity(dim * 4);
    for i in 0..n_cells {
        triplets.push((i, i, 1.0));
    }
    for k in 1..n_blocks {
        let off = k * n_cells;
        for i in 0..n_cells {
            triplets.push((off + i, off + i, 1.0));
            triplets.push((off + i, off - n_cells + i, -1.0));
        }
        for (r, c, &v) in op.matrix.triplet_iter() {
            triplets.push((off + r, off + c, -dt * v));
        }
    }
    let matrix = csr_from_triplets(dim, dim, triplets);

    let mut rhs = vec![0.0; dim];
    rhs[..n_cells].copy_from_slice(&f0.values);

    Ok(HistoryLinearSystem {
        matrix,
        rhs,
        n_t_qubits,
        n_phi_qubits,
        dt,
    })
}

/// Solution of the history system, one block per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryVector {
    pub values: Vec<f64>,
    pub n_cells: usize,
}

impl HistoryVector {
    pub fn n_blocks(&self) -> usize {
        self.values.len() / self.n_cells
    }

    pub fn block(&self, k: usize) -> Result<&[f64]> {
        if k >= self.n_blocks() {
            return Err(Error::Index {
                index: k,
                len: self.n_blocks(),
            });
        }
        Ok(&self.values[k * self.n_cells..(k + 1) * self.n_cells])
    }
}

/// Direct sparse solve of the whole history system in one call.
pub fn solve_ideal(sys: &HistoryLinearSystem) -> Result<HistoryVector> {
    let x = BandedLu::factor(&sys.matrix)?.solve(&sys.rhs)?;
    Ok(HistoryVector {
        values: x,
        n_cells: sys.n_cells(),
    })
}

/// Block `k` rescaled to unit integral.
pub fn extract_time_block(v: &HistoryVector, k: usize) -> Result<DiscretePdf> {
    let block = v.block(k)?;
    DiscretePdf::new(block.to_vec(), 1.0 / v.n_cells as f64).normalized()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub kappa: f64,
    pub iterations: usize,
    pub converged: bool,
}

const CONDITION_MAX_ITERS: usize = 5000;
const CONDITION_RTOL: f64 = 1e-10;

/// Two-sided condition number estimate.
///
/// Power iteration on `A^T A` gives the largest singular value; inverse
/// iteration (two triangular-factor solves per step) gives the smallest.
pub fn condition_estimate(sys: &HistoryLinearSystem) -> Result<ConditionEstimate> {
    let a = &sys.matrix;
    let at = a.transpose();
    let n = sys.dim();
    let start: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.25 * ((i as f64) * 0.7).sin())
        .collect();

    let mut iterations = 0;
    let mut converged = true;

    // Largest eigenvalue of A^T A.
    let mut v = normalize(start.clone());
    let mut lam_max = 0.0;
    let mut ok = false;
    for _ in 0..CONDITION_MAX_ITERS {
        iterations += 1;
        let av = csr_matvec(a, &v);
        let lam = dot(&av, &av);
        let w = csr_matvec(&at, &av);
        let change = (lam - lam_max).abs();
        lam_max = lam;
        v = normalize(w);
        if change <= CONDITION_RTOL * lam {
            ok = true;
            break;
        }
    }
    converged &= ok;

    // Smallest eigenvalue of A^T A via (A^T A)^{-1} = A^{-1} A^{-T}.
    let lu = BandedLu::factor(a)?;
    let lu_t = BandedLu::factor(&at)?;
    let mut v = normalize(start);
    let mut mu = 0.0;
    ok = false;
    for _ in 0..CONDITION_MAX_ITERS {
        iterations += 1;
        let z = lu_t.solve(&v)?;
        let w = lu.solve(&z)?;
        let m = dot(&v, &w);
        let change = (m - mu).abs();
        mu = m;
        v = normalize(w);
        if change <= CONDITION_RTOL * m {
            ok = true;
            break;
        }
    }
    converged &= ok;
    if !converged {
        log::warn!("condition estimate did not converge in {CONDITION_MAX_ITERS} iterations");
    }

    let sigma_max = lam_max.sqrt();
    let sigma_min = (1.0 / mu).sqrt();
    Ok(ConditionEstimate {
        sigma_max,
        sigma_min,
        kappa: sigma_max / sigma_min,
        iterations,
        converged,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemistry::PsrParams;
    use crate::fokker_planck::{
        assemble_transport_operator, build_grid, evolve_classical, init_beta,
    };
    use crate::linalg::csr_to_dense;

    fn psr_setup(n_phi: usize) -> (TransportOperator, DiscretePdf) {
        let g = build_grid(n_phi).unwrap();
        let op = assemble_transport_operator(&g, &PsrParams::default()).unwrap();
        (op, init_beta(&g, 8.0, 8.0).unwrap())
    }

    #[test]
    fn two_block_structure_with_zero_operator() {
        let g = build_grid(1).unwrap();
        let f0 = init_beta(&g, 2.0, 3.0).unwrap();
        let sys = assemble_history_system(&TransportOperator::zero(2), &f0, 0.1, 1).unwrap();
        let a = csr_to_dense(&sys.matrix);
        let expected = nalgebra::DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                -1.0, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 1.0,
            ],
        );
        assert_eq!(a, expected);
        assert_eq!(&sys.rhs[..2], &f0.values[..]);
        assert_eq!(&sys.rhs[2..], &[0.0, 0.0]);
    }

    #[test]
    fn default_size_is_nine_qubits() {
        let (op, f0) = psr_setup(5);
        let sys = assemble_history_system(&op, &f0, 0.15, 4).unwrap();
        assert_eq!(sys.dim(), 512);
        assert_eq!(sys.n_qubits(), 9);
        assert!(sys.max_row_nnz() <= 4);
        assert!(sys.nnz() <= sys.dim() * 4);
    }

    #[test]
    fn dimension_errors() {
        let (op, _) = psr_setup(3);
        let g = build_grid(2).unwrap();
        let wrong = init_beta(&g, 2.0, 2.0).unwrap();
        assert!(matches!(
            assemble_history_system(&op, &wrong, 0.1, 2),
            Err(Error::DimensionMismatch(_))
        ));
        let (op, f0) = psr_setup(5);
        assert!(assemble_history_system(&op, &f0, 0.1, 10).is_err());
    }

    #[test]
    fn solve_matches_time_marching() {
        let (op, f0) = psr_setup(5);
        let sys = assemble_history_system(&op, &f0, 0.15, 4).unwrap();
        let v = solve_ideal(&sys).unwrap();
        let traj = evolve_classical(&f0, &op, 0.15, 15).unwrap();
        for (k, f) in traj.iter().enumerate() {
            let b = v.block(k).unwrap();
            let num: f64 = b.iter().zip(&f.values).map(|(x, y)| (x - y).powi(2)).sum();
            let den: f64 = f.values.iter().map(|y| y * y).sum();
            assert!((num / den).sqrt() < 1e-10);
            assert!((b.iter().sum::<f64>() - f0.values.iter().sum::<f64>()).abs() < 1e-10);
        }
        let last = extract_time_block(&v, 15).unwrap();
        assert!(last
            .values
            .iter()
            .zip(&traj[15].values)
            .all(|(a, b)| (a - b).abs() < 1e-10 * (1.0 + b.abs())));
    }

    #[test]
    fn zero_operator_blocks_equal_initial() {
        let g = build_grid(3).unwrap();
        let f0 = init_beta(&g, 4.0, 2.0).unwrap();
        let sys = assemble_history_system(&TransportOperator::zero(8), &f0, 0.2, 3).unwrap();
        let v = solve_ideal(&sys).unwrap();
        for k in 0..8 {
            let b = extract_time_block(&v, k).unwrap();
            for (x, y) in b.values.iter().zip(&f0.values) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        assert!(matches!(
            extract_time_block(&v, 8),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn hand_inverted_two_by_two_step() {
        // L = [[-1, 2], [1, -2]], dt = 0.5: I - dt L = [[1.5, -1], [-0.5, 2]],
        // det = 2.5, inverse = [[0.8, 0.4], [0.2, 0.6]].
        let l = crate::linalg::csr_from_triplets(
            2,
            2,
            vec![(0, 0, -1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 1, -2.0)],
        );
        let op = TransportOperator {
            matrix: l,
            scheme: crate::fokker_planck::Scheme::FirstOrderUpwind,
        };
        let f0 = DiscretePdf::new(vec![1.2, 0.8], 0.5);
        let sys = assemble_history_system(&op, &f0, 0.5, 1).unwrap();
        let v = solve_ideal(&sys).unwrap();
        let f1 = v.block(1).unwrap();
        assert!((f1[0] - (0.8 * 1.2 + 0.4 * 0.8)).abs() < 1e-14);
        assert!((f1[1] - (0.2 * 1.2 + 0.6 * 0.8)).abs() < 1e-14);
    }

    fn dense_kappa(sys: &HistoryLinearSystem) -> f64 {
        let sv = csr_to_dense(&sys.matrix).singular_values();
        sv.max() / sv.min()
    }

    #[test]
    fn condition_of_identity() {
        let g = build_grid(1).unwrap();
        let f0 = init_beta(&g, 1.0, 1.0).unwrap();
        let sys = assemble_history_system(&TransportOperator::zero(2), &f0, 0.1, 0).unwrap();
        let c = condition_estimate(&sys).unwrap();
        assert!((c.kappa - 1.0).abs() < 1e-8);
    }

    #[test]
    fn condition_within_factor_two_of_svd() {
        let g = build_grid(1).unwrap();
        let f0 = init_beta(&g, 1.0, 1.0).unwrap();
        let sys = assemble_history_system(&TransportOperator::zero(2), &f0, 0.1, 1).unwrap();
        let c = condition_estimate(&sys).unwrap();
        let d = dense_kappa(&sys);
        // [[1,0],[-1,1]] has kappa = golden ratio squared.
        assert!((d - 2.618_033_988_75).abs() < 1e-9);
        assert!(c.kappa <= 2.0 * d && c.kappa >= 0.5 * d);

        for (n_t, n_phi) in [(2, 3), (4, 5)] {
            let (op, f0) = psr_setup(n_phi);
            let sys = assemble_history_system(&op, &f0, 0.15, n_t).unwrap();
            let c = condition_estimate(&sys).unwrap();
            let d = dense_kappa(&sys);
            assert!(c.kappa.is_finite());
            assert!(
                c.kappa <= 2.0 * d && c.kappa >= 0.5 * d,
                "{} vs {}",
                c.kappa,
                d
            );
        }
    }

    #[test]
    fn coordinate_export() {
        let g = build_grid(1).unwrap();
        let f0 = init_beta(&g, 1.0, 1.0).unwrap();
        let sys = assemble_history_system(&TransportOperator::zero(2), &f0, 0.1, 1).unwrap();
        let mut buf = Vec::new();
        sys.write_matrix(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "4 6");
        assert_eq!(lines.clone().count(), 6);
        assert!(lines.any(|l| l == "2 0 -1"));
        let mut buf = Vec::new();
        sys.write_rhs(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "4 2\n0 0 1\n1 0 1\n");
    }
}
