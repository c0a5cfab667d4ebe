//! Composition-space PDF transport for a zero-dimensional reactor.
//!
//! The PDF `f(phi, t)` obeys `df/dt = -d/dphi [ f (M + S) ]`. It is discretized
//! with a conservative first-order upwind finite-volume scheme on a
//! cell-centered grid with zero flux through `phi = 0` and `phi = 1`, giving a
//! sparse generator `L` with `df/dt = L f`. Time is advanced with backward
//! Euler.

use std::io::Write;

use nalgebra_sparse::CsrMatrix;

use crate::chemistry::{drift_unchecked, PsrParams};
use crate::error::{Error, Result};
use crate::linalg::{csr_from_triplets, BandedLu};

pub const MAX_GRID_QUBITS: usize = 12;

/// Cell-centered grid on `[0, 1]` with `2^n_qubits` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionGrid {
    pub n_qubits: usize,
    pub n_cells: usize,
    pub spacing: f64,
    pub centers: Vec<f64>,
}

pub fn build_grid(n_qubits_phi: usize) -> Result<CompositionGrid> {
    if !(1..=MAX_GRID_QUBITS).contains(&n_qubits_phi) {
        return Err(Error::Range {
            what: "n_qubits_phi",
            value: n_qubits_phi as i64,
            min: 1,
            max: MAX_GRID_QUBITS as i64,
        });
    }
    let n_cells = 1usize << n_qubits_phi;
    let spacing = 1.0 / n_cells as f64;
    let centers = (0..n_cells).map(|j| (j as f64 + 0.5) * spacing).collect();
    Ok(CompositionGrid {
        n_qubits: n_qubits_phi,
        n_cells,
        spacing,
        centers,
    })
}

impl CompositionGrid {
    /// Location of the face between cell `j` and `j + 1`.
    pub fn face(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.spacing
    }

    /// Index of the cell containing `phi`.
    pub fn cell_of(&self, phi: f64) -> usize {
        ((phi / self.spacing).floor().max(0.0) as usize).min(self.n_cells - 1)
    }
}

/// Piecewise-constant density on a composition grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdf {
    pub values: Vec<f64>,
    pub spacing: f64,
}

impl DiscretePdf {
    pub fn new(values: Vec<f64>, spacing: f64) -> Self {
        Self { values, spacing }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sum_j f_j * spacing`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing
    }

    /// Rescaled copy with unit integral.
    pub fn normalized(&self) -> Result<DiscretePdf> {
        let total = self.integral();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(DiscretePdf {
            values: self.values.iter().map(|v| v / total).collect(),
            spacing: self.spacing,
        })
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the largest cell value (first one on ties).
    pub fn peak_cell(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = j;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    FirstOrderUpwind,
}

/// Sparse generator of the semi-discrete transport equation, `df/dt = L f`.
#[derive(Debug, Clone)]
pub struct TransportOperator {
    pub matrix: CsrMatrix<f64>,
    pub scheme: Scheme,
}

impl TransportOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: CsrMatrix::zeros(n, n),
            scheme: Scheme::FirstOrderUpwind,
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim()];
        for (_, c, &v) in self.matrix.triplet_iter() {
            s[c] += v;
        }
        s
    }
}

/// First-order upwind assembly.
///
/// Each interior face carries the flux `G f_upwind` with `G` the drift
/// evaluated at the face; the flux leaves the upwind cell and enters its
/// neighbour, so every column of `L` sums to zero.
pub fn assemble_transport_operator(
    grid: &CompositionGrid,
    params: &PsrParams,
) -> Result<TransportOperator> {
    params.validate()?;
    let n = grid.n_cells;
    let inv_h = 1.0 / grid.spacing;
    let mut triplets = Vec::with_capacity(2 * n);
    for j in 0..n - 1 {
        let g = drift_unchecked(grid.face(j), params);
        if g > 0.0 {
            triplets.push((j, j, -g * inv_h));
            triplets.push((j + 1, j, g * inv_h));
        } else if g < 0.0 {
            let a = -g * inv_h;
            triplets.push((j, j + 1, a));
            triplets.push((j + 1, j + 1, -a));
        }
    }
    Ok(TransportOperator {
        matrix: csr_from_triplets(n, n, triplets),
        scheme: Scheme::FirstOrderUpwind,
    })
}

/// Beta(a, b) shape sampled at cell centers and renormalized on the grid.
pub fn init_beta(grid: &CompositionGrid, shape_a: f64, shape_b: f64) -> Result<DiscretePdf> {
    for (what, v) in [("shape_a", shape_a), ("shape_b", shape_b)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain {
                what,
                value: v,
                domain: "(0, inf)",
            });
        }
    }
    let raw: Vec<f64> = grid
        .centers
        .iter()
        .map(|&x| x.powf(shape_a - 1.0) * (1.0 - x).powf(shape_b - 1.0))
        .collect();
    DiscretePdf::new(raw, grid.spacing).normalized()
}

/// Backward-Euler trajectory `f^{k+1} = (I - dt L)^{-1} f^k`, including `f0`.
pub fn evolve_classical(
    f0: &DiscretePdf,
    op: &TransportOperator,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<DiscretePdf>> {
    if !(dt > 0.0) {
        return Err(Error::Domain {
            what: "dt",
            value: dt,
            domain: "(0, inf)",
        });
    }
    if op.dim() != f0.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, pdf has {} cells",
            op.dim(),
            op.dim(),
            f0.len()
        )));
    }
    let lu = BandedLu::factor(&implicit_step_matrix(op, dt))?;
    let mut traj = Vec::with_capacity(n_steps + 1);
    traj.push(f0.clone());
    for _ in 0..n_steps {
        let next = lu.solve(&traj.last().unwrap().values)?;
        traj.push(DiscretePdf::new(next, f0.spacing));
    }
    Ok(traj)
}

/// `I - dt L`.
pub fn implicit_step_matrix(op: &TransportOperator, dt: f64) -> CsrMatrix<f64> {
    let n = op.dim();
    let triplets = (0..n)
        .map(|i| (i, i, 1.0))
        .chain(op.matrix.triplet_iter().map(|(r, c, &v)| (r, c, -dt * v)));
    csr_from_triplets(n, n, triplets)
}

/// Midpoint-rule moment `sum_j q(phi_j) f_j * spacing`.
pub fn grid_moment(f: &DiscretePdf, grid: &CompositionGrid, q: impl Fn(f64) -> f64) -> f64 {
    f.values
        .iter()
        .zip(&grid.centers)
        .map(|(&fj, &x)| q(x) * fj)
        .sum::<f64>()
        * grid.spacing
}

/// Mean and variance of a PDF on the grid.
pub fn grid_mean_variance(f: &DiscretePdf, grid: &CompositionGrid) -> (f64, f64) {
    let mass = grid_moment(f, grid, |_| 1.0);
    let m1 = grid_moment(f, grid, |x| x) / mass;
    let m2 = grid_moment(f, grid, |x| x * x) / mass;
    (m1, m2 - m1 * m1)
}

/// Write a trajectory as `time,phi,f` rows, one per (step, cell).
pub fn write_trajectory_csv<W: Write>(
    out: W,
    grid: &CompositionGrid,
    trajectory: &[DiscretePdf],
    dt: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "phi", "f"])?;
    for (k, f) in trajectory.iter().enumerate() {
        let t = k as f64 * dt;
        for (x, v) in grid.centers.iter().zip(&f.values) {
            w.write_record([t.to_string(), x.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
