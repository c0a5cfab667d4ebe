//! Sparse storage helpers and a banded LU direct solver.

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Build a CSR matrix from `(row, col, value)` triplets; duplicates are summed
/// and explicit zeros dropped.
pub fn csr_from_triplets(
    n_rows: usize,
    n_cols: usize,
    triplets: impl IntoIterator<Item = (usize, usize, f64)>,
) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n_rows, n_cols);
    for (r, c, v) in triplets {
        if v != 0.0 {
            coo.push(r, c, v);
        }
    }
    let csr = CsrMatrix::from(&coo);
    drop_zeros(&csr)
}

fn drop_zeros(m: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    if m.values().iter().all(|&v| v != 0.0) {
        return m.clone();
    }
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for (r, c, &v) in m.triplet_iter() {
        if v != 0.0 {
            coo.push(r, c, v);
        }
    }
    CsrMatrix::from(&coo)
}

pub fn csr_matvec(m: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.ncols(), x.len());
    let mut y = vec![0.0; m.nrows()];
    for (r, row) in m.row_iter().enumerate() {
        y[r] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&c, &v)| v * x[c])
            .sum();
    }
    y
}

/// Lower and upper bandwidths `(kl, ku)` of a sparse matrix.
pub fn bandwidths(m: &CsrMatrix<f64>) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for (r, c, _) in m.triplet_iter() {
        if r > c {
            kl = kl.max(r - c);
        } else {
            ku = ku.max(c - r);
        }
    }
    (kl, ku)
}

pub fn csr_to_dense(m: &CsrMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let mut d = nalgebra::DMatrix::zeros(m.nrows(), m.ncols());
    for (r, c, &v) in m.triplet_iter() {
        d[(r, c)] += v;
    }
    d
}

/// LU factorization with partial pivoting in band storage.
///
/// Row `r` keeps columns `r - kl ..= r + kl + ku`; the extra `kl` upper
/// diagonals hold fill-in created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(m: &CsrMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "banded LU needs a square matrix, got {}x{}",
                n,
                m.ncols()
            )));
        }
        let (kl, ku) = bandwidths(m);
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        let mut scale = 0.0f64;
        for (r, c, &v) in m.triplet_iter() {
            let k = lu.idx(r, c);
            lu.data[k] += v;
            scale = scale.max(v.abs());
        }
        let tiny = scale * f64::EPSILON * 1e-4;

        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let last_col = (i + kl + ku).min(n - 1);

            let mut p = i;
            let mut best = lu.get(i, i).abs();
            for r in i + 1..=last_row {
                let v = lu.get(r, i).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular { row: i });
            }
            lu.pivots[i] = p;
            if p != i {
                for c in i..=last_col {
                    let a = lu.idx(i, c);
                    let b = lu.idx(p, c);
                    lu.data.swap(a, b);
                }
            }

            let pivot = lu.get(i, i);
            for r in i + 1..=last_row {
                let k = lu.idx(r, i);
                if lu.data[k] == 0.0 {
                    continue;
                }
                let l = lu.data[k] / pivot;
                lu.data[k] = l;
                for c in i + 1..=last_col {
                    let u = lu.get(i, c);
                    if u != 0.0 {
                        let t = lu.idx(r, c);
                        lu.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[self.idx(r, c)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "rhs has length {}, system has {}",
                rhs.len(),
                self.n
            )));
        }
        let n = self.n;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let p = self.pivots[i];
            x.swap(i, p);
            let xi = x[i];
            if xi != 0.0 {
                for r in i + 1..=(i + self.kl).min(n - 1) {
                    x[r] -= self.get(r, i) * xi;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + self.kl + self.ku).min(n - 1) {
                s -= self.get(i, c) * x[c];
            }
            x[i] = s / self.get(i, i);
        }
        Ok(x)
    }
}
