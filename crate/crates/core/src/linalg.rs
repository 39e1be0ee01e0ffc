//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    -min_eigenvalue(&(-m))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix via Cholesky, falling back
/// to LU when the factorization fails.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = symmetrize(m);
    match sym.clone().cholesky() {
        Some(ch) => Some(symmetrize(&ch.inverse())),
        None => sym.try_inverse().map(|inv| symmetrize(&inv)),
    }
}

/// `xᵀ P x`.
pub fn quad_form(p: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(p * x))
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Row-major flattening, used by the JSON formats.
pub fn to_row_major(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_row_major(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Shape-preserving row-major form, safe for empty matrices.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RowMajor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for RowMajor {
    fn from(m: &DMatrix<f64>) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), data: m.transpose().iter().copied().collect() }
    }
}

impl RowMajor {
    pub fn to_matrix(&self) -> Option<DMatrix<f64>> {
        (self.data.len() == self.rows * self.cols).then(|| DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip_keeps_shape() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = RowMajor::from(&m);
        assert_eq!(r.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(r.to_matrix().unwrap(), m);
        let empty = DMatrix::<f64>::zeros(0, 4);
        assert_eq!(RowMajor::from(&empty).to_matrix().unwrap().shape(), (0, 4));
    }

    #[test]
    fn eigen_extremes_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        assert_eq!(min_eigenvalue(&m), -1.0);
        assert_eq!(max_eigenvalue(&m), 3.0);
    }

    #[test]
    fn spd_inverse_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&m).unwrap();
        let id = &m * &inv;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn block_diag_places_blocks() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let b = DMatrix::from_element(2, 2, 1.0);
        let d = block_diag(&[a, b]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(0, 1)], 0.0);
        assert_eq!(d[(2, 2)], 1.0);
    }
}
