use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetRole {
    /// Over the closed-neighborhood state `x_{N_i}`.
    State,
    /// Over the local input `u_i`.
    Input,
    /// Over the global state; partition bounding polytopes.
    Global,
}

/// `{z : H z <= h}` with the origin strictly inside (`h > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopicSet {
    pub matrix: DMatrix<f64>,
    pub bound: DVector<f64>,
    pub role: SetRole,
}

impl PolytopicSet {
    pub fn new(matrix: DMatrix<f64>, bound: DVector<f64>, role: SetRole) -> Result<Self> {
        if matrix.nrows() != bound.len() {
            return Err(Error::Dimension(format!(
                "polytope has {} rows but {} bounds",
                matrix.nrows(),
                bound.len()
            )));
        }
        if let Some((row, &b)) = bound.iter().enumerate().find(|(_, b)| !(**b > 0.0)) {
            return Err(Error::OriginNotInterior { row, bound: b });
        }
        Ok(Self { matrix, bound, role })
    }

    /// `|z_k| <= bounds[k]` for every coordinate, rows ordered `+e_0, -e_0, +e_1, ...`.
    pub fn symmetric_box(bounds: &[f64], role: SetRole) -> Result<Self> {
        let d = bounds.len();
        let mut m = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for (k, &v) in bounds.iter().enumerate() {
            m[(2 * k, k)] = 1.0;
            m[(2 * k + 1, k)] = -1.0;
            b[2 * k] = v;
            b[2 * k + 1] = v;
        }
        Self::new(m, b, role)
    }

    /// Symmetric reading of a paired-row table: every row `H_l` with bound
    /// `h_l` becomes `H_l z <= |h_l|`, and a row whose negation is absent is
    /// mirrored so the set stays symmetric.
    pub fn from_paired_table(matrix: DMatrix<f64>, bound: &[f64], role: SetRole) -> Result<Self> {
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for (l, &b) in bound.iter().enumerate() {
            let r: Vec<f64> = matrix.row(l).iter().copied().collect();
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            for cand in [r, neg] {
                if !rows.iter().any(|(row, _)| *row == cand) {
                    rows.push((cand, b.abs()));
                }
            }
        }
        let cols = matrix.ncols();
        let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|(_, b)| *b));
        Self::new(m, b, role)
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max_l (H_l z - h_l)`; positive means violated.
    pub fn max_residual(&self, z: &DVector<f64>) -> f64 {
        (&self.matrix * z - &self.bound).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        self.max_residual(z) <= tol
    }

    /// Same set with row `l` rescaled to bound 1.
    pub fn normalized(&self) -> Self {
        let mut m = self.matrix.clone();
        for l in 0..m.nrows() {
            let s = self.bound[l];
            m.row_mut(l).scale_mut(1.0 / s);
        }
        Self { matrix: m, bound: DVector::from_element(self.rows(), 1.0), role: self.role }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_must_be_interior() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        assert!(PolytopicSet::new(m.clone(), DVector::from_vec(vec![1.0, 0.0]), SetRole::Input).is_err());
        assert!(PolytopicSet::new(m, DVector::from_vec(vec![1.0, -1.0]), SetRole::Input).is_err());
    }

    #[test]
    fn paired_table_with_negative_bounds_becomes_symmetric_box() {
        // Rows (+x, -x, +v, -v) with bounds (1, -1, 3, -3).
        let h = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let s = PolytopicSet::from_paired_table(h, &[1.0, -1.0, 3.0, -3.0], SetRole::State).unwrap();
        assert_eq!(s.rows(), 4);
        assert_eq!(s.bound.as_slice(), &[1.0, 1.0, 3.0, 3.0]);
        assert!(s.contains(&DVector::from_vec(vec![-1.0, 3.0]), 0.0));
        assert!(!s.contains(&DVector::from_vec(vec![1.1, 0.0]), 0.0));
    }

    #[test]
    fn residual_sign_convention() {
        let s = PolytopicSet::symmetric_box(&[2.0], SetRole::Input).unwrap();
        assert_eq!(s.max_residual(&DVector::from_vec(vec![3.0])), 1.0);
        assert_eq!(s.max_residual(&DVector::from_vec(vec![0.0])), -2.0);
    }
}
