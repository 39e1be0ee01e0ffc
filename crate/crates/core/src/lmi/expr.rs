//! Affine scalar and matrix expressions over the scalar slots of an
//! [`SdpProblem`](super::SdpProblem).

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

/// What a decision variable stands for; diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarRole {
    /// `E_i = P_i^{-1}`.
    Ellipsoid,
    /// `Y_i = K_i E_{N_i}`.
    Gain,
    /// One diagonal block of `S_{N_i}`.
    Coupling,
    /// `Δu_i`.
    InputCorrection,
    /// Witness point `x`.
    Point,
    /// Epigraph and level variables.
    Auxiliary,
}

/// A matrix of scalar decision variables. Symmetric variables own
/// `rows (rows + 1) / 2` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixVar {
    pub id: usize,
    pub rows: usize,
    pub cols: usize,
    pub symmetric: bool,
    pub role: VarRole,
    pub context: String,
    pub(crate) offset: usize,
}

impl MatrixVar {
    pub fn len(&self) -> usize {
        if self.symmetric {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scalar slot backing entry `(r, c)`.
    pub fn slot(&self, r: usize, c: usize) -> usize {
        if self.symmetric {
            let (i, j) = if r <= c { (r, c) } else { (c, r) };
            self.offset + j * (j + 1) / 2 + i
        } else {
            self.offset + r * self.cols + c
        }
    }

    pub fn expr(&self) -> AffMatrix {
        AffMatrix::from_fn(self.rows, self.cols, |r, c| AffExpr::var(self.slot(r, c)))
    }

    pub fn entry(&self, r: usize, c: usize) -> AffExpr {
        AffExpr::var(self.slot(r, c))
    }

    /// Writes `m` into the slots of a full solution vector.
    pub fn assign(&self, values: &mut [f64], m: &DMatrix<f64>) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                values[self.slot(r, c)] = m[(r, c)];
            }
        }
    }

    /// Reads this variable's value out of a full solution vector.
    pub fn value(&self, values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| values[self.slot(r, c)])
    }
}

/// `constant + Σ coeff · slot`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn var(slot: usize) -> Self {
        Self { constant: 0.0, terms: vec![(slot, 1.0)] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(k, c)| acc + c * values[k])
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        Self {
            constant: self.constant * s,
            terms: self.terms.iter().map(|&(k, c)| (k, c * s)).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &AffExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += other.constant * s;
        self.terms.extend(other.terms.iter().map(|&(k, c)| (k, c * s)));
    }

    /// Sorts by slot, merges duplicates and drops exact zeros.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|&(k, _)| k);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (k, c) in self.terms {
            match out.last_mut() {
                Some((lk, lc)) if *lk == k => *lc += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Self { constant: self.constant, terms: out }
    }

    /// Largest absolute coefficient, constant included.
    pub fn magnitude(&self) -> f64 {
        self.terms.iter().map(|&(_, c)| c.abs()).fold(self.constant.abs(), f64::max)
    }
}

impl Add for &AffExpr {
    type Output = AffExpr;
    fn add(self, rhs: &AffExpr) -> AffExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &AffExpr {
    type Output = AffExpr;
    fn sub(self, rhs: &AffExpr) -> AffExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Neg for &AffExpr {
    type Output = AffExpr;
    fn neg(self) -> AffExpr {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &AffExpr {
    type Output = AffExpr;
    fn mul(self, rhs: f64) -> AffExpr {
        self.scale(rhs)
    }
}

/// Dense matrix of affine expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffMatrix {
    rows: usize,
    cols: usize,
    data: Vec<AffExpr>,
}

impl AffMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> AffExpr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![AffExpr::zero(); rows * cols] }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| AffExpr::constant(m[(r, c)]))
    }

    /// Column vector of the given expressions.
    pub fn column(entries: Vec<AffExpr>) -> Self {
        Self { rows: entries.len(), cols: 1, data: entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> &AffExpr {
        &self.data[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut AffExpr {
        &mut self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|e| e.scale(s)).collect() }
    }

    pub fn add(&self, other: &AffMatrix) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in AffMatrix::add");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &AffMatrix) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `M · self` with a constant `M`.
    pub fn left_mul(m: &DMatrix<f64>, a: &AffMatrix) -> Self {
        assert_eq!(m.ncols(), a.rows, "shape mismatch in left_mul");
        Self::from_fn(m.nrows(), a.cols, |r, c| {
            let mut e = AffExpr::zero();
            for k in 0..m.ncols() {
                e.add_scaled(a.get(k, c), m[(r, k)]);
            }
            e.compact()
        })
    }

    /// `self · M` with a constant `M`.
    pub fn right_mul(a: &AffMatrix, m: &DMatrix<f64>) -> Self {
        assert_eq!(a.cols, m.nrows(), "shape mismatch in right_mul");
        Self::from_fn(a.rows, m.ncols(), |r, c| {
            let mut e = AffExpr::zero();
            for k in 0..a.cols {
                e.add_scaled(a.get(r, k), m[(k, c)]);
            }
            e.compact()
        })
    }

    /// Sub-block `rows × cols` starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c).clone())
    }

    pub fn block_diag(blocks: &[AffMatrix]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for r in 0..b.rows {
                for c in 0..b.cols {
                    *out.get_mut(r0 + r, c0 + c) = b.get(r, c).clone();
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// Symmetric `[[top_left, lowerᵀ], [lower, bottom_right]]`.
    pub fn sym_block(top_left: &AffMatrix, lower: &AffMatrix, bottom_right: &AffMatrix) -> Self {
        let (p, q) = (top_left.rows, bottom_right.rows);
        assert_eq!(top_left.cols, p);
        assert_eq!(bottom_right.cols, q);
        assert_eq!(lower.shape(), (q, p));
        Self::from_fn(p + q, p + q, |r, c| match (r < p, c < p) {
            (true, true) => top_left.get(r, c).clone(),
            (false, false) => bottom_right.get(r - p, c - p).clone(),
            (false, true) => lower.get(r - p, c).clone(),
            (true, false) => lower.get(c - p, r).clone(),
        })
    }

    pub fn eval(&self, values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).eval(values))
    }

    pub fn entries(&self) -> impl Iterator<Item = &AffExpr> {
        self.data.iter()
    }

    pub fn compact(self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.into_iter().map(AffExpr::compact).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(rows: usize, cols: usize, symmetric: bool, offset: usize) -> MatrixVar {
        MatrixVar { id: 0, rows, cols, symmetric, role: VarRole::Auxiliary, context: String::new(), offset }
    }

    #[test]
    fn symmetric_slots_are_shared() {
        let v = var(3, 3, true, 4);
        assert_eq!(v.len(), 6);
        assert_eq!(v.slot(0, 2), v.slot(2, 0));
        let slots: std::collections::BTreeSet<_> =
            (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| v.slot(r, c)).collect();
        assert_eq!(slots.into_iter().collect::<Vec<_>>(), (4..10).collect::<Vec<_>>());
    }

    #[test]
    fn products_with_constants() {
        let v = var(2, 2, false, 0);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let vals = [1.0, -1.0, 0.5, 2.0];
        let x = v.value(&vals);
        assert_eq!(AffMatrix::left_mul(&m, &v.expr()).eval(&vals), &m * &x);
        assert_eq!(AffMatrix::right_mul(&v.expr(), &m).eval(&vals), &x * &m);
    }

    #[test]
    fn compact_merges_duplicates() {
        let e = AffExpr { constant: 1.0, terms: vec![(3, 1.0), (1, 2.0), (3, -1.0), (1, 0.5)] }.compact();
        assert_eq!(e.terms, vec![(1, 2.5)]);
    }
}
