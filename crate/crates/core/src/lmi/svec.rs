//! Symmetric vectorization: upper triangle, column by column, off-diagonal
//! entries scaled by √2 so that `⟨A, B⟩ = svec(A)ᵀ svec(B)`.

use nalgebra::DMatrix;

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `(i, j)` pairs in svec order, `i <= j`.
pub fn svec_order(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(|j| (0..=j).map(move |i| (i, j)))
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    svec_order(n)
        .map(|(i, j)| if i == j { m[(i, i)] } else { std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]) })
        .collect()
}

pub fn smat(v: &[f64]) -> DMatrix<f64> {
    let n = ((((8 * v.len() + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    assert_eq!(svec_len(n), v.len(), "length is not triangular");
    let mut m = DMatrix::zeros(n, n);
    for ((i, j), &x) in svec_order(n).zip(v) {
        if i == j {
            m[(i, i)] = x;
        } else {
            m[(i, j)] = x / std::f64::consts::SQRT_2;
            m[(j, i)] = m[(i, j)];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(n: usize, vals: &[f64]) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |i, j| vals[i * n + j]);
        (&m + m.transpose()) * 0.5
    }

    proptest! {
        #[test]
        fn round_trip_and_inner_product(
            n in 1usize..6,
            a in proptest::collection::vec(-5.0f64..5.0, 36),
            b in proptest::collection::vec(-5.0f64..5.0, 36),
        ) {
            let (a, b) = (sym(n, &a), sym(n, &b));
            let sa = svec(&a);
            prop_assert!((smat(&sa) - &a).abs().max() < 1e-12);
            let lhs = (a.transpose() * &b).trace();
            let rhs: f64 = sa.iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn order_is_upper_triangle_by_column() {
        assert_eq!(svec_order(3).collect::<Vec<_>>(), vec![(0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)]);
    }
}
