//! Schur-complement building blocks for the invariant-set programs.

use nalgebra::DMatrix;

use super::expr::{AffExpr, AffMatrix};
use super::problem::{LmiConstraint, Sense};
use crate::error::{Error, Result};
use crate::model::Neighborhood;

fn check_square(m: &AffMatrix, what: &str) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::Dimension(format!("{what} must be square, got {:?}", m.shape())));
    }
    Ok(())
}

fn row_matrix(row: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, row.len(), row)
}

/// `[[h², H_l E], [E H_lᵀ, E]] ⪰ 0`, i.e. `{x : xᵀE⁻¹x <= 1} ⊆ {x : H_l x <= h}`.
pub fn ellipsoid_in_halfspace(e: &AffMatrix, row: &[f64], bound: f64, label: impl Into<String>) -> Result<LmiConstraint> {
    check_square(e, "E")?;
    if row.len() != e.rows() {
        return Err(Error::Dimension(format!("halfspace row has length {}, E is {}", row.len(), e.rows())));
    }
    if !(bound > 0.0) {
        return Err(Error::OriginNotInterior { row: 0, bound });
    }
    let he = AffMatrix::left_mul(&row_matrix(row), e);
    let corner = AffMatrix::constant(&DMatrix::from_element(1, 1, bound * bound));
    LmiConstraint::new(AffMatrix::sym_block(&corner, &he.transpose(), e), Sense::Psd, label)
}

/// `[[o², O_e Y], [Yᵀ O_eᵀ, E_N]] ⪰ 0`, so `|O_e K x_N| <= o` on the
/// neighborhood ellipsoid when `K = Y E_N⁻¹`.
pub fn input_row_containment(
    y: &AffMatrix,
    e_n: &AffMatrix,
    row: &[f64],
    bound: f64,
    label: impl Into<String>,
) -> Result<LmiConstraint> {
    check_square(e_n, "E_N")?;
    if y.cols() != e_n.rows() || row.len() != y.rows() {
        return Err(Error::Dimension(format!(
            "input row length {} / Y {:?} / E_N {:?}",
            row.len(),
            y.shape(),
            e_n.shape()
        )));
    }
    if !(bound > 0.0) {
        return Err(Error::OriginNotInterior { row: 0, bound });
    }
    let oy = AffMatrix::left_mul(&row_matrix(row), y);
    let corner = AffMatrix::constant(&DMatrix::from_element(1, 1, bound * bound));
    LmiConstraint::new(AffMatrix::sym_block(&corner, &oy.transpose(), e_n), Sense::Psd, label)
}

/// Ingredients of one robust invariance LMI for agent `i` at one parameter
/// vertex.
pub struct InvarianceTerms<'a> {
    pub e_i: &'a AffMatrix,
    pub e_n: &'a AffMatrix,
    /// `W_i T_iᵀ E_i T_i W_iᵀ`.
    pub e_bar: &'a AffMatrix,
    pub s_n: &'a AffMatrix,
    pub y: &'a AffMatrix,
    pub a_n: &'a DMatrix<f64>,
    pub b: &'a DMatrix<f64>,
    /// Multiplies `Ē_i`; `1 - decay` bounds the per-step Lyapunov contraction.
    pub decay: f64,
}

/// `[[decay·Ē_i + S_{N_i}, ⋆], [A_N E_N + B Y, E_i]] ⪰ 0`.
pub fn invariance_block(t: &InvarianceTerms<'_>, label: impl Into<String>) -> Result<LmiConstraint> {
    check_square(t.e_i, "E_i")?;
    check_square(t.e_n, "E_N")?;
    let (ni, nn) = (t.e_i.rows(), t.e_n.rows());
    if t.e_bar.shape() != (nn, nn)
        || t.s_n.shape() != (nn, nn)
        || t.a_n.shape() != (ni, nn)
        || t.b.nrows() != ni
        || t.y.shape() != (t.b.ncols(), nn)
    {
        return Err(Error::Dimension(format!(
            "invariance block: E_i {ni}, E_N {nn}, A {:?}, B {:?}, Y {:?}",
            t.a_n.shape(),
            t.b.shape(),
            t.y.shape()
        )));
    }
    let top_left = t.e_bar.scale(t.decay).add(t.s_n);
    let lower = AffMatrix::left_mul(t.a_n, t.e_n).add(&AffMatrix::left_mul(t.b, t.y));
    LmiConstraint::new(AffMatrix::sym_block(&top_left, &lower, t.e_i), Sense::Psd, label)
}

/// `Σ_{r ∈ N̄_i} T_i W_rᵀ S_{N_r} W_r T_iᵀ ⪯ 0`: the agent-`i` diagonal blocks
/// of every neighborhood coupling matrix that involves agent `i`.
///
/// `couplings[r]` is `S_{N_r}` over `x_{N_r}`; `neighborhoods[r]` gives the
/// layout of `x_{N_r}`.
pub fn coupling_block(
    agent: usize,
    neighborhoods: &[Neighborhood],
    couplings: &[Option<AffMatrix>],
    dims: &[usize],
    label: impl Into<String>,
) -> Result<LmiConstraint> {
    let n_i = dims[agent];
    let mut sum = AffMatrix::zeros(n_i, n_i);
    for nb in neighborhoods {
        let Some(pos) = nb.position_of(agent) else { continue };
        let r = nb.agent;
        let s = couplings
            .get(r)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::Dimension(format!("missing coupling variable S_N{r} needed by agent {agent}")))?;
        if s.shape() != (nb.dim, nb.dim) {
            return Err(Error::Dimension(format!("S_N{r} has shape {:?}, expected {}", s.shape(), nb.dim)));
        }
        let o = nb.offsets[pos];
        sum = sum.add(&s.block(o, o, n_i, n_i));
    }
    LmiConstraint::new(sum, Sense::Nsd, label)
}

/// `[[level, xᵀ], [x, E]] ⪰ 0`, i.e. `xᵀ E⁻¹ x <= level`.
pub fn point_in_ellipsoid_level(x: &AffMatrix, e: &AffMatrix, level: AffExpr, label: impl Into<String>) -> Result<LmiConstraint> {
    check_square(e, "E")?;
    if x.shape() != (e.rows(), 1) {
        return Err(Error::Dimension(format!("point is {:?}, E is {}", x.shape(), e.rows())));
    }
    let corner = AffMatrix::from_fn(1, 1, |_, _| level.clone());
    LmiConstraint::new(AffMatrix::sym_block(&corner, x, e), Sense::Psd, label)
}

/// `[[1/N, xᵀ], [x, E]] ⪰ 0`.
pub fn point_in_scaled_ellipsoid(x: &AffMatrix, e: &AffMatrix, n: usize, label: impl Into<String>) -> Result<LmiConstraint> {
    if n == 0 {
        return Err(Error::Dimension("scaling N must be at least 1".into()));
    }
    point_in_ellipsoid_level(x, e, AffExpr::constant(1.0 / n as f64), label)
}

/// `E - εI ⪰ 0`.
pub fn strict_pd(e: &AffMatrix, eps: f64, label: impl Into<String>) -> Result<LmiConstraint> {
    check_square(e, "E")?;
    let shift = AffMatrix::constant(&DMatrix::from_diagonal_element(e.rows(), e.rows(), eps));
    LmiConstraint::new(e.sub(&shift), Sense::Psd, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, spd_inverse};
    use crate::lmi::{problem::SdpProblem, VarRole};
    use crate::model::CommGraph;
    use proptest::prelude::*;

    fn const_m(v: f64) -> AffMatrix {
        AffMatrix::constant(&DMatrix::from_element(1, 1, v))
    }

    fn psd_holds(l: &LmiConstraint) -> bool {
        min_eigenvalue(&l.eval(&[])) >= -1e-12
    }

    #[test]
    fn scalar_halfspace_feasible_iff_e_below_h_squared() {
        for (e, want) in [(3.9, true), (4.0, true), (4.1, false), (0.5, true)] {
            let l = ellipsoid_in_halfspace(&const_m(e), &[1.0], 2.0, "h").unwrap();
            assert_eq!(psd_holds(&l), want, "E = {e}");
        }
    }

    #[test]
    fn touching_ellipsoid_is_on_the_boundary() {
        // E = h² (H Hᵀ)^{-1} along H for H = (1, 1), h = 1 and E proportional to I.
        let e = DMatrix::from_diagonal_element(2, 2, 0.5);
        let l = ellipsoid_in_halfspace(&AffMatrix::constant(&e), &[1.0, 1.0], 1.0, "touch").unwrap();
        let lam = min_eigenvalue(&l.eval(&[]));
        assert!(lam.abs() < 1e-12, "min eigenvalue {lam}");
    }

    #[test]
    fn far_halfspace_is_vacuous() {
        let e = DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 3.0]);
        let l = ellipsoid_in_halfspace(&AffMatrix::constant(&e), &[1.0, -2.0], 1e9, "far").unwrap();
        assert!(psd_holds(&l));
    }

    #[test]
    fn halfspace_dimension_mismatch() {
        let e = AffMatrix::constant(&DMatrix::identity(2, 2));
        assert!(ellipsoid_in_halfspace(&e, &[1.0], 1.0, "x").is_err());
    }

    #[test]
    fn zero_gain_input_row_always_feasible() {
        let l = input_row_containment(&const_m(0.0), &const_m(1.0), &[1.0], 0.3, "u").unwrap();
        assert!(psd_holds(&l));
    }

    #[test]
    fn scalar_input_row_needs_small_gain() {
        for (k, want) in [(0.9, true), (1.0, true), (1.1, false), (-1.2, false)] {
            let l = input_row_containment(&const_m(k), &const_m(1.0), &[1.0], 1.0, "u").unwrap();
            assert_eq!(psd_holds(&l), want, "k = {k}");
        }
    }

    #[test]
    fn scalar_invariance_is_closed_loop_contraction() {
        let (b, z) = (DMatrix::from_element(1, 1, 1.0), const_m(0.0));
        for (a, e, y) in [(0.5, 2.0, -1.0), (0.5, 1.0, 0.4), (0.5, 1.0, 0.6), (1.2, 1.0, -0.1), (0.0, 1.0, 0.0)] {
            let am = DMatrix::from_element(1, 1, a);
            let (em, ym) = (const_m(e), const_m(y));
            let l = invariance_block(
                &InvarianceTerms { e_i: &em, e_n: &em, e_bar: &em, s_n: &z, y: &ym, a_n: &am, b: &b, decay: 1.0 },
                "inv",
            )
            .unwrap();
            assert_eq!(psd_holds(&l), (a + y / e).abs() <= 1.0, "a={a} e={e} y={y}");
        }
    }

    #[test]
    fn coupling_sums_contributions_of_all_neighborhoods() {
        let g = CommGraph::line(3).unwrap();
        let dims = [1, 1, 1];
        let nbs: Vec<_> = (0..3).map(|i| Neighborhood::new(&g, i, &dims)).collect();
        let mut prob = SdpProblem::new();
        let s: Vec<_> = nbs
            .iter()
            .map(|nb| prob.add_sym_var(nb.dim, VarRole::Coupling, format!("S{}", nb.agent)))
            .collect();
        let couplings: Vec<_> = s.iter().map(|v| Some(v.expr())).collect();
        let l = coupling_block(1, &nbs, &couplings, &dims, "c").unwrap();
        let vals: Vec<f64> = (0..prob.n_scalars()).map(|k| (k as f64 * 0.37).sin()).collect();
        // Dense oracle: Σ_r W_rᵀ S_r W_r, block (1, 1).
        let mut dense = DMatrix::zeros(3, 3);
        for (nb, v) in nbs.iter().zip(&s) {
            let w = crate::model::LiftingMatrix::new(
                crate::model::LiftingKind::Neighborhood,
                nb.members.clone(),
                3,
            )
            .to_matrix();
            dense += w.transpose() * v.value(&vals) * w;
        }
        assert!((l.eval(&vals)[(0, 0)] - dense[(1, 1)]).abs() < 1e-14);

        let missing = vec![couplings[0].clone(), None, couplings[2].clone()];
        assert!(coupling_block(1, &nbs, &missing, &dims, "c").is_err());
    }

    #[test]
    fn isolated_agent_coupling_is_own_block() {
        let g = CommGraph::new(1, &[]).unwrap();
        let nbs = vec![Neighborhood::new(&g, 0, &[2])];
        let s = AffMatrix::constant(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]));
        let l = coupling_block(0, &nbs, &[Some(s)], &[2], "c").unwrap();
        assert!(l.is_satisfied(&[], 0.0));
    }

    #[test]
    fn point_in_scaled_ellipsoid_cases() {
        let x = |v: f64| AffMatrix::column(vec![AffExpr::constant(v)]);
        let l = point_in_scaled_ellipsoid(&x(0.5), &const_m(1.0), 1, "p").unwrap();
        let eig = nalgebra::SymmetricEigen::new(l.eval(&[])).eigenvalues;
        let mut eig: Vec<f64> = eig.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 0.5).abs() < 1e-14 && (eig[1] - 1.5).abs() < 1e-14);
        assert!(!psd_holds(&point_in_scaled_ellipsoid(&x(0.6), &const_m(1.0), 3, "p").unwrap()));
        assert!(psd_holds(&point_in_scaled_ellipsoid(&x(0.0), &const_m(1e-6), 7, "p").unwrap()));
        assert!(point_in_scaled_ellipsoid(&x(0.0), &const_m(1.0), 0, "p").is_err());
    }

    #[test]
    fn strict_pd_cases() {
        assert!(psd_holds(&strict_pd(&const_m(1e-6), 1e-6, "e").unwrap()));
        assert!(!psd_holds(&strict_pd(&const_m(0.0), 1e-6, "e").unwrap()));
    }

    fn random_spd(n: usize, vals: &[f64]) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| vals[i * 4 + j]);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    proptest! {
        #[test]
        fn halfspace_lmi_agrees_with_support_function(
            n in 1usize..5,
            vals in proptest::collection::vec(-2.0f64..2.0, 16),
            row in proptest::collection::vec(-2.0f64..2.0, 4),
            h in 0.1f64..5.0,
        ) {
            let e = random_spd(n, &vals);
            let row = &row[..n];
            let hv = DMatrix::from_row_slice(1, n, row);
            let support = (&hv * &e * hv.transpose())[(0, 0)].sqrt();
            let l = ellipsoid_in_halfspace(&AffMatrix::constant(&e), row, h, "h").unwrap();
            let lam = min_eigenvalue(&l.eval(&[]));
            // Boundary band where both tests are numerically ambiguous.
            prop_assume!((support - h).abs() > 1e-8);
            prop_assert_eq!(lam >= 0.0, support <= h);
        }

        #[test]
        fn point_lmi_agrees_with_quadratic_form(
            vals in proptest::collection::vec(-2.0f64..2.0, 16),
            x in proptest::collection::vec(-3.0f64..3.0, 2),
            n_agents in 1usize..5,
        ) {
            let e = random_spd(2, &vals);
            let p = spd_inverse(&e).unwrap();
            let xv = nalgebra::DVector::from_vec(x.clone());
            let q = xv.dot(&(&p * &xv));
            let level = 1.0 / n_agents as f64;
            prop_assume!((q - level).abs() > 1e-8);
            let xa = AffMatrix::column(x.iter().map(|&v| AffExpr::constant(v)).collect());
            let l = point_in_scaled_ellipsoid(&xa, &AffMatrix::constant(&e), n_agents, "p").unwrap();
            prop_assert_eq!(min_eigenvalue(&l.eval(&[])) >= 0.0, q <= level);
        }

        #[test]
        fn lmi_expressions_are_affine(
            v1 in proptest::collection::vec(-2.0f64..2.0, 8),
            v2 in proptest::collection::vec(-2.0f64..2.0, 8),
        ) {
            let mut prob = SdpProblem::new();
            let e = prob.add_sym_var(2, VarRole::Ellipsoid, "E");
            let y = prob.add_var(1, 2, false, VarRole::Gain, "Y");
            let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, -0.2, 0.9]);
            let b = DMatrix::from_column_slice(2, 1, &[0.0, 0.1]);
            let s = AffMatrix::zeros(2, 2);
            let (ee, ye) = (e.expr(), y.expr());
            let l = invariance_block(
                &InvarianceTerms { e_i: &ee, e_n: &ee, e_bar: &ee, s_n: &s, y: &ye, a_n: &a, b: &b, decay: 1.0 },
                "inv",
            ).unwrap();
            let mid: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| 0.5 * (a + b)).collect();
            let avg = (l.eval(&v1) + l.eval(&v2)) * 0.5;
            prop_assert!((l.eval(&mid) - avg).abs().max() < 1e-12);
        }
    }
}
