//! Sparse SDPA (`.dat-s`) export for cross-checking with other solvers.
//!
//! SDPA form: minimize `cᵀx` subject to `Σ_k F_k x_k - F_0 ⪰ 0`. Linear
//! constraints share one diagonal block, equalities are split into two
//! inequalities and second-order cones become arrow matrices.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::expr::{AffExpr, AffMatrix};
use super::problem::{LinearKind, SdpProblem};

/// `(matrix number, block, row, col) -> value`, 1-based, upper triangle.
type Entries = BTreeMap<(usize, usize, usize, usize), f64>;

fn put(entries: &mut Entries, mat: usize, block: usize, i: usize, j: usize, v: f64) {
    if v != 0.0 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        *entries.entry((mat, block, i + 1, j + 1)).or_insert(0.0) += v;
    }
}

/// Writes `M(x) = M_0 + Σ x_k M_k ⪰ 0` into `block`.
fn put_matrix(entries: &mut Entries, block: usize, m: &AffMatrix) {
    for i in 0..m.rows() {
        for j in i..m.cols() {
            let e = m.get(i, j);
            put(entries, 0, block, i, j, -e.constant);
            for &(k, c) in &e.terms {
                put(entries, k + 1, block, i, j, c);
            }
        }
    }
}

fn put_scalar(entries: &mut Entries, block: usize, idx: usize, e: &AffExpr, sign: f64) {
    put(entries, 0, block, idx, idx, -sign * e.constant);
    for &(k, c) in &e.terms {
        put(entries, k + 1, block, idx, idx, sign * c);
    }
}

pub fn to_sdpa(problem: &SdpProblem) -> String {
    let mut entries = Entries::new();
    let mut struct_sizes: Vec<i64> = Vec::new();
    let mut block = 0;

    let linear_rows: usize = problem
        .linear()
        .iter()
        .map(|c| if c.kind == LinearKind::Equal { 2 } else { 1 })
        .sum();
    if linear_rows > 0 {
        block += 1;
        struct_sizes.push(-(linear_rows as i64));
        let mut idx = 0;
        for c in problem.linear() {
            // expr <= 0  <=>  -expr >= 0
            put_scalar(&mut entries, block, idx, &c.expr, -1.0);
            idx += 1;
            if c.kind == LinearKind::Equal {
                put_scalar(&mut entries, block, idx, &c.expr, 1.0);
                idx += 1;
            }
        }
    }
    for c in problem.socs() {
        block += 1;
        let n = c.tail.len() + 1;
        struct_sizes.push(n as i64);
        let arrow = AffMatrix::from_fn(n, n, |i, j| match (i, j) {
            _ if i == j => c.head.clone(),
            (0, j) => c.tail[j - 1].clone(),
            (i, 0) => c.tail[i - 1].clone(),
            _ => AffExpr::zero(),
        });
        put_matrix(&mut entries, block, &arrow);
    }
    for c in problem.lmis() {
        block += 1;
        struct_sizes.push(c.size() as i64);
        put_matrix(&mut entries, block, &c.psd_form());
    }

    let mut out = String::new();
    let _ = writeln!(out, "\"exported by dsf-core: {} LMIs, {} cones, {} linear rows", problem.lmis().len(), problem.socs().len(), linear_rows);
    let _ = writeln!(out, "{}", problem.n_scalars());
    let _ = writeln!(out, "{}", struct_sizes.len());
    let _ = writeln!(out, "{}", struct_sizes.iter().map(i64::to_string).collect::<Vec<_>>().join(" "));
    let mut c = vec![0.0; problem.n_scalars()];
    for &(k, v) in &problem.objective().terms {
        c[k] += v;
    }
    let _ = writeln!(out, "{}", c.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" "));
    for ((mat, blk, i, j), v) in entries {
        if v != 0.0 {
            let _ = writeln!(out, "{mat} {blk} {i} {j} {v:e}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{strict_pd, VarRole};

    #[test]
    fn identity_trace_problem_header_and_entries() {
        let mut p = SdpProblem::new();
        let e = p.add_sym_var(2, VarRole::Ellipsoid, "E");
        p.add_lmi(strict_pd(&e.expr(), 1.0, "E >= I").unwrap());
        p.set_objective(&e.entry(0, 0) + &e.entry(1, 1));
        let s = to_sdpa(&p);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "3");
        assert_eq!(lines[2], "1");
        assert_eq!(lines[3], "2");
        assert_eq!(lines[4], "1e0 0e0 1e0");
        // F_0 = I (since E - I >= 0), F_1 = e_11, F_2 = off-diagonal, F_3 = e_22.
        assert!(lines.contains(&"0 1 1 1 1e0"));
        assert!(lines.contains(&"0 1 2 2 1e0"));
        assert!(lines.contains(&"1 1 1 1 1e0"));
        assert!(lines.contains(&"2 1 1 2 1e0"));
        assert!(lines.contains(&"3 1 2 2 1e0"));
    }
}
