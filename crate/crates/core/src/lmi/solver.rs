//! Adapter onto the Clarabel interior-point solver.
//!
//! Constraints are mapped to Clarabel's `A x + s = b, s ∈ K` form with the
//! cone order zero, nonnegative, second-order, PSD-triangle.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::expr::AffExpr;
use super::problem::{LinearKind, SdpProblem, SolveResult, SolveStatus, Tolerances};
use super::svec::svec_order;
use crate::error::Result;

struct Assembly {
    rows_i: Vec<usize>,
    cols_j: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
    /// `(first row, row count, label)` per constraint block.
    blocks: Vec<(usize, usize, String)>,
}

impl Assembly {
    fn new() -> Self {
        Self { rows_i: Vec::new(), cols_j: Vec::new(), vals: Vec::new(), b: Vec::new(), cones: Vec::new(), blocks: Vec::new() }
    }

    /// Appends row `s = sign · expr` (so `A = -sign · a`, `b = sign · c`).
    fn push_row(&mut self, e: &AffExpr, sign: f64) {
        let row = self.b.len();
        for &(k, c) in &e.terms {
            if c != 0.0 {
                self.rows_i.push(row);
                self.cols_j.push(k);
                self.vals.push(-sign * c);
            }
        }
        self.b.push(sign * e.constant);
    }

    fn open_block(&mut self) -> usize {
        self.b.len()
    }

    fn close_block(&mut self, start: usize, label: &str) {
        self.blocks.push((start, self.b.len() - start, label.to_string()));
    }
}

fn block_scale(rescale: bool, magnitude: f64) -> f64 {
    if rescale && magnitude > 0.0 {
        1.0 / magnitude
    } else {
        1.0
    }
}

fn assemble(problem: &SdpProblem, rescale: bool) -> Assembly {
    let mut asm = Assembly::new();
    let eqs: Vec<_> = problem.linear().iter().filter(|c| c.kind == LinearKind::Equal).collect();
    let les: Vec<_> = problem.linear().iter().filter(|c| c.kind == LinearKind::LessEq).collect();
    // expr = c + a·x; s = -expr works for both `= 0` and `<= 0`.
    for group in [&eqs, &les] {
        for c in group.iter() {
            let start = asm.open_block();
            asm.push_row(&c.expr, -block_scale(rescale, c.expr.magnitude()));
            asm.close_block(start, &c.label);
        }
    }
    if !eqs.is_empty() {
        asm.cones.push(SupportedConeT::ZeroConeT(eqs.len()));
    }
    if !les.is_empty() {
        asm.cones.push(SupportedConeT::NonnegativeConeT(les.len()));
    }
    for c in problem.socs() {
        let mag = c.tail.iter().map(AffExpr::magnitude).fold(c.head.magnitude(), f64::max);
        let s = block_scale(rescale, mag);
        let start = asm.open_block();
        asm.push_row(&c.head, s);
        for t in &c.tail {
            asm.push_row(t, s);
        }
        asm.close_block(start, &c.label);
        asm.cones.push(SupportedConeT::SecondOrderConeT(1 + c.tail.len()));
    }
    for c in problem.lmis() {
        let m = c.psd_form();
        let n = m.rows();
        let mag = m.entries().map(AffExpr::magnitude).fold(0.0, f64::max);
        let s = block_scale(rescale, mag);
        let start = asm.open_block();
        for (i, j) in svec_order(n) {
            let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
            asm.push_row(m.get(i, j), w * s);
        }
        asm.close_block(start, &c.label);
        asm.cones.push(SupportedConeT::PSDTriangleConeT(n));
    }
    asm
}

fn settings(tol: &Tolerances, retry: bool) -> DefaultSettings<f64> {
    let mut b = DefaultSettingsBuilder::default();
    b.verbose(std::env::var("DSF_SOLVER_VERBOSE").is_ok_and(|v| v != "0"))
        .tol_gap_abs(tol.solver_gap)
        .tol_gap_rel(tol.solver_gap)
        .tol_feas(tol.solver_feas)
        .max_iter(if retry { 2 * tol.max_iter } else { tol.max_iter })
        .presolve_enable(false)
        .chordal_decomposition_enable(false);
    if retry {
        b.equilibrate_max_iter(50).static_regularization_constant(1e-7);
    }
    b.build().expect("static solver settings are valid")
}

/// Solves `problem`; on a solver-side numerical failure the problem is solved
/// once more with every constraint block rescaled to unit magnitude.
pub fn solve(problem: &SdpProblem, tol: &Tolerances) -> Result<SolveResult> {
    problem.validate()?;
    let first = solve_once(problem, tol, false);
    if first.status == SolveStatus::NumericalFailure {
        let second = solve_once(problem, tol, true);
        if second.status != SolveStatus::NumericalFailure {
            return Ok(second);
        }
    }
    Ok(first)
}

fn solve_once(problem: &SdpProblem, tol: &Tolerances, retry: bool) -> SolveResult {
    let n = problem.n_scalars();
    let asm = assemble(problem, retry);
    let m = asm.b.len();
    let a = CscMatrix::new_from_triplets(m, n, asm.rows_i, asm.cols_j, asm.vals);
    let p = CscMatrix::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(k, c) in &problem.objective().terms {
        q[k] += c;
    }
    let mut solver = match DefaultSolver::new(&p, &q, &a, &asm.b, &asm.cones, settings(tol, retry)) {
        Ok(s) => s,
        Err(e) => {
            return SolveResult {
                status: SolveStatus::NumericalFailure,
                values: vec![0.0; n],
                objective: f64::NAN,
                residuals: Default::default(),
                diagnostic: Some(format!("solver rejected the problem data: {e:?}")),
                iterations: 0,
                solve_time: 0.0,
            };
        }
    };
    solver.solve();
    let sol = &solver.solution;
    let values = sol.x.clone();
    let residuals = problem.residuals(&values);
    let objective = problem.objective().eval(&values);

    let (status, diagnostic) = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            if residuals_within(problem, &values, tol) {
                (SolveStatus::Optimal, None)
            } else {
                (
                    SolveStatus::NumericalFailure,
                    Some(format!(
                        "solution violates tolerances; worst constraint: {}",
                        residuals.worst_label.clone().unwrap_or_default()
                    )),
                )
            }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            let worst = asm
                .blocks
                .iter()
                .map(|(s, len, label)| (sol.z[*s..s + len].iter().map(|z| z * z).sum::<f64>(), label))
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, l)| l.clone());
            (SolveStatus::Infeasible, Some(format!("infeasibility certificate concentrates on: {}", worst.unwrap_or_default())))
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            (SolveStatus::Unbounded, Some("objective is unbounded below".to_string()))
        }
        other => (
            SolveStatus::NumericalFailure,
            Some(format!(
                "solver stopped with {other:?}; worst constraint: {}",
                residuals.worst_label.clone().unwrap_or_default()
            )),
        ),
    };
    SolveResult {
        status,
        values,
        objective,
        residuals,
        diagnostic,
        iterations: sol.iterations,
        solve_time: sol.solve_time,
    }
}

/// Per-constraint check against the configured tolerances, each relative to
/// the constraint's own data scale.
fn residuals_within(problem: &SdpProblem, values: &[f64], tol: &Tolerances) -> bool {
    problem.lmis().iter().all(|c| {
        let scale = 1.0 + c.matrix.entries().map(|e| e.constant.abs()).fold(0.0, f64::max);
        c.violation(values) <= tol.psd * scale
    }) && problem.linear().iter().all(|c| c.violation(values) <= tol.linear * (1.0 + c.expr.constant.abs()))
        && problem.socs().iter().all(|c| c.violation(values) <= tol.linear * (1.0 + c.head.eval(values).abs()))
}
