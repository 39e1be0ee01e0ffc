//! Implicit safety filter: one structured invariant-set program per step,
//! solved jointly with the smallest input correction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explicit_filter::MembershipMode;
use crate::lmi::structured::{StructuredOptions, StructuredSolution, StructuredVars};
use crate::lmi::{self, point_in_ellipsoid_level, AffExpr, AffMatrix, MatrixVar, Residuals, SdpProblem, SolveStatus, Tolerances, VarRole};
use crate::model::NetworkModel;

/// Default `‖Δu‖` threshold for treating the learning input as certified.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ImplicitOptions {
    pub membership: MembershipMode,
    pub structured: StructuredOptions,
    pub tolerances: Tolerances,
}

/// Outcome of one implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitDecision {
    pub u_learning: DVector<f64>,
    pub delta_u: DVector<f64>,
    pub u_applied: DVector<f64>,
    pub status: SolveStatus,
    pub residuals: Residuals,
    /// The invariant set found alongside the correction.
    pub solution: StructuredSolution,
    /// Per-agent membership levels of the predicted state.
    pub levels: Vec<f64>,
}

impl ImplicitDecision {
    pub fn correction_norm(&self) -> f64 {
        self.delta_u.norm()
    }

    /// Lyapunov value of `x` for the set found at this step.
    pub fn lyapunov(&self, model: &NetworkModel, x: &DVector<f64>) -> f64 {
        (0..model.num_agents())
            .map(|i| {
                let xi = model.agent_state(x, i);
                xi.dot(&(&self.solution.p[i] * &xi))
            })
            .sum()
    }
}

/// `‖Δu‖₂ <= tol`, closed comparison.
pub fn is_certified(decision: &ImplicitDecision, tol: f64) -> bool {
    decision.correction_norm() <= tol
}

/// Variables of the per-step program, exposed so callers can build feasible
/// points by hand.
#[derive(Debug, Clone)]
pub struct ImplicitProgram {
    pub problem: SdpProblem,
    pub sets: StructuredVars,
    pub delta_u: MatrixVar,
    pub levels: Vec<AffExpr>,
    /// Free per-agent levels, absent in the conservative mode.
    pub level_var: Option<MatrixVar>,
    pub epigraph: MatrixVar,
}

impl ImplicitProgram {
    /// Full variable vector for given sets, correction and levels; the
    /// epigraph variable is set to `‖Δu‖`.
    pub fn point(&self, e: &[DMatrix<f64>], y: &[DMatrix<f64>], s: &[Vec<DMatrix<f64>>], delta_u: &DVector<f64>, levels: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.problem.n_scalars()];
        for (var, m) in self.sets.e.iter().zip(e) {
            var.assign(&mut v, m);
        }
        for (var, m) in self.sets.y.iter().zip(y) {
            var.assign(&mut v, m);
        }
        for (vars, ms) in self.sets.s.iter().zip(s) {
            for (var, m) in vars.iter().zip(ms) {
                var.assign(&mut v, m);
            }
        }
        self.delta_u.assign(&mut v, &DMatrix::from_column_slice(delta_u.len(), 1, delta_u.as_slice()));
        if let Some(t) = &self.level_var {
            t.assign(&mut v, &DMatrix::from_column_slice(levels.len(), 1, levels));
        }
        self.epigraph.assign(&mut v, &DMatrix::from_element(1, 1, delta_u.norm()));
        v
    }
}

/// Assembles the per-step program without solving it.
pub fn build_program(model: &NetworkModel, x: &DVector<f64>, u_learning: &DVector<f64>, opts: &ImplicitOptions) -> Result<ImplicitProgram> {
    if x.len() != model.state_dim() || u_learning.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "x has {} entries (expected {}), u has {} (expected {})",
            x.len(),
            model.state_dim(),
            u_learning.len(),
            model.input_dim()
        )));
    }
    if x.iter().chain(u_learning.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Dimension("state and learning input must be finite".into()));
    }
    let n_agents = model.num_agents();
    let mut problem = SdpProblem::new();
    let sets = StructuredVars::declare(&mut problem, model);
    sets.add_constraints(&mut problem, model, &opts.structured)?;
    let delta_u = problem.add_var(model.input_dim(), 1, false, VarRole::InputCorrection, "du");
    let epigraph = problem.add_var(1, 1, false, VarRole::Auxiliary, "t");

    let mut level_var = None;
    let levels: Vec<AffExpr> = match opts.membership {
        MembershipMode::GlobalSum => {
            let t = problem.add_var(n_agents, 1, false, VarRole::Auxiliary, "levels");
            let mut sum = AffExpr::constant(-1.0);
            for i in 0..n_agents {
                sum.add_scaled(&t.entry(i, 0), 1.0);
            }
            problem.add_le(sum, "levels sum to at most one");
            let levels = (0..n_agents).map(|i| t.entry(i, 0)).collect();
            level_var = Some(t);
            levels
        }
        MembershipMode::LocalConservative => (0..n_agents).map(|_| AffExpr::constant(1.0 / n_agents as f64)).collect(),
    };

    for (i, agent) in model.agents().iter().enumerate() {
        let x_n = model.nbhd_state(x, i);
        let u_l = model.agent_input(u_learning, i);
        let off = model.input_offset(i);
        let du_i = AffMatrix::column((0..agent.input_dim).map(|d| delta_u.entry(off + d, 0)).collect());
        let mut seen: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
        for (v, th) in agent.vertices.iter().enumerate() {
            let ab = agent.dynamics.eval_unchecked(th);
            if seen.contains(&ab) {
                continue;
            }
            let nominal = &ab.0 * &x_n + &ab.1 * &u_l;
            let pred = AffMatrix::constant(&DMatrix::from_column_slice(nominal.len(), 1, nominal.as_slice()))
                .add(&AffMatrix::left_mul(&ab.1, &du_i));
            problem.add_lmi(point_in_ellipsoid_level(
                &pred,
                &sets.e[i].expr(),
                levels[i].clone(),
                format!("prediction agent {i} vertex {v}"),
            )?);
            seen.push(ab);
        }
        let us = &agent.input_set;
        for l in 0..us.rows() {
            let mut e = AffExpr::constant((us.matrix.row(l) * &u_l)[0] - us.bound[l]);
            for d in 0..agent.input_dim {
                e.add_scaled(&delta_u.entry(off + d, 0), us.matrix[(l, d)]);
            }
            problem.add_le(e, format!("applied input agent {i} row {l}"));
        }
    }

    let tail = (0..model.input_dim()).map(|k| delta_u.entry(k, 0)).collect();
    problem.add_soc(epigraph.entry(0, 0), tail, "correction norm");
    problem.set_objective(epigraph.entry(0, 0));
    Ok(ImplicitProgram { problem, sets, delta_u, levels, level_var, epigraph })
}

/// Smallest correction `Δu` such that `u_L + Δu` keeps every vertex
/// prediction inside a jointly computed structured invariant set.
///
/// Infeasibility is reported as [`Error::Infeasible`]; the caller picks a
/// fallback.
pub fn implicit_step(model: &NetworkModel, x: &DVector<f64>, u_learning: &DVector<f64>, opts: &ImplicitOptions) -> Result<ImplicitDecision> {
    let prog = build_program(model, x, u_learning, opts)?;
    let res = lmi::solve(&prog.problem, &opts.tolerances)?;
    match res.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(Error::Infeasible(res.diagnostic.unwrap_or_else(|| "implicit step infeasible".into())))
        }
        other => return Err(Error::Solver(format!("implicit step: {other:?} {}", res.diagnostic.unwrap_or_default()))),
    }
    let delta_u = res.value(&prog.delta_u).column(0).into_owned();
    let solution = prog.sets.extract(model, &res)?;
    let levels = prog.levels.iter().map(|l| res.eval(l)).collect();
    Ok(ImplicitDecision {
        u_learning: u_learning.clone(),
        u_applied: u_learning + &delta_u,
        delta_u,
        status: res.status,
        residuals: res.residuals,
        solution,
        levels,
    })
}
