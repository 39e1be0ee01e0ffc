use nalgebra::DMatrix;

use super::expr::{AffExpr, AffMatrix, MatrixVar, VarRole};
use crate::error::{Error, Result};
use crate::linalg::{max_eigenvalue, min_eigenvalue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `M ⪰ 0`
    Psd,
    /// `M ⪯ 0`
    Nsd,
}

/// Linear matrix inequality on an affine symmetric matrix expression.
#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub matrix: AffMatrix,
    pub sense: Sense,
    pub label: String,
}

impl LmiConstraint {
    pub fn new(matrix: AffMatrix, sense: Sense, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if matrix.rows() != matrix.cols() {
            return Err(Error::Dimension(format!("{label}: LMI matrix is {:?}", matrix.shape())));
        }
        let matrix = matrix.compact();
        for r in 0..matrix.rows() {
            for c in r + 1..matrix.cols() {
                if matrix.get(r, c) != matrix.get(c, r) {
                    return Err(Error::Dimension(format!("{label}: matrix is not symmetric at ({r}, {c})")));
                }
            }
        }
        Ok(Self { matrix, sense, label })
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn eval(&self, values: &[f64]) -> DMatrix<f64> {
        self.matrix.eval(values)
    }

    /// Matrix that must be PSD (negated for `⪯` constraints).
    pub fn psd_form(&self) -> AffMatrix {
        match self.sense {
            Sense::Psd => self.matrix.clone(),
            Sense::Nsd => self.matrix.scale(-1.0),
        }
    }

    /// Amount by which the inequality is violated at `values` (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let m = self.eval(values);
        let v = match self.sense {
            Sense::Psd => -min_eigenvalue(&m),
            Sense::Nsd => max_eigenvalue(&m),
        };
        v.max(0.0)
    }

    pub fn is_satisfied(&self, values: &[f64], tol: f64) -> bool {
        self.violation(values) <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearKind {
    /// `expr <= 0`
    LessEq,
    /// `expr = 0`
    Equal,
}

#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub expr: AffExpr,
    pub kind: LinearKind,
    pub label: String,
}

impl LinearConstraint {
    pub fn violation(&self, values: &[f64]) -> f64 {
        let v = self.expr.eval(values);
        match self.kind {
            LinearKind::LessEq => v.max(0.0),
            LinearKind::Equal => v.abs(),
        }
    }
}

/// `‖tail‖₂ <= head`.
#[derive(Debug, Clone)]
pub struct SocConstraint {
    pub head: AffExpr,
    pub tail: Vec<AffExpr>,
    pub label: String,
}

impl SocConstraint {
    pub fn violation(&self, values: &[f64]) -> f64 {
        let norm = self.tail.iter().map(|e| e.eval(values).powi(2)).sum::<f64>().sqrt();
        (norm - self.head.eval(values)).max(0.0)
    }
}

/// Minimize a linear objective subject to LMIs, second-order cones and
/// scalar linear constraints.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    vars: Vec<MatrixVar>,
    n_scalars: usize,
    objective: AffExpr,
    lmis: Vec<LmiConstraint>,
    linear: Vec<LinearConstraint>,
    socs: Vec<SocConstraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, rows: usize, cols: usize, symmetric: bool, role: VarRole, context: impl Into<String>) -> MatrixVar {
        assert!(!symmetric || rows == cols, "symmetric variables must be square");
        let v = MatrixVar {
            id: self.vars.len(),
            rows,
            cols,
            symmetric,
            role,
            context: context.into(),
            offset: self.n_scalars,
        };
        self.n_scalars += v.len();
        self.vars.push(v.clone());
        v
    }

    pub fn add_sym_var(&mut self, n: usize, role: VarRole, context: impl Into<String>) -> MatrixVar {
        self.add_var(n, n, true, role, context)
    }

    pub fn add_lmi(&mut self, lmi: LmiConstraint) {
        self.lmis.push(lmi);
    }

    /// `expr <= 0`.
    pub fn add_le(&mut self, expr: AffExpr, label: impl Into<String>) {
        self.linear.push(LinearConstraint { expr: expr.compact(), kind: LinearKind::LessEq, label: label.into() });
    }

    /// `expr = 0`.
    pub fn add_eq(&mut self, expr: AffExpr, label: impl Into<String>) {
        self.linear.push(LinearConstraint { expr: expr.compact(), kind: LinearKind::Equal, label: label.into() });
    }

    pub fn add_soc(&mut self, head: AffExpr, tail: Vec<AffExpr>, label: impl Into<String>) {
        self.socs.push(SocConstraint {
            head: head.compact(),
            tail: tail.into_iter().map(AffExpr::compact).collect(),
            label: label.into(),
        });
    }

    pub fn set_objective(&mut self, objective: AffExpr) {
        self.objective = objective.compact();
    }

    pub fn vars(&self) -> &[MatrixVar] {
        &self.vars
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn objective(&self) -> &AffExpr {
        &self.objective
    }

    pub fn lmis(&self) -> &[LmiConstraint] {
        &self.lmis
    }

    pub fn linear(&self) -> &[LinearConstraint] {
        &self.linear
    }

    pub fn socs(&self) -> &[SocConstraint] {
        &self.socs
    }

    pub fn constraint_count(&self) -> usize {
        self.lmis.len() + self.linear.len() + self.socs.len()
    }

    /// Structural checks: objective and constraints only reference declared
    /// slots, and there is at least one constraint.
    pub fn validate(&self) -> Result<()> {
        if self.constraint_count() == 0 {
            return Err(Error::Solver("problem has no constraints".into()));
        }
        let n = self.n_scalars;
        let bad = |e: &AffExpr| e.terms.iter().any(|&(k, _)| k >= n);
        if bad(&self.objective)
            || self.linear.iter().any(|c| bad(&c.expr))
            || self.socs.iter().any(|c| bad(&c.head) || c.tail.iter().any(&bad))
            || self.lmis.iter().any(|c| c.matrix.entries().any(&bad))
        {
            return Err(Error::Solver("expression references an undeclared variable".into()));
        }
        Ok(())
    }

    /// Worst violation per constraint family, with the label of the worst one.
    pub fn residuals(&self, values: &[f64]) -> Residuals {
        let mut r = Residuals::default();
        for c in &self.lmis {
            let v = c.violation(values);
            let scale = 1.0 + c.matrix.entries().map(|e| e.constant.abs()).fold(0.0, f64::max);
            if v > r.max_psd_violation {
                r.max_psd_violation = v;
            }
            if v / scale > r.worst_relative {
                r.worst_relative = v / scale;
                r.worst_label = Some(c.label.clone());
            }
        }
        for c in &self.linear {
            let v = c.violation(values);
            r.max_linear_violation = r.max_linear_violation.max(v);
            let scale = 1.0 + c.expr.constant.abs();
            if v / scale > r.worst_relative {
                r.worst_relative = v / scale;
                r.worst_label = Some(c.label.clone());
            }
        }
        for c in &self.socs {
            let v = c.violation(values);
            r.max_linear_violation = r.max_linear_violation.max(v);
            if v > r.worst_relative {
                r.worst_relative = v;
                r.worst_label = Some(c.label.clone());
            }
        }
        r
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Residuals {
    /// Largest eigenvalue violation over all LMIs.
    pub max_psd_violation: f64,
    /// Largest violation over linear and second-order-cone constraints.
    pub max_linear_violation: f64,
    worst_relative: f64,
    pub worst_label: Option<String>,
}

impl Residuals {
    /// Violations measured relative to `1 + |constant data|` of each constraint.
    pub fn worst_relative(&self) -> f64 {
        self.worst_relative
    }
}

/// Acceptance thresholds for a returned solution and interior-point settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Eigenvalue tolerance, relative to `1 + max |constant entry|` of each LMI.
    pub psd: f64,
    /// Linear tolerance, relative to `1 + |constant|`.
    pub linear: f64,
    pub solver_gap: f64,
    pub solver_feas: f64,
    pub max_iter: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { psd: 1e-7, linear: 1e-8, solver_gap: 1e-9, solver_feas: 1e-9, max_iter: 300 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Certified primal infeasible.
    Infeasible,
    /// Objective unbounded below (dual infeasible).
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub residuals: Residuals,
    /// Constraint named by the infeasibility certificate or the worst residual.
    pub diagnostic: Option<String>,
    pub iterations: u32,
    pub solve_time: f64,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, var: &MatrixVar) -> DMatrix<f64> {
        var.value(&self.values)
    }

    pub fn eval(&self, e: &AffExpr) -> f64 {
        e.eval(&self.values)
    }
}
