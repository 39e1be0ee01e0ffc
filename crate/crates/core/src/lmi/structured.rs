//! Shared structured robust invariant-set program.
//!
//! Declares per-agent `E_i`, `Y_i` and block-diagonal coupling matrices, and
//! emits the positivity, invariance, coupling and constraint-containment
//! LMIs. Synthesis and the implicit filter add their own objective and
//! membership constraints on top.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::blocks::{coupling_block, ellipsoid_in_halfspace, input_row_containment, invariance_block, strict_pd, InvarianceTerms};
use super::expr::{AffMatrix, MatrixVar, VarRole};
use super::problem::{SdpProblem, SolveResult};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::model::NetworkModel;

/// Margins applied to the structured program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuredOptions {
    /// `E_i ⪰ eps·I`.
    pub eps: f64,
    /// Required per-step Lyapunov contraction; `V(x⁺) <= (1 - contraction) V(x)`.
    pub contraction: f64,
    /// State and input bounds are shrunk by the factor `1 - backoff`.
    pub backoff: f64,
}

impl Default for StructuredOptions {
    fn default() -> Self {
        Self { eps: 1e-6, contraction: 1e-3, backoff: 1e-6 }
    }
}

/// Decision variables of the structured program.
#[derive(Debug, Clone)]
pub struct StructuredVars {
    pub e: Vec<MatrixVar>,
    pub y: Vec<MatrixVar>,
    /// `s[r][k]` is the block of `S_{N_r}` for the `k`-th member of `N̄_r`.
    pub s: Vec<Vec<MatrixVar>>,
}

impl StructuredVars {
    pub fn declare(problem: &mut SdpProblem, model: &NetworkModel) -> Self {
        let mut e = Vec::new();
        let mut y = Vec::new();
        let mut s = Vec::new();
        for (i, a) in model.agents().iter().enumerate() {
            e.push(problem.add_sym_var(a.state_dim, VarRole::Ellipsoid, format!("E{i}")));
        }
        for (i, a) in model.agents().iter().enumerate() {
            y.push(problem.add_var(a.input_dim, a.neighborhood.dim, false, VarRole::Gain, format!("Y{i}")));
        }
        for (r, a) in model.agents().iter().enumerate() {
            let blocks = a
                .neighborhood
                .members
                .iter()
                .map(|&j| problem.add_sym_var(model.agent(j).state_dim, VarRole::Coupling, format!("S{r}[{j}]")))
                .collect();
            s.push(blocks);
        }
        Self { e, y, s }
    }

    /// `E_{N_i} = blkdiag(E_j : j ∈ N̄_i)`.
    pub fn e_n(&self, model: &NetworkModel, i: usize) -> AffMatrix {
        let blocks: Vec<_> = model.agent(i).neighborhood.members.iter().map(|&j| self.e[j].expr()).collect();
        AffMatrix::block_diag(&blocks)
    }

    /// `E_i` placed at agent `i`'s slot of the neighborhood, zero elsewhere.
    pub fn e_bar(&self, model: &NetworkModel, i: usize) -> AffMatrix {
        let nb = &model.agent(i).neighborhood;
        let blocks: Vec<_> = nb
            .members
            .iter()
            .map(|&j| {
                let d = model.agent(j).state_dim;
                if j == i {
                    self.e[j].expr()
                } else {
                    AffMatrix::zeros(d, d)
                }
            })
            .collect();
        AffMatrix::block_diag(&blocks)
    }

    pub fn s_n(&self, i: usize) -> AffMatrix {
        let blocks: Vec<_> = self.s[i].iter().map(MatrixVar::expr).collect();
        AffMatrix::block_diag(&blocks)
    }

    /// Adds every model-derived constraint of the structured program.
    pub fn add_constraints(&self, problem: &mut SdpProblem, model: &NetworkModel, opts: &StructuredOptions) -> Result<()> {
        let dims: Vec<usize> = model.agents().iter().map(|a| a.state_dim).collect();
        let neighborhoods: Vec<_> = model.agents().iter().map(|a| a.neighborhood.clone()).collect();
        let couplings: Vec<Option<AffMatrix>> = (0..model.num_agents()).map(|r| Some(self.s_n(r))).collect();
        let shrink = 1.0 - opts.backoff;
        for (i, agent) in model.agents().iter().enumerate() {
            let e_i = self.e[i].expr();
            let e_n = self.e_n(model, i);
            let e_bar = self.e_bar(model, i);
            let y = self.y[i].expr();
            problem.add_lmi(strict_pd(&e_i, opts.eps, format!("E{i} > 0"))?);

            let mut seen: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
            for (v, theta) in agent.vertices.iter().enumerate() {
                let ab = agent.dynamics.eval_unchecked(theta);
                if seen.contains(&ab) {
                    continue;
                }
                let terms = InvarianceTerms {
                    e_i: &e_i,
                    e_n: &e_n,
                    e_bar: &e_bar,
                    s_n: couplings[i].as_ref().expect("declared above"),
                    y: &y,
                    a_n: &ab.0,
                    b: &ab.1,
                    decay: 1.0 - opts.contraction,
                };
                problem.add_lmi(invariance_block(&terms, format!("invariance agent {i} vertex {v}"))?);
                seen.push(ab);
            }

            problem.add_lmi(coupling_block(i, &neighborhoods, &couplings, &dims, format!("coupling agent {i}"))?);

            let xs = agent.state_set.normalized();
            for l in 0..xs.rows() {
                let row: Vec<f64> = xs.matrix.row(l).iter().copied().collect();
                problem.add_lmi(ellipsoid_in_halfspace(&e_n, &row, shrink, format!("state agent {i} row {l}"))?);
            }
            let us = agent.input_set.normalized();
            for l in 0..us.rows() {
                let row: Vec<f64> = us.matrix.row(l).iter().copied().collect();
                problem.add_lmi(input_row_containment(&y, &e_n, &row, shrink, format!("input agent {i} row {l}"))?);
            }
        }
        Ok(())
    }

    /// Numerical values of `E_i`, `Y_i`, `K_i = Y_i E_{N_i}⁻¹` and the coupling blocks.
    pub fn extract(&self, model: &NetworkModel, result: &SolveResult) -> Result<StructuredSolution> {
        let e: Vec<DMatrix<f64>> = self.e.iter().map(|v| result.value(v)).collect();
        let y: Vec<DMatrix<f64>> = self.y.iter().map(|v| result.value(v)).collect();
        let s = self.s.iter().map(|bl| bl.iter().map(|v| result.value(v)).collect()).collect();
        let mut p = Vec::with_capacity(e.len());
        for ei in &e {
            p.push(spd_inverse(ei).ok_or_else(|| Error::Solver("ellipsoid matrix is singular".into()))?);
        }
        let mut k = Vec::with_capacity(e.len());
        for (i, yi) in y.iter().enumerate() {
            let e_n = self.e_n(model, i).eval(&result.values);
            k.push(yi * spd_inverse(&e_n).ok_or_else(|| Error::Solver(format!("E_N{i} is singular")))?);
        }
        Ok(StructuredSolution { e, p, y, k, s })
    }
}

/// Solved values of the structured program.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSolution {
    pub e: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub y: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    pub s: Vec<Vec<DMatrix<f64>>>,
}
